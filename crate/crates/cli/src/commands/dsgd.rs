use std::path::Path;

use gossiplab::dsgdsim::{
    beta_for, fixed_point, hetero_constants, make_het_quadratic, random_start, run_dsgd_from,
    trajectory_summary, verify_distance_bound, verify_monotonicity, verify_theorem1,
    worker_covariance, HetQuadProblem,
};
use gossiplab::effnn::fit_decay;
use gossiplab::io::matrix_to_csv;
use gossiplab::lrplan::lr_max_theorem1;
use gossiplab::spectral::neighborhood_matrix;

use super::{scheme, Outcome};
use crate::config::Params;
use crate::error::{CliError, CliResult};
use crate::graphs::parse_graph;
use crate::output::{f, Csv, OutDir, Report};

const CHECKS: [&str; 5] = [
    "theorem1",
    "distance",
    "hetero",
    "monotonicity",
    "covariance",
];

pub fn run(params: &Params, seed: u64, out: &OutDir) -> CliResult<Outcome> {
    let graph = parse_graph(
        &params.string("topology", "ring-8")?,
        scheme(params, "metropolis")?,
        params.flag("lazy", true)?,
    )?;
    let w = graph.matrix()?.clone();
    let problem = match params.opt::<String>("problem")? {
        Some(dir) => HetQuadProblem::read_bundle(Path::new(&dir))?,
        None => make_het_quadratic(
            w.n(),
            params.get("d", 3usize)?,
            params.get("hetero", 0.5f64)?,
            params.get("noise", 0.3f64)?,
            params.get("problem_seed", seed)?,
        )?
        .with_hessian_sampling(params.get("hessian_keep_prob", 1.0f64)?)?,
    };
    if problem.n != w.n() {
        return Err(CliError::config(format!(
            "problem has {} workers, graph has {}",
            problem.n,
            w.n()
        )));
    }
    let gamma = params.get("gamma", 0.5f64)?;
    let nm = neighborhood_matrix(&w, gamma)?;
    let omega = params.get("omega", 1.0 / nm.n_eff)?;
    let cap = match beta_for(&w, gamma) {
        Ok(beta) => Some(lr_max_theorem1(
            problem.zeta,
            problem.l,
            nm.n_eff,
            beta,
            omega,
        )),
        Err(_) => None,
    };
    let eta = match (params.opt::<f64>("eta")?, cap) {
        (Some(eta), _) => eta,
        (None, Some(cap)) => cap * params.get("eta_scale", 1.0f64)?,
        (None, None) => {
            return Err(CliError::config(
                "no admissible step size for this graph; set eta explicitly",
            ));
        }
    };
    let steps = params.get("steps", 50usize)?;
    let runs = params.get("runs", 500usize)?;
    let checks = params.list("checks", "theorem1,hetero,monotonicity")?;
    if let Some(bad) = checks.iter().find(|c| !CHECKS.contains(&c.as_str())) {
        return Err(CliError::config(format!(
            "unknown check {bad:?}; known: {}",
            CHECKS.join(", ")
        )));
    }
    let enabled = |name: &str| checks.iter().any(|c| c == name);

    problem.write_bundle(&out.path("problem"))?;
    let mut outcome = Outcome::default();
    let mut report = Report::default();
    report.line("topology", &graph.label);
    report.line("n", problem.n);
    report.line("d", problem.d);
    report.float("mu", problem.mu);
    report.float("l", problem.l);
    report.float("zeta", problem.zeta);
    report.float("gamma", gamma);
    report.float("omega", omega);
    report.float("n_eff", nm.n_eff);
    report.float("eta", eta);
    if let Some(cap) = cap {
        report.float("eta_cap", cap);
    }

    // reference trajectory from the seeded random start
    let fp = fixed_point(&problem, &w, eta)?;
    report.float("fixed_point_residual", fp.residual);
    let x0 = random_start(&problem, seed);
    let traj = run_dsgd_from(&problem, &graph.schedule, eta, steps, &x0, seed)?;
    if let Some(t) = traj.diverged_at {
        outcome
            .warnings
            .push(format!("reference trajectory diverged at step {t}"));
    }
    let rows = trajectory_summary(&problem, &traj, &fp, &nm.m, omega)?;
    let mut csv = Csv::new(&[
        "t",
        "lyapunov",
        "dist_to_opt",
        "dist_to_fixed_point",
        "consensus_error",
    ]);
    for r in &rows {
        csv.row(&[
            r.t.to_string(),
            f(r.lyapunov),
            f(r.dist_to_opt),
            f(r.dist_to_fixed_point),
            f(r.consensus_error),
        ]);
    }
    out.write("trajectory.csv", &csv.finish())?;

    if problem.noise_level == 0.0 && problem.hessian_keep_prob == 1.0 {
        // deterministic run: every step must contract by 1 - ημ
        let bound = 1.0 - eta * problem.mu;
        let worst = rows
            .windows(2)
            .filter(|p| p[0].lyapunov > 1e-200)
            .map(|p| p[1].lyapunov / p[0].lyapunov)
            .fold(0.0f64, f64::max);
        report.float("max_step_ratio", worst);
        report.float("contraction_bound", bound);
        let ok = worst <= bound * (1.0 + 1e-9);
        report.line("linear_convergence", if ok { "pass" } else { "fail" });
        if !ok {
            outcome.failures.push(format!(
                "noiseless step ratio {worst} above 1 - ημ = {bound}"
            ));
        }
    }

    if enabled("theorem1") {
        let rep = verify_theorem1(&problem, &w, gamma, omega, eta, steps, runs, seed)?;
        let mut csv = Csv::new(&["t", "lyapunov", "mean_next", "std_error", "bound", "passed"]);
        for r in &rep.rows {
            csv.row(&[
                r.t.to_string(),
                f(r.lyapunov),
                f(r.mean_next),
                f(r.std_error),
                f(r.bound),
                r.passed.to_string(),
            ]);
        }
        out.write("theorem1.csv", &csv.finish())?;
        report.float("sigma_m2", rep.sigma_m2);
        report.line("theorem1", if rep.passed { "pass" } else { "fail" });
        if !rep.passed {
            outcome
                .failures
                .push("one-step descent inequality violated".into());
        }
    }
    if enabled("distance") {
        let rep = verify_distance_bound(&problem, &w, gamma, omega, eta, steps, runs, seed)?;
        let mut csv = Csv::new(&["t", "mean_distance", "std_error", "bound", "passed"]);
        for r in &rep.rows {
            csv.row(&[
                r.t.to_string(),
                f(r.mean_distance),
                f(r.std_error),
                f(r.bound),
                r.passed.to_string(),
            ]);
        }
        out.write("distance.csv", &csv.finish())?;
        report.line("distance", if rep.passed { "pass" } else { "fail" });
        if !rep.passed {
            outcome.failures.push("distance bound violated".into());
        }
    }
    let eta_grid = [0.01, 0.02, 0.05, 0.1, 0.2];
    if enabled("hetero") {
        let c = hetero_constants(&problem, &w, &eta_grid)?;
        let gap = graph.spectrum()?.spectral_gap;
        report.float("p", c.p);
        report.float("delta2_w", c.delta2_w);
        report.float("kappa", c.kappa);
        report.float("spectral_gap", gap);
        report.line("hetero_degenerate", c.degenerate);
        let ok = c.p >= gap * (1.0 - 1e-10);
        report.line("p_at_least_gap", if ok { "pass" } else { "fail" });
        if !ok {
            outcome
                .failures
                .push(format!("p = {} below the spectral gap {gap}", c.p));
        }
    }
    if enabled("monotonicity") {
        let rep = verify_monotonicity(&problem, &w, &eta_grid)?;
        let mut csv = Csv::new(&["eta", "pinv_norm_sq"]);
        for (e, v) in rep.etas.iter().zip(&rep.values) {
            csv.row(&[f(*e), f(*v)]);
        }
        out.write("monotonicity.csv", &csv.finish())?;
        report.line("monotonicity", if rep.monotone { "pass" } else { "fail" });
        if !rep.monotone {
            outcome
                .failures
                .push("heterogeneity norm increases with η".into());
        }
    }
    if enabled("covariance") {
        let cov_steps = params.get("covariance_steps", 300usize)?;
        let cov_runs = params.get("covariance_runs", 4000usize)?;
        let cov = worker_covariance(&problem, &graph.schedule, eta, cov_steps, cov_runs, seed)?;
        out.write("covariance.csv", &matrix_to_csv(&cov))?;
        let fit = fit_decay(&cov, &w)?;
        report.float("fitted_gamma", fit.gamma);
        report.float("fit_objective", fit.objective);
        report.line("fit_identifiable", fit.identifiable);
    }
    out.write("report.txt", &report.finish())?;
    Ok(outcome)
}
