use gossiplab::quadrates::{optimal_lr_toy, rate_oracle, solve_rate, time_to_target, RateSolution};
use rayon::prelude::*;

use super::{scheme, Outcome};
use crate::config::Params;
use crate::error::CliResult;
use crate::graphs::{parse_graph, Graph};
use crate::output::{f, Csv, OutDir, Report};

const ORACLE_TOL: f64 = 1e-6;

pub fn run(params: &Params, out: &OutDir) -> CliResult<Outcome> {
    let specs = params.list("topologies", "solo-32,ring-32")?;
    let zeta = params.get("zeta", 12.0f64)?;
    let etas = params.floats("etas", "0.005:0.995:199")?;
    let scheme = scheme(params, "metropolis")?;
    let lazy = params.flag("lazy", false)?;
    let target = params.get("target", 1e-3f64)?;
    let oracle = params.flag("oracle", false)?;
    let oracle_iters = if oracle {
        params.get("oracle_iters", 1_000_000usize)?
    } else {
        0
    };

    let graphs = specs
        .iter()
        .map(|s| parse_graph(s, scheme, lazy))
        .collect::<CliResult<Vec<Graph>>>()?;

    let mut header = vec![
        "topology",
        "eta",
        "r",
        "converged",
        "gamma_implied",
        "time_to_target",
    ];
    if oracle {
        header.push("r_oracle");
    }
    let mut rates = Csv::new(&header);
    let mut optimum = Csv::new(&["topology", "eta_star", "r_star", "time_to_target"]);
    let mut report = Report::default();
    let mut worst_oracle = 0.0f64;
    for g in &graphs {
        let spec = g.spectrum()?;
        let w = g.matrix()?;
        let rows: Vec<(RateSolution<f64>, Option<f64>)> = etas
            .par_iter()
            .map(|&eta| {
                let sol = solve_rate(&spec, eta, zeta)?;
                let o = if oracle && sol.converged {
                    Some(rate_oracle(w, eta, zeta, oracle_iters)?)
                } else {
                    None
                };
                Ok((sol, o))
            })
            .collect::<CliResult<_>>()?;
        for (sol, o) in rows {
            let ttt = time_to_target(sol.r, target)
                .map(|t| t.to_string())
                .unwrap_or_default();
            let mut fields = vec![
                g.label.clone(),
                f(sol.eta),
                f(sol.r),
                sol.converged.to_string(),
                f(sol.gamma_implied),
                ttt,
            ];
            if oracle {
                fields.push(o.map(f).unwrap_or_default());
                if let Some(o) = o {
                    worst_oracle = worst_oracle.max((o - sol.r).abs());
                }
            }
            rates.row(&fields);
        }
        let (eta_star, r_star) = optimal_lr_toy(&spec, zeta)?;
        let ttt = time_to_target(r_star, target)
            .map(|t| t.to_string())
            .unwrap_or_default();
        optimum.row(&[g.label.clone(), f(eta_star), f(r_star), ttt]);
    }
    out.write("toyrate.csv", &rates.finish())?;
    out.write("optimum.csv", &optimum.finish())?;
    report.float("zeta", zeta);
    report.float("target", target);
    if oracle {
        report.float("max_oracle_deviation", worst_oracle);
    }
    out.write("summary.txt", &report.finish())?;
    let mut outcome = Outcome::default();
    if oracle && worst_oracle > ORACLE_TOL {
        outcome.failures.push(format!(
            "solver and oracle differ by {worst_oracle:e} (> {ORACLE_TOL:e})"
        ));
    }
    Ok(outcome)
}
