use gossiplab::lrplan::{
    comparison_rate_prior, final_rate_cor3, gamma_grid, lr_corollary1, lr_corollary2, lr_sweep,
    prior_work_lr, BetaMode, LrPlan, LrPlanRecord, RateInputs, RateTerms,
};
use gossiplab::spectral::{
    fit_spectral_dimension, fit_spectral_dimension_auto, SpectralProfile, SpectrumInfo,
};
use serde::Serialize;

use super::{scheme, Outcome};
use crate::config::Params;
use crate::error::{CliError, CliResult};
use crate::graphs::parse_graph;
use crate::output::{f, Csv, OutDir};

#[derive(Serialize)]
struct PlanOut {
    #[serde(flatten)]
    record: LrPlanRecord,
    closed_form_eta: Option<f64>,
    admissible: bool,
    warnings: Vec<String>,
}

impl PlanOut {
    fn of(plan: &LrPlan<f64>) -> Self {
        Self {
            record: plan.record(),
            closed_form_eta: plan.closed_form_eta,
            admissible: plan.is_admissible(),
            warnings: plan.warnings.clone(),
        }
    }
}

#[derive(Serialize)]
struct Plans {
    topology: String,
    d_s: f64,
    c_s: f64,
    corollary1: PlanOut,
    corollary2: Option<PlanOut>,
    prior_work_eta: f64,
}

fn profile(
    spec: &SpectrumInfo<f64>,
    d_s: &str,
    c_s: Option<f64>,
) -> CliResult<SpectralProfile<f64>> {
    let mut p = if d_s == "auto" {
        fit_spectral_dimension_auto(spec, None)?
    } else {
        let d: f64 = d_s
            .parse()
            .map_err(|e| CliError::config(format!("bad value for d_s: {d_s:?} ({e})")))?;
        fit_spectral_dimension(spec, d)?
    };
    if let Some(c) = c_s {
        p.inv_c_s = 1.0 / c;
    }
    Ok(p)
}

fn terms_row(csv: &mut Csv, label: &str, bound: &str, t: &RateTerms<f64>) {
    csv.row(&[
        label.to_owned(),
        bound.to_owned(),
        f(t.variance),
        f(t.heterogeneity),
        f(t.exponential),
    ]);
}

pub fn run(params: &Params, out: &OutDir) -> CliResult<Outcome> {
    let scheme = scheme(params, "metropolis")?;
    let lazy = params.flag("lazy", true)?;
    let graph = parse_graph(&params.string("topology", "ring-32")?, scheme, lazy)?;
    let zeta = params.get("zeta", 100.0f64)?;
    let l = params.get("l", 1.0f64)?;
    let mode = match params.string("beta_mode", "simplified")?.as_str() {
        "simplified" => BetaMode::Simplified,
        "exact" => BetaMode::Exact,
        other => return Err(CliError::config(format!("unknown beta_mode {other:?}"))),
    };
    let gammas = match params.raw("gammas") {
        Some(_) => params.floats("gammas", "")?,
        None => gamma_grid::<f64>(),
    };
    let d_s = params.string("d_s", "auto")?;
    let c_s = params.opt::<f64>("c_s")?;
    let mut outcome = Outcome::default();

    let spec = graph.spectrum()?;
    let sweep = lr_sweep(&spec, zeta, l, &gammas, mode)?;
    let mut csv = Csv::new(&["gamma", "n_eff", "beta", "eta", "binding"]);
    for p in &sweep {
        csv.row(&[
            f(p.gamma),
            f(p.n_eff),
            f(p.beta.as_f64()),
            f(p.eta),
            p.binding.to_string(),
        ]);
    }
    out.write("sweep.csv", &csv.finish())?;

    let prof = profile(&spec, &d_s, c_s)?;
    let cor1 = lr_corollary1(&spec, zeta, l, mode)?;
    let cor2 = if prof.d_s > 2.0 {
        Some(lr_corollary2(zeta, l, prof.d_s, prof.c_s(), None)?)
    } else {
        None
    };
    for plan in std::iter::once(&cor1).chain(cor2.as_ref()) {
        outcome.warnings.extend(plan.warnings.iter().cloned());
        if !plan.is_admissible() {
            outcome.failures.push(format!(
                "plan η = {} exceeds its cap {}",
                plan.eta,
                plan.cap()
            ));
        }
    }
    out.write_json(
        "plans.json",
        &Plans {
            topology: graph.label.clone(),
            d_s: prof.d_s,
            c_s: prof.c_s(),
            corollary1: PlanOut::of(&cor1),
            corollary2: cor2.as_ref().map(PlanOut::of),
            prior_work_eta: prior_work_lr(spec.spectral_gap, zeta, l),
        },
    )?;

    let horizon = params.get("horizon", 1e4f64)?;
    let mu = params.get("mu", 0.1f64)?;
    let sigma2 = params.get("sigma2", 1.0f64)?;
    let delta2 = params.get("delta2", 1.0f64)?;
    let mut rates = Csv::new(&[
        "topology",
        "bound",
        "variance",
        "heterogeneity",
        "exponential",
    ]);
    let mut steps = Csv::new(&["topology", "planned_eta", "prior_work_eta", "ratio"]);
    for label in params.list("compare", "ring-32,ring-128,ring-512")? {
        let g = parse_graph(&label, scheme, lazy)?;
        let s = g.spectrum()?;
        let p = profile(&s, &d_s, c_s)?;
        let inputs = RateInputs {
            horizon,
            mu,
            l,
            zeta,
            n: s.n(),
            sigma2,
        };
        // worst-case alignment: p = 1 - λ₂, Δ²_W = Δ² / (1 - λ₂)
        let gap = s.spectral_gap;
        let ours = final_rate_cor3(&inputs, p.d_s, p.c_s(), delta2 / gap, gap)?;
        outcome
            .warnings
            .extend(ours.terms.warnings.iter().map(|w| format!("{label}: {w}")));
        terms_row(&mut rates, &label, "neighborhood", &ours.terms);
        terms_row(
            &mut rates,
            &label,
            "spectral-gap",
            &comparison_rate_prior(&inputs, gap, delta2)?,
        );
        let plan = lr_corollary1(&s, zeta, l, mode)?;
        let prior = prior_work_lr(gap, zeta, l);
        steps.row(&[label.clone(), f(plan.eta), f(prior), f(plan.eta / prior)]);
    }
    out.write("rates.csv", &rates.finish())?;
    out.write("steps.csv", &steps.finish())?;
    outcome.warnings.sort();
    outcome.warnings.dedup();
    Ok(outcome)
}
