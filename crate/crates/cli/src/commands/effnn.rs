use gossiplab::effnn::{
    effnn_closed_form, effnn_monte_carlo, min_mc_steps, EffnnEstimate, EffnnRecord,
};
use rayon::prelude::*;

use super::{scheme, Outcome};
use crate::config::Params;
use crate::error::{CliError, CliResult};
use crate::graphs::{parse_graph, Graph};
use crate::output::{f, Csv, OutDir};

const DEFAULT_GAMMAS: &str = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,0.95,0.99";

#[derive(Clone, Copy, PartialEq)]
enum MethodChoice {
    Auto,
    ClosedForm,
    MonteCarlo,
}

pub fn run(params: &Params, seed: u64, out: &OutDir) -> CliResult<Outcome> {
    let specs = params.list("topologies", "ring-32")?;
    let gammas = params.floats("gammas", DEFAULT_GAMMAS)?;
    let scheme = scheme(params, "metropolis")?;
    let lazy = params.flag("lazy", false)?;
    let method = match params.string("method", "auto")?.as_str() {
        "auto" => MethodChoice::Auto,
        "closed-form" => MethodChoice::ClosedForm,
        "monte-carlo" => MethodChoice::MonteCarlo,
        other => return Err(CliError::config(format!("unknown method {other:?}"))),
    };
    let replicas = params.get("replicas", 10_000usize)?;
    let steps = params.opt::<usize>("steps")?;

    let graphs = specs
        .iter()
        .map(|s| parse_graph(s, scheme, lazy))
        .collect::<CliResult<Vec<Graph>>>()?;
    let mut csv = Csv::new(&["topology", "gamma", "value", "method", "std_error"]);
    let mut records: Vec<(String, EffnnRecord)> = Vec::new();
    for g in &graphs {
        let mc = match method {
            MethodChoice::Auto => !g.schedule.is_static(),
            MethodChoice::ClosedForm => {
                if !g.schedule.is_static() {
                    return Err(CliError::config(format!("{} has no closed form", g.label)));
                }
                false
            }
            MethodChoice::MonteCarlo => true,
        };
        let estimates: Vec<EffnnEstimate<f64>> = if mc {
            gammas
                .iter()
                .map(|&gamma| {
                    let steps = steps.unwrap_or_else(|| min_mc_steps(gamma));
                    Ok(effnn_monte_carlo(
                        &g.schedule,
                        gamma,
                        steps,
                        replicas,
                        seed,
                    )?)
                })
                .collect::<CliResult<_>>()?
        } else {
            let spec = g.spectrum()?;
            gammas
                .par_iter()
                .map(|&gamma| Ok(effnn_closed_form(&spec, gamma)?))
                .collect::<CliResult<_>>()?
        };
        for e in &estimates {
            let rec = e.record();
            csv.row(&[
                g.label.clone(),
                f(rec.gamma),
                f(rec.value),
                if mc { "monte-carlo" } else { "closed-form" }.to_owned(),
                rec.std_error.map(f).unwrap_or_default(),
            ]);
            if mc {
                records.push((g.label.clone(), rec));
            }
        }
    }
    out.write("effnn.csv", &csv.finish())?;
    if !records.is_empty() {
        let json: Vec<serde_json::Value> = records
            .into_iter()
            .map(|(label, rec)| {
                let mut v = serde_json::to_value(rec).expect("record serializes");
                v["topology"] = serde_json::Value::String(label);
                v
            })
            .collect();
        out.write_json("monte_carlo.json", &json)?;
    }
    Ok(Outcome::default())
}
