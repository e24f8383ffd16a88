use gossiplab::spectral::{fit_spectral_dimension_auto, spectrum};
use gossiplab::topology::{GossipMatrix, Topology};

use super::{scheme, Outcome};
use crate::config::Params;
use crate::error::{CliError, CliResult};
use crate::graphs::build_topology;
use crate::output::OutDir;

pub fn run(params: &Params, out: &OutDir) -> CliResult<Outcome> {
    let topology = match params.opt::<String>("edges")? {
        Some(path) => {
            let text = std::fs::read_to_string(&path).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            Topology::parse_edge_list(&text, params.opt::<usize>("n")?)?
        }
        None => {
            let kind = params.string("kind", "ring")?;
            let n = params.get("n", 32usize)?;
            build_topology(&kind, n, params.opt::<usize>("rows")?)?
        }
    };
    let w = GossipMatrix::<f64>::from_topology(&topology, scheme(params, "metropolis")?)?;
    let w = if params.flag("lazy", false)? {
        w.lazy()
    } else {
        w
    };
    let spec = spectrum(&w)?;

    out.write("gossip.csv", &w.to_csv())?;
    out.write("spectrum.csv", &spec.to_csv())?;
    let mut summary = format!("kind={}\n", topology.kind());
    summary.push_str(&spec.summary_lines());
    let mut outcome = Outcome::default();
    if spec.unit_multiplicity() == 1 {
        match fit_spectral_dimension_auto(&spec, None) {
            Ok(profile) => summary.push_str(&profile.to_key_values()),
            Err(e) => outcome
                .warnings
                .push(format!("no spectral-dimension fit: {e}")),
        }
    } else {
        outcome
            .warnings
            .push(format!("graph has {} components", spec.unit_multiplicity()));
    }
    out.write("spectrum.txt", &summary)?;
    Ok(outcome)
}
