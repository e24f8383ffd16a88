use gossiplab::effnn::fit_decay;
use gossiplab::io::read_matrix_csv;
use gossiplab::topology::GossipMatrix;

use super::{scheme, Outcome};
use crate::config::Params;
use crate::error::{CliError, CliResult};
use crate::graphs::parse_graph;
use crate::output::{OutDir, Report};

pub fn run(params: &Params, out: &OutDir) -> CliResult<Outcome> {
    let cov = read_matrix_csv::<f64>(params.require("covariance")?)?;
    let w = match params.opt::<String>("gossip")? {
        Some(path) => GossipMatrix::from_dense(read_matrix_csv(path)?)?,
        None => {
            let spec = params.opt::<String>("topology")?.ok_or_else(|| {
                CliError::config("give either gossip (matrix CSV) or topology (graph spec)")
            })?;
            parse_graph(
                &spec,
                scheme(params, "metropolis")?,
                params.flag("lazy", false)?,
            )?
            .matrix()?
            .clone()
        }
    };
    let fit = fit_decay(&cov, &w)?;
    let mut report = Report::default();
    report.float("gamma", fit.gamma);
    report.float("objective", fit.objective);
    report.line("identifiable", fit.identifiable);
    out.write("fit.txt", &report.finish())?;
    let mut outcome = Outcome::default();
    if !fit.identifiable {
        outcome
            .warnings
            .push("decay is not identifiable for this gossip matrix".into());
    }
    Ok(outcome)
}
