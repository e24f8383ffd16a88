pub mod dsgd;
pub mod effnn;
pub mod fit_decay;
pub mod lrplan;
pub mod topology;
pub mod toyrate;

use gossiplab::topology::WeightScheme;

use crate::config::Params;
use crate::error::CliResult;

/// What a command found besides its output files.
#[derive(Debug, Default)]
pub struct Outcome {
    pub warnings: Vec<String>,
    /// Failed verification checks; any entry makes the exit code 4.
    pub failures: Vec<String>,
}

fn scheme(params: &Params, default: &str) -> CliResult<WeightScheme> {
    Ok(params.string("scheme", default)?.parse()?)
}
