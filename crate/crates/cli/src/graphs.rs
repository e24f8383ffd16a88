//! Graph specs such as `ring-32`, `torus2d-4x8`, `exponential-16`, `solo-8`.

use gossiplab::spectral::{spectrum, SpectrumInfo};
use gossiplab::topology::{
    squarest_rows, GossipMatrix, GossipSchedule, Topology, TopologyKind, WeightScheme,
};

use crate::error::{CliError, CliResult};

pub struct Graph {
    pub label: String,
    pub schedule: GossipSchedule<f64>,
}

impl Graph {
    /// The static matrix, or a config error for time-varying schedules.
    pub fn matrix(&self) -> CliResult<&GossipMatrix<f64>> {
        match &self.schedule {
            GossipSchedule::Static(w) => Ok(w),
            _ => Err(CliError::config(format!(
                "{} is time-varying; a static graph is needed here",
                self.label
            ))),
        }
    }

    pub fn spectrum(&self) -> CliResult<SpectrumInfo<f64>> {
        Ok(spectrum(self.matrix()?)?)
    }
}

fn bad(spec: &str) -> CliError {
    CliError::config(format!(
        "bad graph spec {spec:?}; expected e.g. ring-32, torus2d-4x8, exponential-16, solo-8"
    ))
}

/// Builds a topology from a kind name and size. Tori without explicit
/// dimensions use `rows` when given, the squarest factorization otherwise.
pub fn build_topology(kind: &str, n: usize, rows: Option<usize>) -> CliResult<Topology> {
    let kind: TopologyKind = kind.parse()?;
    let kind = match kind {
        TopologyKind::Torus2d { rows: 0, .. } => {
            let r = rows.unwrap_or_else(|| squarest_rows(n));
            if r == 0 || !n.is_multiple_of(r) {
                return Err(CliError::config(format!("{r} rows do not divide n = {n}")));
            }
            TopologyKind::Torus2d {
                rows: r,
                cols: n / r,
            }
        }
        other => other,
    };
    Ok(Topology::build(kind, n)?)
}

pub fn parse_graph(spec: &str, scheme: WeightScheme, lazy: bool) -> CliResult<Graph> {
    let spec = spec.trim();
    let finish = |w: GossipMatrix<f64>| Graph {
        label: spec.to_owned(),
        schedule: GossipSchedule::Static(if lazy { w.lazy() } else { w }),
    };
    if let Some(dims) = spec.strip_prefix("torus2d-").filter(|d| d.contains('x')) {
        let (r, c) = dims.split_once('x').ok_or_else(|| bad(spec))?;
        let r: usize = r.parse().map_err(|_| bad(spec))?;
        let c: usize = c.parse().map_err(|_| bad(spec))?;
        let t = Topology::torus(r, c)?;
        return Ok(finish(GossipMatrix::from_topology(&t, scheme)?));
    }
    let (name, n) = spec.rsplit_once('-').ok_or_else(|| bad(spec))?;
    let n: usize = n.parse().map_err(|_| bad(spec))?;
    match name {
        "exponential" => Ok(Graph {
            label: spec.to_owned(),
            schedule: GossipSchedule::exponential(n)?,
        }),
        "solo" | "identity" => Ok(finish(GossipMatrix::identity(n))),
        kind => {
            let t = build_topology(kind, n, None)?;
            Ok(finish(GossipMatrix::from_topology(&t, scheme)?))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn specs() {
        let g = parse_graph("torus2d-4x8", WeightScheme::Metropolis, false).unwrap();
        assert_eq!(g.schedule.n(), 32);
        let g = parse_graph("fully-connected-5", WeightScheme::Metropolis, false).unwrap();
        assert!((g.matrix().unwrap().get(0, 1) - 0.2).abs() < 1e-15);
        assert!(
            parse_graph("exponential-16", WeightScheme::Metropolis, false)
                .unwrap()
                .matrix()
                .is_err()
        );
        assert_eq!(
            parse_graph("solo-3", WeightScheme::Metropolis, true)
                .unwrap()
                .matrix()
                .unwrap()
                .get(0, 0),
            1.0
        );
        assert!(parse_graph("ring", WeightScheme::Metropolis, false).is_err());
        assert!(parse_graph("blob-4", WeightScheme::Metropolis, false).is_err());
        assert_eq!(
            build_topology("torus2d", 30, Some(5)).unwrap().kind(),
            TopologyKind::Torus2d { rows: 5, cols: 6 }
        );
    }
}
