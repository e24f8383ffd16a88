use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopologyKind {
    Ring,
    Chain,
    Torus2d { rows: usize, cols: usize },
    Hypercube,
    Star,
    BinaryTree,
    FullyConnected,
    Disconnected,
    Custom,
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopologyKind::Ring => f.write_str("ring"),
            TopologyKind::Chain => f.write_str("chain"),
            TopologyKind::Torus2d { rows, cols } => write!(f, "torus2d-{rows}x{cols}"),
            TopologyKind::Hypercube => f.write_str("hypercube"),
            TopologyKind::Star => f.write_str("star"),
            TopologyKind::BinaryTree => f.write_str("binary-tree"),
            TopologyKind::FullyConnected => f.write_str("fully-connected"),
            TopologyKind::Disconnected => f.write_str("disconnected"),
            TopologyKind::Custom => f.write_str("custom"),
        }
    }
}

/// Undirected communication graph over workers `0..n`.
///
/// Edges are stored once as `(i, j)` with `i < j`, sorted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Topology {
    kind: TopologyKind,
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl Topology {
    /// Canonical construction for a named kind.
    ///
    /// `Torus2d` carries its own factorization, which must multiply to `n`.
    /// `Custom` graphs come from [`Topology::from_edges`] instead.
    pub fn build(kind: TopologyKind, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("topology needs at least one worker"));
        }
        let edges: Vec<(usize, usize)> = match kind {
            TopologyKind::Ring => (0..n).map(|i| (i, (i + 1) % n)).collect(),
            TopologyKind::Chain => (1..n).map(|i| (i - 1, i)).collect(),
            TopologyKind::Torus2d { rows, cols } => {
                if rows == 0 || cols == 0 || rows * cols != n {
                    return Err(Error::DimensionMismatch(format!(
                        "torus {rows}x{cols} does not have {n} nodes"
                    )));
                }
                let id = |r: usize, c: usize| r * cols + c;
                let mut e = Vec::with_capacity(2 * n);
                for r in 0..rows {
                    for c in 0..cols {
                        e.push((id(r, c), id(r, (c + 1) % cols)));
                        e.push((id(r, c), id((r + 1) % rows, c)));
                    }
                }
                e
            }
            TopologyKind::Hypercube => {
                if !n.is_power_of_two() {
                    return Err(Error::DimensionMismatch(format!(
                        "hypercube needs a power of two, got {n}"
                    )));
                }
                let bits = n.trailing_zeros();
                (0..n)
                    .flat_map(|i| (0..bits).map(move |b| (i, i ^ (1 << b))))
                    .collect()
            }
            TopologyKind::Star => (1..n).map(|i| (0, i)).collect(),
            // heap order: parent of i is (i - 1) / 2
            TopologyKind::BinaryTree => (1..n).map(|i| ((i - 1) / 2, i)).collect(),
            TopologyKind::FullyConnected => (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .collect(),
            TopologyKind::Disconnected => Vec::new(),
            TopologyKind::Custom => {
                return Err(Error::invalid(
                    "custom topologies are built from an edge list",
                ))
            }
        };
        // wrap-around edges of tiny rings/tori collapse onto self-loops or duplicates
        let edges = edges.into_iter().filter(|&(i, j)| i != j);
        Ok(Self {
            kind,
            n,
            edges: normalize(edges),
        })
    }

    pub fn ring(n: usize) -> Result<Self> {
        Self::build(TopologyKind::Ring, n)
    }

    pub fn torus(rows: usize, cols: usize) -> Result<Self> {
        Self::build(TopologyKind::Torus2d { rows, cols }, rows * cols)
    }

    pub fn fully_connected(n: usize) -> Result<Self> {
        Self::build(TopologyKind::FullyConnected, n)
    }

    /// Arbitrary graph from an undirected edge list. Duplicates are merged.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("topology needs at least one worker"));
        }
        let edges: Vec<_> = edges.into_iter().collect();
        for &(i, j) in &edges {
            if i == j {
                return Err(Error::invalid(format!("self-loop on node {i}")));
            }
            if i >= n || j >= n {
                return Err(Error::invalid(format!("edge {i}-{j} outside 0..{n}")));
            }
        }
        Ok(Self {
            kind: TopologyKind::Custom,
            n,
            edges: normalize(edges),
        })
    }

    /// Parses `i j` lines (0-indexed). `#` starts a comment.
    ///
    /// Without an explicit `n`, the node count is one more than the largest index.
    pub fn parse_edge_list(text: &str, n: Option<usize>) -> Result<Self> {
        let mut edges = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |msg: String| Error::Parse {
                line: lineno + 1,
                msg,
            };
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 2 {
                return Err(parse_err(format!("expected \"i j\", got {line:?}")));
            }
            let i = toks[0]
                .parse::<usize>()
                .map_err(|e| parse_err(format!("{}: {e}", toks[0])))?;
            let j = toks[1]
                .parse::<usize>()
                .map_err(|e| parse_err(format!("{}: {e}", toks[1])))?;
            edges.push((i, j));
        }
        let inferred = edges.iter().map(|&(i, j)| i.max(j) + 1).max().unwrap_or(0);
        Self::from_edges(n.unwrap_or(inferred), edges)
    }

    pub fn kind(&self) -> TopologyKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        let key = (i.min(j), i.max(j));
        self.edges.binary_search(&key).is_ok()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(i, j) in &self.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    pub fn is_regular(&self) -> bool {
        let deg = self.degrees();
        deg.iter().all(|&d| d == deg[0])
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        adj
    }

    pub fn is_connected(&self) -> bool {
        let adj = self.neighbors();
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &u in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

fn normalize(edges: impl IntoIterator<Item = (usize, usize)>) -> Vec<(usize, usize)> {
    edges
        .into_iter()
        .map(|(i, j)| (i.min(j), i.max(j)))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// Largest divisor of `n` not exceeding `sqrt(n)`, giving the squarest torus.
pub fn squarest_rows(n: usize) -> usize {
    (1..=n)
        .take_while(|r| r * r <= n)
        .filter(|r| n.is_multiple_of(*r))
        .last()
        .unwrap_or(1)
}

impl FromStr for TopologyKind {
    type Err = Error;

    /// Accepts the kind names used on the command line; tori parse as
    /// `torus2d` (squarest factorization chosen later) or `torus2d-RxC`.
    fn from_str(s: &str) -> Result<Self> {
        let kind = match s {
            "ring" => TopologyKind::Ring,
            "chain" => TopologyKind::Chain,
            "torus2d" | "torus" => TopologyKind::Torus2d { rows: 0, cols: 0 },
            "hypercube" => TopologyKind::Hypercube,
            "star" => TopologyKind::Star,
            "binary-tree" => TopologyKind::BinaryTree,
            "fully-connected" => TopologyKind::FullyConnected,
            "disconnected" => TopologyKind::Disconnected,
            "custom" | "custom-edge-list" => TopologyKind::Custom,
            other => {
                if let Some(dims) = other.strip_prefix("torus2d-") {
                    let (r, c) = dims
                        .split_once('x')
                        .ok_or_else(|| Error::invalid(format!("bad torus dims {dims:?}")))?;
                    let rows = r
                        .parse()
                        .map_err(|_| Error::invalid(format!("bad rows {r:?}")))?;
                    let cols = c
                        .parse()
                        .map_err(|_| Error::invalid(format!("bad cols {c:?}")))?;
                    TopologyKind::Torus2d { rows, cols }
                } else {
                    return Err(Error::invalid(format!("unknown topology kind {other:?}")));
                }
            }
        };
        Ok(kind)
    }
}
