use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use super::Topology;
use crate::{Error, Real, Result};

/// Recipe for turning a graph into averaging weights.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum WeightScheme {
    /// `w_ij = 1 / (1 + max(deg_i, deg_j))` on edges; works on any graph.
    #[default]
    Metropolis,
    /// `w_ij = 1 / (deg + 1)` on edges and diagonal; regular graphs only.
    UniformNeighbor,
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WeightScheme::Metropolis => "metropolis",
            WeightScheme::UniformNeighbor => "uniform-neighbor",
        })
    }
}

impl FromStr for WeightScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "metropolis" => Ok(WeightScheme::Metropolis),
            "uniform-neighbor" | "uniform" => Ok(WeightScheme::UniformNeighbor),
            other => Err(Error::invalid(format!("unknown weight scheme {other:?}"))),
        }
    }
}

/// Symmetric doubly stochastic averaging matrix `W`.
///
/// The dense matrix is the source of truth; a row-sparse copy of the nonzero
/// pattern is kept for the simulators, which apply `W` millions of times.
#[derive(Clone, Debug)]
pub struct GossipMatrix<T: Real> {
    dense: DMatrix<T>,
    sparse: Vec<Vec<(usize, T)>>,
}

impl<T: Real> PartialEq for GossipMatrix<T> {
    fn eq(&self, other: &Self) -> bool {
        self.dense == other.dense
    }
}

impl<T: Real> GossipMatrix<T> {
    pub fn from_topology(topology: &Topology, scheme: WeightScheme) -> Result<Self> {
        let n = topology.n();
        let deg = topology.degrees();
        let mut w = DMatrix::<T>::zeros(n, n);
        match scheme {
            WeightScheme::Metropolis => {
                for &(i, j) in topology.edges() {
                    let wij = T::one() / T::from_usize_lossy(1 + deg[i].max(deg[j]));
                    w[(i, j)] = wij;
                    w[(j, i)] = wij;
                }
                for i in 0..n {
                    let off: T = (0..n)
                        .filter(|&j| j != i)
                        .fold(T::zero(), |s, j| s + w[(i, j)]);
                    w[(i, i)] = T::one() - off;
                }
            }
            WeightScheme::UniformNeighbor => {
                if !topology.is_regular() {
                    let min = deg.iter().copied().min().unwrap_or(0);
                    let max = deg.iter().copied().max().unwrap_or(0);
                    return Err(Error::IrregularGraph { min, max });
                }
                let wij = T::one() / T::from_usize_lossy(deg[0] + 1);
                for &(i, j) in topology.edges() {
                    w[(i, j)] = wij;
                    w[(j, i)] = wij;
                }
                for i in 0..n {
                    w[(i, i)] = wij;
                }
            }
        }
        Self::from_dense(w)
    }

    /// Wraps a dense matrix after checking symmetry, row sums and signs.
    pub fn from_dense(w: DMatrix<T>) -> Result<Self> {
        let gm = Self::new_unchecked(w);
        gm.validate()?;
        Ok(gm)
    }

    pub(crate) fn new_unchecked(dense: DMatrix<T>) -> Self {
        let n = dense.nrows();
        let sparse = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| dense[(i, j)] != T::zero())
                    .map(|j| (j, dense[(i, j)]))
                    .collect()
            })
            .collect();
        Self { dense, sparse }
    }

    pub fn identity(n: usize) -> Self {
        Self::new_unchecked(DMatrix::identity(n, n))
    }

    /// Checks the gossip-matrix invariants at tolerance ~1e-12.
    pub fn validate(&self) -> Result<()> {
        let w = &self.dense;
        let n = w.nrows();
        if n == 0 || w.ncols() != n {
            return Err(Error::InvalidGossipMatrix(format!(
                "expected a non-empty square matrix, got {}x{}",
                w.nrows(),
                w.ncols()
            )));
        }
        let tol = T::tol(1e-12);
        for i in 0..n {
            let mut row_sum = T::zero();
            for j in 0..n {
                let wij = w[(i, j)];
                if !wij.is_finite_value() || wij < -tol {
                    return Err(Error::InvalidGossipMatrix(format!(
                        "entry ({i},{j}) = {wij} is negative or not finite"
                    )));
                }
                if (wij - w[(j, i)]).abs() > tol {
                    return Err(Error::InvalidGossipMatrix(format!(
                        "not symmetric at ({i},{j})"
                    )));
                }
                row_sum += wij;
            }
            if (row_sum - T::one()).abs() > tol * T::from_usize_lossy(n.max(1)) {
                return Err(Error::InvalidGossipMatrix(format!(
                    "row {i} sums to {row_sum}"
                )));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.dense.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.dense
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.dense
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.dense[(i, j)]
    }

    /// `L_W = I - W`.
    pub fn laplacian(&self) -> DMatrix<T> {
        DMatrix::identity(self.n(), self.n()) - &self.dense
    }

    /// `(I + W) / 2`, which moves every eigenvalue into `[0, 1]`.
    pub fn lazy(&self) -> Self {
        let half = T::lit(0.5);
        let n = self.n();
        Self::new_unchecked((DMatrix::identity(n, n) + &self.dense) * half)
    }

    /// Whether every off-diagonal nonzero is an edge of `topology`.
    pub fn respects(&self, topology: &Topology) -> bool {
        self.sparse
            .iter()
            .enumerate()
            .all(|(i, row)| row.iter().all(|&(j, _)| i == j || topology.has_edge(i, j)))
    }

    /// `out = W x` using the sparse pattern.
    pub fn apply_into(&self, x: &[T], out: &mut [T]) {
        for (o, row) in out.iter_mut().zip(&self.sparse) {
            *o = row.iter().fold(T::zero(), |s, &(j, wij)| s + wij * x[j]);
        }
    }

    pub fn apply(&self, x: &DVector<T>) -> DVector<T> {
        let mut out = DVector::zeros(x.len());
        self.apply_into(x.as_slice(), out.as_mut_slice());
        out
    }

    /// `W X` where row `i` of `X` is worker `i`'s parameter vector.
    pub fn mix_rows(&self, x: &DMatrix<T>) -> DMatrix<T> {
        let (n, d) = x.shape();
        DMatrix::from_fn(n, d, |i, k| {
            self.sparse[i]
                .iter()
                .fold(T::zero(), |s, &(j, wij)| s + wij * x[(j, k)])
        })
    }

    pub fn to_csv(&self) -> String {
        crate::io::matrix_to_csv(&self.dense)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        Self::from_dense(crate::io::parse_matrix_csv(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::TopologyKind;
    use approx::assert_abs_diff_eq;

    fn all_kinds(n: usize) -> Vec<Topology> {
        let mut v = vec![
            Topology::build(TopologyKind::Ring, n).unwrap(),
            Topology::build(TopologyKind::Chain, n).unwrap(),
            Topology::build(TopologyKind::Star, n).unwrap(),
            Topology::build(TopologyKind::BinaryTree, n).unwrap(),
            Topology::build(TopologyKind::FullyConnected, n).unwrap(),
            Topology::build(TopologyKind::Disconnected, n).unwrap(),
        ];
        if n.is_power_of_two() {
            v.push(Topology::build(TopologyKind::Hypercube, n).unwrap());
        }
        if n == 16 {
            v.push(Topology::torus(4, 4).unwrap());
        }
        v
    }

    #[test]
    fn every_kind_and_scheme_passes_invariants() {
        for n in [1, 2, 5, 8, 16] {
            for topo in all_kinds(n) {
                for scheme in [WeightScheme::Metropolis, WeightScheme::UniformNeighbor] {
                    match GossipMatrix::<f64>::from_topology(&topo, scheme) {
                        Ok(w) => {
                            w.validate().unwrap();
                            assert!(w.respects(&topo), "{} {scheme}", topo.kind());
                        }
                        Err(Error::IrregularGraph { .. }) => {
                            assert_eq!(scheme, WeightScheme::UniformNeighbor);
                            assert!(!topo.is_regular());
                        }
                        Err(e) => panic!("{e}"),
                    }
                }
            }
        }
    }

    #[test]
    fn ring_uniform_weights_are_one_third() {
        let w = GossipMatrix::<f64>::from_topology(
            &Topology::ring(32).unwrap(),
            WeightScheme::UniformNeighbor,
        )
        .unwrap();
        for i in 0..32 {
            for j in 0..32 {
                let d = (i as isize - j as isize).rem_euclid(32);
                let expected = if d == 0 || d == 1 || d == 31 {
                    1.0 / 3.0
                } else {
                    0.0
                };
                assert_eq!(w.get(i, j), expected);
            }
        }
    }

    #[test]
    fn star_metropolis_by_hand() {
        let w = GossipMatrix::<f64>::from_topology(
            &Topology::build(TopologyKind::Star, 32).unwrap(),
            WeightScheme::Metropolis,
        )
        .unwrap();
        assert_abs_diff_eq!(w.get(0, 0), 1.0 / 32.0, epsilon = 1e-15);
        for leaf in 1..32 {
            assert_eq!(w.get(0, leaf), 1.0 / 32.0);
            assert_abs_diff_eq!(w.get(leaf, leaf), 31.0 / 32.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn fully_connected_metropolis_is_uniform() {
        let w = GossipMatrix::<f64>::from_topology(
            &Topology::fully_connected(7).unwrap(),
            WeightScheme::Metropolis,
        )
        .unwrap();
        // diagonal is 1 - 6/7 which rounds; off-diagonal is exact
        for i in 0..7 {
            for j in 0..7 {
                assert_abs_diff_eq!(w.get(i, j), 1.0 / 7.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn disconnected_is_identity() {
        let w = GossipMatrix::<f64>::from_topology(
            &Topology::build(TopologyKind::Disconnected, 6).unwrap(),
            WeightScheme::Metropolis,
        )
        .unwrap();
        assert_eq!(w, GossipMatrix::identity(6));
    }

    #[test]
    fn lazy_examples() {
        assert_eq!(
            GossipMatrix::<f64>::identity(4).lazy(),
            GossipMatrix::identity(4)
        );
        let fc2 = GossipMatrix::<f64>::from_topology(
            &Topology::fully_connected(2).unwrap(),
            WeightScheme::Metropolis,
        )
        .unwrap();
        let l = fc2.lazy();
        assert_eq!(
            l.matrix(),
            &DMatrix::from_row_slice(2, 2, &[0.75, 0.25, 0.25, 0.75])
        );
    }

    #[test]
    fn rejects_bad_matrices() {
        let asym = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.4, 0.6]);
        assert!(GossipMatrix::from_dense(asym).is_err());
        let neg = DMatrix::from_row_slice(2, 2, &[1.5, -0.5, -0.5, 1.5]);
        assert!(GossipMatrix::from_dense(neg).is_err());
        let subst = DMatrix::from_row_slice(2, 2, &[0.4, 0.5, 0.5, 0.4]);
        assert!(GossipMatrix::from_dense(subst).is_err());
    }

    #[test]
    fn irregular_uniform_is_rejected() {
        let star = Topology::build(TopologyKind::Star, 4).unwrap();
        assert!(matches!(
            GossipMatrix::<f64>::from_topology(&star, WeightScheme::UniformNeighbor),
            Err(Error::IrregularGraph { min: 1, max: 3 })
        ));
    }

    #[test]
    fn csv_roundtrip_and_sparse_apply() {
        let w = GossipMatrix::<f64>::from_topology(
            &Topology::build(TopologyKind::BinaryTree, 9).unwrap(),
            WeightScheme::Metropolis,
        )
        .unwrap();
        let back = GossipMatrix::<f64>::from_csv(&w.to_csv()).unwrap();
        assert_eq!(w, back);
        let x = DVector::from_fn(9, |i, _| (i as f64).sin());
        let dense = w.matrix() * &x;
        assert_abs_diff_eq!(w.apply(&x), dense, epsilon = 1e-15);
    }

    #[test]
    fn works_in_single_precision() {
        let w = GossipMatrix::<f32>::from_topology(
            &Topology::torus(3, 3).unwrap(),
            WeightScheme::Metropolis,
        )
        .unwrap();
        assert!((w.get(0, 1) - 0.2).abs() < 1e-7);
    }
}
