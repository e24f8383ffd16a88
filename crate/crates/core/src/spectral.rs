//! Eigenstructure of gossip matrices.
//!
//! Everything here is expressed through the eigenvalues of `W` itself rather
//! than a graph Laplacian: spectral gap `1 - λ₂`, spectral dimension (a bound
//! on the eigenvalue density near 1), the neighborhood matrix
//! `M(γ) = (1-γ) W² (I - γW²)⁻¹` and the constant `β(γ)` with
//! `β · (I - M) ≼ (I - W) W`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::topology::GossipMatrix;
use crate::{Error, Real, Result};

const EIGEN_MAX_ITER: usize = 10_000;

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumInfo<T: Real> {
    /// Sorted descending.
    pub eigenvalues: Vec<T>,
    pub spectral_gap: T,
    pub lambda2: T,
    pub lambda_min: T,
}

impl<T: Real> SpectrumInfo<T> {
    /// Builds the summary from raw eigenvalues, clamping to `[-1, 1]`.
    ///
    /// With a single worker there is no second eigenvalue; `λ₂` is reported
    /// as 0 so that the gap is 1 (one node is trivially averaged).
    pub fn from_eigenvalues(mut eigenvalues: Vec<T>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::invalid("empty spectrum"));
        }
        if eigenvalues.iter().any(|l| !l.is_finite_value()) {
            return Err(Error::numeric("non-finite eigenvalue"));
        }
        // the top eigenvalue of a stochastic W is exactly 1; undo solver rounding
        let snap = T::tol(1e-12);
        for l in &mut eigenvalues {
            *l = l.clamp(-T::one(), T::one());
            if T::one() - *l <= snap {
                *l = T::one();
            }
        }
        eigenvalues.sort_by(|a, b| b.partial_cmp(a).expect("finite eigenvalues"));
        let lambda2 = eigenvalues.get(1).copied().unwrap_or_else(T::zero);
        let lambda_min = *eigenvalues.last().expect("non-empty");
        Ok(Self {
            spectral_gap: T::one() - lambda2,
            lambda2,
            lambda_min,
            eigenvalues,
        })
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Number of eigenvalues within `1e-10` of 1, i.e. connected components.
    pub fn unit_multiplicity(&self) -> usize {
        let tol = T::tol(1e-10);
        self.eigenvalues
            .iter()
            .filter(|&&l| (T::one() - l).abs() <= tol)
            .count()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("eigenvalue\n");
        for l in &self.eigenvalues {
            s.push_str(&crate::io::fmt_float(l.as_f64()));
            s.push('\n');
        }
        s
    }

    pub fn summary_lines(&self) -> String {
        use crate::io::fmt_float;
        format!(
            "n={}\nspectral_gap={}\nlambda2={}\nlambda_min={}\n",
            self.n(),
            fmt_float(self.spectral_gap.as_f64()),
            fmt_float(self.lambda2.as_f64()),
            fmt_float(self.lambda_min.as_f64()),
        )
    }
}

fn symmetric_eigen<T: Real>(w: &DMatrix<T>) -> Result<SymmetricEigen<T, nalgebra::Dyn>> {
    let sym = (w + w.transpose()) * T::lit(0.5);
    SymmetricEigen::try_new(sym, T::default_epsilon(), EIGEN_MAX_ITER)
        .ok_or_else(|| Error::numeric("symmetric eigensolver did not converge"))
}

pub fn spectrum<T: Real>(w: &GossipMatrix<T>) -> Result<SpectrumInfo<T>> {
    let eig = symmetric_eigen(w.matrix())?;
    SpectrumInfo::from_eigenvalues(eig.eigenvalues.iter().copied().collect())
}

/// Eigenvalues (descending, unclamped) with matching orthonormal eigenvectors
/// as columns.
pub fn eigenpairs<T: Real>(w: &GossipMatrix<T>) -> Result<(Vec<T>, DMatrix<T>)> {
    let eig = symmetric_eigen(w.matrix())?;
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("finite eigenvalues")
    });
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok((values, vectors))
}

/// `β(γ)`, or the marker that the constraint it feeds is vacuous.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Beta<T> {
    Finite(T),
    /// `L_M = 0` (no eigenvalue other than 1): any `β` works.
    Unbounded,
}

impl<T: Real> Beta<T> {
    pub fn finite(self) -> Option<T> {
        match self {
            Beta::Finite(b) => Some(b),
            Beta::Unbounded => None,
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Beta::Finite(b) => b.as_f64(),
            Beta::Unbounded => f64::INFINITY,
        }
    }
}

fn check_gamma<T: Real>(gamma: T) -> Result<()> {
    if !(gamma >= T::zero() && gamma < T::one()) {
        return Err(Error::invalid(format!("decay γ = {gamma} outside [0, 1)")));
    }
    Ok(())
}

/// Tightest `β(γ)`: the minimum of `λ(1 - γλ²) / (1 + λ)` over eigenvalues `λ ≠ 1`.
///
/// Fails with [`Error::DegenerateSpectrum`] when the minimum is not positive
/// (some eigenvalue `≤ 0`); `lazy(W)` always fixes that.
pub fn beta_exact<T: Real>(spectrum: &SpectrumInfo<T>, gamma: T) -> Result<Beta<T>> {
    check_gamma(gamma)?;
    let tol = T::tol(1e-10);
    let mut best: Option<T> = None;
    for &l in &spectrum.eigenvalues {
        if (T::one() - l).abs() <= tol {
            continue;
        }
        let one_plus = T::one() + l;
        let value = if one_plus <= tol {
            -T::one()
        } else {
            l * (T::one() - gamma * l * l) / one_plus
        };
        best = Some(match best {
            Some(b) if b <= value => b,
            _ => value,
        });
    }
    match best {
        None => Ok(Beta::Unbounded),
        Some(b) if b > T::tol(1e-12) => Ok(Beta::Finite(b)),
        Some(b) => Err(Error::DegenerateSpectrum(format!(
            "β(γ) = {b} ≤ 0 because W has an eigenvalue ≤ 0 (λ_min = {}); use lazy(W) = (I + W)/2",
            spectrum.lambda_min
        ))),
    }
}

/// `β(γ) = (1 - γλ₂) / 4`, valid when `λ_min(W) ≥ 1/2`.
pub fn beta_simplified<T: Real>(lambda2: T, gamma: T) -> T {
    (T::one() - gamma * lambda2) / T::lit(4.0)
}

/// `M(γ)` with its derived effective number of neighbors and `β(γ)`.
#[derive(Clone, Debug)]
pub struct NeighborhoodMatrix<T: Real> {
    pub gamma: T,
    pub m: DMatrix<T>,
    /// `1 / M_ii` when the diagonal is uniform, else `min_i 1 / M_ii`.
    pub n_eff: T,
    /// `None` when `W` has a nonpositive eigenvalue (see [`beta_exact`]).
    pub beta: Option<Beta<T>>,
    /// False when the diagonal of `M` is not constant; `n_eff` is then the
    /// conservative `min_i 1 / M_ii`.
    pub uniform_diagonal: bool,
}

impl<T: Real> NeighborhoodMatrix<T> {
    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    /// `L_M = I - M`.
    pub fn laplacian(&self) -> DMatrix<T> {
        DMatrix::identity(self.n(), self.n()) - &self.m
    }
}

/// Solves `(I - γW²) M = (1-γ) W²` directly.
pub fn neighborhood_matrix<T: Real>(
    w: &GossipMatrix<T>,
    gamma: T,
) -> Result<NeighborhoodMatrix<T>> {
    check_gamma(gamma)?;
    let n = w.n();
    let w2 = w.matrix() * w.matrix();
    let lhs = DMatrix::identity(n, n) - &w2 * gamma;
    let rhs = &w2 * (T::one() - gamma);
    let m = lhs
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::numeric("I - γW² is singular"))?;
    let m = (&m + m.transpose()) * T::lit(0.5);

    let diag: Vec<T> = (0..n).map(|i| m[(i, i)]).collect();
    let max_diag = diag.iter().copied().fold(T::zero(), T::max);
    let min_diag = diag.iter().copied().fold(max_diag, T::min);
    let uniform_diagonal = max_diag - min_diag <= T::tol(1e-10) * max_diag;
    let n_eff = if uniform_diagonal {
        T::one() / diag[0]
    } else {
        T::one() / max_diag
    };

    let beta = beta_exact(&spectrum(w)?, gamma).ok();
    Ok(NeighborhoodMatrix {
        gamma,
        m,
        n_eff,
        beta,
        uniform_diagonal,
    })
}

/// Eigenvalue-density bound `σ((λ, 1)) ≤ c_s⁻¹ (1 - λ)^{d_s/2}`.
///
/// The constant is stored as its inverse (the density prefactor), which is
/// finite even when no eigenvalue lies in `(0, 1)` and `c_s` is unbounded.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralProfile<T: Real> {
    pub d_s: T,
    /// `c_s⁻¹`, the smallest prefactor for which the bound holds.
    pub inv_c_s: T,
}

impl<T: Real> SpectralProfile<T> {
    /// The largest admissible `c_s` (infinite if no eigenvalue mass in `(0,1)`).
    pub fn c_s(&self) -> T {
        T::one() / self.inv_c_s
    }

    pub fn to_key_values(&self) -> String {
        use crate::io::fmt_float;
        format!(
            "d_s={}\nc_s={}\ninv_c_s={}\n",
            fmt_float(self.d_s.as_f64()),
            fmt_float(self.c_s().as_f64()),
            fmt_float(self.inv_c_s.as_f64()),
        )
    }
}

/// Default cap on `c_s⁻¹` used by [`fit_spectral_dimension_auto`]: `10 n`.
pub fn default_density_cap<T: Real>(n: usize) -> T {
    T::from_usize_lossy(10 * n)
}

/// Tightest constant for a candidate dimension.
///
/// The counting measure excludes the eigenvalue at 1. For `λ` just below an
/// eigenvalue level `v`, `σ((λ,1))` counts every eigenvalue `≥ v`, so the
/// binding constraints sit at the levels in `(0, 1)`.
pub fn fit_spectral_dimension<T: Real>(
    spectrum: &SpectrumInfo<T>,
    d_s: T,
) -> Result<SpectralProfile<T>> {
    if !(d_s > T::zero()) {
        return Err(Error::invalid(format!(
            "spectral dimension {d_s} must be positive"
        )));
    }
    if spectrum.unit_multiplicity() > 1 {
        return Err(Error::Disconnected(format!(
            "{} eigenvalues at 1",
            spectrum.unit_multiplicity()
        )));
    }
    let n = T::from_usize_lossy(spectrum.n());
    let half_d = d_s * T::lit(0.5);
    let inv_c_s = spectrum
        .eigenvalues
        .iter()
        .skip(1)
        .enumerate()
        .filter(|(_, &l)| l > T::zero())
        .map(|(k, &l)| {
            let mass = T::from_usize_lossy(k + 1) / n;
            mass / (T::one() - l).powf(half_d)
        })
        .fold(T::zero(), T::max);
    Ok(SpectralProfile { d_s, inv_c_s })
}

/// Largest `d_s ∈ {0.5, 1, …, 6}` whose `c_s⁻¹` stays at or below `cap`
/// (default `10 n`).
pub fn fit_spectral_dimension_auto<T: Real>(
    spectrum: &SpectrumInfo<T>,
    cap: Option<T>,
) -> Result<SpectralProfile<T>> {
    let cap = cap.unwrap_or_else(|| default_density_cap(spectrum.n()));
    let mut best = None;
    for step in 1..=12 {
        let profile = fit_spectral_dimension(spectrum, T::lit(0.5 * step as f64))?;
        if profile.inv_c_s <= cap {
            best = Some(profile);
        }
    }
    best.ok_or_else(|| Error::numeric(format!("no grid dimension keeps c_s⁻¹ below {cap}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{Topology, TopologyKind, WeightScheme};
    use approx::assert_abs_diff_eq;

    fn ring(n: usize, scheme: WeightScheme) -> GossipMatrix<f64> {
        GossipMatrix::from_topology(&Topology::ring(n).unwrap(), scheme).unwrap()
    }

    #[test]
    fn ring32_gap_matches_circulant_formula() {
        let s = spectrum(&ring(32, WeightScheme::UniformNeighbor)).unwrap();
        let closed = 1.0 - (1.0 + 2.0 * (2.0 * std::f64::consts::PI / 32.0).cos()) / 3.0;
        assert_abs_diff_eq!(s.spectral_gap, closed, epsilon = 1e-12);
        assert!((s.spectral_gap - 0.013).abs() < 5e-4);
        assert_abs_diff_eq!(s.eigenvalues[0], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn star32_gap_is_one_over_n() {
        let w = GossipMatrix::<f64>::from_topology(
            &Topology::build(TopologyKind::Star, 32).unwrap(),
            WeightScheme::Metropolis,
        )
        .unwrap();
        let s = spectrum(&w).unwrap();
        assert_abs_diff_eq!(s.spectral_gap, 1.0 / 32.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.lambda_min, 0.0, epsilon = 1e-12);
        assert!(matches!(
            beta_exact(&s, 0.5),
            Err(Error::DegenerateSpectrum(_))
        ));
    }

    #[test]
    fn fully_connected_spectrum() {
        let w = GossipMatrix::<f64>::from_topology(
            &Topology::fully_connected(6).unwrap(),
            WeightScheme::Metropolis,
        )
        .unwrap();
        let s = spectrum(&w).unwrap();
        assert_abs_diff_eq!(s.eigenvalues[0], 1.0, epsilon = 1e-12);
        for &l in &s.eigenvalues[1..] {
            assert_abs_diff_eq!(l, 0.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(s.spectral_gap, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn lazy_shifts_eigenvalues() {
        let w = ring(8, WeightScheme::Metropolis);
        let plain = spectrum(&w).unwrap();
        let lazy = spectrum(&w.lazy()).unwrap();
        for (a, b) in plain.eigenvalues.iter().zip(&lazy.eigenvalues) {
            assert_abs_diff_eq!((1.0 + a) / 2.0, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn beta_examples() {
        let fc = GossipMatrix::<f64>::from_topology(
            &Topology::fully_connected(5).unwrap(),
            WeightScheme::Metropolis,
        )
        .unwrap();
        let s = spectrum(&fc.lazy()).unwrap();
        let b = beta_exact(&s, 0.0).unwrap().finite().unwrap();
        assert_abs_diff_eq!(b, 1.0 / 3.0, epsilon = 1e-12);

        let id = spectrum(&GossipMatrix::<f64>::identity(4)).unwrap();
        assert_eq!(beta_exact(&id, 0.3).unwrap(), Beta::Unbounded);
        assert!(beta_exact(&id, 1.0).is_err());
        assert!(beta_exact(&id, -0.1).is_err());
    }

    #[test]
    fn beta_simplified_values() {
        assert_eq!(beta_simplified(1.0, 0.5), 0.125);
        assert_eq!(beta_simplified(0.37, 0.0), 0.25);
        for i in 0..20 {
            for j in 0..20 {
                let (l2, g) = (i as f64 / 20.0, j as f64 / 20.0);
                assert!(beta_simplified(l2, g) >= (1.0 - g) / 4.0);
            }
        }
    }

    #[test]
    fn neighborhood_trivial_cases() {
        let id = GossipMatrix::<f64>::identity(5);
        let nm = neighborhood_matrix(&id, 0.8).unwrap();
        assert_abs_diff_eq!(nm.m, DMatrix::identity(5, 5), epsilon = 1e-12);
        assert_abs_diff_eq!(nm.n_eff, 1.0, epsilon = 1e-12);

        let fc = GossipMatrix::<f64>::from_topology(
            &Topology::fully_connected(6).unwrap(),
            WeightScheme::Metropolis,
        )
        .unwrap();
        let nm = neighborhood_matrix(&fc, 0.4).unwrap();
        assert_abs_diff_eq!(
            nm.m,
            DMatrix::from_element(6, 6, 1.0 / 6.0),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(nm.n_eff, 6.0, epsilon = 1e-10);

        let nm = neighborhood_matrix(&ring(32, WeightScheme::UniformNeighbor), 0.0).unwrap();
        let w = ring(32, WeightScheme::UniformNeighbor);
        assert_abs_diff_eq!(nm.m, w.matrix() * w.matrix(), epsilon = 1e-14);
        assert_abs_diff_eq!(nm.n_eff, 3.0, epsilon = 1e-12);
        assert!(neighborhood_matrix(&w, 1.0).is_err());
    }

    #[test]
    fn neighborhood_eigenvalues_follow_spectral_map() {
        let w = ring(8, WeightScheme::Metropolis);
        let (lams, vecs) = eigenpairs(&w).unwrap();
        for gamma in [0.0, 0.5, 0.9, 0.99] {
            let nm = neighborhood_matrix(&w, gamma).unwrap();
            let lm = nm.laplacian();
            for (k, &l) in lams.iter().enumerate() {
                let v = vecs.column(k);
                let mv = &nm.m * v;
                let expected = (1.0 - gamma) * l * l / (1.0 - gamma * l * l);
                assert_abs_diff_eq!(mv, v * expected, epsilon = 1e-10);
                let lv = &lm * v;
                let expected_l = (1.0 - l * l) / (1.0 - gamma * l * l);
                assert_abs_diff_eq!(lv, v * expected_l, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn neighborhood_is_stochastic_psd_with_uniform_diagonal() {
        let w = GossipMatrix::<f64>::from_topology(
            &Topology::torus(4, 4).unwrap(),
            WeightScheme::Metropolis,
        )
        .unwrap();
        let nm = neighborhood_matrix(&w, 0.7).unwrap();
        assert!(nm.uniform_diagonal);
        for i in 0..16 {
            assert_abs_diff_eq!(nm.m.row(i).sum(), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(nm.m[(i, i)], 1.0 / nm.n_eff, epsilon = 1e-12);
        }
        let eig = SymmetricEigen::new(nm.m.clone());
        assert!(eig.eigenvalues.iter().all(|&l| l > -1e-12));
        // the fully averaged direction keeps eigenvalue 1
        let ones = nalgebra::DVector::from_element(16, 1.0);
        assert_abs_diff_eq!(&nm.m * &ones, ones, epsilon = 1e-12);
    }

    #[test]
    fn irregular_graph_flags_nonuniform_diagonal() {
        let w = GossipMatrix::<f64>::from_topology(
            &Topology::build(TopologyKind::Star, 6).unwrap(),
            WeightScheme::Metropolis,
        )
        .unwrap();
        let nm = neighborhood_matrix(&w, 0.5).unwrap();
        assert!(!nm.uniform_diagonal);
        let max_diag = (0..6).map(|i| nm.m[(i, i)]).fold(0.0, f64::max);
        assert_abs_diff_eq!(nm.n_eff, 1.0 / max_diag, epsilon = 1e-12);
        assert!(nm.beta.is_none());
    }

    #[test]
    fn beta_orders_the_two_seminorms() {
        let w = ring(16, WeightScheme::Metropolis).lazy();
        let s = spectrum(&w).unwrap();
        let lw_w = w.laplacian() * w.matrix();
        for gamma in [0.0, 0.5, 0.9, 0.99] {
            let beta = beta_exact(&s, gamma).unwrap().finite().unwrap();
            let nm = neighborhood_matrix(&w, gamma).unwrap();
            let gap = &lw_w - nm.laplacian() * beta;
            let eig = SymmetricEigen::new((&gap + gap.transpose()) * 0.5);
            let min = eig.eigenvalues.min();
            assert!(min > -1e-10, "γ={gamma}: min eigenvalue {min}");
            // tight: some direction (the argmin eigenvector) attains equality
            assert!(min.abs() < 1e-10);
            assert!(s.spectral_gap <= beta + 1e-12 && beta <= 1.0);
        }
    }

    #[test]
    fn spectral_dimension_of_ring_is_one() {
        let s = spectrum(&ring(512, WeightScheme::UniformNeighbor)).unwrap();
        let cap = default_density_cap::<f64>(512);
        let one = fit_spectral_dimension(&s, 1.0).unwrap();
        assert!(one.inv_c_s.is_finite() && one.inv_c_s < cap);
        // binds as λ → 0, where two thirds of the spectrum lies above
        assert!((one.c_s() - 1.5).abs() < 0.01, "{}", one.c_s());
        let three = fit_spectral_dimension(&s, 3.0).unwrap();
        assert!(three.inv_c_s > cap);
    }

    #[test]
    fn torus_fits_dimension_two() {
        let w = GossipMatrix::<f64>::from_topology(
            &Topology::torus(16, 16).unwrap(),
            WeightScheme::Metropolis,
        )
        .unwrap();
        let s = spectrum(&w).unwrap();
        let p = fit_spectral_dimension(&s, 2.0).unwrap();
        assert!(p.inv_c_s.is_finite() && p.inv_c_s < default_density_cap::<f64>(256));
    }

    #[test]
    fn fitted_profile_satisfies_density_bound_on_a_fine_grid() {
        let s = spectrum(&ring(64, WeightScheme::Metropolis)).unwrap();
        for d in [0.5, 1.0, 2.0, 4.0] {
            let p = fit_spectral_dimension(&s, d).unwrap();
            for k in 0..=2000 {
                let lam = k as f64 / 2000.0;
                let mass = s.eigenvalues[1..].iter().filter(|&&l| l > lam).count() as f64 / 64.0;
                let bound = p.inv_c_s * (1.0 - lam).powf(d / 2.0);
                assert!(mass <= bound * (1.0 + 1e-12), "d={d} λ={lam}");
            }
        }
    }

    #[test]
    fn disconnected_spectrum_cannot_be_fitted() {
        let topo = Topology::from_edges(
            8,
            (0..4)
                .map(|i| (i, (i + 1) % 4))
                .chain((0..4).map(|i| (4 + i, 4 + (i + 1) % 4))),
        )
        .unwrap();
        let w = GossipMatrix::<f64>::from_topology(&topo, WeightScheme::Metropolis).unwrap();
        let s = spectrum(&w).unwrap();
        assert_eq!(s.unit_multiplicity(), 2);
        assert!(matches!(
            fit_spectral_dimension(&s, 1.0),
            Err(Error::Disconnected(_))
        ));
    }

    #[test]
    fn auto_fit_picks_a_grid_point() {
        let s = spectrum(&ring(128, WeightScheme::UniformNeighbor)).unwrap();
        let p = fit_spectral_dimension_auto(&s, None).unwrap();
        assert!(p.d_s >= 1.0 && p.inv_c_s <= 1280.0);
        let next = fit_spectral_dimension(&s, p.d_s + 0.5).unwrap();
        assert!(p.d_s == 6.0 || next.inv_c_s > 1280.0);
    }

    #[test]
    fn generic_over_f32() {
        let w = GossipMatrix::<f32>::from_topology(
            &Topology::ring(8).unwrap(),
            WeightScheme::Metropolis,
        )
        .unwrap();
        let s = spectrum(&w).unwrap();
        assert!((s.eigenvalues[0] - 1.0).abs() < 1e-5);
    }
}
