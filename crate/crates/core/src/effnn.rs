//! Effective number of neighbors `n_W(γ)`.
//!
//! `n_W(γ)` is the ratio between the stationary variance of a solo
//! noise-accumulation process `y ← √γ y + ξ` and its gossip-averaged twin
//! `z ← W_t (√γ z + ξ)`. It runs from 1 (no communication) to `n`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::spectral::{self, SpectralProfile, SpectrumInfo};
use crate::topology::{GossipMatrix, GossipSchedule};
use crate::{substream, Error, Real, Result};

/// Stationarity requirement for the Monte-Carlo estimator: `γ^steps` below this.
pub const MC_TRANSIENT_TOL: f64 = 1e-6;
const BOOTSTRAP_RESAMPLES: u64 = 200;
const BOOTSTRAP_LANE: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ClosedForm,
    MonteCarlo,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EffnnEstimate<T: Real> {
    pub value: T,
    pub method: Method,
    pub gamma: T,
    /// Bootstrap standard error (Monte-Carlo only).
    pub std_error: Option<T>,
    pub replicas: Option<usize>,
    pub steps: Option<usize>,
    pub seed: Option<u64>,
}

/// Flat record for JSON output.
#[derive(Clone, Debug, Serialize)]
pub struct EffnnRecord {
    pub value: f64,
    pub std_error: Option<f64>,
    pub gamma: f64,
    pub steps: Option<usize>,
    pub replicas: Option<usize>,
    pub seed: Option<u64>,
}

impl<T: Real> EffnnEstimate<T> {
    pub fn record(&self) -> EffnnRecord {
        EffnnRecord {
            value: self.value.as_f64(),
            std_error: self.std_error.map(Real::as_f64),
            gamma: self.gamma.as_f64(),
            steps: self.steps,
            replicas: self.replicas,
            seed: self.seed,
        }
    }

    /// Checks `1 - tol ≤ value ≤ n + tol` (tol = 3 SE, or 1e-10 for closed forms).
    pub fn in_range(&self, n: usize) -> bool {
        let tol = match self.std_error {
            Some(se) => se * T::lit(3.0),
            None => T::tol(1e-10) * T::from_usize_lossy(n),
        };
        self.value >= T::one() - tol && self.value <= T::from_usize_lossy(n) + tol
    }
}

fn check_gamma<T: Real>(gamma: T) -> Result<()> {
    if !(gamma >= T::zero() && gamma < T::one()) {
        return Err(Error::invalid(format!("decay γ = {gamma} outside [0, 1)")));
    }
    Ok(())
}

fn closed_form_value<T: Real>(eigenvalues: &[T], gamma: T) -> T {
    let n = T::from_usize_lossy(eigenvalues.len());
    let mean = eigenvalues
        .iter()
        .map(|&l| l * l / (T::one() - gamma * l * l))
        .fold(T::zero(), |a, b| a + b)
        / n;
    T::one() / (T::one() - gamma) / mean
}

/// `n_W(γ) = [1/(1-γ)] / [(1/n) Σ λ²/(1-γλ²)]` for a static symmetric `W`.
pub fn effnn_closed_form<T: Real>(
    spectrum: &SpectrumInfo<T>,
    gamma: T,
) -> Result<EffnnEstimate<T>> {
    check_gamma(gamma)?;
    let value = closed_form_value(&spectrum.eigenvalues, gamma);
    if !value.is_finite_value() {
        return Err(Error::numeric(format!("n_W({gamma}) is not finite")));
    }
    Ok(EffnnEstimate {
        value,
        method: Method::ClosedForm,
        gamma,
        std_error: None,
        replicas: None,
        steps: None,
        seed: None,
    })
}

/// `n_W(γ)` with `γ` just below 1. Fails with [`Error::Disconnected`] unless
/// it is within 1% of `n`.
pub fn effnn_limit_check<T: Real>(spectrum: &SpectrumInfo<T>) -> Result<T> {
    let gamma = T::one() - T::tol(1e-9);
    let value = effnn_closed_form(spectrum, gamma)?.value;
    let n = T::from_usize_lossy(spectrum.n());
    if (n - value).abs() > n * T::lit(0.01) {
        return Err(Error::Disconnected(format!(
            "n_W(γ→1) = {value} instead of n = {n}"
        )));
    }
    Ok(value)
}

/// Lower bound from the spectral gap `α`, exact for `W = (1-α)I + (α/n)11ᵀ`.
pub fn effnn_bound_spectral_gap<T: Real>(n: usize, alpha: T, gamma: T) -> Result<T> {
    check_gamma(gamma)?;
    if !(alpha >= T::zero() && alpha <= T::one()) {
        return Err(Error::invalid(format!(
            "spectral gap {alpha} outside [0, 1]"
        )));
    }
    let nf = T::from_usize_lossy(n);
    let s = (T::one() - alpha) * (T::one() - alpha);
    let inv =
        T::one() / nf + (nf - T::one()) / nf * (T::one() - gamma) * s / (T::one() - gamma * s);
    Ok(T::one() / inv)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DimensionRegime {
    /// `d_s > 2`
    Above,
    /// `d_s = 2`
    Critical,
    /// `d_s < 2`
    Below,
}

impl DimensionRegime {
    pub fn of<T: Real>(d_s: T) -> Self {
        let two = T::lit(2.0);
        if (d_s - two).abs() <= T::tol(1e-9) {
            DimensionRegime::Critical
        } else if d_s > two {
            DimensionRegime::Above
        } else {
            DimensionRegime::Below
        }
    }
}

/// Lower bound on `n_W(γ)` from a spectral-dimension profile; the formula
/// depends on whether `d_s` is above, at or below 2.
pub fn effnn_bound_spectral_dim<T: Real>(
    n: usize,
    profile: &SpectralProfile<T>,
    gamma: T,
) -> Result<T> {
    check_gamma(gamma)?;
    let nf = T::from_usize_lossy(n);
    let d = profile.d_s;
    let ic = profile.inv_c_s;
    let one = T::one();
    let two = T::lit(2.0);
    let regime = DimensionRegime::of(d);
    if gamma == T::zero() && regime != DimensionRegime::Below {
        return Err(Error::invalid("γ = 0 is outside this bound's domain"));
    }
    let excess = match regime {
        DimensionRegime::Above => (one - gamma) * ic / (gamma * (d - two)),
        DimensionRegime::Critical => -(one - gamma) * (one - gamma).ln() * ic / (two * gamma),
        DimensionRegime::Below => T::lit(4.0) * (one - gamma).powf(d / two) * ic / (d * (two - d)),
    };
    Ok(one / (one / nf + excess))
}

/// Smallest step count with `γ^steps < 1e-6`.
pub fn min_mc_steps<T: Real>(gamma: T) -> usize {
    if gamma <= T::zero() {
        return 1;
    }
    let g = gamma.as_f64();
    (MC_TRANSIENT_TOL.ln() / g.ln()).floor() as usize + 1
}

/// Per-replica squared norms `(‖y‖², ‖z‖²)` at the final step.
fn mc_replica<T: Real>(
    schedule: &GossipSchedule<T>,
    gamma: T,
    steps: usize,
    seed: u64,
    replica: u64,
) -> (T, T) {
    let n = schedule.n();
    let mut rng = substream(seed, replica, 0);
    let sg = gamma.sqrt();
    let mut y = vec![T::zero(); n];
    let mut z = vec![T::zero(); n];
    let mut buf = vec![T::zero(); n];
    for t in 0..steps {
        for i in 0..n {
            let xi = T::lit(rng.sample::<f64, _>(StandardNormal));
            y[i] = sg * y[i] + xi;
            buf[i] = sg * z[i] + xi;
        }
        schedule.apply_into(t, &buf, &mut z);
    }
    let sq = |v: &[T]| v.iter().fold(T::zero(), |a, &b| a + b * b);
    (sq(&y), sq(&z))
}

fn ratio<T: Real>(pairs: &[(T, T)], idx: impl Iterator<Item = usize>) -> T {
    let (sy, sz) = idx.fold((T::zero(), T::zero()), |(a, b), i| {
        (a + pairs[i].0, b + pairs[i].1)
    });
    sy / sz
}

/// Monte-Carlo `n_W(γ)` for any schedule, with common noise for both processes.
///
/// Variances are second moments about zero (both processes have mean zero).
/// The standard error comes from 200 seeded bootstrap resamples of replicas.
pub fn effnn_monte_carlo<T: Real>(
    schedule: &GossipSchedule<T>,
    gamma: T,
    steps: usize,
    replicas: usize,
    seed: u64,
) -> Result<EffnnEstimate<T>> {
    check_gamma(gamma)?;
    if replicas == 0 {
        return Err(Error::invalid("need at least one replica"));
    }
    let need = min_mc_steps(gamma);
    if steps < need {
        return Err(Error::invalid(format!(
            "{steps} steps leave γ^steps ≥ {MC_TRANSIENT_TOL}; need at least {need}"
        )));
    }
    let pairs: Vec<(T, T)> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| mc_replica(schedule, gamma, steps, seed, r))
        .collect();
    let value = ratio(&pairs, 0..replicas);
    if !value.is_finite_value() {
        return Err(Error::numeric("Monte-Carlo variance ratio is not finite"));
    }

    let boot: Vec<T> = (0..BOOTSTRAP_RESAMPLES)
        .into_par_iter()
        .map(|b| {
            let mut rng = substream(seed, b, BOOTSTRAP_LANE);
            let idx: Vec<usize> = (0..replicas)
                .map(|_| rng.random_range(0..replicas))
                .collect();
            ratio(&pairs, idx.into_iter())
        })
        .collect();
    let bn = T::from_usize_lossy(boot.len());
    let mean = boot.iter().fold(T::zero(), |a, &b| a + b) / bn;
    let var = boot
        .iter()
        .fold(T::zero(), |a, &b| a + (b - mean) * (b - mean))
        / (bn - T::one());

    Ok(EffnnEstimate {
        value,
        method: Method::MonteCarlo,
        gamma,
        std_error: Some(var.sqrt()),
        replicas: Some(replicas),
        steps: Some(steps),
        seed: Some(seed),
    })
}

/// Result of fitting a decay parameter to an empirical worker covariance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit<T> {
    pub gamma: T,
    /// Frobenius distance at the optimum.
    pub objective: T,
    /// False when the model covariance barely moves with `γ` (e.g. `W = I`).
    pub identifiable: bool,
}

pub const DECAY_GAMMA_MAX: f64 = 1.0 - 1e-6;
const DECAY_TOL: f64 = 1e-4;
const DECAY_GRID: usize = 200;

fn normalize_unit_mean_diag<T: Real>(c: &DMatrix<T>) -> Result<DMatrix<T>> {
    let n = T::from_usize_lossy(c.nrows());
    let mean = c.diagonal().sum() / n;
    if !(mean > T::zero()) {
        return Err(Error::numeric("covariance has non-positive mean variance"));
    }
    Ok(c / mean)
}

/// Model covariance `M(γ)` up to scale, from an eigendecomposition of `W`.
struct DecayModel<T: Real> {
    lambdas: Vec<T>,
    vectors: DMatrix<T>,
}

impl<T: Real> DecayModel<T> {
    fn covariance(&self, gamma: T) -> DMatrix<T> {
        let f = DVector::from_iterator(
            self.lambdas.len(),
            self.lambdas
                .iter()
                .map(|&l| (T::one() - gamma) * l * l / (T::one() - gamma * l * l)),
        );
        let scaled = DMatrix::from_fn(self.vectors.nrows(), self.vectors.ncols(), |i, k| {
            self.vectors[(i, k)] * f[k]
        });
        scaled * self.vectors.transpose()
    }

    fn objective(&self, target: &DMatrix<T>, gamma: T) -> T {
        match normalize_unit_mean_diag(&self.covariance(gamma)) {
            Ok(m) => (target - m).norm(),
            Err(_) => T::max_value().unwrap_or_else(T::one),
        }
    }
}

/// Fits `γ` so that the normalized `M(γ)` best matches `empirical_cov` in
/// Frobenius norm.
///
/// A 200-point grid over `[0, 1-1e-6]` brackets the minimum, then golden
/// section refines it to `1e-4`.
pub fn fit_decay<T: Real>(empirical_cov: &DMatrix<T>, w: &GossipMatrix<T>) -> Result<DecayFit<T>> {
    if empirical_cov.nrows() != w.n() || empirical_cov.ncols() != w.n() {
        return Err(Error::DimensionMismatch(format!(
            "covariance is {}x{}, gossip matrix has n = {}",
            empirical_cov.nrows(),
            empirical_cov.ncols(),
            w.n()
        )));
    }
    let target =
        normalize_unit_mean_diag(&((empirical_cov + empirical_cov.transpose()) * T::lit(0.5)))?;
    let (lambdas, vectors) = spectral::eigenpairs(w)?;
    let model = DecayModel { lambdas, vectors };

    let hi = T::lit(DECAY_GAMMA_MAX);
    let grid: Vec<T> = (0..DECAY_GRID)
        .map(|k| hi * T::from_usize_lossy(k) / T::from_usize_lossy(DECAY_GRID - 1))
        .collect();
    let values: Vec<T> = grid.iter().map(|&g| model.objective(&target, g)).collect();
    let (mut best_k, mut lo_v, mut hi_v) = (0, values[0], values[0]);
    for (k, &v) in values.iter().enumerate() {
        if v < values[best_k] {
            best_k = k;
        }
        lo_v = lo_v.min(v);
        hi_v = hi_v.max(v);
    }
    let identifiable = hi_v - lo_v >= T::lit(1e-8);

    let mut a = grid[best_k.saturating_sub(1)];
    let mut b = grid[(best_k + 1).min(DECAY_GRID - 1)];
    let phi = (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (model.objective(&target, c), model.objective(&target, d));
    while b - a > T::lit(DECAY_TOL) {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = model.objective(&target, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = model.objective(&target, d);
        }
    }
    let mut gamma = (a + b) * T::lit(0.5);
    let mut objective = model.objective(&target, gamma);
    if values[best_k] < objective {
        gamma = grid[best_k];
        objective = values[best_k];
    }
    Ok(DecayFit {
        gamma,
        objective,
        identifiable,
    })
}

/// Normalized model covariance `M(γ) / mean diag`, handy for synthetic inputs.
pub fn model_covariance<T: Real>(w: &GossipMatrix<T>, gamma: T) -> Result<DMatrix<T>> {
    let nm = spectral::neighborhood_matrix(w, gamma)?;
    normalize_unit_mean_diag(&nm.m)
}
