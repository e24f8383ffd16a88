//! Exact rates on the isotropic random-quadratic toy model.
//!
//! Each worker minimises `E (dᵀx)² / 2` with `E ddᵀ = I` and
//! `E (dᵀx)² ‖d‖² = ζ ‖x‖²`. The expected squared norm contracts by `1 - r`
//! per step, with `r` depending on the topology only through `n_W`.

use nalgebra::DMatrix;

use crate::spectral::SpectrumInfo;
use crate::topology::GossipMatrix;
use crate::{Error, Real, Result};

/// Toy-model parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ToyProblem<T> {
    /// Noise level `ζ ≥ 1` (`d + 2` for Gaussian data; 1 means noiseless).
    pub zeta: T,
    pub eta: T,
}

impl<T: Real> ToyProblem<T> {
    pub fn new(zeta: T, eta: T) -> Result<Self> {
        if !(zeta >= T::one()) {
            return Err(Error::invalid(format!(
                "noise level ζ = {zeta} must be ≥ 1"
            )));
        }
        if !(eta > T::zero()) {
            return Err(Error::invalid(format!(
                "learning rate η = {eta} must be positive"
            )));
        }
        Ok(Self { zeta, eta })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateSolution<T> {
    pub r: T,
    pub eta: T,
    /// True iff `r ∈ (0, 1]`.
    pub converged: bool,
    /// `(1-η)² / (1-r)`.
    pub gamma_implied: T,
}

/// Single worker: `1 - (1-η)² - (ζ-1)η²`. Non-positive means divergence.
pub fn rate_alone<T: Real>(eta: T, zeta: T) -> T {
    let a = (T::one() - eta) * (T::one() - eta);
    T::one() - a - (zeta - T::one()) * eta * eta
}

/// `n` workers averaging exactly after every step.
pub fn rate_centralized<T: Real>(eta: T, zeta: T, n: usize) -> T {
    let a = (T::one() - eta) * (T::one() - eta);
    T::one() - a - (zeta - T::one()) * eta * eta / T::from_usize_lossy(n)
}

fn n_w<T: Real>(eigenvalues: &[T], gamma: T) -> T {
    let n = T::from_usize_lossy(eigenvalues.len());
    let mean = eigenvalues
        .iter()
        .map(|&l| l * l / (T::one() - gamma * l * l))
        .fold(T::zero(), |a, b| a + b)
        / n;
    T::one() / (T::one() - gamma) / mean
}

const UNIQUENESS_PROBES: usize = 64;

/// Solves the decentralized rate equation `r = 1 - (1-η)² - (ζ-1)η² / n_W((1-η)²/(1-r))`.
///
/// The feasible set is `r < 1 - (1-η)²` (implied decay below 1). On it the
/// residual `g` is positive at `r = rate_alone` (since `n_W ≥ 1`) and
/// negative as `r` approaches the upper end, so bisection always brackets a
/// root; a root `≤ 0` is reported with `converged = false`. Uniqueness is
/// checked on a probe grid and a second sign change is a numeric failure.
pub fn solve_rate<T: Real>(spectrum: &SpectrumInfo<T>, eta: T, zeta: T) -> Result<RateSolution<T>> {
    ToyProblem::new(zeta, eta)?;
    let one = T::one();
    let a = (one - eta) * (one - eta);
    let c = (zeta - one) * eta * eta;
    let lams = &spectrum.eigenvalues;
    let finish = |r: T, gamma_implied: T| RateSolution {
        r,
        eta,
        converged: r > T::zero() && r <= one,
        gamma_implied,
    };

    if a == T::zero() {
        let r = one - c / n_w(lams, T::zero());
        return Ok(finish(r, T::zero()));
    }
    if c == T::zero() {
        // noiseless: r = 1 - (1-η)², decay at its limit
        return Ok(finish(one - a, one));
    }

    let upper = one - a;
    let g = |r: T| {
        let gamma = a / (one - r);
        one - a - c / n_w(lams, gamma) - r
    };

    let mut lo = rate_alone(eta, zeta);
    let mut hi = upper;
    let g_lo = g(lo);
    if g_lo < T::zero() {
        // n_W = 1 up to rounding: the solo rate is the root
        if g_lo.abs() < T::tol(1e-12) {
            return Ok(finish(lo, a / (one - lo)));
        }
        return Err(Error::numeric(format!(
            "rate residual negative at the solo rate {lo}"
        )));
    }

    let probes = (1..UNIQUENESS_PROBES)
        .map(|k| lo + (hi - lo) * T::from_usize_lossy(k) / T::from_usize_lossy(UNIQUENESS_PROBES))
        .map(g)
        .collect::<Vec<_>>();
    let sign_changes = probes
        .windows(2)
        .filter(|p| (p[0] >= T::zero()) != (p[1] >= T::zero()))
        .count()
        + usize::from(probes[0] < T::zero());
    if sign_changes > 1 {
        return Err(Error::numeric(format!(
            "rate equation has {sign_changes} roots at η = {eta}, ζ = {zeta}"
        )));
    }

    for _ in 0..400 {
        let mid = (lo + hi) * T::lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) >= T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r = if hi >= upper || g(lo).abs() <= g(hi).abs() {
        lo
    } else {
        hi
    };
    let residual = g(r);
    if residual.abs() >= T::tol(1e-12) {
        return Err(Error::numeric(format!(
            "rate residual {residual} after bisection"
        )));
    }
    Ok(finish(r, a / (one - r)))
}

/// Same as [`solve_rate`] with `n_W` replaced by a fixed value.
pub fn solve_rate_with_neighbors<T: Real>(eta: T, zeta: T, n_eff: T) -> T {
    let a = (T::one() - eta) * (T::one() - eta);
    T::one() - a - (zeta - T::one()) * eta * eta / n_eff
}

/// Independent rate computation from the second-moment recursion of the
/// toy model.
///
/// With `S = E[X Xᵀ]` over worker iterates (one row per worker), one
/// local step followed by gossip gives
/// `S ← W [(1-η)² S + η²(ζ-1) Diag(S)] Wᵀ`. The rate is one minus the
/// dominant eigenvalue of that linear map, found by power iteration from `S = I`.
pub fn rate_oracle<T: Real>(w: &GossipMatrix<T>, eta: T, zeta: T, max_iters: usize) -> Result<T> {
    ToyProblem::new(zeta, eta)?;
    let n = w.n();
    let a = (T::one() - eta) * (T::one() - eta);
    let c = (zeta - T::one()) * eta * eta;
    let wm = w.matrix();
    let wt = wm.transpose();
    let step = |s: &DMatrix<T>| {
        let mut inner = s * a;
        for i in 0..n {
            inner[(i, i)] += c * s[(i, i)];
        }
        let out = wm * inner * &wt;
        (&out + out.transpose()) * T::lit(0.5)
    };

    let mut s = DMatrix::<T>::identity(n, n);
    s /= s.norm();
    let mut rho = T::zero();
    for it in 0..max_iters {
        let next = step(&s);
        let norm = next.norm();
        if !(norm > T::zero()) || !norm.is_finite_value() {
            return Err(Error::numeric("oracle iterate vanished or overflowed"));
        }
        let change = (norm - rho).abs();
        rho = norm;
        s = next / norm;
        if it > 0 && change <= T::tol(1e-12) * rho {
            return Ok(T::one() - rho);
        }
    }
    Err(Error::numeric(format!(
        "oracle power iteration did not settle in {max_iters} iterations"
    )))
}

/// Learning rate maximising `r`, searched over `η ∈ (0, 2)`.
///
/// A 400-point grid brackets the maximum and golden section refines it to
/// `1e-7`. Non-convergent points count as `-∞`.
pub fn optimal_lr_toy<T: Real>(spectrum: &SpectrumInfo<T>, zeta: T) -> Result<(T, T)> {
    let score = |eta: T| -> T {
        match solve_rate(spectrum, eta, zeta) {
            Ok(sol) if sol.converged => sol.r,
            _ => -T::max_value().unwrap_or_else(T::one),
        }
    };
    const GRID: usize = 400;
    let two = T::lit(2.0);
    let grid: Vec<T> = (1..GRID)
        .map(|k| two * T::from_usize_lossy(k) / T::from_usize_lossy(GRID))
        .collect();
    let values: Vec<T> = grid.iter().map(|&e| score(e)).collect();
    let best = (0..values.len())
        .max_by(|&i, &j| values[i].partial_cmp(&values[j]).expect("finite scores"))
        .expect("non-empty grid");
    let mut lo = if best == 0 { T::zero() } else { grid[best - 1] };
    let mut hi = if best + 1 == grid.len() {
        two
    } else {
        grid[best + 1]
    };

    let phi = (T::lit(5.0).sqrt() - T::one()) / two;
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (score(x1), score(x2));
    while hi - lo > T::tol(1e-7) {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = score(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = score(x2);
        }
    }
    let eta = (lo + hi) * T::lit(0.5);
    let r = score(eta);
    if r < values[best] {
        return Ok((grid[best], values[best]));
    }
    Ok((eta, r))
}

/// Steps until the expected squared error drops by `target_ratio`:
/// `⌈ln(target) / ln(1-r)⌉`, or 1 when `r = 1`.
pub fn time_to_target<T: Real>(r: T, target_ratio: T) -> Result<u64> {
    if !(target_ratio > T::zero() && target_ratio < T::one()) {
        return Err(Error::invalid(format!(
            "target ratio {target_ratio} outside (0, 1)"
        )));
    }
    if !(r > T::zero() && r <= T::one()) {
        return Err(Error::invalid(format!("rate {r} never reaches the target")));
    }
    if r == T::one() {
        return Ok(1);
    }
    let steps = (target_ratio.ln() / (T::one() - r).ln()).ceil();
    steps
        .to_u64()
        .ok_or_else(|| Error::numeric(format!("step count {steps} not representable")))
}
