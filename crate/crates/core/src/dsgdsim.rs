//! D-SGD on heterogeneous quadratics.
//!
//! Worker `i` holds `f_i(x) = ½ xᵀA_i x - b_iᵀx`. States are `n × d`
//! matrices with one row per worker; the update is
//! `x ← W_t x - η (∇F(x) + noise)`.
//!
//! Two noise sources are supported: additive Gaussian noise of standard
//! deviation `σ` on every gradient coordinate (stochastic smoothness `ζ = L`),
//! and optional Hessian sampling where the quadratic part is scaled by
//! `s = Bernoulli(p)/p`, which gives `ζ = L/p`.

use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::io::{fmt_float, matrix_to_csv, read_matrix_csv};
use crate::lrplan::lr_max_theorem1;
use crate::spectral::{self, Beta};
use crate::topology::{GossipMatrix, GossipSchedule};
use crate::{substream, Error, Real, Result};

/// Stream lane reserved for problem generation.
const GENERATOR_LANE: u64 = 0xFFFF_FFFF;
/// Stream lane for the random projection used by [`worker_covariance`].
const PROJECTION_LANE: u64 = 0xFFFF_FFFE;
/// Stream lane for the random start of the descent checks.
const START_LANE: u64 = 0xFFFF_FFFD;
/// Divergence threshold on the Frobenius norm of the state.
pub const DIVERGENCE_NORM: f64 = 1e12;

#[derive(Clone, Debug)]
pub struct HetQuadProblem<T: Real> {
    pub n: usize,
    pub d: usize,
    pub a: Vec<DMatrix<T>>,
    /// `n × d`, row `i` is `b_i`.
    pub b: DMatrix<T>,
    /// Standard deviation of the additive gradient noise per coordinate.
    pub noise_level: T,
    /// Keep probability of the Hessian-sampling noise (1 disables it).
    pub hessian_keep_prob: T,
    /// `min_i λ_min(A_i)`.
    pub mu: T,
    /// `max_i λ_max(A_i)`.
    pub l: T,
    /// Stochastic smoothness, `L / p`.
    pub zeta: T,
}

fn sym_extremes<T: Real>(a: &DMatrix<T>) -> (T, T) {
    let eig = SymmetricEigen::new((a + a.transpose()) * T::lit(0.5));
    (eig.eigenvalues.min(), eig.eigenvalues.max())
}

fn gaussian<T: Real>(rng: &mut ChaCha8Rng) -> T {
    T::lit(rng.sample::<f64, _>(StandardNormal))
}

impl<T: Real> HetQuadProblem<T> {
    /// Builds a problem from explicit parts, computing `μ`, `L` and `ζ`.
    pub fn from_parts(
        a: Vec<DMatrix<T>>,
        b: DMatrix<T>,
        noise_level: T,
        hessian_keep_prob: T,
    ) -> Result<Self> {
        let n = a.len();
        if n == 0 {
            return Err(Error::invalid("need at least one worker"));
        }
        let d = a[0].nrows();
        if d == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        if b.nrows() != n || b.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "b is {}x{}, expected {n}x{d}",
                b.nrows(),
                b.ncols()
            )));
        }
        let tol = T::tol(1e-10);
        let mut mu = T::max_value().unwrap_or_else(T::one);
        let mut l = T::zero();
        for (i, ai) in a.iter().enumerate() {
            if ai.nrows() != d || ai.ncols() != d {
                return Err(Error::DimensionMismatch(format!("A_{i} is not {d}x{d}")));
            }
            if (ai - ai.transpose()).amax() > tol * (T::one() + ai.amax()) {
                return Err(Error::invalid(format!("A_{i} is not symmetric")));
            }
            let (lo, hi) = sym_extremes(ai);
            if lo < -tol * (T::one() + hi) {
                return Err(Error::invalid(format!("A_{i} is not PSD (λ_min = {lo})")));
            }
            mu = mu.min(lo.max(T::zero()));
            l = l.max(hi);
        }
        if !(noise_level >= T::zero()) {
            return Err(Error::invalid("noise level must be non-negative"));
        }
        if !(hessian_keep_prob > T::zero() && hessian_keep_prob <= T::one()) {
            return Err(Error::invalid(
                "Hessian keep probability must lie in (0, 1]",
            ));
        }
        Ok(Self {
            n,
            d,
            a,
            b,
            noise_level,
            hessian_keep_prob,
            mu,
            l,
            zeta: l / hessian_keep_prob,
        })
    }

    /// Switches on Hessian sampling with keep probability `p`.
    pub fn with_hessian_sampling(self, p: T) -> Result<Self> {
        Self::from_parts(self.a, self.b, self.noise_level, p)
    }

    pub fn with_noise_level(self, noise_level: T) -> Result<Self> {
        Self::from_parts(self.a, self.b, noise_level, self.hessian_keep_prob)
    }

    pub fn kappa(&self) -> T {
        self.l / self.mu
    }

    /// `∇F(x)`, row `i` being `A_i x_i - b_i`.
    pub fn gradient(&self, x: &DMatrix<T>) -> DMatrix<T> {
        let mut g = DMatrix::zeros(self.n, self.d);
        for i in 0..self.n {
            let xi = x.row(i).transpose();
            let gi = &self.a[i] * xi - self.b.row(i).transpose();
            g.set_row(i, &gi.transpose());
        }
        g
    }

    /// Minimiser of `Σ f_i` over consensus points: `(Σ A_i) x = Σ b_i`.
    pub fn true_optimum(&self) -> Result<DVector<T>> {
        let sum_a = self
            .a
            .iter()
            .fold(DMatrix::zeros(self.d, self.d), |acc, ai| acc + ai);
        let sum_b: DVector<T> = self.b.row_sum().transpose();
        sum_a
            .lu()
            .solve(&sum_b)
            .ok_or_else(|| Error::numeric("Σ A_i is singular; the optimum is not unique"))
    }

    /// `E ‖∇F_ξ(x) - ∇F(x)‖²` in closed form.
    pub fn noise_second_moment(&self, x: &DMatrix<T>) -> T {
        let nd = T::from_usize_lossy(self.n * self.d);
        let additive = nd * self.noise_level * self.noise_level;
        let p = self.hessian_keep_prob;
        if p >= T::one() {
            return additive;
        }
        let sampled = (0..self.n)
            .map(|i| (&self.a[i] * x.row(i).transpose()).norm_squared())
            .fold(T::zero(), |acc, v| acc + v);
        additive + (T::one() - p) / p * sampled
    }

    /// One-worker problem holding worker `i`'s objective.
    pub fn worker(&self, i: usize) -> Result<Self> {
        Self::from_parts(
            vec![self.a[i].clone()],
            DMatrix::from_row_slice(1, self.d, self.b.row(i).transpose().as_slice()),
            self.noise_level,
            self.hessian_keep_prob,
        )
    }

    /// Writes `A_i.csv`, `b.csv` and `problem.txt` (scalars) into `dir`.
    pub fn write_bundle(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (i, ai) in self.a.iter().enumerate() {
            std::fs::write(dir.join(format!("A_{i}.csv")), matrix_to_csv(ai))?;
        }
        std::fs::write(dir.join("b.csv"), matrix_to_csv(&self.b))?;
        let manifest = format!(
            "n={}\nd={}\nmu={}\nL={}\nzeta={}\nnoise_level={}\nhessian_keep_prob={}\n",
            self.n,
            self.d,
            fmt_float(self.mu.as_f64()),
            fmt_float(self.l.as_f64()),
            fmt_float(self.zeta.as_f64()),
            fmt_float(self.noise_level.as_f64()),
            fmt_float(self.hessian_keep_prob.as_f64()),
        );
        std::fs::write(dir.join("problem.txt"), manifest)?;
        Ok(())
    }

    pub fn read_bundle(dir: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(dir.join("problem.txt"))?;
        let mut n = None;
        let mut noise = None;
        let mut keep = None;
        for (line_no, line) in text.lines().enumerate() {
            let Some((k, v)) = line.split_once('=') else {
                continue;
            };
            let parse = |v: &str| {
                v.trim().parse::<f64>().map_err(|e| Error::Parse {
                    line: line_no + 1,
                    msg: e.to_string(),
                })
            };
            match k.trim() {
                "n" => n = Some(parse(v)? as usize),
                "noise_level" => noise = Some(parse(v)?),
                "hessian_keep_prob" => keep = Some(parse(v)?),
                _ => {}
            }
        }
        let n = n.ok_or_else(|| Error::invalid("problem.txt lacks n"))?;
        let a = (0..n)
            .map(|i| read_matrix_csv(dir.join(format!("A_{i}.csv"))))
            .collect::<Result<Vec<_>>>()?;
        let b = read_matrix_csv(dir.join("b.csv"))?;
        Self::from_parts(
            a,
            b,
            T::lit(noise.unwrap_or(0.0)),
            T::lit(keep.unwrap_or(1.0)),
        )
    }
}

/// Seeded heterogeneous problem.
///
/// `A_i = A_shared + h P_i` with `A_shared` having eigenvalues spread over
/// `[1, 4]` in a random basis and `P_i = G Gᵀ / d` random PSD;
/// `b_i = b_shared + h v_i` with Gaussian `b_shared`, `v_i`.
pub fn make_het_quadratic<T: Real>(
    n: usize,
    d: usize,
    hetero_level: T,
    noise_level: T,
    seed: u64,
) -> Result<HetQuadProblem<T>> {
    if n == 0 || d == 0 {
        return Err(Error::invalid(format!(
            "need n, d ≥ 1 (got n = {n}, d = {d})"
        )));
    }
    if !(hetero_level >= T::zero()) {
        return Err(Error::invalid("heterogeneity level must be non-negative"));
    }
    let mut rng = substream(seed, 0, GENERATOR_LANE);
    let g = DMatrix::<T>::from_fn(d, d, |_, _| gaussian(&mut rng));
    let q = g.qr().q();
    let spread = |k: usize| {
        if d == 1 {
            T::lit(2.5)
        } else {
            T::one() + T::lit(3.0) * T::from_usize_lossy(k) / T::from_usize_lossy(d - 1)
        }
    };
    let diag = DMatrix::from_diagonal(&DVector::from_fn(d, |k, _| spread(k)));
    let a_shared = &q * diag * q.transpose();
    let a_shared = (&a_shared + a_shared.transpose()) * T::lit(0.5);
    let b_shared = DVector::<T>::from_fn(d, |_, _| gaussian(&mut rng));

    let dd = T::from_usize_lossy(d);
    let mut a = Vec::with_capacity(n);
    let mut b = DMatrix::zeros(n, d);
    for i in 0..n {
        let gi = DMatrix::<T>::from_fn(d, d, |_, _| gaussian(&mut rng));
        let p = &gi * gi.transpose() / dd;
        let ai = &a_shared + (&p + p.transpose()) * (hetero_level * T::lit(0.5));
        a.push(ai);
        let v = DVector::<T>::from_fn(d, |_, _| gaussian(&mut rng));
        b.set_row(i, &(&b_shared + v * hetero_level).transpose());
    }
    HetQuadProblem::from_parts(a, b, noise_level, T::one())
}

#[derive(Clone, Debug)]
pub struct FixedPoint<T: Real> {
    /// `x*_η`, `n × d`.
    pub x: DMatrix<T>,
    pub eta: T,
    /// `‖η∇F(x*_η) + L_W x*_η‖`.
    pub residual: T,
    /// `‖L_W x*_η‖`.
    pub consensus_violation: T,
}

fn laplacian_apply<T: Real>(w: &GossipMatrix<T>, x: &DMatrix<T>) -> DMatrix<T> {
    x - w.mix_rows(x)
}

/// Fixed point of deterministic D-GD: `η ∇F(x) + L_W x = 0`.
pub fn fixed_point<T: Real>(
    problem: &HetQuadProblem<T>,
    w: &GossipMatrix<T>,
    eta: T,
) -> Result<FixedPoint<T>> {
    if !(eta > T::zero()) {
        return Err(Error::invalid("learning rate must be positive"));
    }
    let (n, d) = (problem.n, problem.d);
    if w.n() != n {
        return Err(Error::DimensionMismatch(format!(
            "W has n = {}, problem has {n} workers",
            w.n()
        )));
    }
    let nd = n * d;
    let mut sys = DMatrix::<T>::zeros(nd, nd);
    let mut rhs = DVector::<T>::zeros(nd);
    for i in 0..n {
        for j in 0..n {
            let lw = if i == j {
                T::one() - w.get(i, j)
            } else {
                -w.get(i, j)
            };
            if lw != T::zero() {
                for k in 0..d {
                    sys[(i * d + k, j * d + k)] += lw;
                }
            }
        }
        for k in 0..d {
            for m in 0..d {
                sys[(i * d + k, i * d + m)] += eta * problem.a[i][(k, m)];
            }
            rhs[i * d + k] = eta * problem.b[(i, k)];
        }
    }
    let sol = sys
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::numeric("η·blockdiag(A) + L_W is singular"))?;
    let x = DMatrix::from_row_slice(n, d, sol.as_slice());
    let lx = laplacian_apply(w, &x);
    let residual = (problem.gradient(&x) * eta + &lx).norm();
    Ok(FixedPoint {
        residual,
        consensus_violation: lx.norm(),
        x,
        eta,
    })
}

/// Iterates stored contiguously: state `t` occupies `data[t*n*d .. (t+1)*n*d]`
/// in row-major worker order.
#[derive(Clone, Debug)]
pub struct Trajectory<T: Real> {
    pub n: usize,
    pub d: usize,
    pub eta: T,
    pub seed: u64,
    data: Vec<T>,
    /// Step at which the state norm exceeded the divergence threshold.
    pub diverged_at: Option<usize>,
}

impl<T: Real> Trajectory<T> {
    /// Number of stored states (initial state included).
    pub fn len(&self) -> usize {
        self.data.len() / (self.n * self.d)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn state(&self, t: usize) -> DMatrix<T> {
        let stride = self.n * self.d;
        DMatrix::from_row_slice(self.n, self.d, &self.data[t * stride..(t + 1) * stride])
    }

    pub fn last(&self) -> DMatrix<T> {
        self.state(self.len() - 1)
    }

    fn push(&mut self, x: &DMatrix<T>) {
        for i in 0..self.n {
            self.data.extend(x.row(i).iter().copied());
        }
    }
}

/// Independent noise streams, one per worker: `substream(seed, run, i)`.
pub fn worker_streams(seed: u64, run: u64, n: usize) -> Vec<ChaCha8Rng> {
    (0..n as u64).map(|i| substream(seed, run, i)).collect()
}

/// Stochastic gradient at `x`. Per worker the stream yields `d` normals and,
/// when Hessian sampling is on, one uniform draw.
fn stochastic_gradient<T: Real>(
    problem: &HetQuadProblem<T>,
    x: &DMatrix<T>,
    rngs: &mut [ChaCha8Rng],
) -> DMatrix<T> {
    let p = problem.hessian_keep_prob;
    let mut g = DMatrix::zeros(problem.n, problem.d);
    for (i, rng) in rngs.iter_mut().enumerate() {
        let mut noise = DVector::<T>::from_fn(problem.d, |_, _| gaussian(rng));
        noise *= problem.noise_level;
        let scale = if p < T::one() {
            if T::lit(rng.random::<f64>()) < p {
                T::one() / p
            } else {
                T::zero()
            }
        } else {
            T::one()
        };
        let gi =
            &problem.a[i] * x.row(i).transpose() * scale - problem.b.row(i).transpose() + noise;
        g.set_row(i, &gi.transpose());
    }
    g
}

fn dsgd_step<T: Real>(
    problem: &HetQuadProblem<T>,
    schedule: &GossipSchedule<T>,
    t: usize,
    eta: T,
    x: &DMatrix<T>,
    rngs: &mut [ChaCha8Rng],
) -> DMatrix<T> {
    let g = stochastic_gradient(problem, x, rngs);
    schedule.mix_rows(t, x) - g * eta
}

fn check_run_args<T: Real>(
    problem: &HetQuadProblem<T>,
    schedule: &GossipSchedule<T>,
    eta: T,
    x0: &DMatrix<T>,
) -> Result<()> {
    if schedule.n() != problem.n {
        return Err(Error::DimensionMismatch(format!(
            "schedule has n = {}, problem has {} workers",
            schedule.n(),
            problem.n
        )));
    }
    if x0.nrows() != problem.n || x0.ncols() != problem.d {
        return Err(Error::DimensionMismatch(
            "initial state has the wrong shape".into(),
        ));
    }
    if !(eta > T::zero()) {
        return Err(Error::invalid("learning rate must be positive"));
    }
    Ok(())
}

/// D-SGD from `x0` with caller-supplied worker streams.
pub fn run_dsgd_with_streams<T: Real>(
    problem: &HetQuadProblem<T>,
    schedule: &GossipSchedule<T>,
    eta: T,
    steps: usize,
    x0: &DMatrix<T>,
    seed: u64,
    rngs: &mut [ChaCha8Rng],
) -> Result<Trajectory<T>> {
    check_run_args(problem, schedule, eta, x0)?;
    if steps == 0 {
        return Err(Error::invalid("need at least one step"));
    }
    if rngs.len() != problem.n {
        return Err(Error::DimensionMismatch(
            "one stream per worker required".into(),
        ));
    }
    let mut traj = Trajectory {
        n: problem.n,
        d: problem.d,
        eta,
        seed,
        data: Vec::with_capacity((steps + 1) * problem.n * problem.d),
        diverged_at: None,
    };
    let mut x = x0.clone();
    traj.push(&x);
    let limit = T::lit(DIVERGENCE_NORM);
    for t in 0..steps {
        x = dsgd_step(problem, schedule, t, eta, &x, rngs);
        let norm = x.norm();
        if !norm.is_finite_value() || norm > limit {
            traj.diverged_at = Some(t + 1);
            break;
        }
        traj.push(&x);
    }
    Ok(traj)
}

pub fn run_dsgd_from<T: Real>(
    problem: &HetQuadProblem<T>,
    schedule: &GossipSchedule<T>,
    eta: T,
    steps: usize,
    x0: &DMatrix<T>,
    seed: u64,
) -> Result<Trajectory<T>> {
    let mut rngs = worker_streams(seed, 0, problem.n);
    run_dsgd_with_streams(problem, schedule, eta, steps, x0, seed, &mut rngs)
}

/// D-SGD from the origin.
pub fn run_dsgd<T: Real>(
    problem: &HetQuadProblem<T>,
    schedule: &GossipSchedule<T>,
    eta: T,
    steps: usize,
    seed: u64,
) -> Result<Trajectory<T>> {
    let x0 = DMatrix::zeros(problem.n, problem.d);
    run_dsgd_from(problem, schedule, eta, steps, &x0, seed)
}

/// `‖E‖²_M = tr(Eᵀ M E)` for an `n × d` matrix `E`.
pub fn m_norm_sq<T: Real>(e: &DMatrix<T>, m: &DMatrix<T>) -> T {
    e.dot(&(m * e))
}

/// `(1-ω)‖x - x*_η‖²_M + ω‖x - x*_η‖²`.
pub fn lyapunov<T: Real>(
    x: &DMatrix<T>,
    x_star_eta: &DMatrix<T>,
    m: &DMatrix<T>,
    omega: T,
) -> Result<T> {
    if x.shape() != x_star_eta.shape() || m.nrows() != x.nrows() || m.ncols() != x.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "x is {:?}, x*_η is {:?}, M is {:?}",
            x.shape(),
            x_star_eta.shape(),
            m.shape()
        )));
    }
    if !(omega >= T::zero() && omega <= T::one()) {
        return Err(Error::invalid(format!("ω = {omega} outside [0, 1]")));
    }
    let e = x - x_star_eta;
    Ok((T::one() - omega) * m_norm_sq(&e, m) + omega * e.norm_squared())
}

/// `σ²_M = 2[(1-ω)/n_eff + ω] · E‖∇F_ξ(x*_η) - ∇F(x*_η)‖²`.
pub fn sigma_m2<T: Real>(problem: &HetQuadProblem<T>, fp: &FixedPoint<T>, n_eff: T, omega: T) -> T {
    sigma_m2_from_moment(problem.noise_second_moment(&fp.x), n_eff, omega)
}

pub fn sigma_m2_from_moment<T: Real>(second_moment: T, n_eff: T, omega: T) -> T {
    T::lit(2.0) * ((T::one() - omega) / n_eff + omega) * second_moment
}

/// Shared setup of the descent checks: `M`, `n_eff`, `β`, the step-size cap.
struct DescentSetup<T: Real> {
    m: DMatrix<T>,
    n_eff: T,
    eta_cap: T,
    fp: FixedPoint<T>,
    sigma_m2: T,
}

fn descent_setup<T: Real>(
    problem: &HetQuadProblem<T>,
    w: &GossipMatrix<T>,
    gamma: T,
    omega: T,
    eta: T,
) -> Result<DescentSetup<T>> {
    if !(omega > T::zero() && omega <= T::one()) {
        return Err(Error::invalid(format!("ω = {omega} outside (0, 1]")));
    }
    let nm = spectral::neighborhood_matrix(w, gamma)?;
    let spec = spectral::spectrum(w)?;
    let beta = match spectral::beta_exact(&spec, gamma) {
        Ok(b) => b,
        Err(Error::DegenerateSpectrum(msg)) => return Err(Error::Precondition(msg)),
        Err(e) => return Err(e),
    };
    let eta_cap = lr_max_theorem1(problem.zeta, problem.l, nm.n_eff, beta, omega);
    if eta > eta_cap * (T::one() + T::tol(1e-12)) {
        return Err(Error::Precondition(format!(
            "η = {eta} exceeds the admissible step size {eta_cap}"
        )));
    }
    let fp = fixed_point(problem, w, eta)?;
    let sigma_m2 = sigma_m2(problem, &fp, nm.n_eff, omega);
    Ok(DescentSetup {
        m: nm.m,
        n_eff: nm.n_eff,
        eta_cap,
        fp,
        sigma_m2,
    })
}

/// Seeded start `5·N(0, 1)` used by the descent checks.
pub fn random_start<T: Real>(problem: &HetQuadProblem<T>, seed: u64) -> DMatrix<T> {
    let mut rng = substream(seed, 0, START_LANE);
    DMatrix::from_fn(problem.n, problem.d, |_, _| {
        gaussian::<T>(&mut rng) * T::lit(5.0)
    })
}

fn mean_and_se<T: Real>(values: &[T]) -> (T, T) {
    let k = T::from_usize_lossy(values.len());
    let mean = values.iter().fold(T::zero(), |a, &v| a + v) / k;
    if values.len() < 2 {
        return (mean, T::zero());
    }
    let var = values
        .iter()
        .fold(T::zero(), |a, &v| a + (v - mean) * (v - mean))
        / (k - T::one());
    (mean, (var / k).sqrt())
}

#[derive(Clone, Debug)]
pub struct DescentRow<T> {
    pub t: usize,
    /// `L^t` at the snapshot.
    pub lyapunov: T,
    /// Monte-Carlo mean of `L^{t+1}` given the snapshot.
    pub mean_next: T,
    pub std_error: T,
    /// `(1-ημ) L^t + η²σ²_M`.
    pub bound: T,
    pub passed: bool,
}

#[derive(Clone, Debug)]
pub struct Theorem1Report<T> {
    pub eta: T,
    pub eta_cap: T,
    pub mu: T,
    pub n_eff: T,
    pub sigma_m2: T,
    pub rows: Vec<DescentRow<T>>,
    pub passed: bool,
}

/// Checks the one-step expected descent of the Lyapunov function.
///
/// A reference trajectory from a seeded random start provides snapshots
/// `x^t`; from each snapshot `runs` independent one-step draws estimate
/// `E[L^{t+1} | x^t]`, which must stay below `(1-ημ)L^t + η²σ²_M + 4 SE`.
/// A step size above the admissible cap is a precondition error.
#[allow(clippy::too_many_arguments)]
pub fn verify_theorem1<T: Real>(
    problem: &HetQuadProblem<T>,
    w: &GossipMatrix<T>,
    gamma: T,
    omega: T,
    eta: T,
    steps: usize,
    runs: usize,
    seed: u64,
) -> Result<Theorem1Report<T>> {
    if runs == 0 || steps == 0 {
        return Err(Error::invalid("need at least one step and one run"));
    }
    let setup = descent_setup(problem, w, gamma, omega, eta)?;
    let schedule = GossipSchedule::Static(w.clone());
    let x0 = random_start(problem, seed);
    let reference = run_dsgd_from(problem, &schedule, eta, steps, &x0, seed)?;
    if let Some(t) = reference.diverged_at {
        return Err(Error::numeric(format!(
            "reference trajectory diverged at step {t}"
        )));
    }
    let contraction = T::one() - eta * problem.mu;
    let slack = T::tol(1e-12);
    let rows: Vec<DescentRow<T>> = (0..steps)
        .map(|t| {
            let x = reference.state(t);
            let lt = lyapunov(&x, &setup.fp.x, &setup.m, omega)?;
            let next: Vec<T> = (0..runs)
                .into_par_iter()
                .map(|r| {
                    let run = 1 + (t * runs + r) as u64;
                    let mut rngs = worker_streams(seed, run, problem.n);
                    let y = dsgd_step(problem, &schedule, t, eta, &x, &mut rngs);
                    lyapunov(&y, &setup.fp.x, &setup.m, omega)
                })
                .collect::<Result<_>>()?;
            let (mean_next, std_error) = mean_and_se(&next);
            let bound = contraction * lt + eta * eta * setup.sigma_m2;
            let passed = mean_next <= bound + T::lit(4.0) * std_error + slack * (T::one() + bound);
            Ok(DescentRow {
                t,
                lyapunov: lt,
                mean_next,
                std_error,
                bound,
                passed,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Theorem1Report {
        eta,
        eta_cap: setup.eta_cap,
        mu: problem.mu,
        n_eff: setup.n_eff,
        sigma_m2: setup.sigma_m2,
        passed: rows.iter().all(|r| r.passed),
        rows,
    })
}

#[derive(Clone, Debug)]
pub struct DistanceRow<T> {
    pub t: usize,
    /// Mean of `‖x^t - x*‖²_M` over runs.
    pub mean_distance: T,
    pub std_error: T,
    /// `2(1-ημ)^t L^0 + 2ησ²_M/μ + 2η²(1+κ)‖L_W†∇F(x*_η)‖²`.
    pub bound: T,
    pub passed: bool,
}

#[derive(Clone, Debug)]
pub struct DistanceReport<T> {
    pub rows: Vec<DistanceRow<T>>,
    pub passed: bool,
}

/// Checks the distance-to-optimum bound along full trajectories.
#[allow(clippy::too_many_arguments)]
pub fn verify_distance_bound<T: Real>(
    problem: &HetQuadProblem<T>,
    w: &GossipMatrix<T>,
    gamma: T,
    omega: T,
    eta: T,
    steps: usize,
    runs: usize,
    seed: u64,
) -> Result<DistanceReport<T>> {
    if runs == 0 || steps == 0 {
        return Err(Error::invalid("need at least one step and one run"));
    }
    let setup = descent_setup(problem, w, gamma, omega, eta)?;
    let schedule = GossipSchedule::Static(w.clone());
    let x_star = problem.true_optimum()?;
    let x_star_rows = DMatrix::from_fn(problem.n, problem.d, |_, k| x_star[k]);
    let x0 = random_start(problem, seed);
    let l0 = lyapunov(&x0, &setup.fp.x, &setup.m, omega)?;
    let pinv = laplacian_pinv(w)?;
    let het = (&pinv * problem.gradient(&setup.fp.x)).norm_squared();

    let dists: Vec<Vec<T>> = (0..runs)
        .into_par_iter()
        .map(|r| {
            let mut rngs = worker_streams(seed, r as u64, problem.n);
            let traj = run_dsgd_with_streams(problem, &schedule, eta, steps, &x0, seed, &mut rngs)?;
            if let Some(t) = traj.diverged_at {
                return Err(Error::numeric(format!("trajectory diverged at step {t}")));
            }
            Ok((0..=steps)
                .map(|t| m_norm_sq(&(traj.state(t) - &x_star_rows), &setup.m))
                .collect())
        })
        .collect::<Result<_>>()?;

    let two = T::lit(2.0);
    let contraction = T::one() - eta * problem.mu;
    let floor = two * eta * setup.sigma_m2 / problem.mu
        + two * eta * eta * (T::one() + problem.kappa()) * het;
    let mut decay = T::one();
    let mut rows = Vec::with_capacity(steps + 1);
    for t in 0..=steps {
        let column: Vec<T> = dists.iter().map(|d| d[t]).collect();
        let (mean_distance, std_error) = mean_and_se(&column);
        let bound = two * decay * l0 + floor;
        rows.push(DistanceRow {
            t,
            mean_distance,
            std_error,
            bound,
            passed: mean_distance <= bound + T::lit(4.0) * std_error,
        });
        decay *= contraction;
    }
    Ok(DistanceReport {
        passed: rows.iter().all(|r| r.passed),
        rows,
    })
}

/// Pseudo-inverse of `L_W = I - W` (zero on the eigenvalue-1 eigenspace).
pub fn laplacian_pinv<T: Real>(w: &GossipMatrix<T>) -> Result<DMatrix<T>> {
    let (lams, vecs) = spectral::eigenpairs(w)?;
    let n = w.n();
    let tol = T::tol(1e-10);
    let mut out = DMatrix::zeros(n, n);
    for (k, &l) in lams.iter().enumerate() {
        let gap = T::one() - l;
        if gap.abs() <= tol {
            continue;
        }
        let v = vecs.column(k);
        out += v * v.transpose() / gap;
    }
    Ok(out)
}

/// `‖G‖²_{L_W†} = tr(Gᵀ L_W† G)`.
fn pinv_norm_sq<T: Real>(pinv: &DMatrix<T>, g: &DMatrix<T>) -> T {
    g.dot(&(pinv * g))
}

#[derive(Clone, Debug, PartialEq)]
pub struct HetConstants<T> {
    pub p: T,
    /// `Δ²_W = ‖∇F(x*)‖²_{L_W†}`.
    pub delta2_w: T,
    pub kappa: T,
    /// Set when `∇F(x*_η)` vanishes on the whole grid (homogeneous problem); `p` is then 1.
    pub degenerate: bool,
}

/// Heterogeneity constants: `Δ²_W` and the alignment
/// `p⁻¹ = max_η ‖L_W†∇F(x*_η)‖² / ‖∇F(x*_η)‖²_{L_W†}`.
pub fn hetero_constants<T: Real>(
    problem: &HetQuadProblem<T>,
    w: &GossipMatrix<T>,
    eta_grid: &[T],
) -> Result<HetConstants<T>> {
    if eta_grid.is_empty() {
        return Err(Error::invalid("η grid is empty"));
    }
    let pinv = laplacian_pinv(w)?;
    let x_star = problem.true_optimum()?;
    let x_star_rows = DMatrix::from_fn(problem.n, problem.d, |_, k| x_star[k]);
    let g_star = problem.gradient(&x_star_rows);
    let delta2_w = pinv_norm_sq(&pinv, &g_star);

    let scale = T::one() + problem.b.norm() * problem.l;
    let mut worst: Option<T> = None;
    for &eta in eta_grid {
        let fp = fixed_point(problem, w, eta)?;
        let g = problem.gradient(&fp.x);
        if g.norm() <= T::tol(1e-12) * scale {
            continue;
        }
        let ratio = (&pinv * &g).norm_squared() / pinv_norm_sq(&pinv, &g);
        worst = Some(worst.map_or(ratio, |w: T| w.max(ratio)));
    }
    let kappa = problem.kappa();
    Ok(match worst {
        Some(r) => HetConstants {
            p: T::one() / r,
            delta2_w,
            kappa,
            degenerate: false,
        },
        None => HetConstants {
            p: T::one(),
            delta2_w,
            kappa,
            degenerate: true,
        },
    })
}

#[derive(Clone, Debug)]
pub struct MonotonicityReport<T> {
    pub etas: Vec<T>,
    /// `‖∇F(x*_η)‖²_{L_W†}` per η.
    pub values: Vec<T>,
    pub monotone: bool,
}

/// Checks that `‖∇F(x*_η)‖²_{L_W†}` does not increase along increasing `η`.
pub fn verify_monotonicity<T: Real>(
    problem: &HetQuadProblem<T>,
    w: &GossipMatrix<T>,
    eta_sequence: &[T],
) -> Result<MonotonicityReport<T>> {
    if eta_sequence.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::invalid("η sequence must be strictly increasing"));
    }
    let pinv = laplacian_pinv(w)?;
    let values = eta_sequence
        .iter()
        .map(|&eta| {
            let fp = fixed_point(problem, w, eta)?;
            Ok(pinv_norm_sq(&pinv, &problem.gradient(&fp.x)))
        })
        .collect::<Result<Vec<T>>>()?;
    let tol = T::tol(1e-10);
    let monotone = values
        .windows(2)
        .all(|p| p[1] <= p[0] + tol * p[0].abs().max(T::tol(1e-300)));
    Ok(MonotonicityReport {
        etas: eta_sequence.to_vec(),
        values,
        monotone,
    })
}

/// Worker covariance after `runs` independent trajectories from the origin.
///
/// Uses the gossiped final state `W x^T`, so the last step's noise has been
/// averaged once like all earlier noise, projected on a fixed random unit
/// vector. Normalized to unit mean diagonal.
pub fn worker_covariance<T: Real>(
    problem: &HetQuadProblem<T>,
    schedule: &GossipSchedule<T>,
    eta: T,
    steps: usize,
    runs: usize,
    seed: u64,
) -> Result<DMatrix<T>> {
    if runs < 2 {
        return Err(Error::invalid("need at least two runs"));
    }
    let mut rng = substream(seed, 0, PROJECTION_LANE);
    let mut u = DVector::<T>::from_fn(problem.d, |_, _| gaussian(&mut rng));
    u /= u.norm();
    let x0 = DMatrix::zeros(problem.n, problem.d);
    let samples: Vec<DVector<T>> = (0..runs)
        .into_par_iter()
        .map(|r| {
            let mut rngs = worker_streams(seed, r as u64, problem.n);
            let traj = run_dsgd_with_streams(problem, schedule, eta, steps, &x0, seed, &mut rngs)?;
            if let Some(t) = traj.diverged_at {
                return Err(Error::numeric(format!("trajectory diverged at step {t}")));
            }
            Ok(schedule.mix_rows(steps, &traj.last()) * &u)
        })
        .collect::<Result<_>>()?;
    let k = T::from_usize_lossy(runs);
    let mean = samples.iter().fold(DVector::zeros(problem.n), |a, s| a + s) / k;
    let mut cov = DMatrix::zeros(problem.n, problem.n);
    for s in &samples {
        let c = s - &mean;
        cov += &c * c.transpose();
    }
    cov /= k - T::one();
    let mean_var = cov.diagonal().sum() / T::from_usize_lossy(problem.n);
    if !(mean_var > T::tol(1e-300)) {
        return Err(Error::numeric(
            "worker states have zero variance (noise-free problem?)",
        ));
    }
    Ok(cov / mean_var)
}

/// Per-step diagnostics of a trajectory.
#[derive(Clone, Debug)]
pub struct SummaryRow<T> {
    pub t: usize,
    pub lyapunov: T,
    pub dist_to_opt: T,
    pub dist_to_fixed_point: T,
    pub consensus_error: T,
}

pub fn trajectory_summary<T: Real>(
    problem: &HetQuadProblem<T>,
    traj: &Trajectory<T>,
    fp: &FixedPoint<T>,
    m: &DMatrix<T>,
    omega: T,
) -> Result<Vec<SummaryRow<T>>> {
    let x_star = problem.true_optimum()?;
    let x_star_rows = DMatrix::from_fn(problem.n, problem.d, |_, k| x_star[k]);
    (0..traj.len())
        .map(|t| {
            let x = traj.state(t);
            let mean = x.row_mean();
            let centered = DMatrix::from_fn(x.nrows(), x.ncols(), |i, k| x[(i, k)] - mean[k]);
            Ok(SummaryRow {
                t,
                lyapunov: lyapunov(&x, &fp.x, m, omega)?,
                dist_to_opt: (&x - &x_star_rows).norm_squared(),
                dist_to_fixed_point: (&x - &fp.x).norm_squared(),
                consensus_error: centered.norm_squared(),
            })
        })
        .collect()
}

/// `β` passthrough for callers that only have the matrix.
pub fn beta_for<T: Real>(w: &GossipMatrix<T>, gamma: T) -> Result<Beta<T>> {
    spectral::beta_exact(&spectral::spectrum(w)?, gamma)
}
