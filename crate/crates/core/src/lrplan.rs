//! Learning-rate planning from the descent conditions.
//!
//! A step size `η` is admissible for decay `γ` and Lyapunov weight `ω` when
//! `η ≤ min(β(γ)ω/L, 1 / (4((1/n_W(γ) + ω)ζ + L)))`. The planners below pick
//! `γ` (hence `n_W` and `β`) to make that cap as large as possible.

use serde::Serialize;

use crate::effnn::effnn_closed_form;
use crate::spectral::{beta_exact, beta_simplified, Beta, SpectrumInfo};
use crate::{Error, Real, Result};

/// Step-size cap for given constants.
pub fn lr_max_theorem1<T: Real>(zeta: T, l: T, n_eff: T, beta: Beta<T>, omega: T) -> T {
    noise_side(zeta, l, n_eff, omega).min(consensus_side(l, beta, omega))
}

fn noise_side<T: Real>(zeta: T, l: T, n_eff: T, omega: T) -> T {
    T::one() / (T::lit(4.0) * ((T::one() / n_eff + omega) * zeta + l))
}

fn consensus_side<T: Real>(l: T, beta: Beta<T>, omega: T) -> T {
    match beta {
        Beta::Finite(b) => b * omega / l,
        Beta::Unbounded => T::max_value().unwrap_or_else(T::one),
    }
}

/// `(8ζ/n_eff + 4L)⁻¹`.
pub fn cor1_learning_rate<T: Real>(zeta: T, l: T, n_eff: T) -> T {
    T::one() / (T::lit(8.0) * zeta / n_eff + T::lit(4.0) * l)
}

/// Cap without any communication benefit: `1 / (4(2ζ + L))`.
pub fn solo_cap<T: Real>(zeta: T, l: T) -> T {
    T::one() / (T::lit(4.0) * (T::lit(2.0) * zeta + l))
}

/// Step size of the spectral-gap based analysis: `(1-λ₂) / (8ζ + 4L)`.
pub fn prior_work_lr<T: Real>(spectral_gap: T, zeta: T, l: T) -> T {
    spectral_gap / (T::lit(8.0) * zeta + T::lit(4.0) * l)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Large,
    Small,
}

/// Which side of the step-size cap is the smaller one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Binding {
    /// `β(γ)ω/L`
    Consensus,
    /// `1 / (4((1/n_W + ω)ζ + L))`
    Noise,
}

impl std::fmt::Display for Binding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Binding::Consensus => "consensus",
            Binding::Noise => "noise",
        })
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::Large => "large",
            Regime::Small => "small",
        })
    }
}

fn binding_of<T: Real>(zeta: T, l: T, n_eff: T, beta: Beta<T>, omega: T) -> Binding {
    if consensus_side(l, beta, omega) < noise_side(zeta, l, n_eff, omega) {
        Binding::Consensus
    } else {
        Binding::Noise
    }
}

/// How `β(γ)` is obtained from the spectrum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BetaMode {
    /// `(1 - γλ₂)/4`, assuming `λ_min(W) ≥ 1/2`.
    #[default]
    Simplified,
    /// Minimum over the spectrum; needs positive eigenvalues.
    Exact,
}

fn beta_of<T: Real>(spectrum: &SpectrumInfo<T>, gamma: T, mode: BetaMode) -> Result<Beta<T>> {
    match mode {
        BetaMode::Simplified => Ok(Beta::Finite(beta_simplified(spectrum.lambda2, gamma))),
        BetaMode::Exact => beta_exact(spectrum, gamma),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LrPlan<T: Real> {
    pub eta: T,
    pub gamma: T,
    pub n_eff: T,
    pub omega: T,
    pub regime: Regime,
    pub binding: Binding,
    /// The `β(γ)` the plan was built with.
    pub beta: Beta<T>,
    pub zeta: T,
    pub l: T,
    /// Unclamped closed-form step size, when the planner has one.
    pub closed_form_eta: Option<T>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LrPlanRecord {
    pub eta: f64,
    pub gamma: f64,
    pub n_eff: f64,
    pub omega: f64,
    pub regime: Regime,
    pub binding_constraint: Binding,
}

impl<T: Real> LrPlan<T> {
    /// Cap recomputed from the plan's own constants.
    pub fn cap(&self) -> T {
        lr_max_theorem1(self.zeta, self.l, self.n_eff, self.beta, self.omega)
    }

    /// `η ≤ cap` up to a relative `1e-12`.
    pub fn is_admissible(&self) -> bool {
        self.eta <= self.cap() * (T::one() + T::tol(1e-12))
    }

    pub fn record(&self) -> LrPlanRecord {
        LrPlanRecord {
            eta: self.eta.as_f64(),
            gamma: self.gamma.as_f64(),
            n_eff: self.n_eff.as_f64(),
            omega: self.omega.as_f64(),
            regime: self.regime,
            binding_constraint: self.binding,
        }
    }
}

fn check_constants<T: Real>(zeta: T, l: T) -> Result<()> {
    if !(l > T::zero()) || !(zeta > T::zero()) {
        return Err(Error::invalid(format!(
            "need ζ, L > 0 (got ζ = {zeta}, L = {l})"
        )));
    }
    Ok(())
}

/// 200 decay values: 100 evenly spaced in `[0, 0.9)` and 100 with `1-γ`
/// log-spaced from `0.1` down to `1e-6`.
pub fn gamma_grid<T: Real>() -> Vec<T> {
    let linear = (0..100).map(|k| T::lit(0.009 * k as f64));
    let log = (0..100).map(|k| T::one() - T::lit(10f64.powf(-1.0 - 5.0 * k as f64 / 99.0)));
    linear.chain(log).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint<T> {
    pub gamma: T,
    pub n_eff: T,
    pub beta: Beta<T>,
    /// Cap with `ω = 1/n_eff`.
    pub eta: T,
    pub binding: Binding,
}

/// Step-size cap along `gammas` with `ω = 1/n_W(γ)`.
pub fn lr_sweep<T: Real>(
    spectrum: &SpectrumInfo<T>,
    zeta: T,
    l: T,
    gammas: &[T],
    mode: BetaMode,
) -> Result<Vec<SweepPoint<T>>> {
    check_constants(zeta, l)?;
    gammas
        .iter()
        .map(|&gamma| {
            let n_eff = effnn_closed_form(spectrum, gamma)?.value;
            let beta = beta_of(spectrum, gamma, mode)?;
            let omega = T::one() / n_eff;
            Ok(SweepPoint {
                gamma,
                n_eff,
                beta,
                eta: lr_max_theorem1(zeta, l, n_eff, beta, omega),
                binding: binding_of(zeta, l, n_eff, beta, omega),
            })
        })
        .collect()
}

/// Largest step size of the form `(8ζ/n_W + 4L)⁻¹` over decays that satisfy
/// `4 β(γ) (2ζ/n_W + L) / n_W ≥ L`.
///
/// With `ω = 1/n_W` this condition says the consensus side of the cap is not
/// the smaller one. If no grid decay qualifies, the solo plan `γ = 0, ω = 1,
/// η = 1/(4(2ζ + L))` is returned with a warning.
pub fn lr_corollary1<T: Real>(
    spectrum: &SpectrumInfo<T>,
    zeta: T,
    l: T,
    mode: BetaMode,
) -> Result<LrPlan<T>> {
    check_constants(zeta, l)?;
    if spectrum.unit_multiplicity() > 1 {
        return Err(Error::Disconnected(format!(
            "{} eigenvalues at 1",
            spectrum.unit_multiplicity()
        )));
    }
    let four = T::lit(4.0);
    let two = T::lit(2.0);
    let mut best: Option<LrPlan<T>> = None;
    for gamma in gamma_grid::<T>() {
        let n_eff = effnn_closed_form(spectrum, gamma)?.value;
        let beta = beta_of(spectrum, gamma, mode)?;
        let feasible = match beta {
            Beta::Unbounded => true,
            Beta::Finite(b) => four * b * (two * zeta / n_eff + l) / n_eff >= l,
        };
        if !feasible {
            continue;
        }
        let eta = cor1_learning_rate(zeta, l, n_eff);
        if best.as_ref().is_none_or(|p| eta > p.eta) {
            let omega = T::one() / n_eff;
            best = Some(LrPlan {
                eta,
                gamma,
                n_eff,
                omega,
                regime: Regime::Large,
                binding: binding_of(zeta, l, n_eff, beta, omega),
                beta,
                zeta,
                l,
                closed_form_eta: Some(eta),
                warnings: Vec::new(),
            });
        }
    }
    let solo = {
        let gamma = T::zero();
        let n_eff = effnn_closed_form(spectrum, gamma)?.value;
        let beta = beta_of(spectrum, gamma, mode)?;
        let omega = T::one();
        LrPlan {
            eta: solo_cap(zeta, l),
            gamma,
            n_eff,
            omega,
            regime: Regime::Large,
            binding: binding_of(zeta, l, n_eff, beta, omega),
            beta,
            zeta,
            l,
            closed_form_eta: None,
            warnings: vec![
                "no decay on the grid satisfies the neighborhood condition; solo plan".into(),
            ],
        }
    };
    let plan = match best {
        Some(p) if p.eta >= solo.eta => p,
        _ => solo,
    };
    if !plan.is_admissible() {
        return Err(Error::numeric(format!(
            "planned η = {} exceeds its cap {}",
            plan.eta,
            plan.cap()
        )));
    }
    Ok(plan)
}

/// Default `ζ/L` ratio below which the closed form is flagged.
pub const COR2_RATIO_THRESHOLD: f64 = 10.0;

/// Closed-form plan for graphs of spectral dimension `d_s > 2` and `ζ ≫ L`.
///
/// Targets `n_W = (c_s(d_s-2)ζ/L)^{1/3}` and reports the closed-form
/// `η = (1/8)(c_s(d_s-2)/(ζ²L))^{1/3}` in `closed_form_eta`. That value
/// equals the consensus side of the cap; the noise side is smaller by the
/// factor `1 + n_W L/(2ζ)`, so the plan's `η` is the cap itself. `β` comes
/// from the spectral-dimension bound, `β = c_s(d_s-2)/(8 n_W)`, and the
/// implied decay is `γ = 1 - c_s(d_s-2)/(2 n_W)`.
pub fn lr_corollary2<T: Real>(
    zeta: T,
    l: T,
    d_s: T,
    c_s: T,
    ratio_threshold: Option<T>,
) -> Result<LrPlan<T>> {
    check_constants(zeta, l)?;
    let two = T::lit(2.0);
    let eight = T::lit(8.0);
    if !(d_s > two) {
        return Err(Error::invalid(format!(
            "closed form needs d_s > 2 (got {d_s}); use the grid planner instead"
        )));
    }
    if !(c_s > T::zero()) {
        return Err(Error::invalid("c_s must be positive"));
    }
    let third = T::one() / T::lit(3.0);
    let k = c_s * (d_s - two);
    let n_eff = (k * zeta / l).powf(third);
    let closed = (k / (zeta * zeta * l)).powf(third) / eight;
    let beta = Beta::Finite(k / (eight * n_eff));
    let omega = T::one() / n_eff;
    let gamma = T::one() - k / (two * n_eff);

    let mut warnings = Vec::new();
    let threshold = ratio_threshold.unwrap_or_else(|| T::lit(COR2_RATIO_THRESHOLD));
    if zeta / l < threshold {
        warnings.push(format!(
            "ζ/L = {} is below {threshold}; the closed form assumes ζ ≫ L",
            zeta / l
        ));
    }
    if !(gamma >= T::lit(0.5)) {
        warnings.push(format!(
            "implied decay {gamma} is below 1/2, outside the bound's hypotheses"
        ));
    }
    if n_eff < T::one() {
        warnings.push(format!("target n_W = {n_eff} is below 1"));
    }
    let eta = closed.min(lr_max_theorem1(zeta, l, n_eff, beta, omega));
    Ok(LrPlan {
        eta,
        gamma,
        n_eff,
        omega,
        regime: Regime::Large,
        binding: binding_of(zeta, l, n_eff, beta, omega),
        beta,
        zeta,
        l,
        closed_form_eta: Some(closed),
        warnings,
    })
}

/// Three orders-of-magnitude terms of a final-rate bound, kept separate.
#[derive(Clone, Debug, PartialEq)]
pub struct RateTerms<T> {
    pub variance: T,
    pub heterogeneity: T,
    pub exponential: T,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cor3Report<T> {
    pub terms: RateTerms<T>,
    /// `min(√(d_s T / (L c_s)), n)`
    pub n_small: T,
    /// `min((c_s d_s ζ / L)^{1/3}, n)`
    pub n_large: T,
}

/// Inputs shared by both final-rate reports.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateInputs<T> {
    pub horizon: T,
    pub mu: T,
    pub l: T,
    pub zeta: T,
    pub n: usize,
    pub sigma2: T,
}

/// Final-rate terms with tuned neighborhoods for a graph of dimension `d_s`.
pub fn final_rate_cor3<T: Real>(
    inputs: &RateInputs<T>,
    d_s: T,
    c_s: T,
    delta2_w: T,
    p: T,
) -> Result<Cor3Report<T>> {
    let RateInputs {
        horizon,
        mu,
        l,
        zeta,
        n,
        sigma2,
    } = *inputs;
    if !(horizon >= T::one()) {
        return Err(Error::invalid("horizon T must be at least 1"));
    }
    check_constants(zeta, l)?;
    if !(mu > T::zero()) || !(p > T::zero()) {
        return Err(Error::invalid("need μ > 0 and p > 0"));
    }
    let mut warnings = Vec::new();
    if !(d_s > T::lit(2.0)) {
        warnings.push(format!(
            "d_s = {d_s} ≤ 2 is outside the hypotheses of these targets"
        ));
    }
    let nf = T::from_usize_lossy(n);
    let n_small = (d_s * horizon / (l * c_s)).sqrt().min(nf);
    let n_large = (c_s * d_s * zeta / l).powf(T::one() / T::lit(3.0)).min(nf);
    let terms = RateTerms {
        variance: sigma2 / (mu * mu * horizon * n_small),
        heterogeneity: l * delta2_w / (mu * mu * mu * p * horizon * horizon),
        exponential: (-n_large * mu * horizon / zeta).exp(),
        warnings,
    };
    Ok(Cor3Report {
        terms,
        n_small,
        n_large,
    })
}

/// Terms of the spectral-gap based bound. The exponential term decays as
/// `exp(-(1-λ₂) μ T / ζ)`. A zero gap gives infinite polynomial terms.
pub fn comparison_rate_prior<T: Real>(
    inputs: &RateInputs<T>,
    spectral_gap: T,
    delta2: T,
) -> Result<RateTerms<T>> {
    let RateInputs {
        horizon,
        mu,
        l,
        zeta,
        n,
        sigma2,
    } = *inputs;
    if !(horizon >= T::one()) {
        return Err(Error::invalid("horizon T must be at least 1"));
    }
    check_constants(zeta, l)?;
    if !(spectral_gap >= T::zero() && spectral_gap <= T::lit(2.0)) {
        return Err(Error::invalid(format!(
            "spectral gap {spectral_gap} out of range"
        )));
    }
    let mut warnings = Vec::new();
    let (variance, heterogeneity) = if spectral_gap == T::zero() {
        warnings.push("zero spectral gap: the bound is vacuous".into());
        let inf = T::max_value().unwrap_or_else(T::one);
        (inf, inf)
    } else {
        let nf = T::from_usize_lossy(n);
        (
            sigma2 / (mu * mu * horizon) * (T::one() / nf + l / (mu * spectral_gap * horizon)),
            l * delta2 / (mu * mu * mu * spectral_gap * spectral_gap * horizon * horizon),
        )
    };
    Ok(RateTerms {
        variance,
        heterogeneity,
        exponential: (-spectral_gap * mu * horizon / zeta).exp(),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::spectrum;
    use crate::topology::{GossipMatrix, Topology, TopologyKind, WeightScheme};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn lazy_spec(kind: TopologyKind, n: usize) -> SpectrumInfo<f64> {
        let w = GossipMatrix::<f64>::from_topology(
            &Topology::build(kind, n).unwrap(),
            WeightScheme::Metropolis,
        )
        .unwrap()
        .lazy();
        spectrum(&w).unwrap()
    }

    #[test]
    fn cap_formula_cases() {
        let (z, l) = (50.0, 2.0);
        assert_abs_diff_eq!(
            lr_max_theorem1(z, l, 1.0, Beta::Unbounded, 1.0),
            1.0 / (4.0 * (2.0 * z + l)),
            epsilon = 1e-15
        );
        let n = 8.0;
        let cap = lr_max_theorem1(z, l, n, Beta::Unbounded, 1.0 / n);
        assert_abs_diff_eq!(cap, cor1_learning_rate(z, l, n), epsilon = 1e-15);
        // more neighbors, larger cap while noise dominates
        for n in [1.0, 2.0, 4.0, 8.0] {
            let a = lr_max_theorem1(z, l, n, Beta::Unbounded, 1.0 / n);
            let b = lr_max_theorem1(z, l, 2.0 * n, Beta::Unbounded, 1.0 / (2.0 * n));
            assert!(b > a);
        }
        assert_abs_diff_eq!(
            lr_max_theorem1(z, l, n, Beta::Finite(0.01), 0.5),
            0.01 * 0.5 / l,
            epsilon = 1e-15
        );
    }

    #[test]
    fn cor1_arithmetic() {
        assert_abs_diff_eq!(
            cor1_learning_rate(100.0, 1.0, 32.0),
            1.0 / 29.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(solo_cap(1.0, 1.0), 1.0 / 12.0, epsilon = 1e-15);
    }

    #[test]
    fn grid_is_dense_near_one() {
        let g = gamma_grid::<f64>();
        assert_eq!(g.len(), 200);
        assert_eq!(g.iter().filter(|&&x| x >= 0.9 - 1e-12).count(), 100);
        assert!(g.windows(2).all(|p| p[1] > p[0]));
        assert_abs_diff_eq!(*g.last().unwrap(), 1.0 - 1e-6, epsilon = 1e-15);
    }

    #[test]
    fn cor1_plans_are_admissible_and_beat_solo() {
        for (kind, n) in [
            (TopologyKind::Ring, 32),
            (TopologyKind::Torus2d { rows: 4, cols: 8 }, 32),
            (TopologyKind::FullyConnected, 16),
            (TopologyKind::Hypercube, 16),
        ] {
            let s = lazy_spec(kind, n);
            for ratio in [1.0, 10.0, 100.0] {
                for mode in [BetaMode::Simplified, BetaMode::Exact] {
                    let plan = lr_corollary1(&s, ratio, 1.0, mode).unwrap();
                    assert!(plan.is_admissible(), "{kind} ζ/L={ratio}");
                    assert!(plan.eta >= solo_cap(ratio, 1.0) * (1.0 - 1e-15));
                }
            }
        }
    }

    #[test]
    fn cor1_low_noise_stays_near_solo() {
        let s = lazy_spec(TopologyKind::Ring, 32);
        let plan = lr_corollary1(&s, 1.0, 1.0, BetaMode::Simplified).unwrap();
        assert!(plan.eta >= 1.0 / 12.0 && plan.eta <= 1.0 / 8.0 + 1e-15);
        assert!(plan.n_eff <= 2.0 + 1e-9);
    }

    #[test]
    fn cor1_rejects_disconnected() {
        let s = spectrum(&GossipMatrix::<f64>::identity(4)).unwrap();
        assert!(matches!(
            lr_corollary1(&s, 10.0, 1.0, BetaMode::Simplified),
            Err(Error::Disconnected(_))
        ));
    }

    #[test]
    fn sweep_has_interior_maximum_on_ring() {
        let s = lazy_spec(TopologyKind::Ring, 32);
        let pts = lr_sweep(&s, 100.0, 1.0, &gamma_grid::<f64>(), BetaMode::Simplified).unwrap();
        let k = (0..pts.len())
            .max_by(|&a, &b| pts[a].eta.total_cmp(&pts[b].eta))
            .unwrap();
        assert!(k > 0 && k + 1 < pts.len());
        assert!(pts[k].eta > pts[0].eta && pts[k].eta > pts.last().unwrap().eta);
        assert_eq!(pts[0].binding, Binding::Noise);
        assert_eq!(pts.last().unwrap().binding, Binding::Consensus);
    }

    #[test]
    fn cor2_example() {
        let plan = lr_corollary2(1000.0, 1.0, 3.0, 1.0, None).unwrap();
        assert_abs_diff_eq!(plan.n_eff, 10.0, epsilon = 1e-12);
        let closed = plan.closed_form_eta.unwrap();
        assert_abs_diff_eq!(closed, 1.25e-3, epsilon = 1e-15);
        assert_abs_diff_eq!(closed, plan.n_eff / (8.0 * 1000.0), epsilon = 1e-15);
        assert_abs_diff_eq!(plan.gamma, 0.95, epsilon = 1e-12);
        assert!(plan.is_admissible());
        assert!(plan.warnings.is_empty());
        // clamped by the factor 1 + n L / (2ζ)
        assert_abs_diff_eq!(closed / plan.eta, 1.0 + 10.0 / 2000.0, epsilon = 1e-12);
        assert!(lr_corollary2(1000.0, 1.0, 2.0, 1.0, None).is_err());
        assert!(!lr_corollary2(5.0, 1.0, 3.0, 1.0, None)
            .unwrap()
            .warnings
            .is_empty());
    }

    #[test]
    fn cor2_matches_noise_rate_when_l_negligible() {
        let plan = lr_corollary2::<f64>(1e9, 1e-3, 4.0, 2.0, None).unwrap();
        let closed = plan.closed_form_eta.unwrap();
        let reference = 1.0 / (8.0 * 1e9 / plan.n_eff);
        assert!((closed / reference - 1.0).abs() < 1e-12);
        assert!((plan.eta / closed - 1.0).abs() < 1e-6);
    }

    fn inputs(t: f64, n: usize) -> RateInputs<f64> {
        RateInputs {
            horizon: t,
            mu: 0.1,
            l: 1.0,
            zeta: 100.0,
            n,
            sigma2: 1.0,
        }
    }

    #[test]
    fn cor3_terms() {
        let r = final_rate_cor3(&inputs(1e12, 64), 3.0, 1.0, 0.0, 0.5).unwrap();
        assert_eq!(r.n_small, 64.0);
        assert_eq!(r.terms.heterogeneity, 0.0);
        let a = final_rate_cor3(&inputs(100.0, 1 << 20), 3.0, 1.0, 1.0, 0.5).unwrap();
        let b = final_rate_cor3(&inputs(200.0, 1 << 20), 3.0, 1.0, 1.0, 0.5).unwrap();
        assert!(a.n_small < (1 << 20) as f64);
        assert!(a.terms.variance / b.terms.variance > 2.0);
        let low = final_rate_cor3(&inputs(100.0, 64), 1.5, 1.0, 1.0, 0.5).unwrap();
        assert!(!low.terms.warnings.is_empty());
    }

    #[test]
    fn prior_rate_degrades_with_ring_size() {
        let mut prev_prior = 0.0;
        for n in [32usize, 128, 512] {
            let w = GossipMatrix::<f64>::from_topology(
                &Topology::ring(n).unwrap(),
                WeightScheme::UniformNeighbor,
            )
            .unwrap();
            let s = spectrum(&w).unwrap();
            let inp = inputs(1000.0, n);
            let prior = comparison_rate_prior(&inp, s.spectral_gap, 1.0).unwrap();
            assert!(prior.exponential > prev_prior);
            prev_prior = prior.exponential;
            let ours = final_rate_cor3(&inp, 1.0, 1.5, 1.0, 0.5).unwrap();
            assert!(ours.terms.exponential < 0.5);
        }
        assert!(prev_prior > 0.99);
        let zero = comparison_rate_prior(&inputs(10.0, 4), 0.0, 1.0).unwrap();
        assert_eq!(zero.exponential, 1.0);
        assert!(zero.variance > 1e300);
    }

    #[test]
    fn fully_connected_terms_comparable() {
        let inp = inputs(1000.0, 32);
        let prior = comparison_rate_prior(&inp, 1.0, 1.0).unwrap();
        let ours = final_rate_cor3(&inp, 3.0, 1.0, 1.0, 1.0).unwrap();
        let (a, b) = (prior.exponential.ln(), ours.terms.exponential.ln());
        assert!(b <= a && b / a < 32.0);
    }

    proptest! {
        #[test]
        fn cap_is_min_of_sides(z in 0.1f64..1e3, l in 0.01f64..10.0, n in 1.0f64..1e3, b in 1e-4f64..0.5, w in 1e-3f64..1.0) {
            let cap = lr_max_theorem1(z, l, n, Beta::Finite(b), w);
            prop_assert!(cap <= b * w / l && cap <= 1.0 / (4.0 * ((1.0 / n + w) * z + l)));
            prop_assert!(cap == b * w / l || cap == 1.0 / (4.0 * ((1.0 / n + w) * z + l)));
        }

        #[test]
        fn ring_plans_beat_prior_work(n in 8usize..64, ratio in 10.0f64..1e3) {
            let s = lazy_spec(TopologyKind::Ring, n);
            let plan = lr_corollary1(&s, ratio, 1.0, BetaMode::Simplified).unwrap();
            prop_assert!(plan.is_admissible());
            prop_assert!(plan.eta / prior_work_lr(s.spectral_gap, ratio, 1.0) >= 1.0);
        }
    }
}
