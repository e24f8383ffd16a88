use gossiplab::dsgdsim::{make_het_quadratic, worker_covariance};
use gossiplab::effnn::{
    effnn_bound_spectral_dim, effnn_bound_spectral_gap, effnn_closed_form, effnn_limit_check,
    effnn_monte_carlo, fit_decay, min_mc_steps, model_covariance,
};
use gossiplab::spectral::{fit_spectral_dimension, spectrum};
use gossiplab::topology::{GossipMatrix, GossipSchedule, Topology, TopologyKind, WeightScheme};

fn gm(topology: Topology, scheme: WeightScheme) -> GossipMatrix<f64> {
    GossipMatrix::from_topology(&topology, scheme).unwrap()
}

#[test]
fn anchors() {
    let ring = spectrum(&gm(
        Topology::ring(32).unwrap(),
        WeightScheme::UniformNeighbor,
    ))
    .unwrap();
    assert!((effnn_closed_form(&ring, 0.0).unwrap().value - 3.0).abs() < 1e-10);
    let fc = spectrum(&gm(
        Topology::fully_connected(32).unwrap(),
        WeightScheme::Metropolis,
    ))
    .unwrap();
    let id = spectrum(&GossipMatrix::<f64>::identity(32)).unwrap();
    for g in [0.0, 0.3, 0.9, 0.999] {
        assert!((effnn_closed_form(&fc, g).unwrap().value - 32.0).abs() < 1e-9);
        assert!((effnn_closed_form(&id, g).unwrap().value - 1.0).abs() < 1e-12);
    }
    for kind in [
        TopologyKind::Ring,
        TopologyKind::Star,
        TopologyKind::Hypercube,
        TopologyKind::Chain,
    ] {
        let s = spectrum(&gm(
            Topology::build(kind, 16).unwrap(),
            WeightScheme::Metropolis,
        ))
        .unwrap();
        assert!((effnn_limit_check(&s).unwrap() - 16.0).abs() < 0.16);
    }
}

#[test]
fn bounds_sit_below_closed_form() {
    let cases = [
        (
            gm(Topology::ring(256).unwrap(), WeightScheme::UniformNeighbor),
            1.0,
        ),
        (
            gm(Topology::torus(16, 16).unwrap(), WeightScheme::Metropolis),
            2.0,
        ),
    ];
    for (w, d_fit) in &cases {
        let s = spectrum(w).unwrap();
        for gamma in [0.5, 0.9, 0.99] {
            let exact = effnn_closed_form(&s, gamma).unwrap().value;
            assert!(
                effnn_bound_spectral_gap(s.n(), s.spectral_gap, gamma).unwrap() <= exact + 1e-9
            );
            let fitted = fit_spectral_dimension(&s, *d_fit).unwrap();
            assert!(effnn_bound_spectral_dim(s.n(), &fitted, gamma).unwrap() <= exact + 1e-9);
            for d in [0.5, 1.0, 1.5, 2.0, 3.0, 4.0] {
                let profile = fit_spectral_dimension(&s, d).unwrap();
                let b = effnn_bound_spectral_dim(s.n(), &profile, gamma).unwrap();
                assert!(b <= exact + 1e-9, "d={d} γ={gamma}: {b} > {exact}");
            }
        }
    }
}

#[test]
fn monte_carlo_matches_closed_form() {
    let graphs = [
        gm(Topology::ring(32).unwrap(), WeightScheme::UniformNeighbor),
        gm(Topology::torus(4, 8).unwrap(), WeightScheme::Metropolis),
    ];
    for w in &graphs {
        let s = spectrum(w).unwrap();
        let schedule = GossipSchedule::Static(w.clone());
        for gamma in [0.0, 0.5, 0.9] {
            let exact = effnn_closed_form(&s, gamma).unwrap().value;
            let mc = effnn_monte_carlo(&schedule, gamma, min_mc_steps(gamma), 10_000, 7).unwrap();
            let se = mc.std_error.unwrap();
            assert!(
                (mc.value - exact).abs() <= 3.0 * se,
                "γ={gamma}: {} vs {exact} (se {se})",
                mc.value
            );
        }
    }
}

#[test]
fn decay_recovered_from_model_covariance() {
    let w = gm(Topology::ring(16).unwrap(), WeightScheme::UniformNeighbor);
    let cov = model_covariance(&w, 0.6).unwrap();
    let fit = fit_decay(&cov, &w).unwrap();
    assert!(fit.identifiable);
    assert!((fit.gamma - 0.6).abs() < 1e-3);
}

#[test]
fn decay_pipeline_is_seed_stable() {
    let w = gm(Topology::ring(16).unwrap(), WeightScheme::UniformNeighbor);
    let problem = make_het_quadratic::<f64>(16, 1, 0.0, 1.0, 3).unwrap();
    let schedule = GossipSchedule::Static(w.clone());
    let fits: Vec<f64> = [11u64, 12]
        .iter()
        .map(|&seed| {
            let cov = worker_covariance(&problem, &schedule, 0.05, 300, 16_000, seed).unwrap();
            fit_decay(&cov, &w).unwrap().gamma
        })
        .collect();
    println!("fitted decays {fits:?}");
    assert!((fits[0] - fits[1]).abs() <= 0.02, "{fits:?}");
    // single curvature 2.5: decay close to (1 - 2.5η)²
    assert!((fits[0] - 0.875f64.powi(2)).abs() < 0.05);
}
