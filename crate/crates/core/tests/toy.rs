use gossiplab::quadrates::{
    optimal_lr_toy, rate_alone, rate_centralized, rate_oracle, solve_rate, time_to_target,
};
use gossiplab::spectral::{spectrum, SpectrumInfo};
use gossiplab::topology::{GossipMatrix, Topology, TopologyKind, WeightScheme};

fn gm(topology: Topology) -> GossipMatrix<f64> {
    GossipMatrix::from_topology(&topology, WeightScheme::UniformNeighbor).unwrap()
}

fn ring_spec(n: usize) -> SpectrumInfo<f64> {
    spectrum(&gm(Topology::ring(n).unwrap())).unwrap()
}

#[test]
fn solver_agrees_with_covariance_oracle() {
    let graphs = [
        gm(Topology::ring(4).unwrap()),
        gm(Topology::ring(8).unwrap()),
        gm(Topology::torus(3, 3).unwrap()),
        gm(Topology::fully_connected(8).unwrap()),
    ];
    let mut worst = 0.0f64;
    for w in &graphs {
        let s = spectrum(w).unwrap();
        for eta in [0.01, 0.05, 0.1] {
            for zeta in [3.0, 12.0] {
                let sol = solve_rate(&s, eta, zeta).unwrap();
                assert!(sol.converged);
                let oracle = rate_oracle(w, eta, zeta, 1_000_000).unwrap();
                worst = worst.max((sol.r - oracle).abs());
            }
        }
    }
    assert!(worst < 1e-6, "max deviation {worst}");
}

#[test]
fn pinned_ring8_oracle() {
    let w = gm(Topology::ring(8).unwrap());
    let r = rate_oracle(&w, 0.05, 12.0, 1_000_000).unwrap();
    assert!((r - 0.09400867510398823).abs() < 1e-9);
}

#[test]
fn closed_forms_recovered() {
    let solo = spectrum(&GossipMatrix::<f64>::identity(6)).unwrap();
    let fc = spectrum(&gm(Topology::fully_connected(32).unwrap())).unwrap();
    for k in 1..40 {
        let eta = 0.005 * k as f64;
        for zeta in [1.5, 3.0, 12.0] {
            let a = solve_rate(&solo, eta, zeta).unwrap();
            if a.converged {
                assert!((a.r - rate_alone(eta, zeta)).abs() < 1e-12);
            }
            let c = solve_rate(&fc, eta, zeta).unwrap();
            assert!(c.converged);
            assert!((c.r - rate_centralized(eta, zeta, 32)).abs() < 1e-12);
        }
    }
    let (eta, _) = optimal_lr_toy(&solo, 12.0).unwrap();
    assert!((eta - 1.0 / 12.0).abs() < 1e-5);
    let (eta, r) = optimal_lr_toy(&fc, 12.0).unwrap();
    assert!((eta - 32.0 / 43.0).abs() < 1e-5);
    assert!((r - 32.0 / 43.0).abs() < 1e-9);
}

#[test]
fn larger_rings_help_until_saturation() {
    let rates: Vec<f64> = [4usize, 8, 16, 32, 64]
        .iter()
        .map(|&n| optimal_lr_toy(&ring_spec(n), 12.0).unwrap().1)
        .collect();
    for p in rates.windows(2) {
        assert!(p[1] >= p[0] - 1e-12, "{rates:?}");
    }
    let first = rates[1] - rates[0];
    let last = rates[4] - rates[3];
    assert!(first > 0.0 && last <= 0.01 * first, "{rates:?}");
}

#[test]
fn ring_beats_solo_with_larger_step() {
    let solo = spectrum(&GossipMatrix::<f64>::identity(32)).unwrap();
    let ring = ring_spec(32);
    let (eta_s, r_s) = optimal_lr_toy(&solo, 12.0).unwrap();
    let (eta_r, r_r) = optimal_lr_toy(&ring, 12.0).unwrap();
    assert!(eta_r > eta_s && eta_r < 32.0 / 43.0);
    assert!(r_r > r_s);
    assert!(time_to_target(r_r, 1e-3).unwrap() < time_to_target(r_s, 1e-3).unwrap());
}

#[test]
fn any_topology_is_at_least_solo() {
    for kind in [
        TopologyKind::Star,
        TopologyKind::Chain,
        TopologyKind::Hypercube,
        TopologyKind::BinaryTree,
    ] {
        let w = GossipMatrix::<f64>::from_topology(
            &Topology::build(kind, 16).unwrap(),
            WeightScheme::Metropolis,
        )
        .unwrap();
        let s = spectrum(&w).unwrap();
        for eta in [0.02, 0.08, 0.2] {
            let sol = solve_rate(&s, eta, 12.0).unwrap();
            let solo = rate_alone(eta, 12.0);
            if solo > 0.0 {
                assert!(sol.r >= solo - 1e-12, "{kind} η={eta}");
            }
            assert!(sol.r <= rate_centralized(eta, 12.0, 16) + 1e-12);
        }
    }
}
