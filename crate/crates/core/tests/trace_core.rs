use proptest::prelude::*;
use rgg_torus::rng::Stream;
use rgg_torus::spectral::center_adjacency;
use rgg_torus::stats::Moments;
use rgg_torus::trace_core::{self, GraphModel, Multigraph};
use rgg_torus::{torus, AdjacencyMatrix, ModelConfig, Norm};

fn closed_walk() -> impl Strategy<Value = Vec<usize>> {
    (1usize..=12, 1usize..=16).prop_flat_map(|(n, m)| {
        prop::collection::vec(0..n, m).prop_map(|mut w| {
            w.push(w[0]);
            w
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]
    #[test]
    fn core_invariants_on_random_walks(walk in closed_walk()) {
        let h = trace_core::walk_to_multigraph(&walk).unwrap();
        prop_assert!(h.is_eulerian() && h.is_connected());
        let r = trace_core::contract_core(&h).unwrap();
        let core = &r.core;
        prop_assert!(r.is_trivial() || (core.vertex_count() >= 2 && core.min_degree() >= 4), "{core:?}");
        prop_assert!(core.is_eulerian());
        prop_assert!(core.vertex_count() <= (core.edge_count() / 2).max(1));
        prop_assert_eq!(r.s, r.removed_cycles.len());
        prop_assert!(r.s_d <= r.s);
        prop_assert!(r.skeleton_identity_holds(&h));
        prop_assert_eq!(r.identity_holds(&h), r.degenerate_excess == 0);
        let again = trace_core::contract_core(core).unwrap();
        prop_assert_eq!(&again.core, core);
        prop_assert_eq!(again.s, 0);
        prop_assert!(again.contracted_chains.is_empty());
    }

    #[test]
    fn text_round_trip(walk in closed_walk()) {
        let h = trace_core::walk_to_multigraph(&walk).unwrap();
        if h.edge_count() > 0 {
            prop_assert_eq!(Multigraph::parse(&h.to_text()).unwrap(), h);
        }
    }
}

#[test]
fn walk_examples() {
    let t = trace_core::walk_to_multigraph(&[1, 2, 3, 1]).unwrap();
    assert_eq!((t.vertex_count(), t.edge_count()), (3, 3));
    let single = trace_core::walk_to_multigraph(&[1, 1, 1]).unwrap();
    assert_eq!((single.vertex_count(), single.edge_count()), (1, 0));
    let d = trace_core::walk_to_multigraph(&[1, 2, 1, 3, 1]).unwrap();
    assert_eq!((d.multiplicity(1, 2), d.multiplicity(3, 1), d.edge_count()), (2, 2, 4));
    assert!(trace_core::walk_to_multigraph(&[1, 2, 3]).is_err());
    assert!(trace_core::walk_to_multigraph(&[1]).is_err());
}

#[test]
fn core_examples() {
    let tri = trace_core::walk_to_multigraph(&[1, 2, 3, 1]).unwrap();
    let r = trace_core::contract_core(&tri).unwrap();
    assert!(r.is_trivial() && r.s == 1 && r.identity_holds(&tri));

    let d = trace_core::walk_to_multigraph(&[1, 2, 1, 3, 1]).unwrap();
    let r = trace_core::contract_core(&d).unwrap();
    assert!(r.is_trivial());
    assert_eq!((r.s, r.s_d), (2, 2));
    assert!(r.identity_holds(&d));

    let k5 = trace_core::walk_to_multigraph(&[0, 1, 2, 3, 4, 0, 2, 4, 1, 3, 0]).unwrap();
    let r = trace_core::contract_core(&k5).unwrap();
    assert_eq!(r.core, k5);
    assert_eq!(r.s, 0);
    assert!(r.contracted_edges.is_empty());
    assert_eq!(r.non_contracted_edges.len(), 10);
    assert!(r.identity_holds(&k5));

    let walk4 = trace_core::walk_to_multigraph(&[1, 2, 1, 2, 1]).unwrap();
    let r = trace_core::contract_core(&walk4).unwrap();
    assert_eq!(r.degenerate_excess, 2);
    assert!(!r.identity_holds(&walk4));
    assert!(r.skeleton_identity_holds(&walk4));

    // the contracted chain 1-2-0 joins a triple bundle, which then is a degenerate cycle
    let bundle = trace_core::walk_to_multigraph(&[1, 2, 0, 1, 0, 1]).unwrap();
    let r = trace_core::contract_core(&bundle).unwrap();
    assert!(r.is_trivial(), "{r:?}");
    assert_eq!(r.contracted_chains.len(), 1);
    assert!(r.skeleton_identity_holds(&bundle));

    let open = Multigraph::new([0, 1, 2], &[(0, 1, 1), (1, 2, 1)]).unwrap();
    assert!(trace_core::contract_core(&open).is_err());
}

#[test]
fn trace_power_examples() {
    let g = torus::sample_gnp_from(9, 0.4, Stream::root(1));
    let a = center_adjacency(&g, 0.0);
    assert!((trace_core::trace_power(&a, 2).unwrap() - 2.0 * g.edge_count() as f64).abs() < 1e-12);
    assert_eq!(trace_core::trace_power(&nalgebra::DMatrix::zeros(4, 4), 4).unwrap(), 0.0);
    assert!(trace_core::trace_power(&a, 3).is_err());
    assert!(trace_core::trace_power(&a, 0).is_err());
}

#[test]
fn brute_walk_examples() {
    assert!((trace_core::brute_walk_sum(&AdjacencyMatrix::empty(1), 0.3, 4).unwrap() - 0.3f64.powi(4)).abs() < 1e-15);
    assert_eq!(trace_core::brute_walk_sum(&AdjacencyMatrix::complete(2), 0.0, 2).unwrap(), 2.0);
    assert!(trace_core::brute_walk_sum(&AdjacencyMatrix::empty(100), 0.5, 4).is_err());
}

#[test]
fn trace_power_matches_walk_enumeration() {
    let mut r = Stream::root(2).rng();
    use rand::Rng;
    for t in 0..50u64 {
        let n = r.random_range(1..=5);
        let m = [2, 4][t as usize % 2];
        let p: f64 = r.random_range(0.0..1.0);
        let g = torus::sample_gnp_from(n, p, Stream::root(3).child(t));
        let fast = trace_core::trace_power(&center_adjacency(&g, p), m).unwrap();
        let slow = trace_core::brute_walk_sum(&g, p, m).unwrap();
        assert!((fast - slow).abs() <= 1e-9 * slow.abs().max(1.0), "n={n} m={m}: {fast} vs {slow}");
    }
}

#[test]
fn gnp_second_moment() {
    let cfg = ModelConfig::new(60, 4, 0.3, Norm::Lq(2), 4).unwrap();
    let r = trace_core::empirical_trace_moment_of(&cfg, 2, 400, GraphModel::Gnp).unwrap();
    let (n, p) = (60.0, 0.3);
    let exact = n * (n - 1.0) * p * (1.0 - p) + n * p * p;
    assert!((r.mean / exact - 1.0).abs() <= 0.05, "{} vs {exact}", r.mean);
}

#[test]
fn small_dimension_amplifies_fourth_moment() {
    let moment = |d| {
        let cfg = ModelConfig::new(1000, d, 0.5, Norm::Lq(2), 5).unwrap();
        trace_core::empirical_trace_moment(&cfg, 4, 4).unwrap().mean
    };
    let ratio = moment(16) / moment(256);
    assert!(ratio >= 4.0, "ratio {ratio}");
}

#[test]
fn three_vertex_moment_matches_enumeration() {
    let cfg = ModelConfig::new(3, 4, 0.4, Norm::Lq(1), 6).unwrap();
    let r = trace_core::empirical_trace_moment(&cfg, 4, 10_000).unwrap();
    let tau = rgg_torus::calibration::experiment_threshold(&cfg).unwrap().tau;
    let mut brute = Moments::default();
    for t in 0..10_000 {
        let g = torus::build_rgg(&torus::sample_positions_from(3, 4, Stream::root(99).child(t)), tau, cfg.norm);
        brute.push(trace_core::brute_walk_sum(&g, 0.4, 4).unwrap());
    }
    let se = r.stderr.hypot(brute.stderr());
    assert!((r.mean - brute.mean()).abs() <= 3.0 * se, "{} vs {} (se {se})", r.mean, brute.mean());
}

#[test]
fn regime_prediction_examples() {
    let cfg = ModelConfig::new(100, 16, 0.5, Norm::Lq(2), 0).unwrap();
    assert!((trace_core::regime_prediction(&cfg, 2) - (16.0 * 12.5f64.powi(2) + 100.0 * 50.0)).abs() < 1e-9);
    let linf = ModelConfig { norm: Norm::Linf, ..cfg };
    assert!((trace_core::regime_prediction(&linf, 2) - (256.0 * 3.125f64.powi(2) + 100.0 * 50.0)).abs() < 1e-9);
}
