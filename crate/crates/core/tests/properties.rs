mod support;

use beamscore::hmgat::{HmgalLayer, Topology};
use beamscore::numerics::{Graph, ParamStore};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::checks;
use support::*;

#[test]
fn layers_match_scalar_oracles() {
    let w = checks::oracle_errors(10).unwrap();
    assert!(w.iter().all(|&e| e < checks::ORACLE_TOL), "{w:?}");
}

#[test]
fn micro_model_gradients() {
    for (err, name) in checks::gradient_errors().unwrap() {
        assert!(err < checks::GRAD_TOL, "{name}: {err:e}");
    }
}

#[test]
fn users_permute_through_both_networks() {
    let [out, rate, den, den_rate] = checks::equivariance_errors(20).unwrap();
    assert!(out < checks::PERMUTE_TOL && den < checks::PERMUTE_TOL, "{out:e} {den:e}");
    assert!(rate < 1e-6 && den_rate < 1e-6, "{rate:e} {den_rate:e}");
}

#[test]
fn constrained_outputs_feasible() {
    let o = checks::constraint_feasibility();
    assert!(o.pass, "{}", o.detail);
}

#[test]
fn schedule_and_metrics() {
    assert!(checks::schedule_arithmetic().pass);
    assert_eq!(checks::metric_failures(), Vec::<String>::new());
}

#[test]
fn quadrature_erf_matches_table_values() {
    assert!((erf_quadrature(0.5) - 0.520_499_877_813_046_5).abs() < 1e-12);
    assert!((erf_quadrature(-1.0) + 0.842_700_792_949_714_9).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn hybrid_layer_matches_oracle_for_any_graph(seed in any::<u64>(), k in 1usize..5, count in 1usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (f_in, d_in, f_out, d_out) = (rng.gen_range(1..6), rng.gen_range(1..6), rng.gen_range(1..6), rng.gen_range(1..6));
        let mut store = ParamStore::new();
        let layer = HmgalLayer::new(&mut store, "l", f_in, d_in, f_out, d_out, rng.gen_range(1..4), &mut rng);
        let x: Rows = (0..count * k).map(|_| (0..f_in).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect();
        let e: Rows = (0..count * k * k).map(|_| (0..d_in).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect();
        let mut g = Graph::inference();
        let p = g.bind(&store);
        let (xv, ev) = (g.constant(tensor_of(&x)), g.constant(tensor_of(&e)));
        let topo = Topology::new(count, k);
        let (xo, eo) = layer.forward(&mut g, &p, &topo, xv, ev, None).unwrap();
        let (on, oe) = hmgal_oracle(&layer, &store, &x, &e, k);
        prop_assert!(max_diff(&rows_of(g.value(xo)), &on) < 1e-8);
        prop_assert!(max_diff(&rows_of(g.value(eo)), &oe) < 1e-8);
    }
}

#[test]
fn gaussian_score_coefficients() {
    let errs = checks::gaussian_score_errors().unwrap();
    assert!(errs.iter().all(|&e| e < 0.02), "{errs:?}");
}
