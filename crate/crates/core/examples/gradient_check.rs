//! Central-difference check of the analytic gradients of the beamformer,
//! score-matching and denoising objectives on micro models.
//!
//! cargo run --release --example gradient_check

use beamscore::channel::{complex_normal_matrix, perturb_csi, sample_rng, ErrorLevel, SystemConfig};
use beamscore::dsn::{dsn_loss_and_grad, dsn_objective, DebertConfig, DebertModel, DenoiseExample};
use beamscore::hmgat::{GraphBatch, HmgatConfig, HmgatModel};
use beamscore::ncsn::{make_schedule, ncsn_loss_and_grad, ncsn_objective, NcsnConfig, NcsnModel, Perturbations, ScoreModel};
use beamscore::numerics::gradcheck::DEFAULT_STEP;
use beamscore::numerics::{check_store, ComplexMatrix, Graph, ParamStore};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn report(name: &str, store: &ParamStore, (err, worst): (f64, String)) {
    let scalars: usize = store.ids().map(|id| store.get(id).len()).sum();
    println!("{name:>6}: {scalars:>5} parameters, worst relative error {err:.2e} in {worst}");
}

fn main() -> beamscore::Result<()> {
    let (k, n_t) = (3, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let hs: Vec<ComplexMatrix> =
        (0..2).map(|i| complex_normal_matrix(&mut sample_rng(1, i), n_t, k, 1.0)).collect();

    let system = SystemConfig::new(k, n_t);
    let config = HmgatConfig { layers: 2, heads: 2, node_dim: 8, edge_dim: 8, mlp_hidden: 8, mlp_depth: 1 };
    let hmgat = HmgatModel::new(config, n_t, &mut rng)?;
    let batch = GraphBatch::new(&hs)?;
    let mut g = Graph::new();
    let p = g.bind(&hmgat.store);
    let loss = hmgat.loss(&mut g, &p, &batch, &batch, &system, None)?;
    let grads = g.backward(loss)?.for_params(&p);
    let result = check_store(
        &hmgat.store,
        &grads,
        |store| {
            let mut g = Graph::inference();
            let p = g.bind(store);
            let loss = hmgat.loss(&mut g, &p, &batch, &batch, &system, None)?;
            g.value(loss).item()
        },
        DEFAULT_STEP,
    )?;
    report("hmgat", &hmgat.store, result);

    let schedule = make_schedule(1.0, 0.1, 2, 1e-3, 1)?;
    let ncsn = NcsnModel::new(NcsnConfig { dim: 8, ffn: 16, heads: 2, blocks: 2 }, n_t, 2, &mut rng)?;
    let noise = Perturbations::draw(&hs, &schedule, &mut rng);
    let (_, grads) = ncsn_loss_and_grad(&ncsn, &hs, &noise, &schedule, None)?;
    let result = check_store(
        ncsn.store(),
        &grads,
        |store| {
            let mut g = Graph::inference();
            let p = g.bind(store);
            let loss = ncsn_objective(&mut g, &p, &ncsn, &hs, &noise, &schedule, None)?;
            g.value(loss).item()
        },
        DEFAULT_STEP,
    )?;
    report("ncsn", ncsn.store(), result);

    let dsn = DebertModel::new(DebertConfig { dim: 8, ffn: 16, heads: 2, score_blocks: 2, step_hidden: 8 }, n_t, &mut rng)?;
    let level = ErrorLevel::from_db(0.0);
    let examples: Vec<DenoiseExample> = hs
        .iter()
        .map(|h| DenoiseExample { clean: h.clone(), noisy: perturb_csi(h, level, &mut rng), delta2_e: level.delta2_e })
        .collect();
    let (_, grads) = dsn_loss_and_grad(&dsn, &examples, 1.0, None)?;
    let result = check_store(
        &dsn.store,
        &grads,
        |store| {
            let mut g = Graph::inference();
            let p = g.bind(store);
            let loss = dsn_objective(&mut g, &p, &dsn, &examples, 1.0, None)?;
            g.value(loss).item()
        },
        DEFAULT_STEP,
    )?;
    report("dsn", &dsn.store, result);
    Ok(())
}
