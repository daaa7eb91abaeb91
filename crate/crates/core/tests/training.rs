mod common;

use common::*;
use gnvp_core::data::bundled_dataset;
use gnvp_core::flow::{FlowModel, Mode, ParamStore};
use gnvp_core::graph::{dequantize, DequantizedGraph, GraphSpec, MolecularGraph};
use gnvp_core::numeric::{finite_difference_gradient, Gradients, SeededRng, Tape, Tensor};
use gnvp_core::training::{
    load_train_state, metrics_csv, nll_fixed, nll_value, save_train_state, split_indices, train, Adam,
    TrainConfig, TrainState,
};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

fn toy_batch(model: &FlowModel, n: usize, seed: u64) -> Vec<DequantizedGraph> {
    let mut rng = SeededRng::new(seed);
    (0..n)
        .map(|_| {
            let g = random_graph(model.dims(), &mut rng);
            dequantize(&g, 0.9, &mut rng).unwrap()
        })
        .collect()
}

fn toy_graphs(model: &FlowModel, n: usize, seed: u64) -> Vec<MolecularGraph> {
    let mut rng = SeededRng::new(seed);
    (0..n).map(|_| random_graph(model.dims(), &mut rng)).collect()
}

#[test]
fn zero_init_loss_has_closed_form() {
    let model = FlowModel::new(toy_spec(), toy_config(), 1);
    let batch = toy_batch(&model, 6, 2);
    let d = model.dims().latent_dim() as f64;
    let expected: f64 = batch
        .iter()
        .map(|g| {
            let sq: f64 = g.adjacency.data().iter().chain(g.features.data()).map(|v| v * v).sum();
            d * HALF_LN_2PI + 0.5 * sq
        })
        .sum::<f64>()
        / batch.len() as f64;
    for mode in [Mode::Train, Mode::Eval] {
        let got = nll_fixed(&model, &batch, mode).unwrap().value;
        assert!((got - expected).abs() < 1e-10, "{got} vs {expected}");
    }
    assert!((nll_value(&model, &batch).unwrap() - expected).abs() < 1e-10);
}

#[test]
fn doubling_sigma_shifts_the_normalizer() {
    let mut model = FlowModel::new(toy_spec(), toy_config(), 1);
    let batch = toy_batch(&model, 3, 3);
    let d = model.dims().latent_dim() as f64;
    let base = nll_value(&model, &batch).unwrap();
    model.set_log_sigma(std::f64::consts::LN_2);
    let doubled = nll_value(&model, &batch).unwrap();
    let sq: f64 = batch
        .iter()
        .flat_map(|g| g.adjacency.data().iter().chain(g.features.data()))
        .map(|v| v * v)
        .sum::<f64>()
        / batch.len() as f64;
    // -log(sigma) * D term grows by D ln 2; the quadratic term shrinks by 4x
    let predicted = base + d * std::f64::consts::LN_2 - 0.5 * sq * 0.75;
    assert!((doubled - predicted).abs() < 1e-9);
}

#[test]
fn loss_gradients_match_finite_differences() {
    let model = random_model(toy_spec(), toy_config(), 4, 0.2);
    let batch = toy_batch(&model, 5, 5);
    for mode in [Mode::Train, Mode::Eval] {
        let eval = nll_fixed(&model, &batch, mode).unwrap();
        let mut checked = 0;
        for (id, entry) in model.params().trainable() {
            let analytic = eval.gradients.get(&entry.name).unwrap();
            let mut probe = model.clone();
            let numeric = finite_difference_gradient(
                |p: &Tensor| {
                    probe.params_mut().set(id, p.clone());
                    Ok(nll_fixed(&probe, &batch, mode).unwrap().value)
                },
                &entry.value,
                1e-5,
            )
            .unwrap();
            // biases feeding a batch-normalized layer have an exactly zero
            // gradient in train mode, so the denominator gets a floor well
            // above finite-difference noise (~1e-9 here)
            let diff = l2_diff(analytic, &numeric);
            let err = diff / analytic.norm().max(numeric.norm()).max(1e-4);
            assert!(err < 1e-4, "{} ({mode:?}): relative error {err}", entry.name);
            checked += 1;
        }
        assert_eq!(checked, model.params().trainable().count());
    }
}

fn l2_diff(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn scalar_store(value: f64) -> ParamStore {
    let mut s = ParamStore::new();
    s.add("w".into(), Tensor::scalar(value), true);
    s
}

fn grads_for(store: &ParamStore, f: impl Fn(&Tensor) -> Tensor) -> Gradients {
    // gradients arrive through a tape so the optimizer sees the real type
    let mut tape = Tape::new();
    let mut vars = Vec::new();
    for e in store.entries() {
        vars.push(tape.param(&e.name, e.value.clone()).unwrap());
    }
    let g = f(&store.entries()[0].value);
    let c = tape.constant(g).unwrap();
    let prod = tape.mul(vars[0], c).unwrap();
    let loss = tape.sum_all(prod).unwrap();
    tape.backward(loss).unwrap()
}

#[test]
fn adam_zero_gradient_is_a_no_op() {
    let mut store = scalar_store(1.5);
    let mut adam = Adam::new(&store, &TrainConfig::default());
    let g = grads_for(&store, |w| Tensor::zeros(w.shape()));
    adam.step(&mut store, &g).unwrap();
    assert_eq!(store.by_name("w").unwrap().data()[0], 1.5);
}

#[test]
fn adam_first_step_moves_by_alpha() {
    let mut store = scalar_store(0.0);
    let cfg = TrainConfig::default();
    let mut adam = Adam::new(&store, &cfg);
    let g = grads_for(&store, |w| Tensor::ones(w.shape()));
    adam.step(&mut store, &g).unwrap();
    let w = store.by_name("w").unwrap().data()[0];
    assert!((w + cfg.adam_alpha / (1.0 + cfg.adam_eps)).abs() < 1e-15);
}

#[test]
fn adam_minimizes_a_quadratic() {
    // f(w) = 0.5 * sum a_i (w_i - c_i)^2
    let a = [1.0, 4.0, 0.5];
    let c = [0.3, -0.2, 0.1];
    let mut store = ParamStore::new();
    store.add("w".into(), Tensor::zeros(&[3]), true);
    let cfg = TrainConfig {
        adam_alpha: 0.03,
        ..TrainConfig::default()
    };
    let mut adam = Adam::new(&store, &cfg);
    for _ in 0..100 {
        let w = store.by_name("w").unwrap().clone();
        let g = grads_for(&store, |_| Tensor::from_fn(&[3], |i| a[i] * (w.data()[i] - c[i])));
        adam.step(&mut store, &g).unwrap();
    }
    let w = store.by_name("w").unwrap();
    for i in 0..3 {
        assert!((w.data()[i] - c[i]).abs() < 1e-3, "{:?}", w.data());
    }
}

#[test]
fn adam_rejects_mismatched_gradients() {
    let mut store = scalar_store(0.0);
    let mut adam = Adam::new(&store, &TrainConfig::default());
    let other = {
        let mut s = ParamStore::new();
        s.add("w".into(), Tensor::zeros(&[2]), true);
        s
    };
    let g = grads_for(&other, |w| Tensor::ones(w.shape()));
    assert!(adam.step(&mut store, &g).is_err());
    assert_eq!(adam.step, 0);
}

fn small_config(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 8,
        seed: 7,
        ..TrainConfig::default()
    }
}

#[test]
fn zero_epochs_leave_the_model_unchanged() {
    let model = FlowModel::new(toy_spec(), toy_config(), 1);
    let graphs = toy_graphs(&model, 20, 1);
    let mut state = TrainState::new(model.clone(), &small_config(0));
    let log = train(&mut state, &graphs, &small_config(0), |_, _| Ok(())).unwrap();
    assert!(log.is_empty());
    assert_eq!(state.model.params(), model.params());
}

#[test]
fn training_is_deterministic_and_resumable() {
    let model = FlowModel::new(toy_spec(), toy_config(), 1);
    let graphs = toy_graphs(&model, 30, 2);

    let run = |epochs| {
        let mut s = TrainState::new(model.clone(), &small_config(epochs));
        let log = train(&mut s, &graphs, &small_config(epochs), |_, _| Ok(())).unwrap();
        (s, log)
    };
    let (a, log_a) = run(4);
    let (b, log_b) = run(4);
    assert_eq!(log_a, log_b);
    assert_eq!(a.model.params(), b.model.params());
    assert_eq!(
        metrics_csv(&log_a, 24, 0.9),
        metrics_csv(&log_b, 24, 0.9)
    );

    // stop after two epochs, checkpoint, resume
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("half.gnvp");
    let (half, _) = run(2);
    save_train_state(&half, &path).unwrap();
    let mut resumed = load_train_state(&path, Some(&toy_spec())).unwrap();
    assert_eq!(resumed.epoch, 2);
    let rest = train(&mut resumed, &graphs, &small_config(4), |_, _| Ok(())).unwrap();
    assert_eq!(rest, log_a[2..].to_vec());
    assert_eq!(resumed.model.params(), a.model.params());
    assert_eq!(resumed.adam, a.adam);
}

#[test]
fn fixed_batch_nll_survives_checkpointing() {
    let model = FlowModel::new(toy_spec(), toy_config(), 1);
    let graphs = toy_graphs(&model, 24, 3);
    let mut state = TrainState::new(model, &small_config(3));
    train(&mut state, &graphs, &small_config(3), |_, _| Ok(())).unwrap();
    let held_out = toy_batch(&state.model, 8, 99);
    let before = nll_value(&state.model, &held_out).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.gnvp");
    save_train_state(&state, &path).unwrap();
    let loaded = load_train_state(&path, Some(&toy_spec())).unwrap();
    let after = nll_value(&loaded.model, &held_out).unwrap();
    assert!((before - after).abs() <= 1e-10);
}

#[test]
fn zero_init_loss_is_finite_on_every_corpus_batch() {
    let spec = GraphSpec::qm9lite();
    let data = bundled_dataset(&spec).unwrap().unwrap();
    let model = FlowModel::new(spec, gnvp_core::flow::FlowConfig::default(), 0);
    let graphs = data.graphs();
    let mut rng = SeededRng::new(0);
    for chunk in graphs.chunks(64) {
        let batch: Vec<DequantizedGraph> = chunk.iter().map(|g| dequantize(g, 0.9, &mut rng).unwrap()).collect();
        assert!(nll_value(&model, &batch).unwrap().is_finite());
    }
}

#[test]
fn split_is_seeded_and_disjoint() {
    let (a, b) = split_indices(256, 0.9, 5);
    assert_eq!(a.len(), 230);
    assert_eq!(b.len(), 26);
    let mut all: Vec<usize> = a.iter().chain(&b).copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..256).collect::<Vec<_>>());
    assert_eq!(split_indices(256, 0.9, 5), (a, b));
    assert_ne!(split_indices(256, 0.9, 6).1, split_indices(256, 0.9, 5).1);
}
