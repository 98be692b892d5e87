use attn_lstm::data::{gen_synthetic, SequenceWindow, SyntheticSpec, WindowSet};
use attn_lstm::model::{loss_value, LossConfig, Variant};
use attn_lstm::training::{
    evaluate, init_params, train, train_step, OptimizerState, TrainConfig,
};

fn small_task(seed: u64, noise: f64) -> (WindowSet, WindowSet, WindowSet) {
    gen_synthetic(&SyntheticSpec {
        n_windows: 300,
        length: 24,
        channels: 4,
        modalities: 2,
        motif_min_len: 6,
        motif_max_len: 10,
        noise_std: noise,
        seed,
        ..SyntheticSpec::default()
    })
    .unwrap()
}

fn config(variant: Variant, seed: u64) -> TrainConfig {
    TrainConfig {
        hidden_size: 8,
        batch_size: 16,
        max_epochs: 6,
        seed,
        loss: LossConfig::new(variant, 0.1, 0.5).unwrap(),
        ..TrainConfig::default()
    }
}

#[test]
fn overfits_a_single_batch_for_every_variant() {
    let (train_set, _, _) = small_task(1, 0.3);
    let batch: Vec<&SequenceWindow> = train_set.windows.iter().take(8).collect();
    for variant in Variant::ALL {
        let cfg = TrainConfig {
            learning_rate: 0.02,
            loss: LossConfig::unregularized(variant),
            ..config(variant, 3)
        };
        let dims = cfg.dims_for(4, 2, 2);
        let mut params = init_params(3, &dims, variant, train_set.modality_map.clone()).unwrap();
        let mut state = OptimizerState::new(&params, cfg.adam);
        for _ in 0..200 {
            train_step(&mut params, &mut state, &cfg, &batch).unwrap();
        }
        let mean: f64 = batch
            .iter()
            .map(|w| loss_value(&params, &cfg.loss, &w.x, w.label).unwrap())
            .sum::<f64>()
            / batch.len() as f64;
        assert!(mean < 0.1, "{variant:?}: loss {mean}");
    }
}

#[test]
fn training_is_deterministic() {
    let (tr, va, _) = small_task(2, 0.5);
    let cfg = TrainConfig {
        max_epochs: 2,
        ..config(Variant::TemporalSensor, 9)
    };
    let (p1, h1) = train(&cfg, &tr, &va).unwrap();
    let (p2, h2) = train(&cfg, &tr, &va).unwrap();
    assert_eq!(p1, p2);
    // wall-clock seconds are not serialized
    assert_eq!(serde_json::to_string(&h1).unwrap(), serde_json::to_string(&h2).unwrap());
    let (p3, _) = train(&TrainConfig { seed: 10, ..cfg }, &tr, &va).unwrap();
    assert_ne!(p1, p3);
}

#[test]
fn separable_task_is_learned() {
    let (tr, va, te) = small_task(4, 0.2);
    let cfg = TrainConfig {
        max_epochs: 20,
        ..config(Variant::Temporal, 1)
    };
    let (params, history) = train(&cfg, &tr, &va).unwrap();
    assert!(history.epochs.len() <= 20);
    let report = evaluate(&params, &cfg.loss, &te).unwrap();
    assert!(report.mean_f1 >= 0.95, "{report:?}");
}

#[test]
fn best_epoch_parameters_are_returned() {
    let (tr, va, _) = small_task(5, 0.5);
    let cfg = config(Variant::Plain, 2);
    let (params, history) = train(&cfg, &tr, &va).unwrap();
    let best = history
        .epochs
        .iter()
        .map(|e| e.val_mean_f1)
        .fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(history.best_val_mean_f1, best);
    let first_best = history.epochs.iter().position(|e| e.val_mean_f1 == best).unwrap();
    assert_eq!(history.best_epoch, first_best);
    let val = evaluate(&params, &cfg.loss, &va).unwrap();
    assert_eq!(val.mean_f1, best);
}

#[test]
fn patience_zero_stops_after_first_stale_epoch() {
    let (tr, va, _) = small_task(6, 0.5);
    let cfg = TrainConfig {
        patience: 0,
        max_epochs: 15,
        ..config(Variant::Plain, 4)
    };
    let (_, history) = train(&cfg, &tr, &va).unwrap();
    let n = history.epochs.len();
    if n < 15 {
        // Every epoch before the last improved on its predecessors.
        let f1: Vec<f64> = history.epochs.iter().map(|e| e.val_mean_f1).collect();
        for i in 1..n - 1 {
            assert!(f1[i] > f1[..i].iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        }
        assert!(f1[n - 1] <= f1[..n - 1].iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    }
}

#[test]
fn invalid_configs_and_empty_splits() {
    let (tr, va, _) = small_task(7, 0.5);
    let bad = TrainConfig {
        learning_rate: 0.0,
        ..config(Variant::Plain, 0)
    };
    assert!(matches!(train(&bad, &tr, &va), Err(attn_lstm::Error::Config(_))));
    let empty = WindowSet {
        windows: Vec::new(),
        ..va.clone()
    };
    assert!(train(&config(Variant::Plain, 0), &tr, &empty).is_err());
    let params = init_params(0, &config(Variant::Plain, 0).dims_for(4, 2, 2), Variant::Plain, vec![0, 0, 1, 1]).unwrap();
    let err = evaluate(&params, &LossConfig::unregularized(Variant::Plain), &empty).unwrap_err();
    assert!(err.to_string().contains("no windows"));
}

#[test]
fn non_finite_input_reports_divergence() {
    let (tr, va, _) = small_task(8, 0.5);
    let mut tr = tr;
    tr.windows[3].x.set(0, 0, f64::NAN);
    let err = train(&config(Variant::Plain, 0), &tr, &va).unwrap_err();
    assert!(matches!(err, attn_lstm::Error::Divergence { epoch: 0, .. }), "{err}");
}
