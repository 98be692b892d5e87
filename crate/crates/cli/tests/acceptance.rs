//! End-to-end acceptance checks. Each test prints one verdict line to stdout
//! (bypassing the test harness capture) and then asserts it.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use attn_lstm::data::{gen_synthetic, preset, window, LabelRule, Recording, SyntheticSpec, WindowGeometry, WindowSet};
use attn_lstm::metrics::ConfusionMatrix;
use attn_lstm::model::{
    forward, forward_with_alpha, loss, loss_and_gradients, loss_value, total_variation,
    total_variation_rows, AttentionTrace, LossConfig, ModelDims, ModelParams, Variant,
};
use attn_lstm::numerics::{grad_check, Matrix};
use attn_lstm::training::{
    decode_checkpoint, encode_checkpoint, evaluate, init_params, load_checkpoint, predict, train,
    TrainConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(id: u32, name: &str, pass: bool, detail: &str) {
    let line = format!(
        "\nacceptance {id:02} {name}: {} ({detail})\n",
        if pass { "PASS" } else { "FAIL" }
    );
    // Straight to the process stdout so the line survives output capture.
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    assert!(pass, "{}", line.trim_end());
}

fn random_x(rng: &mut ChaCha8Rng, t: usize, d: usize) -> Matrix {
    Matrix::from_fn(t, d, |_, _| rng.random_range(-2.0..2.0))
}

fn small_dims(modalities: usize) -> ModelDims {
    ModelDims {
        input: 4,
        hidden: 5,
        classes: 3,
        modalities,
        sensor_hidden: 2,
        stacked: false,
        cell_bias: false,
    }
}

#[test]
fn gradient_correctness() {
    let started = Instant::now();
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    for seed in 0..3u64 {
        for variant in Variant::ALL {
            let mut params = init_params(seed, &small_dims(2), variant, vec![0, 0, 1, 1]).unwrap();
            // Larger weights keep attention away from uniform, so the
            // continuity terms are exercised away from their kinks.
            for (_, t) in params.tensors_mut() {
                t.scale_in_place(2.0);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let x = random_x(&mut rng, 7, 4);
            let y = rng.random_range(0..3);
            let cfg = LossConfig::new(variant, 0.1, 0.5).unwrap();
            let (_, grads, _) = loss_and_gradients(&params, &cfg, &x, y).unwrap();
            for (name, analytic) in grads.tensors() {
                let base = params.tensor(&name).unwrap().clone();
                let report = grad_check(
                    |m| {
                        let mut q: ModelParams = params.clone();
                        *q.tensor_mut(&name).unwrap() = m.clone();
                        loss_value(&q, &cfg, &x, y).unwrap()
                    },
                    &base,
                    analytic,
                    1e-5,
                )
                .unwrap();
                worst = worst.max(report.max_rel_error);
                checked += base.len();
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    verdict(
        1,
        "gradient correctness",
        worst < 1e-4 && secs < 60.0,
        &format!("max relative error {worst:.2e} over {checked} coordinates, {secs:.1}s"),
    );
}

#[test]
fn normalization_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for i in 0..1000u64 {
        let variant = Variant::ALL[(i % 4) as usize];
        let m = rng.random_range(1..=4);
        let d = rng.random_range(m..=8);
        let dims = ModelDims {
            input: d,
            hidden: rng.random_range(1..8),
            classes: rng.random_range(2..6),
            modalities: m,
            sensor_hidden: rng.random_range(1..4),
            stacked: rng.random_bool(0.3),
            cell_bias: rng.random_bool(0.3),
        };
        let map: Vec<usize> = (0..d).map(|c| if c < m { c } else { rng.random_range(0..m) }).collect();
        let params = init_params(i, &dims, variant, map).unwrap();
        let t = rng.random_range(1..30);
        let out = forward(&params, &LossConfig::unregularized(variant), &random_x(&mut rng, t, d)).unwrap();
        worst = worst.max((out.probs.iter().sum::<f64>() - 1.0).abs());
        worst = worst.max((out.trace.alpha.iter().sum::<f64>() - 1.0).abs());
        for row in &out.trace.beta {
            worst = worst.max((row.iter().sum::<f64>() - 1.0).abs());
        }
    }
    verdict(
        2,
        "normalization invariants",
        worst <= 1e-9,
        &format!("1000 passes, max |sum - 1| = {worst:.1e}"),
    );
}

#[test]
fn reduction_equivalences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut temporal_ok, mut sensor_ok) = (0, 0);
    for i in 0..100u64 {
        let t = rng.random_range(1..20);
        let x = random_x(&mut rng, t, 4);

        let p = init_params(i, &small_dims(2), Variant::Temporal, vec![]).unwrap();
        let mut one_hot = vec![0.0; t];
        one_hot[t - 1] = 1.0;
        let forced = forward_with_alpha(&p, &LossConfig::unregularized(Variant::Temporal), &x, &one_hot).unwrap();
        let plain = forward(&p, &LossConfig::unregularized(Variant::Plain), &x).unwrap();
        if forced.probs == plain.probs && forced.trace.context == plain.trace.context {
            temporal_ok += 1;
        }

        let p = init_params(i, &small_dims(1), Variant::Sensor, vec![0; 4]).unwrap();
        let sensor = forward(&p, &LossConfig::unregularized(Variant::Sensor), &x).unwrap();
        let plain = forward(&p, &LossConfig::unregularized(Variant::Plain), &x).unwrap();
        if sensor.probs == plain.probs {
            sensor_ok += 1;
        }
    }
    verdict(
        3,
        "reduction equivalences",
        temporal_ok == 100 && sensor_ok == 100,
        &format!("one-hot temporal = plain {temporal_ok}/100, single-modality sensor = plain {sensor_ok}/100 (exact)"),
    );
}

fn abs_diff_sum(seq: &[f64]) -> f64 {
    let mut s = 0.0;
    for t in 1..seq.len() {
        s += (seq[t] - seq[t - 1]).abs();
    }
    s
}

#[test]
fn regularizer_semantics() {
    // (alpha, expected Ω_T, beta rows, expected Ω_S); expected values by hand.
    let cases: Vec<(Vec<f64>, f64, Vec<Vec<f64>>, f64)> = vec![
        (vec![0.25; 4], 0.0, vec![vec![1.0 / 3.0; 3]; 5], 0.0),
        (vec![1.0, 0.0, 0.0, 0.0], 1.0, vec![vec![1.0, 0.0], vec![0.0, 1.0]], 2.0),
        (vec![0.0, 0.0, 0.0, 1.0], 1.0, vec![vec![0.5, 0.5], vec![0.75, 0.25], vec![0.5, 0.5]], 1.0),
        (vec![0.5, 0.0, 0.5], 1.0, vec![vec![0.25, 0.25, 0.5], vec![0.5, 0.25, 0.25]], 0.5),
        (vec![0.5, 0.0, 0.5, 0.0], 1.5, vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]], 4.0),
        (vec![0.125, 0.375, 0.25, 0.25], 0.375, vec![vec![0.2, 0.3, 0.5]], 0.0),
        (vec![0.0625; 16], 0.0, vec![vec![0.125, 0.875], vec![0.375, 0.625], vec![0.375, 0.625]], 0.5),
        (vec![1.0], 0.0, vec![vec![0.5, 0.5]; 3], 0.0),
        (vec![0.5, 0.5], 0.0, vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]], 6.0),
        (vec![0.75, 0.125, 0.125], 0.625, vec![vec![0.25, 0.75], vec![0.5, 0.5], vec![0.75, 0.25], vec![1.0, 0.0]], 1.5),
    ];
    let mut worst: f64 = 0.0;
    let mut constant_exact = true;
    for (alpha, want_t, beta, want_s) in &cases {
        let m = beta[0].len();
        let rows = Matrix::from_rows(beta).unwrap();
        let columns_oracle: f64 = (0..m).map(|j| abs_diff_sum(&rows.column(j))).sum();
        let got_t = total_variation(alpha);
        let got_s = total_variation_rows(&rows);
        worst = worst
            .max((got_t - want_t).abs())
            .max((got_t - abs_diff_sum(alpha)).abs())
            .max((got_s - want_s).abs())
            .max((got_s - columns_oracle).abs());

        // The same values must reach the loss as λ·Ω.
        let trace = AttentionTrace {
            alpha: alpha.clone(),
            beta: beta.clone(),
            context: vec![0.0],
        };
        let cfg = LossConfig::new(Variant::TemporalSensor, 0.5, 2.0).unwrap();
        let l = loss(&[0.5, 0.5], 0, &trace, &cfg).unwrap();
        worst = worst
            .max((l.temporal_penalty - 0.5 * want_t).abs())
            .max((l.sensor_penalty - 2.0 * want_s).abs());
        if *want_t == 0.0 && got_t != 0.0 || *want_s == 0.0 && got_s != 0.0 {
            constant_exact = false;
        }
    }
    verdict(
        4,
        "regularizer semantics",
        worst <= 1e-12 && constant_exact,
        &format!("10 fixed sequences, max deviation {worst:.1e}, constant attention gives exactly 0: {constant_exact}"),
    );
}

/// Small-H settings used for all synthetic training runs.
fn synthetic_config(variant: Variant, lambda1: f64, seed: u64) -> TrainConfig {
    TrainConfig {
        hidden_size: 16,
        batch_size: 32,
        max_epochs: 20,
        patience: 5,
        seed,
        loss: LossConfig::new(variant, lambda1, 0.5).unwrap(),
        ..TrainConfig::default()
    }
}

fn task(seed: u64, noise_std: f64) -> (WindowSet, WindowSet, WindowSet) {
    let spec = SyntheticSpec {
        seed,
        noise_std,
        ..SyntheticSpec::default()
    };
    assert_eq!(
        (spec.n_windows, spec.length, spec.channels, spec.modalities, spec.classes),
        (2000, 64, 6, 3, 2)
    );
    gen_synthetic(&spec).unwrap()
}

struct Run {
    mean_f1: f64,
    accuracy: f64,
    test: WindowSet,
    traces: Vec<AttentionTrace>,
}

fn train_run(variant: Variant, lambda1: f64, seed: u64, noise_std: f64) -> Run {
    let (tr, va, te) = task(seed, noise_std);
    let cfg = synthetic_config(variant, lambda1, seed);
    let (params, _) = train(&cfg, &tr, &va).unwrap();
    let report = evaluate(&params, &cfg.loss, &te).unwrap();
    let traces = predict(&params, &cfg.loss, &te.windows)
        .unwrap()
        .into_iter()
        .map(|(_, t)| t)
        .collect();
    Run {
        mean_f1: report.mean_f1,
        accuracy: report.accuracy,
        test: te,
        traces,
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[test]
fn continuity_effect() {
    let started = Instant::now();
    let lambdas = [0.0, 0.1, 1.0];
    let mut medians = Vec::new();
    let mut per_seed = Vec::new();
    for &l1 in &lambdas {
        let mut pooled = Vec::new();
        let mut seeds = Vec::new();
        for seed in 0..5 {
            let run = train_run(Variant::Temporal, l1, seed, 0.5);
            let tvs: Vec<f64> = run.traces.iter().map(|t| total_variation(&t.alpha)).collect();
            seeds.push(format!("{:.3}", median(tvs.clone())));
            pooled.extend(tvs);
        }
        medians.push(median(pooled));
        per_seed.push(format!("λ1={l1}: [{}]", seeds.join(", ")));
    }
    let secs = started.elapsed().as_secs_f64();
    let monotone = medians.windows(2).all(|w| w[1] <= w[0]);
    verdict(
        5,
        "continuity effect",
        monotone && secs < 900.0,
        &format!(
            "median TV {:.4} / {:.4} / {:.4} for λ1 = 0 / 0.1 / 1; per-seed medians {}; {secs:.0}s",
            medians[0],
            medians[1],
            medians[2],
            per_seed.join("; ")
        ),
    );
}

#[test]
fn attention_localization() {
    let started = Instant::now();
    let temporal = train_run(Variant::Temporal, 0.01, 0, 0.5);
    let (mut inside, mut baseline) = (0.0, 0.0);
    for (w, t) in temporal.test.windows.iter().zip(&temporal.traces) {
        let gt = w.ground_truth.as_ref().unwrap();
        inside += t.alpha[gt.motif_start..gt.motif_end].iter().sum::<f64>();
        baseline += gt.motif_len() as f64 / w.x.rows() as f64;
    }
    let ratio = inside / baseline;

    let sensor = train_run(Variant::Sensor, 0.0, 0, 0.5);
    let mut beta_informative = 0.0;
    for (w, t) in sensor.test.windows.iter().zip(&sensor.traces) {
        let m = w.ground_truth.as_ref().unwrap().modality;
        beta_informative += t.beta.iter().map(|b| b[m]).sum::<f64>() / t.beta.len() as f64;
    }
    beta_informative /= sensor.test.len() as f64;
    let modalities = sensor.test.modalities() as f64;
    let secs = started.elapsed().as_secs_f64();

    let scores_ok = [&temporal, &sensor]
        .iter()
        .all(|r| r.accuracy >= 0.95 && r.mean_f1 >= 0.95);
    verdict(
        6,
        "attention localization",
        ratio >= 2.0 && beta_informative > 1.0 / modalities && scores_ok && secs < 600.0,
        &format!(
            "temporal mass inside motif {:.2}x uniform; informative-modality mean beta {beta_informative:.3} vs {:.3}; \
             temporal acc/F1 {:.3}/{:.3}, sensor acc/F1 {:.3}/{:.3}; {secs:.0}s",
            ratio,
            1.0 / modalities,
            temporal.accuracy,
            temporal.mean_f1,
            sensor.accuracy,
            sensor.mean_f1
        ),
    );
}

#[test]
fn temporal_attention_not_worse_than_plain() {
    let spec = SyntheticSpec::default();
    let max_fraction = spec.motif_max_len as f64 / spec.length as f64;
    assert!(max_fraction <= 0.30);
    let mut wins = 0;
    let mut detail = Vec::new();
    for seed in 0..5 {
        let t = train_run(Variant::Temporal, 0.1, seed, 1.0).mean_f1;
        let p = train_run(Variant::Plain, 0.0, seed, 1.0).mean_f1;
        if t >= p {
            wins += 1;
        }
        detail.push(format!("{t:.3} vs {p:.3}"));
    }
    verdict(
        7,
        "temporal attention vs plain",
        wins >= 4,
        &format!("temporal >= plain in {wins}/5 seeds (mean F1: {})", detail.join(", ")),
    );
}

#[test]
fn metrics_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let c: usize = rng.random_range(2..8);
        let n = rng.random_range(1..400);
        // Skewed predictions so some classes go unpredicted.
        let pairs: Vec<(usize, usize)> = (0..n)
            .map(|_| {
                let truth = rng.random_range(0..c);
                let pred = if rng.random_bool(0.6) { truth } else { rng.random_range(0..c.div_ceil(2)) };
                (truth, pred)
            })
            .collect();
        let mut cm = ConfusionMatrix::new(c);
        for &(t, p) in &pairs {
            cm.accumulate(t, p).unwrap();
        }
        let report = cm.report().unwrap();
        let mut f_sum = 0.0;
        for class in 0..c {
            let tp = pairs.iter().filter(|&&(t, p)| t == class && p == class).count() as f64;
            let fp = pairs.iter().filter(|&&(t, p)| t != class && p == class).count() as f64;
            let fn_ = pairs.iter().filter(|&&(t, p)| t == class && p != class).count() as f64;
            let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
            let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
            if precision + recall > 0.0 {
                f_sum += 2.0 * precision * recall / (precision + recall);
            }
        }
        worst = worst.max((report.mean_f1 - f_sum / c as f64).abs());
    }
    let hand = ConfusionMatrix::from_counts(vec![vec![3, 1], vec![2, 4]]).unwrap().report().unwrap();
    let expected = [(0.6, 0.75, 2.0 / 3.0), (0.8, 2.0 / 3.0, 8.0 / 11.0)];
    let mut hand_dev: f64 = (hand.mean_f1 - (2.0 / 3.0 + 8.0 / 11.0) / 2.0).abs();
    for (s, (p, r, f)) in hand.per_class.iter().zip(expected) {
        hand_dev = hand_dev.max((s.precision - p).abs()).max((s.recall - r).abs()).max((s.f1 - f).abs());
    }
    verdict(
        8,
        "metrics oracle",
        worst <= 1e-12 && hand_dev <= 1e-12,
        &format!("100 random setups, max F_m deviation {worst:.1e}; hand example deviation {hand_dev:.1e}"),
    );
}

const PIPELINE: &str = r#"
[dataset]
source = "windows"
dir = "data"

[dataset.synthetic]
n_windows = 300
length = 32
motif_min_len = 5
motif_max_len = 9

[model]
variant = "temporal_sensor"
hidden = 8

[training]
max_epochs = 4
batch_size = 32
"#;

const ARTIFACTS: [&str; 10] = [
    "data/train.csv",
    "data/val.csv",
    "data/test.csv",
    "data/manifest.toml",
    "data/ground_truth.csv",
    "out/model.ckpt",
    "out/history.json",
    "out/report.txt",
    "out/eval.txt",
    "out/trace.jsonl",
];

fn pipeline(dir: &Path) -> Result<(), String> {
    let cfg = dir.join("run.toml");
    fs::write(&cfg, PIPELINE).unwrap();
    let steps: [&[&str]; 4] = [
        &["gen-synthetic"],
        &["train"],
        &["eval", "--out", "out/eval.txt"],
        &["export-attention", "--n", "20"],
    ];
    for step in steps {
        let o = Command::new(env!("CARGO_BIN_EXE_attn-lstm"))
            .current_dir(dir)
            .env("RUST_LOG", "warn")
            .arg(step[0])
            .args(["--config", "run.toml", "--seed", "17"])
            .args(&step[1..])
            .output()
            .unwrap();
        if !o.status.success() {
            return Err(format!("{:?} exited {:?}: {}", step, o.status.code(), String::from_utf8_lossy(&o.stderr)));
        }
    }
    Ok(())
}

#[test]
fn pipeline_determinism_and_persistence() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ran = pipeline(a.path()).and_then(|_| pipeline(b.path()));
    let mut differing = Vec::new();
    if ran.is_ok() {
        for f in ARTIFACTS {
            if fs::read(a.path().join(f)).unwrap() != fs::read(b.path().join(f)).unwrap() {
                differing.push(f);
            }
        }
    }
    let ckpt = a.path().join("out/model.ckpt");
    let round_trip = ran.is_ok() && {
        let bytes = fs::read(&ckpt).unwrap();
        let (params, meta) = load_checkpoint(&ckpt).unwrap();
        let reencoded = encode_checkpoint(&params, &meta).unwrap();
        let (again, _) = decode_checkpoint(&reencoded).unwrap();
        reencoded == bytes
            && params
                .tensors()
                .iter()
                .zip(again.tensors())
                .all(|((_, x), (_, y))| x.as_slice().iter().zip(y.as_slice()).all(|(u, v)| u.to_bits() == v.to_bits()))
    };
    verdict(
        9,
        "pipeline determinism and persistence",
        ran.is_ok() && differing.is_empty() && round_trip,
        &match &ran {
            Err(e) => e.clone(),
            Ok(()) => format!(
                "{} artifacts compared, differing: {:?}; checkpoint round trip bit-exact: {round_trip}",
                ARTIFACTS.len(),
                differing
            ),
        },
    );
}

#[test]
fn windowing_arithmetic() {
    let p = preset("pamap2").unwrap();
    let g = p.geometry();
    let literal = WindowGeometry::new(5.12, 0.78, p.target_rate).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut mismatches = 0;
    for i in 0..200 {
        let len = rng.random_range(0..2000);
        let (seconds, overlap, rate) = if i % 2 == 0 {
            (5.12, 0.78, p.target_rate)
        } else {
            (rng.random_range(0.05..4.0), rng.random_range(0.0..0.95), rng.random_range(10.0..120.0))
        };
        let geom = WindowGeometry::new(seconds, overlap, rate).unwrap();
        let rec = Recording {
            id: format!("r{i}"),
            sample_rate: rate,
            channel_names: vec!["a".into()],
            channels: vec![(0..len).map(|v| v as f64).collect()],
            labels: vec![0; len],
            modality_map: vec![0],
        };
        let got = window(&rec, seconds, overlap, LabelRule::Majority).unwrap().len();
        let formula = if len >= geom.length { (len - geom.length) / geom.step + 1 } else { 0 };
        if got != formula {
            mismatches += 1;
        }
    }
    verdict(
        10,
        "windowing arithmetic",
        (g.length, g.step) == (171, 38) && literal == g && mismatches == 0,
        &format!(
            "pamap2 L = {}, S = {} at {:.4} Hz; 200 randomized counts, {mismatches} mismatches",
            g.length, g.step, p.target_rate
        ),
    );
}
