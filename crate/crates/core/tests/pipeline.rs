use std::fs;

use attn_lstm::data::{
    compute_stats, downsample, fill_missing, load_csv, preset, read_window_csv, standardize,
    window, window_with, write_window_csv, LabelRule, Manifest, Split, WindowGeometry,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn write_recording(dir: &std::path::Path, name: &str, rows: usize, seed: u64) -> std::path::PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = String::from("timestamp,acc_x,acc_y,gyro_x,label\n");
    for i in 0..rows {
        let missing = rng.random_bool(0.05) && i > 0;
        let a = if missing { String::new() } else { format!("{}", rng.random_range(-2.0..2.0)) };
        s.push_str(&format!(
            "{},{a},{},{},{}\n",
            i as f64 * 0.01,
            rng.random_range(-2.0..2.0),
            rng.random_range(-1.0..1.0),
            (i / 150) % 3
        ));
    }
    let path = dir.join(name);
    fs::write(&path, s).unwrap();
    path
}

fn manifest() -> Manifest {
    Manifest {
        sample_rate: 100.0,
        modality_map: vec![0, 0, 1],
        class_names: vec!["a".into(), "b".into(), "c".into()],
        modality_names: None,
        window_length: None,
    }
}

#[test]
fn csv_to_windows_matches_count_formula() {
    let dir = tempfile::tempdir().unwrap();
    let p = preset("pamap2").unwrap();
    let mut total = 0;
    let mut recordings = Vec::new();
    for (k, rows) in [1000usize, 2417, 333].into_iter().enumerate() {
        let path = write_recording(dir.path(), &format!("r{k}.csv"), rows, k as u64);
        let rec = load_csv(&path, &manifest()).unwrap();
        assert_eq!(rec.len(), rows);
        let rec = fill_missing(rec).unwrap();
        assert_eq!(rec.missing_count(), 0);
        let rec = downsample(&rec, p.target_rate).unwrap();
        // block count is floor(n / r) with r = rate ratio
        assert_eq!(rec.len(), (rows as f64 / (100.0 / p.target_rate)).floor() as usize);
        recordings.push(rec);
    }
    let stats = compute_stats(&recordings, Split::Train).unwrap();
    let geom = p.geometry();
    assert_eq!((geom.length, geom.step), (171, 38));
    for rec in &recordings {
        let rec = standardize(rec, &stats).unwrap();
        let ws = window_with(&rec, geom, LabelRule::Majority).unwrap();
        let expected = if rec.len() < 171 { 0 } else { (rec.len() - 171) / 38 + 1 };
        assert_eq!(ws.len(), expected);
        for w in &ws {
            // never reads past the end of its own recording
            assert_eq!(w.source.recording, rec.id);
            assert!(w.source.start + geom.length <= rec.len());
        }
        total += ws.len();
    }
    assert!(total > 0);
}

#[test]
fn randomized_lengths_and_geometries() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let dir = tempfile::tempdir().unwrap();
    let path = write_recording(dir.path(), "r.csv", 1200, 1);
    let base = fill_missing(load_csv(&path, &manifest()).unwrap()).unwrap();
    for _ in 0..40 {
        let len = rng.random_range(1..1200);
        let mut rec = base.clone();
        rec.channels.iter_mut().for_each(|c| c.truncate(len));
        rec.labels.truncate(len);
        let seconds = rng.random_range(0.01..3.0);
        let overlap = rng.random_range(0.0..0.95);
        let g = WindowGeometry::new(seconds, overlap, 100.0).unwrap();
        let ws = window(&rec, seconds, overlap, LabelRule::LastSample).unwrap();
        let expected = if len >= g.length { (len - g.length) / g.step + 1 } else { 0 };
        assert_eq!(ws.len(), expected, "len {len} L {} S {}", g.length, g.step);
        for (i, w) in ws.iter().enumerate() {
            assert_eq!(w.source.start, i * g.step);
            assert_eq!(w.label, rec.labels[w.source.start + g.length - 1]);
        }
    }
}

#[test]
fn window_dump_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_recording(dir.path(), "r.csv", 500, 3);
    let rec = fill_missing(load_csv(&path, &manifest()).unwrap()).unwrap();
    let ws = window(&rec, 0.5, 0.5, LabelRule::Majority).unwrap();
    let out = dir.path().join("w.csv");
    write_window_csv(&out, &ws, &rec.channel_names).unwrap();
    let back = read_window_csv(&out, 3).unwrap();
    assert_eq!(back.len(), ws.len());
    for (a, b) in ws.iter().zip(&back) {
        assert_eq!(a.x, b.x);
        assert_eq!(a.label, b.label);
    }
}
