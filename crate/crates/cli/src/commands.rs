use std::fs;
use std::path::{Path, PathBuf};

use attn_lstm::data::{write_window_csv, GroundTruth, Manifest, WindowSet};
use attn_lstm::metrics::EvalReport;
use attn_lstm::model::{ModelParams, Variant};
use attn_lstm::training::{
    evaluate, load_checkpoint_for, predict, save_checkpoint, train, CheckpointMeta,
};
use attn_lstm::Error;
use serde::Serialize;

use crate::config::RunConfig;
use crate::dataset::{load_splits, synthetic_spec, GROUND_TRUTH_FILE, SPLIT_FILES};
use crate::error::CliError;

/// One line of an attention trace export.
#[derive(Debug, Serialize)]
pub struct TraceRecord<'a> {
    pub window_id: usize,
    pub true_class: usize,
    pub predicted_class: usize,
    /// Temporal weights, length `T`.
    pub alpha: &'a [f64],
    /// Sensor weights, `T` rows of `M`.
    pub beta: &'a [Vec<f64>],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<&'a [f64]>>,
    pub ground_truth: Option<&'a GroundTruth>,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    fs::write(path, bytes).map_err(io)?;
    Ok(())
}

pub fn report_text(report: &EvalReport, class_names: &[String]) -> String {
    format!("{}\n{}", report.to_text(class_names), report.to_key_values())
}

/// Trains, then writes checkpoint, history and the test-split report.
pub fn cmd_train(cfg: &RunConfig) -> Result<EvalReport, CliError> {
    let splits = load_splits(cfg)?;
    log::info!(
        "{} train / {} validation / {} test windows, {} channels, {} classes",
        splits.train.len(),
        splits.validation.len(),
        splits.test.len(),
        splits.train.channels,
        splits.train.classes
    );
    let tc = cfg.train_config();
    let (params, history) = train(&tc, &splits.train, &splits.validation)?;
    log::info!(
        "best epoch {} with validation mean F1 {:.4}",
        history.best_epoch,
        history.best_val_mean_f1
    );
    let meta = CheckpointMeta {
        dims: params.dims.clone(),
        variant: tc.loss.variant,
        modality_map: splits.train.modality_map.clone(),
        lambda1: tc.loss.lambda1,
        lambda2: tc.loss.lambda2,
        class_names: splits.train.class_names.clone(),
    };
    save_checkpoint(&cfg.checkpoint_path(), &params, &meta)?;
    let history_json = serde_json::to_string_pretty(&history).expect("history serializes");
    write_file(&cfg.history_path(), history_json.as_bytes())?;
    let report = evaluate(&params, &tc.loss, &splits.test)?;
    write_file(&cfg.report_path(), report_text(&report, &meta.class_names).as_bytes())?;
    log::info!("test mean F1 {:.4}", report.mean_f1);
    Ok(report)
}

fn load_model(cfg: &RunConfig, set: &WindowSet) -> Result<(ModelParams, CheckpointMeta), CliError> {
    let (params, meta) = load_checkpoint_for(&cfg.checkpoint_path(), set.channels, set.classes)?;
    if meta.modality_map != set.modality_map {
        return Err(Error::Data(format!(
            "checkpoint modality map {:?} differs from the dataset's {:?}",
            meta.modality_map, set.modality_map
        ))
        .into());
    }
    Ok((params, meta))
}

/// Evaluates the configured checkpoint on the test split.
pub fn cmd_eval(cfg: &RunConfig, out: Option<&Path>) -> Result<EvalReport, CliError> {
    let splits = load_splits(cfg)?;
    let (params, meta) = load_model(cfg, &splits.test)?;
    let report = evaluate(&params, &meta.loss_config(), &splits.test)?;
    let path = out.map(Path::to_path_buf).unwrap_or_else(|| cfg.report_path());
    write_file(&path, report_text(&report, &meta.class_names).as_bytes())?;
    log::info!("test mean F1 {:.4}, report at {}", report.mean_f1, path.display());
    Ok(report)
}

/// Writes attention traces for the first `n` test windows as JSON lines.
pub fn cmd_export_attention(cfg: &RunConfig, n: usize, out: Option<&Path>) -> Result<PathBuf, CliError> {
    if n == 0 {
        return Err(Error::Argument("--n must be at least 1".into()).into());
    }
    let splits = load_splits(cfg)?;
    if splits.test.is_empty() {
        return Err(Error::Data("no windows to export".into()).into());
    }
    let (params, meta) = load_model(cfg, &splits.test)?;
    if meta.variant == Variant::Plain {
        log::warn!("plain variant has no attention; exporting the fixed one-hot alpha at T");
    }
    if n > splits.test.len() {
        log::warn!("only {} test windows, exporting all of them", splits.test.len());
    }
    let windows = &splits.test.windows[..n.min(splits.test.len())];
    let preds = predict(&params, &meta.loss_config(), windows)?;
    let mut body = Vec::new();
    for (i, (w, (pred, trace))) in windows.iter().zip(&preds).enumerate() {
        let record = TraceRecord {
            window_id: i,
            true_class: w.label,
            predicted_class: *pred,
            alpha: &trace.alpha,
            beta: &trace.beta,
            x: cfg
                .output
                .trace_include_x
                .then(|| (0..w.x.rows()).map(|t| w.x.row(t)).collect()),
            ground_truth: w.ground_truth.as_ref(),
        };
        serde_json::to_writer(&mut body, &record).expect("trace serializes");
        body.push(b'\n');
    }
    let path = out.map(Path::to_path_buf).unwrap_or_else(|| cfg.trace_path());
    write_file(&path, &body)?;
    log::info!("wrote {} trace records to {}", windows.len(), path.display());
    Ok(path)
}

/// Writes the synthetic dataset as window CSVs with a manifest and a
/// ground-truth sidecar, loadable with `source = "windows"`.
pub fn cmd_gen_synthetic(cfg: &RunConfig, out: Option<&Path>) -> Result<PathBuf, CliError> {
    let spec = synthetic_spec(cfg);
    let (train, val, test) = attn_lstm::data::gen_synthetic(&spec)?;
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.dataset.dir.as_deref().map(|d| cfg.resolve(d)))
        .unwrap_or_else(|| cfg.output_dir().join("synthetic"));
    fs::create_dir_all(&dir).map_err(|e| Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    let names = spec.channel_names();
    let mut gt = String::from("split,window_id,motif_start,motif_end,modality\n");
    for (file, set) in SPLIT_FILES.iter().zip([&train, &val, &test]) {
        write_window_csv(&dir.join(file), &set.windows, &names)?;
        let split = file.trim_end_matches(".csv");
        for (i, w) in set.windows.iter().enumerate() {
            if let Some(g) = &w.ground_truth {
                gt.push_str(&format!(
                    "{split},{i},{},{},{}\n",
                    g.motif_start, g.motif_end, g.modality
                ));
            }
        }
    }
    write_file(&dir.join(GROUND_TRUTH_FILE), gt.as_bytes())?;
    let manifest = Manifest {
        // Windows are already cut; the rate only matters for recordings.
        sample_rate: 1.0,
        modality_map: spec.modality_map(),
        class_names: spec.class_names(),
        modality_names: None,
        window_length: Some(spec.length),
    };
    write_file(&attn_lstm::data::manifest_path_for(&dir), manifest.to_toml().as_bytes())?;
    log::info!(
        "wrote {} / {} / {} windows to {}",
        train.len(),
        val.len(),
        test.len(),
        dir.display()
    );
    Ok(dir)
}
