use std::path::Path;

use serde::{Deserialize, Serialize};
use soba_core::association::{pair_bundle, DetectionBundle, PairConfig, DETECTIONS_FORMAT};
use soba_core::dataset::MANIFEST_FORMAT;
use soba_core::eval::{evaluate, replay_ground_truth, MetricSet, PredictionBundle, PREDICTIONS_FORMAT};
use soba_core::loss::check::run_all;

use super::{emit, fmt_metric, load_manifest, read, write};
use crate::args::{EvalArgs, LossCheckArgs, PairArgs, PairingArgs};
use crate::error::{CliError, CliResult};

#[derive(Deserialize)]
struct Probe {
    format: Option<String>,
}

fn pair_config(p: &PairingArgs) -> PairConfig {
    PairConfig {
        strategy: p.strategy.into(),
        score_threshold: p.score_threshold,
        nms_threshold: p.nms_threshold,
        binarize_threshold: p.binarize_threshold,
        ..PairConfig::default()
    }
}

fn load_detections(path: &Path, bytes: &[u8]) -> CliResult<DetectionBundle> {
    DetectionBundle::from_slice(bytes).map_err(|e| CliError::file(path, e))
}

/// Reads any supported prediction source as a prediction bundle.
pub(super) fn load_predictions(path: &Path, pairing: &PairConfig) -> CliResult<PredictionBundle> {
    let bytes = read(path)?;
    let probe: Probe = serde_json::from_slice(&bytes).map_err(|e| CliError::file(path, e))?;
    match probe.format.as_deref() {
        Some(PREDICTIONS_FORMAT) => PredictionBundle::from_slice(&bytes).map_err(|e| CliError::file(path, e)),
        Some(DETECTIONS_FORMAT) => Ok(pair_bundle(&load_detections(path, &bytes)?, pairing)),
        Some(MANIFEST_FORMAT) => Ok(replay_ground_truth(&load_manifest(path)?)),
        other => Err(CliError::file(
            path,
            format!(
                "unknown format {other:?}; expected {PREDICTIONS_FORMAT:?}, {DETECTIONS_FORMAT:?} or {MANIFEST_FORMAT:?}"
            ),
        )),
    }
}

fn summarize(name: &str, m: &MetricSet) -> String {
    format!(
        "{name:<5} SOAP {:>5}  SOAP50 {:>5}  SOAP75 {:>5}  Association AP {:>5}  Instance AP {:>5}\n",
        fmt_metric(m.soap),
        fmt_metric(m.soap50),
        fmt_metric(m.soap75),
        fmt_metric(m.association_ap),
        fmt_metric(m.instance_ap),
    )
}

pub fn eval(mut a: EvalArgs) -> CliResult {
    if a.out.is_some() {
        a.report.report = a.out.take();
    }
    let ds = load_manifest(&a.gt)?;
    let bundle = load_predictions(&a.pred, &pair_config(&a.pairing))?;
    let result = evaluate(&bundle, &ds, a.mode.into()).map_err(|e| CliError::file(&a.pred, e))?;
    let mut summary = format!(
        "{} images, {} ground-truth pairs, {} predicted pairs\n",
        result.image_count, result.gt_pairs, result.predicted_pairs
    );
    if let Some(m) = &result.segm {
        summary.push_str(&summarize("segm", m));
    }
    if let Some(m) = &result.bbox {
        summary.push_str(&summarize("bbox", m));
    }
    emit(&a.report, &result, &summary)
}

pub fn pair(a: PairArgs) -> CliResult {
    let bytes = read(&a.detections)?;
    let detections = load_detections(&a.detections, &bytes)?;
    let bundle = pair_bundle(&detections, &pair_config(&a.pairing));
    write(&a.out, &bundle.to_json())?;
    println!(
        "{} triples and {} instances from {} images written to {}",
        bundle.associations.len(),
        bundle.instances.len(),
        detections.images.len(),
        a.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct LossCheckReport {
    seed: u64,
    passed: bool,
    checks: Vec<soba_core::loss::check::CheckOutcome>,
}

pub fn loss_check(a: LossCheckArgs) -> CliResult {
    let checks = run_all(a.seed);
    let passed = checks.iter().all(|c| c.passed);
    let mut summary = format!(
        "{:<28} {:<6} {:>12} {:>10}  detail\n",
        "check", "result", "worst", "tolerance"
    );
    for c in &checks {
        summary.push_str(&format!(
            "{:<28} {:<6} {:>12.3e} {:>10.0e}  {}\n",
            c.name,
            if c.passed { "PASS" } else { "FAIL" },
            c.worst,
            c.tolerance,
            c.detail
        ));
    }
    let report = LossCheckReport {
        seed: a.seed,
        passed,
        checks,
    };
    emit(&a.report, &report, &summary)?;
    if passed {
        Ok(())
    } else {
        Err(CliError::Internal("loss kernel self-check failed".into()))
    }
}
