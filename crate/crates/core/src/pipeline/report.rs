//! Report emission: CSV histogram tables suitable for external plotting.

use super::manifest::ManifestRow;
use super::stages::load_waveform;
use super::PipelineError;
use std::fmt::Write as _;
use std::path::Path;

/// Duration histogram bin width, seconds.
const DURATION_BIN_S: f64 = 5.0;
/// Detection thresholds tabulated by the report.
pub const REPORT_THRESHOLDS: [f64; 4] = [0.6, 0.7, 0.8, 0.9];

/// Histogram of recording durations in 5-second bins.
///
/// Only rows whose path points at a readable WAV file contribute.
pub fn duration_histogram(rows: &[ManifestRow]) -> Vec<(f64, f64, usize)> {
    let mut counts: std::collections::BTreeMap<usize, usize> = std::collections::BTreeMap::new();
    for row in rows {
        if !row.path.ends_with(".wav") {
            continue;
        }
        let Ok(w) = load_waveform(&row.path, &row.id) else {
            continue;
        };
        let bin = (w.duration_secs() / DURATION_BIN_S).floor() as usize;
        *counts.entry(bin).or_default() += 1;
    }
    counts
        .into_iter()
        .map(|(bin, count)| {
            (
                bin as f64 * DURATION_BIN_S,
                (bin + 1) as f64 * DURATION_BIN_S,
                count,
            )
        })
        .collect()
}

/// Per (source, label) row counts, sorted.
pub fn class_counts(rows: &[ManifestRow]) -> Vec<(String, String, usize)> {
    let mut counts: std::collections::BTreeMap<(String, String), usize> =
        std::collections::BTreeMap::new();
    for row in rows {
        *counts
            .entry((row.source.clone(), row.label.name().to_string()))
            .or_default() += 1;
    }
    counts
        .into_iter()
        .map(|((source, label), count)| (source, label, count))
        .collect()
}

/// Kept-row counts at each report threshold, over rows with a detection
/// probability.
pub fn detection_counts(rows: &[ManifestRow], thresholds: &[f64]) -> Vec<(f64, usize)> {
    thresholds
        .iter()
        .map(|&tau| {
            let kept = rows
                .iter()
                .filter(|r| r.detection_prob.is_some_and(|p| p >= tau))
                .count();
            (tau, kept)
        })
        .collect()
}

/// Write the full report bundle: `duration_histogram.csv`,
/// `class_counts.csv`, and `detection_counts.csv` under `out_dir`.
pub fn write_report(rows: &[ManifestRow], out_dir: &Path) -> Result<(), PipelineError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| PipelineError::Data(format!("cannot create {}: {e}", out_dir.display())))?;

    let mut text = String::from("bin_start_s,bin_end_s,count\n");
    for (lo, hi, count) in duration_histogram(rows) {
        let _ = writeln!(text, "{lo},{hi},{count}");
    }
    write_file(out_dir, "duration_histogram.csv", &text)?;

    let mut text = String::from("source,label,count\n");
    for (source, label, count) in class_counts(rows) {
        let _ = writeln!(text, "{source},{label},{count}");
    }
    write_file(out_dir, "class_counts.csv", &text)?;

    let mut text = String::from("threshold,kept_count\n");
    if rows.iter().any(|r| r.detection_prob.is_some()) {
        for (tau, count) in detection_counts(rows, &REPORT_THRESHOLDS) {
            let _ = writeln!(text, "{tau},{count}");
        }
    }
    write_file(out_dir, "detection_counts.csv", &text)?;
    Ok(())
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<(), PipelineError> {
    let path = dir.join(name);
    std::fs::write(&path, text)
        .map_err(|e| PipelineError::Data(format!("cannot write {}: {e}", path.display())))
}
