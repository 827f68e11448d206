//! Hyperparameter sweeps: one full pipeline run per value, everything else
//! fixed, no caching across swept values.

use super::config::PipelineConfig;
use super::stages::Pipeline;
use super::PipelineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepDimension {
    Threshold,
    SplitRatio,
    Alpha,
    LearningRate,
    WeightDecay,
}

impl SweepDimension {
    pub fn name(&self) -> &'static str {
        match self {
            SweepDimension::Threshold => "threshold",
            SweepDimension::SplitRatio => "split_ratio",
            SweepDimension::Alpha => "alpha",
            SweepDimension::LearningRate => "lr",
            SweepDimension::WeightDecay => "weight_decay",
        }
    }
}

impl std::str::FromStr for SweepDimension {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "threshold" => Ok(SweepDimension::Threshold),
            "split_ratio" => Ok(SweepDimension::SplitRatio),
            "alpha" => Ok(SweepDimension::Alpha),
            "lr" => Ok(SweepDimension::LearningRate),
            "weight_decay" => Ok(SweepDimension::WeightDecay),
            other => Err(format!(
                "unknown sweep dimension {other:?} (threshold|split_ratio|alpha|lr|weight_decay)"
            )),
        }
    }
}

/// One sweep cell; `error` is set (and the metrics empty) when that value's
/// run failed.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub value: f64,
    /// Manifest rows after the last filtering stage of the run.
    pub kept_count: usize,
    pub train_count: usize,
    pub devel_count: usize,
    pub ua: Option<f64>,
    pub error: Option<String>,
}

/// Run the pipeline once per value of the swept dimension. Each run writes
/// into `<out_dir>/sweep/<dimension>/<index>/`; failures are recorded per
/// cell and the sweep continues.
///
/// Test-split rows are removed from the input before any cell runs, so a
/// sweep never touches held-out audio or labels.
pub fn sweep(
    base: &PipelineConfig,
    dimension: SweepDimension,
    values: &[f64],
) -> Result<Vec<SweepCell>, PipelineError> {
    if values.is_empty() {
        return Err(PipelineError::Config("sweep needs at least one value".into()));
    }
    let manifest_path = base
        .manifest
        .as_ref()
        .ok_or_else(|| PipelineError::Config("sweep needs a manifest".into()))?;
    let rows: Vec<_> = super::manifest::read_manifest(manifest_path)?
        .into_iter()
        .filter(|r| r.split != super::manifest::SplitTag::Test)
        .collect();
    let sweep_dir = base.out_dir.join("sweep").join(dimension.name());
    std::fs::create_dir_all(&sweep_dir)
        .map_err(|e| PipelineError::Data(format!("cannot create sweep dir: {e}")))?;
    let filtered_manifest = sweep_dir.join("manifest_input.csv");
    super::manifest::write_manifest(&filtered_manifest, &rows)?;

    let mut cells = Vec::with_capacity(values.len());
    for (i, &value) in values.iter().enumerate() {
        let mut cfg = base.clone();
        cfg.manifest = Some(filtered_manifest.clone());
        cfg.out_dir = sweep_dir.join(i.to_string());
        match dimension {
            SweepDimension::Threshold => cfg.threshold = value,
            SweepDimension::SplitRatio => cfg.split_fraction = value,
            SweepDimension::Alpha => cfg.alpha = value,
            SweepDimension::LearningRate => cfg.lr = value,
            SweepDimension::WeightDecay => cfg.weight_decay = value,
        }
        let cell = match cfg.validate().and_then(|()| {
            std::fs::create_dir_all(&cfg.out_dir)
                .map_err(|e| PipelineError::Data(format!("cannot create sweep dir: {e}")))?;
            Pipeline::new(cfg.clone()).run()
        }) {
            Ok(summary) => {
                use super::manifest::SplitTag;
                let train_count = summary
                    .rows
                    .iter()
                    .filter(|r| r.split == SplitTag::Train)
                    .count();
                let devel_count = summary
                    .rows
                    .iter()
                    .filter(|r| r.split == SplitTag::Devel)
                    .count();
                SweepCell {
                    value,
                    kept_count: summary.rows.len(),
                    train_count,
                    devel_count,
                    ua: summary.metrics.map(|m| m.unweighted_accuracy),
                    error: None,
                }
            }
            Err(e) => SweepCell {
                value,
                kept_count: 0,
                train_count: 0,
                devel_count: 0,
                ua: None,
                error: Some(e.to_string()),
            },
        };
        cells.push(cell);
    }
    Ok(cells)
}

/// Render the frozen sweep CSV layout:
/// `dimension,value,kept_count,train_count,devel_count,ua,error`.
pub fn sweep_csv(dimension: SweepDimension, cells: &[SweepCell]) -> String {
    let mut text = String::from("dimension,value,kept_count,train_count,devel_count,ua,error\n");
    for cell in cells {
        let ua = cell.ua.map(|v| v.to_string()).unwrap_or_default();
        let error = cell
            .error
            .as_deref()
            .map(|e| e.replace([',', '\n'], ";"))
            .unwrap_or_default();
        text.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            dimension.name(),
            cell.value,
            cell.kept_count,
            cell.train_count,
            cell.devel_count,
            ua,
            error
        ));
    }
    text
}
