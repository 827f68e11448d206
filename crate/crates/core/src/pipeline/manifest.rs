//! Dataset manifests: UTF-8 CSV with a fixed column set.
//!
//! Columns: `id,path,label,source,split,parent_id,detection_prob,
//! segment_index`. Optional columns are empty when absent. Ids are unique;
//! rows produced by segmentation or augmentation point at their origin row
//! through `parent_id`.

use super::PipelineError;
use crate::train::Label;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ManifestLabel {
    Positive,
    Negative,
    Unknown,
}

impl ManifestLabel {
    pub fn as_label(&self) -> Option<Label> {
        match self {
            ManifestLabel::Positive => Some(Label::Positive),
            ManifestLabel::Negative => Some(Label::Negative),
            ManifestLabel::Unknown => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ManifestLabel::Positive => "positive",
            ManifestLabel::Negative => "negative",
            ManifestLabel::Unknown => "unknown",
        }
    }
}

impl From<Label> for ManifestLabel {
    fn from(l: Label) -> Self {
        match l {
            Label::Positive => ManifestLabel::Positive,
            Label::Negative => ManifestLabel::Negative,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Devel,
    Test,
    Unassigned,
}

impl SplitTag {
    pub fn name(&self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::Devel => "devel",
            SplitTag::Test => "test",
            SplitTag::Unassigned => "unassigned",
        }
    }
}

impl std::str::FromStr for SplitTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(SplitTag::Train),
            "devel" => Ok(SplitTag::Devel),
            "test" => Ok(SplitTag::Test),
            "unassigned" => Ok(SplitTag::Unassigned),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub id: String,
    pub path: String,
    pub label: ManifestLabel,
    pub source: String,
    pub split: SplitTag,
    pub parent_id: Option<String>,
    pub detection_prob: Option<f64>,
    pub segment_index: Option<usize>,
}

impl ManifestRow {
    pub fn new(id: impl Into<String>, path: impl Into<String>, label: ManifestLabel, source: impl Into<String>) -> Self {
        ManifestRow {
            id: id.into(),
            path: path.into(),
            label,
            source: source.into(),
            split: SplitTag::Unassigned,
            parent_id: None,
            detection_prob: None,
            segment_index: None,
        }
    }
}

/// Read and validate a manifest file.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>, PipelineError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| PipelineError::Data(format!("cannot open manifest {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for record in reader.deserialize() {
        let row: ManifestRow = record
            .map_err(|e| PipelineError::Data(format!("bad manifest row in {}: {e}", path.display())))?;
        rows.push(row);
    }
    validate_rows(&rows)?;
    Ok(rows)
}

/// Write a manifest file, creating parent directories as needed.
pub fn write_manifest(path: &Path, rows: &[ManifestRow]) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)
            .map_err(|e| PipelineError::Data(format!("cannot create {}: {e}", dir.display())))?;
    }
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| PipelineError::Data(format!("cannot write manifest {}: {e}", path.display())))?;
    for row in rows {
        writer
            .serialize(row)
            .map_err(|e| PipelineError::Data(format!("cannot serialize manifest row: {e}")))?;
    }
    writer
        .flush()
        .map_err(|e| PipelineError::Data(format!("cannot flush manifest: {e}")))?;
    Ok(())
}

pub fn validate_rows(rows: &[ManifestRow]) -> Result<(), PipelineError> {
    let mut seen = std::collections::HashSet::with_capacity(rows.len());
    for row in rows {
        if !seen.insert(&row.id) {
            return Err(PipelineError::Data(format!("duplicate manifest id {:?}", row.id)));
        }
        if let Some(p) = row.detection_prob {
            if !(0.0..=1.0).contains(&p) {
                return Err(PipelineError::Data(format!(
                    "detection_prob {p} of {:?} outside [0, 1]",
                    row.id
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn sample_rows() -> Vec<ManifestRow> {
        vec![
            ManifestRow {
                id: "a".into(),
                path: "/tmp/a.wav".into(),
                label: ManifestLabel::Positive,
                source: "synth".into(),
                split: SplitTag::Train,
                parent_id: None,
                detection_prob: Some(0.93),
                segment_index: None,
            },
            ManifestRow {
                id: "a_seg0".into(),
                path: "/tmp/a_seg0.wav".into(),
                label: ManifestLabel::Positive,
                source: "synth".into(),
                split: SplitTag::Unassigned,
                parent_id: Some("a".into()),
                detection_prob: None,
                segment_index: Some(0),
            },
        ]
    }

    #[test]
    fn round_trip_preserves_rows() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let rows = sample_rows();
        write_manifest(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(
            "id,path,label,source,split,parent_id,detection_prob,segment_index\n"
        ));
        let back = read_manifest(&path).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let mut rows = sample_rows();
        rows[1].id = "a".into();
        write_manifest(&path, &rows).unwrap();
        assert!(matches!(read_manifest(&path), Err(PipelineError::Data(_))));
    }

    #[test]
    fn out_of_range_probability_is_rejected() {
        let mut rows = sample_rows();
        rows[0].detection_prob = Some(1.5);
        assert!(validate_rows(&rows).is_err());
    }

    #[test]
    fn empty_optional_fields_round_trip_as_none() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.csv");
        write_manifest(&path, &sample_rows()).unwrap();
        let back = read_manifest(&path).unwrap();
        assert_eq!(back[1].detection_prob, None);
        assert_eq!(back[0].parent_id, None);
        assert_eq!(back[1].parent_id.as_deref(), Some("a"));
    }
}
