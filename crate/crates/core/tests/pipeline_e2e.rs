//! End-to-end pipeline behavior on the synthetic corpus: determinism,
//! provenance, split hygiene, and sweep mechanics.

use coughkit::pipeline::{
    generate_synthetic_corpus, read_manifest, sweep, DirFeatureStore, FeatureStore, ManifestRow,
    Pipeline, PipelineConfig, PipelineError, SplitTag, Stage, SweepDimension, SynthSpec,
};
use coughkit::train::{EmbeddingSet, EmbeddingVector};
use std::collections::HashSet;
use std::path::Path;
use std::sync::Mutex;
use tempfile::tempdir;

fn demo_model_path() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../assets/demo_detector.json")
        .to_string_lossy()
        .into_owned()
}

fn small_corpus(dir: &Path, n_files: usize, seed: u64) -> Vec<ManifestRow> {
    let spec = SynthSpec {
        n_files,
        seed,
        ..SynthSpec::default()
    };
    generate_synthetic_corpus(&spec, dir).unwrap().rows
}

fn base_config(corpus: &Path, out: &Path, seed: u64) -> PipelineConfig {
    let mut cfg = PipelineConfig::with_seed(seed);
    cfg.manifest = Some(corpus.join("manifest.csv"));
    cfg.out_dir = out.to_path_buf();
    cfg.detector_model = Some(demo_model_path().into());
    cfg.threshold = 0.5;
    cfg.epochs = 25;
    cfg
}

struct TrackingStore<'a> {
    inner: &'a DirFeatureStore,
    accessed: Mutex<Vec<String>>,
}

impl FeatureStore for TrackingStore<'_> {
    fn log_mel(&self, id: &str) -> Result<coughkit::dsp::LogMelSpectrogram, PipelineError> {
        self.accessed.lock().unwrap().push(id.to_string());
        self.inner.log_mel(id)
    }
}

#[test]
fn rerunning_with_the_same_seed_is_byte_identical() {
    let corpus = tempdir().unwrap();
    small_corpus(corpus.path(), 24, 11);
    let out = tempdir().unwrap();
    let cfg = base_config(corpus.path(), out.path(), 11);

    Pipeline::new(cfg.clone()).run().unwrap();
    let first_metrics = std::fs::read(out.path().join("metrics.csv")).unwrap();
    let first_manifest = std::fs::read(out.path().join("manifest_train.csv")).unwrap();
    let first_head = std::fs::read(out.path().join("head.json")).unwrap();

    // wipe and rerun into the same directory
    std::fs::remove_dir_all(out.path()).unwrap();
    std::fs::create_dir_all(out.path()).unwrap();
    Pipeline::new(cfg).run().unwrap();
    assert_eq!(std::fs::read(out.path().join("metrics.csv")).unwrap(), first_metrics);
    assert_eq!(
        std::fs::read(out.path().join("manifest_train.csv")).unwrap(),
        first_manifest
    );
    assert_eq!(std::fs::read(out.path().join("head.json")).unwrap(), first_head);
}

#[test]
fn detection_never_grows_the_manifest_and_provenance_resolves() {
    let corpus = tempdir().unwrap();
    let input_rows = small_corpus(corpus.path(), 16, 3);
    let out = tempdir().unwrap();
    let cfg = base_config(corpus.path(), out.path(), 3);
    let summary = Pipeline::new(cfg).run().unwrap();

    let counts: std::collections::HashMap<&str, usize> = summary
        .stage_counts
        .iter()
        .map(|(s, c)| (s.as_str(), *c))
        .collect();
    assert!(counts["detect"] <= counts["input"]);
    assert!(counts["segment"] >= counts["detect"]); // every kept file yields >= 1 burst here
    assert_eq!(counts["featurize"], counts["segment"]);
    assert!(counts["augment"] >= counts["featurize"]);

    // every derived row's parent chain ends at an input row
    let input_ids: HashSet<&str> = input_rows.iter().map(|r| r.id.as_str()).collect();
    let by_id: std::collections::HashMap<&str, &ManifestRow> =
        summary.rows.iter().map(|r| (r.id.as_str(), r)).collect();
    for row in &summary.rows {
        let mut current = row;
        let mut hops = 0;
        while let Some(parent) = &current.parent_id {
            current = by_id
                .get(parent.as_str())
                .copied()
                .or_else(|| {
                    // segment parents are original recordings, dropped from
                    // the final manifest; they must still be input ids
                    input_ids.contains(parent.as_str()).then_some(current)
                })
                .unwrap_or_else(|| panic!("dangling parent {parent:?} of {:?}", row.id));
            if input_ids.contains(parent.as_str()) {
                break;
            }
            hops += 1;
            assert!(hops < 5, "parent chain of {:?} does not terminate", row.id);
        }
    }
}

#[test]
fn augmented_rows_inherit_their_parents_split() {
    let corpus = tempdir().unwrap();
    small_corpus(corpus.path(), 20, 5);
    let out = tempdir().unwrap();
    let cfg = base_config(corpus.path(), out.path(), 5);
    let summary = Pipeline::new(cfg).run().unwrap();

    let by_id: std::collections::HashMap<&str, &ManifestRow> =
        summary.rows.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut saw_augmented = false;
    for row in &summary.rows {
        if row.id.ends_with("__sa") || row.id.ends_with("__nz") {
            saw_augmented = true;
            assert_eq!(row.split, SplitTag::Train, "{:?}", row.id);
            let parent = by_id[row.parent_id.as_deref().unwrap()];
            assert_eq!(parent.split, SplitTag::Train);
        }
    }
    assert!(saw_augmented);
    // test rows survive untouched from the input manifest
    assert!(summary.rows.iter().any(|r| r.split == SplitTag::Test));
}

#[test]
fn training_never_reads_test_split_features() {
    let corpus = tempdir().unwrap();
    small_corpus(corpus.path(), 20, 9);
    let out = tempdir().unwrap();
    let mut cfg = base_config(corpus.path(), out.path(), 9);
    cfg.stages = [Stage::Prepare, Stage::Segment, Stage::Featurize, Stage::Augment]
        .into_iter()
        .collect();
    cfg.detector_model = None;
    let pipeline = Pipeline::new(cfg.clone());
    let summary = pipeline.run().unwrap();

    let dir_store = DirFeatureStore::new(pipeline.features_dir());
    let tracker = TrackingStore {
        inner: &dir_store,
        accessed: Mutex::new(Vec::new()),
    };
    let (rows, _) = pipeline.train_stage(&summary.rows, &tracker).unwrap();

    let test_ids: HashSet<&str> = rows
        .iter()
        .filter(|r| r.split == SplitTag::Test)
        .map(|r| r.id.as_str())
        .collect();
    assert!(!test_ids.is_empty());
    let accessed = tracker.accessed.lock().unwrap();
    assert!(!accessed.is_empty());
    for id in accessed.iter() {
        assert!(!test_ids.contains(id.as_str()), "read test features {id:?}");
    }
}

#[test]
fn threshold_sweep_counts_are_non_increasing_and_test_free() {
    let corpus = tempdir().unwrap();
    small_corpus(corpus.path(), 16, 13);
    let out = tempdir().unwrap();
    let mut cfg = base_config(corpus.path(), out.path(), 13);
    cfg.epochs = 8;

    let values = [0.0, 0.5, 0.93, 0.99];
    let cells = sweep(&cfg, SweepDimension::Threshold, &values).unwrap();
    assert_eq!(cells.len(), values.len());
    // counts after detection are monotone in tau; compare at the detect stage
    let mut detect_counts = Vec::new();
    for (i, cell) in cells.iter().enumerate() {
        let manifest = out
            .path()
            .join("sweep/threshold")
            .join(i.to_string())
            .join("manifest_detect.csv");
        let count = if manifest.exists() {
            read_manifest(&manifest).unwrap().len()
        } else {
            0 // the whole corpus fell below tau and the run failed downstream
        };
        detect_counts.push(count);
        if cell.error.is_none() {
            let ua = cell.ua.expect("successful cell has a UA");
            assert!((0.0..=1.0).contains(&ua));
        }
        // no test rows may enter any sweep cell
        let input = out.path().join("sweep/threshold/manifest_input.csv");
        assert!(read_manifest(&input)
            .unwrap()
            .iter()
            .all(|r| r.split != SplitTag::Test));
    }
    for pair in detect_counts.windows(2) {
        assert!(pair[1] <= pair[0], "{detect_counts:?}");
    }
    // the permissive cells keep everything, the 0.99 cell keeps nothing
    assert!(detect_counts[0] > 0);
    assert_eq!(detect_counts[3], 0);
}

#[test]
fn alpha_sweep_produces_a_full_table() {
    let corpus = tempdir().unwrap();
    small_corpus(corpus.path(), 12, 17);
    let out = tempdir().unwrap();
    let mut cfg = base_config(corpus.path(), out.path(), 17);
    cfg.epochs = 5;
    cfg.stages.remove(&Stage::Detect);
    cfg.detector_model = None;

    let values: Vec<f64> = (1..=5).map(|i| i as f64 / 5.0).collect();
    let cells = sweep(&cfg, SweepDimension::Alpha, &values).unwrap();
    assert_eq!(cells.len(), 5);
    for cell in &cells {
        assert!(cell.error.is_none(), "{:?}", cell.error);
        let ua = cell.ua.unwrap();
        assert!((0.0..=1.0).contains(&ua));
    }
}

#[test]
fn external_embeddings_drive_training_and_eval() {
    let corpus = tempdir().unwrap();
    let rows = small_corpus(corpus.path(), 16, 21);
    let out = tempdir().unwrap();

    // hand-made separable embeddings keyed by recording id
    let mut set = EmbeddingSet::new(4);
    for row in &rows {
        let sign = match row.label {
            coughkit::pipeline::ManifestLabel::Positive => 1.0,
            _ => -1.0,
        };
        let bump = (row.id.len() % 3) as f64 * 0.01;
        set.insert(EmbeddingVector {
            values: vec![sign + bump, sign, sign - bump, 0.5],
            source_id: row.id.clone(),
        })
        .unwrap();
    }
    let emb_path = out.path().join("external.emb");
    let mut buf = Vec::new();
    set.write(&mut buf).unwrap();
    std::fs::write(&emb_path, buf).unwrap();

    let mut cfg = base_config(corpus.path(), out.path(), 21);
    cfg.stages = [Stage::Train, Stage::Eval].into_iter().collect();
    cfg.detector_model = None;
    cfg.embeddings = Some(emb_path);
    cfg.epochs = 30;
    let summary = Pipeline::new(cfg).run().unwrap();
    let metrics = summary.metrics.unwrap();
    assert!(metrics.unweighted_accuracy >= 0.99);
    assert!(out.path().join("metrics_devel.csv").exists());
}

#[test]
fn eval_on_the_test_split_is_an_explicit_separate_step() {
    let corpus = tempdir().unwrap();
    small_corpus(corpus.path(), 20, 23);
    let out = tempdir().unwrap();
    let mut cfg = base_config(corpus.path(), out.path(), 23);
    cfg.stages.remove(&Stage::Eval);
    let pipeline = Pipeline::new(cfg.clone());
    let summary = pipeline.run().unwrap();

    let store = DirFeatureStore::new(pipeline.features_dir());
    let metrics = pipeline
        .eval_stage(&summary.rows, &store, SplitTag::Test)
        .unwrap();
    assert!((0.0..=1.0).contains(&metrics.unweighted_accuracy));
    assert!(out.path().join("metrics_test.csv").exists());
}

#[test]
fn missing_manifest_is_a_config_error_with_exit_code_two() {
    let out = tempdir().unwrap();
    let mut cfg = PipelineConfig::with_seed(1);
    cfg.out_dir = out.path().to_path_buf();
    cfg.stages = [Stage::Prepare].into_iter().collect();
    let err = Pipeline::new(cfg).run().unwrap_err();
    assert_eq!(err.exit_code(), 2);
}
