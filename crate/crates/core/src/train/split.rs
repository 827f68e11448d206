//! Stratified train/dev splitting.
//!
//! Items are grouped into (label, source) strata. The total train count is
//! `fraction * N` rounded half-up; each stratum receives `floor(fraction *
//! n_i)` train items first, then the remaining slots go to strata by
//! descending fractional remainder, ties broken by stratum order (labels
//! negative before positive, then sources lexicographically). Item
//! assignment within a stratum is a seeded shuffle, so the partition is
//! deterministic and independent of input order.

use super::{Label, TrainError};
use crate::rng::item_rng;
use rand::seq::SliceRandom;
use std::collections::BTreeMap;

/// One manifest entry as seen by the splitter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitKey {
    pub id: String,
    pub label: Label,
    pub source: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SplitResult {
    pub train: Vec<String>,
    pub dev: Vec<String>,
    /// One entry per stratum whose train or dev side came out empty.
    pub warnings: Vec<String>,
}

/// Partition item ids into train and dev sets at the given train fraction.
pub fn split_train_dev(
    items: &[SplitKey],
    train_fraction: f64,
    seed: u64,
) -> Result<SplitResult, TrainError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(TrainError::InvalidConfig(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }

    // label order: negative sorts before positive
    let label_rank = |l: Label| match l {
        Label::Negative => 0u8,
        Label::Positive => 1,
    };
    let mut strata: BTreeMap<(u8, String), Vec<String>> = BTreeMap::new();
    for item in items {
        strata
            .entry((label_rank(item.label), item.source.clone()))
            .or_default()
            .push(item.id.clone());
    }

    let total_target =
        (train_fraction * items.len() as f64 + 0.5).floor() as usize;

    // floor quotas, then largest remainders
    let mut quotas: Vec<usize> = Vec::with_capacity(strata.len());
    let mut remainders: Vec<(usize, f64)> = Vec::with_capacity(strata.len());
    for (i, ids) in strata.values().enumerate() {
        let q = train_fraction * ids.len() as f64;
        quotas.push(q.floor() as usize);
        remainders.push((i, q - q.floor()));
    }
    let mut extras = total_target.saturating_sub(quotas.iter().sum::<usize>());
    remainders.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    for &(i, _) in &remainders {
        if extras == 0 {
            break;
        }
        let cap = strata.values().nth(i).unwrap().len();
        if quotas[i] < cap {
            quotas[i] += 1;
            extras -= 1;
        }
    }

    let mut result = SplitResult::default();
    for (((rank, source), ids), &take) in strata.iter().zip(quotas.iter()) {
        let mut ids = ids.clone();
        ids.sort();
        let label = if *rank == 0 { "negative" } else { "positive" };
        let mut rng = item_rng(seed, &format!("split/{label}/{source}"));
        ids.shuffle(&mut rng);
        if take == 0 {
            result
                .warnings
                .push(format!("stratum ({label}, {source}): train side is empty"));
        }
        if take == ids.len() {
            result
                .warnings
                .push(format!("stratum ({label}, {source}): dev side is empty"));
        }
        result.train.extend(ids[..take].iter().cloned());
        result.dev.extend(ids[take..].iter().cloned());
    }
    result.train.sort();
    result.dev.sort();
    Ok(result)
}
