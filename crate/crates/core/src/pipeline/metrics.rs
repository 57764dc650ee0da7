use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, GroundTruth, LabelRecord, Provenance};
use crate::error::{Error, Result};
use crate::funnel::StageAudit;

/// Label-quality and volume statistics against hidden ground truth.
///
/// Counts are `f64` so that baseline reports can carry means over trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub oracle_reviews: f64,
    pub positives_seed: f64,
    pub positives_oracle: f64,
    pub positives_propagated: f64,
    pub labeled: f64,
    pub true_positives: f64,
    pub recall: f64,
    pub precision: Option<f64>,
    pub impression_weighted_recall: f64,
    pub review_fraction: f64,
    pub amplification: Option<f64>,
}

impl Summary {
    pub fn positives_total(&self) -> f64 {
        self.positives_seed + self.positives_oracle + self.positives_propagated
    }

    /// Field-wise mean; optional fields average over the reports that have them.
    pub fn mean(all: &[Summary]) -> Option<Summary> {
        if all.is_empty() {
            return None;
        }
        let n = all.len() as f64;
        let avg = |f: fn(&Summary) -> f64| all.iter().map(f).sum::<f64>() / n;
        let avg_opt = |f: fn(&Summary) -> Option<f64>| {
            let vals: Vec<f64> = all.iter().filter_map(f).collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        };
        Some(Summary {
            oracle_reviews: avg(|s| s.oracle_reviews),
            positives_seed: avg(|s| s.positives_seed),
            positives_oracle: avg(|s| s.positives_oracle),
            positives_propagated: avg(|s| s.positives_propagated),
            labeled: avg(|s| s.labeled),
            true_positives: avg(|s| s.true_positives),
            recall: avg(|s| s.recall),
            precision: avg_opt(|s| s.precision),
            impression_weighted_recall: avg(|s| s.impression_weighted_recall),
            review_fraction: avg(|s| s.review_fraction),
            amplification: avg_opt(|s| s.amplification),
        })
    }
}

/// Computes cumulative metrics for a set of label records.
pub fn compute_metrics(records: &[LabelRecord], truth: &GroundTruth, corpus: &Corpus) -> Result<Summary> {
    let mut gt_positive_items = 0u64;
    let mut gt_positive_impressions = 0u64;
    for it in corpus.items() {
        if truth.get(it.item_id).ok_or(Error::MissingGroundTruth(it.item_id))? {
            gt_positive_items += 1;
            gt_positive_impressions += it.impressions;
        }
    }
    let (mut seed, mut oracle, mut propagated, mut reviews) = (0u64, 0u64, 0u64, 0u64);
    let (mut tp, mut tp_impressions) = (0u64, 0u64);
    for r in records {
        if r.provenance == Provenance::Oracle {
            reviews += 1;
        }
        if !r.label {
            continue;
        }
        match r.provenance {
            Provenance::Seed => seed += 1,
            Provenance::Oracle => oracle += 1,
            Provenance::Propagated => propagated += 1,
        }
        if truth.get(r.item_id).ok_or(Error::MissingGroundTruth(r.item_id))? {
            tp += 1;
            tp_impressions += corpus.get(r.item_id)?.impressions;
        }
    }
    let positive_labels = seed + oracle + propagated;
    let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Ok(Summary {
        oracle_reviews: reviews as f64,
        positives_seed: seed as f64,
        positives_oracle: oracle as f64,
        positives_propagated: propagated as f64,
        labeled: records.len() as f64,
        true_positives: tp as f64,
        recall: ratio(tp, gt_positive_items),
        precision: (positive_labels > 0).then(|| tp as f64 / positive_labels as f64),
        impression_weighted_recall: ratio(tp_impressions, gt_positive_impressions),
        review_fraction: ratio(reviews, corpus.len() as u64),
        amplification: (oracle > 0).then(|| positive_labels as f64 / oracle as f64),
    })
}

/// Per-round counts plus cumulative metrics at the end of the round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub round: u32,
    pub oracle_reviews: u64,
    pub positives_oracle: u64,
    pub positives_propagated: u64,
    pub negatives_propagated: u64,
    pub stages: Vec<StageAudit>,
    pub cumulative: Summary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    Pipeline,
    RandomBaseline,
    ScoreBaseline,
}

/// The machine-readable result of a pipeline run or a baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub kind: ReportKind,
    pub corpus_hash: String,
    pub corpus_size: u64,
    pub ground_truth_positives: u64,
    /// Pipeline: one entry per round (round 0 is the seed bootstrap).
    /// Baselines: one entry per trial.
    pub rounds: Vec<RoundMetrics>,
    pub cumulative: Summary,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
