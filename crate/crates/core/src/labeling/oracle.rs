use rayon::prelude::*;

use crate::corpus::{GroundTruth, ItemId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdict {
    pub label: bool,
    pub cost: f64,
}

/// The expensive labeler.
///
/// Implementations must be deterministic per item so results do not depend on
/// batching or worker count.
pub trait Oracle: Send + Sync {
    fn label(&self, item_id: ItemId, embedding: &[f64]) -> Result<Verdict>;

    /// Labels a batch; verdicts are returned in input order.
    fn label_batch(&self, batch: &[(ItemId, &[f64])]) -> Result<Vec<Verdict>> {
        batch.par_iter().map(|&(id, e)| self.label(id, e)).collect()
    }
}

/// Running totals of oracle usage.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CostMeter {
    pub calls: u64,
    pub cost: f64,
}

impl CostMeter {
    pub fn charge(&mut self, verdicts: &[Verdict]) {
        self.calls += verdicts.len() as u64;
        self.cost += verdicts.iter().map(|v| v.cost).sum::<f64>();
    }
}

/// Ground-truth oracle with independent per-class error rates.
///
/// The draw for an item is a pure function of `(seed, item_id)`.
#[derive(Debug, Clone)]
pub struct SimulatedOracle<'t> {
    truth: &'t GroundTruth,
    tpr: f64,
    tnr: f64,
    seed: u64,
    unit_cost: f64,
}

impl<'t> SimulatedOracle<'t> {
    pub fn new(truth: &'t GroundTruth, tpr: f64, tnr: f64, seed: u64) -> Result<Self> {
        for (name, v) in [("oracle.tpr", tpr), ("oracle.tnr", tnr)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(name, format!("must lie in [0, 1], got {v}")));
            }
        }
        Ok(SimulatedOracle {
            truth,
            tpr,
            tnr,
            seed,
            unit_cost: 1.0,
        })
    }

    pub fn perfect(truth: &'t GroundTruth) -> Self {
        Self::new(truth, 1.0, 1.0, 0).expect("valid rates")
    }

    pub fn with_unit_cost(mut self, cost: f64) -> Self {
        self.unit_cost = cost;
        self
    }
}

impl Oracle for SimulatedOracle<'_> {
    fn label(&self, item_id: ItemId, _embedding: &[f64]) -> Result<Verdict> {
        let truth = self.truth.get(item_id).ok_or(Error::MissingGroundTruth(item_id))?;
        let u = keyed_uniform(self.seed, item_id);
        let label = if truth { u < self.tpr } else { u >= self.tnr };
        Ok(Verdict {
            label,
            cost: self.unit_cost,
        })
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform in `[0, 1)` keyed by `(seed, key)`.
pub(crate) fn keyed_uniform(seed: u64, key: u64) -> f64 {
    (splitmix64(seed ^ splitmix64(key)) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
