use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simgraph::{GraphMode, GraphOptions};

pub const PIPELINE_SCHEMA_VERSION: u32 = 1;

/// Cosine-distance radii. Must satisfy `dup <= prop <= sim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    /// Near-duplicate radius used by both dedup stages.
    pub dup: f64,
    /// Label propagation and coverage radius.
    pub prop: f64,
    /// Content-similarity expansion radius; also the graph radius.
    pub sim: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            dup: 0.05,
            prop: 0.10,
            sim: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub tpr: f64,
    pub tnr: f64,
    /// Defaults to a value derived from the pipeline `rng_seed`.
    pub seed: Option<u64>,
    pub unit_cost: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            tpr: 0.95,
            tnr: 0.95,
            seed: None,
            unit_cost: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ActorConfig {
    pub enabled: bool,
    pub min_positives: u64,
    pub min_rate: f64,
}

impl Default for ActorConfig {
    fn default() -> Self {
        ActorConfig {
            enabled: true,
            min_positives: 2,
            min_rate: 0.25,
        }
    }
}

/// Simulated weak classifier: the true label is flipped with probability
/// `1 - auc`, then pulled toward 0.5 by up to `jitter` (Beta(2, 2) scaled).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScoreConfig {
    pub enabled: bool,
    pub tau: f64,
    pub auc: f64,
    pub jitter: f64,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        ScoreConfig {
            enabled: false,
            tau: 0.8,
            auc: 0.8,
            jitter: 0.4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub schema_version: u32,
    pub rounds: u32,
    /// Oracle reviews allowed per round (k).
    pub budget_per_round: usize,
    pub thresholds: Thresholds,
    pub oracle: OracleConfig,
    pub actor: ActorConfig,
    pub score: ScoreConfig,
    /// Ground-truth positives revealed as seed labels before round 1.
    pub bootstrap_seeds: usize,
    pub graph: GraphOptions,
    /// Weight coverage by impressions instead of item count.
    pub impression_weighted_sampling: bool,
    pub rng_seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            schema_version: PIPELINE_SCHEMA_VERSION,
            rounds: 5,
            budget_per_round: 40,
            thresholds: Thresholds::default(),
            oracle: OracleConfig::default(),
            actor: ActorConfig::default(),
            score: ScoreConfig::default(),
            bootstrap_seeds: 10,
            graph: GraphOptions {
                mode: GraphMode::Blocked,
                bands: 24,
                bits: 12,
                seed: 0,
            },
            impression_weighted_sampling: false,
            rng_seed: 1,
        }
    }
}

/// Stream ids for sub-seeds derived from `rng_seed`.
const ORACLE_STREAM: u64 = 1;
const BOOTSTRAP_STREAM: u64 = 2;
const SCORE_STREAM: u64 = 3;

pub(crate) fn derive_seed(seed: u64, stream: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17) ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03)
}

/// Seed for baseline trial `trial`.
pub fn derive_seed_for_trial(seed: u64, trial: u32) -> u64 {
    derive_seed(seed, 0x1000 + trial as u64)
}

impl PipelineConfig {
    pub fn oracle_seed(&self) -> u64 {
        self.oracle.seed.unwrap_or_else(|| derive_seed(self.rng_seed, ORACLE_STREAM))
    }

    pub fn bootstrap_seed(&self) -> u64 {
        derive_seed(self.rng_seed, BOOTSTRAP_STREAM)
    }

    pub fn score_seed(&self) -> u64 {
        derive_seed(self.rng_seed, SCORE_STREAM)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != PIPELINE_SCHEMA_VERSION {
            return Err(Error::config(
                "schema_version",
                format!("unsupported version {}, expected {PIPELINE_SCHEMA_VERSION}", self.schema_version),
            ));
        }
        if self.rounds == 0 {
            return Err(Error::config("rounds", "must be >= 1"));
        }
        let t = &self.thresholds;
        for (name, v) in [("thresholds.dup", t.dup), ("thresholds.prop", t.prop), ("thresholds.sim", t.sim)] {
            if !(0.0..=2.0).contains(&v) {
                return Err(Error::config(name, format!("must lie in [0, 2], got {v}")));
            }
        }
        if t.dup > t.prop {
            return Err(Error::config("thresholds.dup", "must not exceed thresholds.prop"));
        }
        if t.prop > t.sim {
            return Err(Error::config("thresholds.prop", "must not exceed thresholds.sim"));
        }
        for (name, v) in [("oracle.tpr", self.oracle.tpr), ("oracle.tnr", self.oracle.tnr)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(name, format!("must lie in [0, 1], got {v}")));
            }
        }
        if !(self.oracle.unit_cost >= 0.0 && self.oracle.unit_cost.is_finite()) {
            return Err(Error::config("oracle.unit_cost", "must be a finite value >= 0"));
        }
        if self.actor.min_positives == 0 {
            return Err(Error::config("actor.min_positives", "must be >= 1"));
        }
        if !(self.actor.min_rate > 0.0 && self.actor.min_rate <= 1.0) {
            return Err(Error::config("actor.min_rate", "must lie in (0, 1]"));
        }
        for (name, v) in [("score.tau", self.score.tau), ("score.auc", self.score.auc), ("score.jitter", self.score.jitter)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(name, format!("must lie in [0, 1], got {v}")));
            }
        }
        self.graph.validate()
    }
}
