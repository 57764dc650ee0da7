//! A budgeted content-review funnel.
//!
//! Items (embeddings plus account and activity metadata) flow through a
//! candidate-selection funnel, a small budgeted set of representatives is sent
//! to an expensive [`labeling::Oracle`], and the resulting verdicts are copied
//! to near-duplicates over a [`simgraph::SimilarityGraph`]. Positive labels are
//! fed back as expansion sources for the next round.
//!
//! The crate ships a synthetic corpus generator with planted near-duplicate
//! clusters and hidden ground truth so that review volume, recall and label
//! amplification can be measured end to end.

pub mod corpus;
pub mod error;
pub mod funnel;
pub mod labeling;
pub mod pipeline;
pub mod simgraph;

pub use corpus::{Corpus, GeneratorConfig, GroundTruth, Item, ItemId, LabelRecord, Provenance};
pub use error::{Error, Result};
pub use funnel::{CandidateSet, CoveragePlan, Origin};
pub use labeling::{KnownStore, Oracle, SimulatedOracle, Verdict};
pub use pipeline::{MetricsReport, PipelineConfig};
pub use simgraph::{GraphMode, SimilarityGraph};
