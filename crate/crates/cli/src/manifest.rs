use std::path::{Path, PathBuf};

use review_funnel::PipelineConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";
pub const METRICS: &str = "metrics.json";
pub const AUDIT: &str = "audit.jsonl";
pub const LABELS: &str = "labels.jsonl";
pub const CONFIG: &str = "config.json";
pub const GRAPH: &str = "graph.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Running,
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusRef {
    pub path: PathBuf,
    pub content_hash: String,
    pub items: usize,
}

/// Written before the first round and rewritten when the command ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub artifact: String,
    pub version: String,
    pub command: String,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub started_at: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<String>,
    pub corpus: CorpusRef,
    pub config: PipelineConfig,
    /// Baseline commands only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<serde_json::Value>,
    pub outputs: Vec<String>,
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn new(command: &str, corpus: CorpusRef, config: PipelineConfig, outputs: &[&str]) -> Self {
        RunManifest {
            artifact: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            status: Status::Running,
            error: None,
            started_at: now(),
            finished_at: None,
            corpus,
            config,
            baseline: None,
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn finish(&mut self, outcome: Result<(), &CliError>) {
        self.finished_at = Some(now());
        match outcome {
            Ok(()) => self.status = Status::Completed,
            Err(e) => {
                self.status = Status::Failed;
                self.error = Some(e.to_string());
            }
        }
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let path = dir.join(MANIFEST);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&path, text + "\n").map_err(CliError::io(path))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        crate::load_json(path)
    }
}
