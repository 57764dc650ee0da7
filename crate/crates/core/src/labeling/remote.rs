//! Batched adapter for an external labeling service.
//!
//! The wire transport is abstracted behind [`LabelTransport`]; this module
//! owns batching, idempotency keys and retry with exponential backoff.

use std::collections::HashMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::oracle::{Oracle, Verdict};
use crate::corpus::ItemId;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRequest {
    pub idempotency_key: String,
    pub item_id: ItemId,
    pub embedding: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelResponse {
    pub idempotency_key: String,
    pub label: bool,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{message}")]
pub struct TransportError {
    pub retryable: bool,
    pub message: String,
}

pub trait LabelTransport: Send + Sync {
    fn submit(&self, batch: &[LabelRequest]) -> std::result::Result<Vec<LabelResponse>, TransportError>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff: Duration,
    pub multiplier: f64,
    pub max_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 5,
            initial_backoff: Duration::from_millis(200),
            multiplier: 2.0,
            max_backoff: Duration::from_secs(10),
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `attempt` (1-based).
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = self.multiplier.powi(attempt.saturating_sub(1) as i32);
        self.initial_backoff.mul_f64(factor).min(self.max_backoff)
    }
}

pub struct RemoteOracle<T> {
    transport: T,
    batch_size: usize,
    retry: RetryPolicy,
    key_prefix: String,
    sleep: fn(Duration),
}

impl<T: LabelTransport> RemoteOracle<T> {
    /// `key_prefix` scopes idempotency keys, e.g. to one run.
    pub fn new(transport: T, key_prefix: impl Into<String>) -> Self {
        RemoteOracle {
            transport,
            batch_size: 64,
            retry: RetryPolicy::default(),
            key_prefix: key_prefix.into(),
            sleep: std::thread::sleep,
        }
    }

    pub fn with_batch_size(mut self, n: usize) -> Self {
        self.batch_size = n.max(1);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_sleeper(mut self, sleep: fn(Duration)) -> Self {
        self.sleep = sleep;
        self
    }

    pub fn idempotency_key(&self, id: ItemId) -> String {
        format!("{}:{id}", self.key_prefix)
    }

    fn submit_with_retry(&self, batch: &[LabelRequest]) -> Result<Vec<LabelResponse>> {
        let first = batch.first().map_or(0, |r| r.item_id);
        let mut attempt = 1;
        loop {
            match self.transport.submit(batch) {
                Ok(r) => return Ok(r),
                Err(e) if e.retryable && attempt < self.retry.max_attempts => {
                    (self.sleep)(self.retry.backoff(attempt));
                    attempt += 1;
                }
                Err(e) => {
                    return Err(Error::Oracle {
                        id: first,
                        message: format!("transport failed after {attempt} attempt(s): {e}"),
                    })
                }
            }
        }
    }
}

impl<T: LabelTransport> Oracle for RemoteOracle<T> {
    fn label(&self, item_id: ItemId, embedding: &[f64]) -> Result<Verdict> {
        Ok(self.label_batch(&[(item_id, embedding)])?[0])
    }

    fn label_batch(&self, batch: &[(ItemId, &[f64])]) -> Result<Vec<Verdict>> {
        let mut out = Vec::with_capacity(batch.len());
        for chunk in batch.chunks(self.batch_size) {
            let requests: Vec<LabelRequest> = chunk
                .iter()
                .map(|&(id, e)| LabelRequest {
                    idempotency_key: self.idempotency_key(id),
                    item_id: id,
                    embedding: e.to_vec(),
                })
                .collect();
            let responses: HashMap<String, LabelResponse> = self
                .submit_with_retry(&requests)?
                .into_iter()
                .map(|r| (r.idempotency_key.clone(), r))
                .collect();
            for req in &requests {
                let r = responses.get(&req.idempotency_key).ok_or_else(|| Error::Oracle {
                    id: req.item_id,
                    message: "no response for request".into(),
                })?;
                out.push(Verdict {
                    label: r.label,
                    cost: r.cost,
                });
            }
        }
        Ok(out)
    }
}
