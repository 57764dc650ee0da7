//! Data model, synthetic corpus generation and JSON Lines persistence.

mod generate;
mod io;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use generate::{generate_corpus, GeneratorConfig, PlantedCluster, SyntheticCorpus};
pub use io::{load_corpus, load_labels, read_corpus, read_labels, save_corpus, save_labels, write_corpus, write_labels, LABEL_STORE_HEADER};

pub type ItemId = u64;

/// Norm tolerance under which an embedding is treated as already unit length.
const RENORMALIZE_EPS: f64 = 1e-12;

/// One reviewable content unit.
///
/// Ground truth is deliberately not a field here; it travels in a separate
/// [`GroundTruth`] map that funnel code never receives.
#[derive(Debug, Clone, PartialEq)]
pub struct Item {
    pub item_id: ItemId,
    pub embedding: Vec<f64>,
    pub account_id: u64,
    pub impressions: u64,
    pub exact_hash: u64,
    pub created_round: u32,
}

impl Item {
    pub fn is_active(&self) -> bool {
        self.impressions > 0
    }
}

/// Hidden per-item policy truth, visible only to the simulated oracle, the
/// bootstrap and the metrics evaluator.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruth(BTreeMap<ItemId, bool>);

impl GroundTruth {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: ItemId, positive: bool) {
        self.0.insert(id, positive);
    }

    pub fn get(&self, id: ItemId) -> Option<bool> {
        self.0.get(&id).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ItemId, bool)> + '_ {
        self.0.iter().map(|(&id, &p)| (id, p))
    }

    pub fn positives(&self) -> impl Iterator<Item = ItemId> + '_ {
        self.0.iter().filter(|(_, &p)| p).map(|(&id, _)| id)
    }

    pub fn positive_count(&self) -> usize {
        self.0.values().filter(|&&p| p).count()
    }
}

impl FromIterator<(ItemId, bool)> for GroundTruth {
    fn from_iter<T: IntoIterator<Item = (ItemId, bool)>>(iter: T) -> Self {
        GroundTruth(iter.into_iter().collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Seed,
    Oracle,
    Propagated,
}

impl Provenance {
    /// Seed and oracle records may act as propagation sources.
    pub fn is_source(self) -> bool {
        matches!(self, Provenance::Seed | Provenance::Oracle)
    }
}

/// A policy decision for one item. `label == true` means policy-violating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelRecord {
    pub item_id: ItemId,
    pub label: bool,
    pub provenance: Provenance,
    #[serde(default)]
    pub source_item_id: Option<ItemId>,
    pub round: u32,
    #[serde(default)]
    pub distance_to_source: Option<f64>,
}

impl LabelRecord {
    pub fn seed(item_id: ItemId, label: bool, round: u32) -> Self {
        LabelRecord {
            item_id,
            label,
            provenance: Provenance::Seed,
            source_item_id: None,
            round,
            distance_to_source: None,
        }
    }

    pub fn oracle(item_id: ItemId, label: bool, round: u32) -> Self {
        LabelRecord {
            provenance: Provenance::Oracle,
            ..Self::seed(item_id, label, round)
        }
    }

    pub fn propagated(item_id: ItemId, label: bool, source: ItemId, distance: f64, round: u32) -> Self {
        LabelRecord {
            item_id,
            label,
            provenance: Provenance::Propagated,
            source_item_id: Some(source),
            round,
            distance_to_source: Some(distance),
        }
    }

    /// Checks the provenance-dependent field requirements. Returns the name of
    /// the offending field.
    pub fn validate(&self) -> std::result::Result<(), String> {
        match self.provenance {
            Provenance::Propagated => {
                if self.source_item_id.is_none() {
                    return Err("source_item_id is required for propagated records".into());
                }
                match self.distance_to_source {
                    None => return Err("distance_to_source is required for propagated records".into()),
                    Some(d) if !(0.0..=2.0).contains(&d) => {
                        return Err(format!("distance_to_source out of range [0, 2]: {d}"))
                    }
                    _ => {}
                }
            }
            _ => {
                if self.source_item_id.is_some() {
                    return Err("source_item_id must be null unless provenance is propagated".into());
                }
                if self.distance_to_source.is_some() {
                    return Err("distance_to_source must be null unless provenance is propagated".into());
                }
            }
        }
        Ok(())
    }
}

/// 64-bit fingerprint of an embedding quantized to 1e-6.
pub fn embedding_fingerprint(embedding: &[f64]) -> u64 {
    use std::hash::Hasher;
    let mut hasher = fnv::FnvHasher::default();
    for &x in embedding {
        hasher.write_i64((x * 1e6).round() as i64);
    }
    hasher.finish()
}

/// Scales `v` to unit L2 norm unless it already is within 1e-12.
pub fn normalize(v: &mut [f64]) -> Result<()> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::ZeroVector);
    }
    if (norm - 1.0).abs() > RENORMALIZE_EPS {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    Ok(())
}

/// An indexed, validated set of items sharing one embedding dimension.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    items: Vec<Item>,
    index: HashMap<ItemId, usize>,
    dim: usize,
}

impl Corpus {
    /// Validates ids and dimensions and normalizes embeddings.
    pub fn new(mut items: Vec<Item>) -> Result<Self> {
        let dim = items.first().map_or(0, |it| it.embedding.len());
        let mut index = HashMap::with_capacity(items.len());
        for (pos, item) in items.iter_mut().enumerate() {
            if item.embedding.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: item.embedding.len(),
                });
            }
            normalize(&mut item.embedding)?;
            if index.insert(item.item_id, pos).is_some() {
                return Err(Error::DuplicateId {
                    id: item.item_id,
                    line: None,
                });
            }
        }
        Ok(Corpus { items, index, dim })
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, id: ItemId) -> Result<&Item> {
        self.position(id).map(|p| &self.items[p])
    }

    pub fn position(&self, id: ItemId) -> Result<usize> {
        self.index.get(&id).copied().ok_or(Error::UnknownItem(id))
    }

    pub fn contains(&self, id: ItemId) -> bool {
        self.index.contains_key(&id)
    }

    /// Hex SHA-256 over the canonical byte encoding of every item, in order.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for it in &self.items {
            hasher.update(it.item_id.to_le_bytes());
            hasher.update((it.embedding.len() as u64).to_le_bytes());
            for x in &it.embedding {
                hasher.update(x.to_bits().to_le_bytes());
            }
            hasher.update(it.account_id.to_le_bytes());
            hasher.update(it.impressions.to_le_bytes());
            hasher.update(it.exact_hash.to_le_bytes());
            hasher.update(it.created_round.to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }

    pub fn into_items(self) -> Vec<Item> {
        self.items
    }
}
