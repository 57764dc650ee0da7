use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::corpus::{Corpus, ItemId, LabelRecord, Provenance};
use crate::error::{Error, Result};

/// Per-account label tallies, used for actor-similarity expansion.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AccountTally {
    pub labeled: u64,
    pub positive: u64,
}

/// Read access shared by the committed store and a round's staging buffer.
pub trait LabelView {
    fn record(&self, id: ItemId) -> Option<&LabelRecord>;

    fn is_labeled(&self, id: ItemId) -> bool {
        self.record(id).is_some()
    }
}

/// Append-only store of every label ever written, one record per item.
#[derive(Debug, Clone, Default)]
pub struct KnownStore {
    records: Vec<LabelRecord>,
    by_item: HashMap<ItemId, usize>,
    reviewed: BTreeSet<ItemId>,
    positives: BTreeSet<ItemId>,
    by_account: BTreeMap<u64, AccountTally>,
}

impl KnownStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rebuilds a store from persisted records, in order.
    pub fn from_records(records: Vec<LabelRecord>, corpus: &Corpus) -> Result<Self> {
        let mut store = KnownStore::new();
        for r in records {
            let account = corpus.get(r.item_id)?.account_id;
            check_record(&r, |id| store.record(id))?;
            store.push(r, account);
        }
        Ok(store)
    }

    fn push(&mut self, record: LabelRecord, account: u64) {
        let id = record.item_id;
        if record.provenance.is_source() {
            self.reviewed.insert(id);
        }
        let tally = self.by_account.entry(account).or_default();
        tally.labeled += 1;
        if record.label {
            tally.positive += 1;
            self.positives.insert(id);
        }
        self.by_item.insert(id, self.records.len());
        self.records.push(record);
    }

    /// Appends staged records. Each was validated when staged.
    pub fn commit(&mut self, staged: Vec<(LabelRecord, u64)>) {
        for (r, account) in staged {
            debug_assert!(!self.by_item.contains_key(&r.item_id));
            self.push(r, account);
        }
    }

    pub fn records(&self) -> &[LabelRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Items labeled by seed or oracle; the only legal propagation sources.
    pub fn reviewed(&self) -> &BTreeSet<ItemId> {
        &self.reviewed
    }

    pub fn positives(&self) -> &BTreeSet<ItemId> {
        &self.positives
    }

    pub fn account_tallies(&self) -> &BTreeMap<u64, AccountTally> {
        &self.by_account
    }

    pub fn oracle_count(&self) -> usize {
        self.records.iter().filter(|r| r.provenance == Provenance::Oracle).count()
    }
}

impl LabelView for KnownStore {
    fn record(&self, id: ItemId) -> Option<&LabelRecord> {
        self.by_item.get(&id).map(|&i| &self.records[i])
    }
}

fn check_record<'s>(r: &LabelRecord, lookup: impl Fn(ItemId) -> Option<&'s LabelRecord>) -> Result<()> {
    r.validate().map_err(|reason| Error::InvalidRecord { id: r.item_id, reason })?;
    if lookup(r.item_id).is_some() {
        return Err(Error::AlreadyLabeled(r.item_id));
    }
    if let Some(src) = r.source_item_id {
        match lookup(src) {
            Some(s) if s.provenance.is_source() && s.round <= r.round => {}
            _ => {
                return Err(Error::InvalidRecord {
                    id: r.item_id,
                    reason: format!("source {src} is not a seed or oracle record from this or an earlier round"),
                })
            }
        }
    }
    Ok(())
}

/// Uncommitted writes of one round layered over the committed store.
#[derive(Debug)]
pub struct StagedStore<'a> {
    base: &'a KnownStore,
    pending: Vec<(LabelRecord, u64)>,
    index: HashMap<ItemId, usize>,
}

impl<'a> StagedStore<'a> {
    pub fn new(base: &'a KnownStore) -> Self {
        StagedStore {
            base,
            pending: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn base(&self) -> &KnownStore {
        self.base
    }

    /// First writer wins: fails if the item already has a record.
    pub fn insert(&mut self, record: LabelRecord, account: u64) -> Result<()> {
        check_record(&record, |id| self.record(id))?;
        self.index.insert(record.item_id, self.pending.len());
        self.pending.push((record, account));
        Ok(())
    }

    pub fn pending(&self) -> impl Iterator<Item = &LabelRecord> {
        self.pending.iter().map(|(r, _)| r)
    }

    pub fn into_pending(self) -> Vec<(LabelRecord, u64)> {
        self.pending
    }
}

impl LabelView for StagedStore<'_> {
    fn record(&self, id: ItemId) -> Option<&LabelRecord> {
        self.index
            .get(&id)
            .map(|&i| &self.pending[i].0)
            .or_else(|| self.base.record(id))
    }
}
