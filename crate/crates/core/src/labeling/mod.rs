//! Oracle labeling, the known-label store and near-duplicate propagation.

mod oracle;
pub mod remote;
mod store;

use std::collections::{BTreeMap, BTreeSet};

pub use oracle::{CostMeter, Oracle, SimulatedOracle, Verdict};
pub use store::{AccountTally, KnownStore, LabelView, StagedStore};

use crate::corpus::{Corpus, ItemId, LabelRecord};
use crate::error::{Error, Result};
use crate::funnel::CoveragePlan;
use crate::simgraph::{check_radius, cosine_distance, SimilarityGraph};

/// Sends every representative of `plan` to the oracle and stages the verdicts.
pub fn oracle_label(
    plan: &CoveragePlan,
    oracle: &dyn Oracle,
    corpus: &Corpus,
    store: &mut StagedStore<'_>,
    round: u32,
    meter: &mut CostMeter,
) -> Result<Vec<LabelRecord>> {
    let mut batch = Vec::with_capacity(plan.representatives.len());
    for &id in &plan.representatives {
        if store.is_labeled(id) {
            return Err(Error::AlreadyLabeled(id));
        }
        batch.push((id, corpus.get(id)?.embedding.as_slice()));
    }
    let verdicts = oracle.label_batch(&batch)?;
    meter.charge(&verdicts);
    let mut out = Vec::with_capacity(verdicts.len());
    for (&(id, _), v) in batch.iter().zip(&verdicts) {
        let rec = LabelRecord::oracle(id, v.label, round);
        store.insert(rec.clone(), corpus.get(id)?.account_id)?;
        out.push(rec);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
struct Offer {
    distance: f64,
    label: bool,
    source: ItemId,
}

impl Offer {
    /// Nearest source wins; on an exact distance tie a positive label wins,
    /// then the lower source id.
    fn beats(&self, other: &Offer) -> bool {
        match self.distance.total_cmp(&other.distance) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Greater => false,
            std::cmp::Ordering::Equal => (!self.label, self.source) < (!other.label, other.source),
        }
    }
}

/// Copies each source's label to every unlabeled item within `radius` of it,
/// plus the cross-round dedup targets in `routed` (target -> known item).
///
/// One hop only: targets labeled here never act as sources in this call.
pub fn propagate_labels(
    sources: &[LabelRecord],
    graph: &SimilarityGraph,
    radius: f64,
    corpus: &Corpus,
    store: &mut StagedStore<'_>,
    round: u32,
    routed: &BTreeMap<ItemId, ItemId>,
) -> Result<Vec<LabelRecord>> {
    check_radius("theta_prop", radius)?;
    let mut best: BTreeMap<ItemId, Offer> = BTreeMap::new();
    let mut offer = |target: ItemId, o: Offer| {
        best.entry(target)
            .and_modify(|cur| {
                if o.beats(cur) {
                    *cur = o;
                }
            })
            .or_insert(o);
    };

    for src in sources {
        if !src.provenance.is_source() {
            return Err(Error::InvalidSource(src.item_id));
        }
        for n in graph.neighbors_within(src.item_id, radius)? {
            if !store.is_labeled(n.id) {
                offer(
                    n.id,
                    Offer {
                        distance: n.distance,
                        label: src.label,
                        source: src.item_id,
                    },
                );
            }
        }
    }
    for (&target, &known) in routed {
        if store.is_labeled(target) {
            continue;
        }
        let rec = store.record(known).ok_or(Error::UnknownItem(known))?;
        if !rec.provenance.is_source() {
            return Err(Error::InvalidSource(known));
        }
        let distance = cosine_distance(&corpus.get(target)?.embedding, &corpus.get(known)?.embedding)?;
        offer(
            target,
            Offer {
                distance,
                label: rec.label,
                source: known,
            },
        );
    }

    let mut out = Vec::with_capacity(best.len());
    for (target, o) in best {
        let rec = LabelRecord::propagated(target, o.label, o.source, o.distance, round);
        store.insert(rec.clone(), corpus.get(target)?.account_id)?;
        out.push(rec);
    }
    Ok(out)
}

/// Every item labeled positive (any provenance) in rounds `<= round`.
pub fn feedback_seeds(store: &KnownStore, round: u32) -> BTreeSet<ItemId> {
    store
        .records()
        .iter()
        .filter(|r| r.label && r.round <= round)
        .map(|r| r.item_id)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{embedding_fingerprint, GroundTruth, Item, Provenance};
    use crate::simgraph::{build_graph, GraphOptions};

    fn item(id: ItemId, angle: f64) -> Item {
        let e = vec![angle.cos(), angle.sin()];
        Item {
            item_id: id,
            exact_hash: embedding_fingerprint(&e),
            embedding: e,
            account_id: id % 2,
            impressions: 1,
            created_round: 0,
        }
    }

    /// angle giving cosine distance `d` from angle 0
    fn at(d: f64) -> f64 {
        (1.0 - d).acos()
    }

    fn cluster_of_five() -> Corpus {
        Corpus::new(vec![
            item(10, 0.0),
            item(11, at(0.01)),
            item(12, -at(0.02)),
            item(13, at(0.03)),
            item(14, -at(0.04)),
            item(20, 2.0),
        ])
        .unwrap()
    }

    #[test]
    fn empty_plan_costs_nothing() {
        let corpus = cluster_of_five();
        let gt: GroundTruth = corpus.items().iter().map(|i| (i.item_id, true)).collect();
        let store = KnownStore::new();
        let mut st = StagedStore::new(&store);
        let mut meter = CostMeter::default();
        let plan = CoveragePlan::empty(0);
        let recs = oracle_label(&plan, &SimulatedOracle::perfect(&gt), &corpus, &mut st, 1, &mut meter).unwrap();
        assert!(recs.is_empty());
        assert_eq!(meter.calls, 0);
    }

    #[test]
    fn perfect_oracle_labels_planted_positive() {
        let corpus = cluster_of_five();
        let gt: GroundTruth = corpus.items().iter().map(|i| (i.item_id, i.item_id < 20)).collect();
        let store = KnownStore::new();
        let mut st = StagedStore::new(&store);
        let mut meter = CostMeter::default();
        let plan = CoveragePlan::from_representatives(vec![10, 20], 2);
        let recs = oracle_label(&plan, &SimulatedOracle::perfect(&gt), &corpus, &mut st, 1, &mut meter).unwrap();
        assert_eq!(recs, vec![LabelRecord::oracle(10, true, 1), LabelRecord::oracle(20, false, 1)]);
        assert_eq!(meter.calls, 2);
        // consulting the oracle again for a labeled item is a caller bug
        let again = oracle_label(&plan, &SimulatedOracle::perfect(&gt), &corpus, &mut st, 1, &mut meter);
        assert!(matches!(again, Err(Error::AlreadyLabeled(10))));
        assert_eq!(meter.calls, 2);
    }

    #[test]
    fn positive_source_propagates_to_cluster() {
        let corpus = cluster_of_five();
        let graph = build_graph(corpus.items(), 0.25, &GraphOptions::exact()).unwrap();
        let store = KnownStore::new();
        let mut st = StagedStore::new(&store);
        let src = LabelRecord::oracle(10, true, 1);
        st.insert(src.clone(), 0).unwrap();
        let out = propagate_labels(&[src], &graph, 0.1, &corpus, &mut st, 1, &BTreeMap::new()).unwrap();
        assert_eq!(out.iter().map(|r| r.item_id).collect::<Vec<_>>(), vec![11, 12, 13, 14]);
        for r in &out {
            let d = cosine_distance(&corpus.get(10).unwrap().embedding, &corpus.get(r.item_id).unwrap().embedding).unwrap();
            assert_eq!(r.distance_to_source, Some(d));
            assert!(d <= 0.1);
            assert!(r.label && r.provenance == Provenance::Propagated && r.source_item_id == Some(10));
        }
    }

    #[test]
    fn isolated_source_propagates_nothing() {
        let corpus = cluster_of_five();
        let graph = build_graph(corpus.items(), 0.25, &GraphOptions::exact()).unwrap();
        let store = KnownStore::new();
        let mut st = StagedStore::new(&store);
        let src = LabelRecord::oracle(20, false, 1);
        st.insert(src.clone(), 0).unwrap();
        assert!(propagate_labels(&[src], &graph, 0.1, &corpus, &mut st, 1, &BTreeMap::new()).unwrap().is_empty());
    }

    #[test]
    fn nearer_source_wins_and_ties_go_positive() {
        // item 1 at angle 0; sources at +a and -b
        let t = at(0.02);
        let corpus = Corpus::new(vec![item(1, 0.0), item(2, t), item(3, -at(0.03)), item(4, -t)]).unwrap();
        let graph = build_graph(corpus.items(), 0.25, &GraphOptions::exact()).unwrap();

        let store = KnownStore::new();
        let mut st = StagedStore::new(&store);
        let neg = LabelRecord::oracle(2, false, 1);
        let pos = LabelRecord::oracle(3, true, 1);
        st.insert(neg.clone(), 0).unwrap();
        st.insert(pos.clone(), 0).unwrap();
        let out = propagate_labels(&[neg, pos], &graph, 0.05, &corpus, &mut st, 1, &BTreeMap::new()).unwrap();
        let r1 = out.iter().find(|r| r.item_id == 1).unwrap();
        assert_eq!((r1.label, r1.source_item_id), (false, Some(2)));

        // symmetric angles give bit-identical distances
        let d2 = cosine_distance(&corpus.get(1).unwrap().embedding, &corpus.get(2).unwrap().embedding).unwrap();
        let d4 = cosine_distance(&corpus.get(1).unwrap().embedding, &corpus.get(4).unwrap().embedding).unwrap();
        assert_eq!(d2, d4);
        let store = KnownStore::new();
        let mut st = StagedStore::new(&store);
        let neg = LabelRecord::oracle(2, false, 1);
        let pos = LabelRecord::oracle(4, true, 1);
        st.insert(neg.clone(), 0).unwrap();
        st.insert(pos.clone(), 0).unwrap();
        let out = propagate_labels(&[neg, pos], &graph, 0.025, &corpus, &mut st, 1, &BTreeMap::new()).unwrap();
        let r1 = out.iter().find(|r| r.item_id == 1).unwrap();
        assert_eq!((r1.label, r1.source_item_id), (true, Some(4)));
    }

    #[test]
    fn routed_targets_take_known_label() {
        let corpus = cluster_of_five();
        let graph = build_graph(corpus.items(), 0.25, &GraphOptions::exact()).unwrap();
        let mut store = KnownStore::new();
        let mut st = StagedStore::new(&store);
        st.insert(LabelRecord::oracle(10, true, 1), 0).unwrap();
        let pending = st.into_pending();
        store.commit(pending);

        let mut st = StagedStore::new(&store);
        let routed: BTreeMap<ItemId, ItemId> = [(13, 10)].into_iter().collect();
        let out = propagate_labels(&[], &graph, 0.1, &corpus, &mut st, 2, &routed).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!((out[0].item_id, out[0].label, out[0].source_item_id, out[0].round), (13, true, Some(10), 2));
    }

    #[test]
    fn propagated_records_are_not_sources() {
        let corpus = cluster_of_five();
        let graph = build_graph(corpus.items(), 0.25, &GraphOptions::exact()).unwrap();
        let store = KnownStore::new();
        let mut st = StagedStore::new(&store);
        let bad = LabelRecord::propagated(11, true, 10, 0.01, 1);
        assert!(matches!(
            propagate_labels(&[bad], &graph, 0.1, &corpus, &mut st, 1, &BTreeMap::new()),
            Err(Error::InvalidSource(11))
        ));
    }

    #[test]
    fn feedback_seeds_are_all_positives() {
        assert!(feedback_seeds(&KnownStore::new(), 5).is_empty());
        let mut store = KnownStore::new();
        let mut st = StagedStore::new(&store);
        st.insert(LabelRecord::oracle(0, true, 1), 0).unwrap();
        st.insert(LabelRecord::oracle(1, true, 1), 0).unwrap();
        for (i, src) in [(2, 0), (3, 0), (4, 1)] {
            st.insert(LabelRecord::propagated(i, true, src, 0.01, 1), 0).unwrap();
        }
        for i in 5..9 {
            st.insert(LabelRecord::oracle(i, false, 1), 0).unwrap();
        }
        let pending = st.into_pending();
        store.commit(pending);
        let s1 = feedback_seeds(&store, 1);
        assert_eq!(s1.into_iter().collect::<Vec<_>>(), vec![0, 1, 2, 3, 4]);
        // a round without new positives leaves the seeds unchanged
        assert_eq!(feedback_seeds(&store, 2), feedback_seeds(&store, 1));
    }
}
