//! Review-candidate selection: expansion, dedup, eligibility filtering and
//! greedy maximum-coverage sampling down to a review budget.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};

use bitflags::bitflags;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, ItemId};
use crate::error::{Error, Result};
use crate::labeling::{KnownStore, LabelView};
use crate::simgraph::SimilarityGraph;

bitflags! {
    /// Why an item entered the candidate pool.
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
    pub struct Origin: u8 {
        const CONTENT_SIM = 1;
        const ACTOR_SIM = 1 << 1;
        const SCORE = 1 << 2;
        /// Expanded from a label that itself came from propagation.
        const FEEDBACK = 1 << 3;
    }
}

impl Origin {
    pub fn tag_names(self) -> Vec<&'static str> {
        self.iter_names()
            .map(|(n, _)| match n {
                "CONTENT_SIM" => "content_sim",
                "ACTOR_SIM" => "actor_sim",
                "SCORE" => "score",
                _ => "feedback",
            })
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CandidateSet {
    pub round: u32,
    ids: BTreeMap<ItemId, Origin>,
}

impl CandidateSet {
    pub fn new(round: u32) -> Self {
        CandidateSet {
            round,
            ids: BTreeMap::new(),
        }
    }

    pub fn add_all(&mut self, ids: impl IntoIterator<Item = ItemId>, origin: Origin) {
        for id in ids {
            *self.ids.entry(id).or_insert(Origin::empty()) |= origin;
        }
    }

    pub fn origin(&self, id: ItemId) -> Option<Origin> {
        self.ids.get(&id).copied()
    }

    pub fn ids(&self) -> BTreeSet<ItemId> {
        self.ids.keys().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Representatives chosen for review and the candidates each one accounts for.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CoveragePlan {
    pub representatives: Vec<ItemId>,
    pub covered: BTreeMap<ItemId, BTreeSet<ItemId>>,
    pub budget: usize,
}

impl CoveragePlan {
    pub fn empty(budget: usize) -> Self {
        CoveragePlan {
            budget,
            ..Default::default()
        }
    }

    /// A plan where every representative covers only itself.
    pub fn from_representatives(representatives: Vec<ItemId>, budget: usize) -> Self {
        let covered = representatives.iter().map(|&r| (r, BTreeSet::from([r]))).collect();
        CoveragePlan {
            representatives,
            covered,
            budget,
        }
    }

    pub fn coverage(&self) -> usize {
        self.covered.values().map(BTreeSet::len).sum()
    }
}

/// One line of the per-stage audit log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageAudit {
    pub round: u32,
    pub stage: String,
    #[serde(rename = "in")]
    pub input: usize,
    #[serde(rename = "out")]
    pub output: usize,
    pub removed_reason_counts: BTreeMap<String, usize>,
}

impl StageAudit {
    pub fn new(round: u32, stage: &str, input: usize, output: usize, reasons: &[(&str, usize)]) -> Self {
        StageAudit {
            round,
            stage: stage.to_string(),
            input,
            output,
            removed_reason_counts: reasons
                .iter()
                .filter(|(_, n)| *n > 0)
                .map(|&(r, n)| (r.to_string(), n))
                .collect(),
        }
    }
}

/// One-hop content expansion: neighbors of the sources within `radius`,
/// excluding the sources themselves.
pub fn expand_content(graph: &SimilarityGraph, sources: &BTreeSet<ItemId>, radius: f64) -> Result<BTreeSet<ItemId>> {
    let mut out = BTreeSet::new();
    for &s in sources {
        out.extend(graph.neighbors_within(s, radius)?.into_iter().map(|n| n.id));
    }
    out.retain(|id| !sources.contains(id));
    Ok(out)
}

/// Unlabeled items of every account with at least `min_positives` positive
/// labels and a positive rate of at least `min_rate` among its labeled items.
pub fn expand_actor(corpus: &Corpus, store: &KnownStore, min_positives: u64, min_rate: f64) -> Result<BTreeSet<ItemId>> {
    if min_positives == 0 {
        return Err(Error::config("actor.min_positives", "must be >= 1"));
    }
    if !(min_rate > 0.0 && min_rate <= 1.0) {
        return Err(Error::config("actor.min_rate", "must lie in (0, 1]"));
    }
    let flagged: BTreeSet<u64> = store
        .account_tallies()
        .iter()
        .filter(|(_, t)| t.positive >= min_positives && t.positive as f64 >= min_rate * t.labeled as f64)
        .map(|(&a, _)| a)
        .collect();
    if flagged.is_empty() {
        return Ok(BTreeSet::new());
    }
    Ok(corpus
        .items()
        .iter()
        .filter(|it| flagged.contains(&it.account_id) && !store.is_labeled(it.item_id))
        .map(|it| it.item_id)
        .collect())
}

/// Items whose score is strictly greater than `tau`.
pub fn select_by_score(corpus: &Corpus, scores: &BTreeMap<ItemId, f64>, tau: f64) -> Result<BTreeSet<ItemId>> {
    let mut out = BTreeSet::new();
    for (&id, &score) in scores {
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::ScoreOutOfRange { id, score });
        }
        corpus.get(id)?;
        if score > tau {
            out.insert(id);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CrossRoundDedup {
    pub kept: BTreeSet<ItemId>,
    /// Removed candidate -> the reviewed item it duplicates.
    pub routed: BTreeMap<ItemId, ItemId>,
}

/// Drops candidates that duplicate an already reviewed (seed or oracle) item,
/// by exact hash or by distance `<= theta_dup`. Dropped candidates are routed
/// to propagation instead.
pub fn dedup_cross_round(
    candidates: &BTreeSet<ItemId>,
    store: &KnownStore,
    corpus: &Corpus,
    graph: &SimilarityGraph,
    theta_dup: f64,
) -> Result<CrossRoundDedup> {
    let mut by_hash: HashMap<u64, ItemId> = HashMap::new();
    for &id in store.reviewed() {
        let h = corpus.get(id)?.exact_hash;
        by_hash.entry(h).and_modify(|cur| *cur = (*cur).min(id)).or_insert(id);
    }
    let reviewed = store.reviewed();
    let mut out = CrossRoundDedup::default();
    for &c in candidates {
        let hash_match = by_hash.get(&corpus.get(c)?.exact_hash).copied().filter(|&k| k != c);
        let near = || -> Result<Option<ItemId>> {
            Ok(graph
                .neighbors_within(c, theta_dup)?
                .into_iter()
                .find(|n| reviewed.contains(&n.id))
                .map(|n| n.id))
        };
        let known = match hash_match {
            Some(k) => Some(k),
            None if reviewed.contains(&c) => None,
            None => near()?,
        };
        match known {
            Some(k) => {
                out.routed.insert(c, k);
            }
            None => {
                out.kept.insert(c);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IntraBatchDedup {
    pub kept: BTreeSet<ItemId>,
    /// Dropped item -> the kept item that suppressed it.
    pub dup_of: BTreeMap<ItemId, ItemId>,
}

/// Greedy pass in ascending id order: an item is kept iff no kept item lies
/// within `theta_dup` or shares its exact hash.
pub fn dedup_intra_batch(
    candidates: &BTreeSet<ItemId>,
    corpus: &Corpus,
    graph: &SimilarityGraph,
    theta_dup: f64,
) -> Result<IntraBatchDedup> {
    let mut out = IntraBatchDedup::default();
    let mut kept_hash: HashMap<u64, ItemId> = HashMap::new();
    for &c in candidates {
        let hash = corpus.get(c)?.exact_hash;
        let by_distance = graph
            .neighbors_within(c, theta_dup)?
            .into_iter()
            .filter(|n| out.kept.contains(&n.id))
            .map(|n| n.id)
            .min();
        let suppressor = match (by_distance, kept_hash.get(&hash).copied()) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        match suppressor {
            Some(k) => {
                out.dup_of.insert(c, k);
            }
            None => {
                out.kept.insert(c);
                kept_hash.entry(hash).or_insert(c);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Eligibility {
    pub kept: BTreeSet<ItemId>,
    pub inactive: usize,
    pub labeled: usize,
}

/// Keeps active (impressions > 0), unlabeled candidates.
pub fn filter_eligible(candidates: &BTreeSet<ItemId>, corpus: &Corpus, labels: &impl LabelView) -> Result<Eligibility> {
    let mut out = Eligibility::default();
    for &c in candidates {
        let item = corpus.get(c)?;
        if !item.is_active() {
            out.inactive += 1;
        } else if labels.is_labeled(c) {
            out.labeled += 1;
        } else {
            out.kept.insert(c);
        }
    }
    Ok(out)
}

/// Greedy maximum coverage with unit weights.
pub fn max_coverage_sample(
    candidates: &BTreeSet<ItemId>,
    graph: &SimilarityGraph,
    radius: f64,
    k: usize,
) -> Result<CoveragePlan> {
    max_coverage_sample_weighted(candidates, graph, radius, k, |_| 1)
}

/// Greedy maximum coverage over the candidate universe.
///
/// Candidate `c` covers itself plus the candidates within `radius` of it. Each
/// step picks the candidate with the largest uncovered weight, ties going to
/// the lowest id, and stops after `k` picks or once nothing is left to cover.
/// Covered sets are disjoint: an item belongs to the representative that first
/// covered it, except that a representative always owns itself.
pub fn max_coverage_sample_weighted(
    candidates: &BTreeSet<ItemId>,
    graph: &SimilarityGraph,
    radius: f64,
    k: usize,
    weight: impl Fn(ItemId) -> u64,
) -> Result<CoveragePlan> {
    let ids: Vec<ItemId> = candidates.iter().copied().collect();
    let pos: HashMap<ItemId, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let mut sets: Vec<Vec<usize>> = Vec::with_capacity(ids.len());
    for &c in &ids {
        let mut s = vec![pos[&c]];
        s.extend(graph.neighbors_within(c, radius)?.into_iter().filter_map(|n| pos.get(&n.id).copied()));
        sets.push(s);
    }
    let w: Vec<u64> = ids.iter().map(|&id| weight(id)).collect();
    let mut owner: Vec<Option<usize>> = vec![None; ids.len()];
    let gain = |s: &[usize], owner: &[Option<usize>]| s.iter().filter(|&&j| owner[j].is_none()).map(|&j| w[j]).sum::<u64>();

    // Lazy greedy; stored gains are upper bounds by submodularity.
    let mut heap: BinaryHeap<(u64, Reverse<usize>)> =
        (0..ids.len()).map(|i| (gain(&sets[i], &owner), Reverse(i))).collect();
    let mut plan = CoveragePlan::empty(k);
    while plan.representatives.len() < k {
        let Some((_, Reverse(i))) = heap.pop() else { break };
        let g = gain(&sets[i], &owner);
        if let Some(&(bound, Reverse(j))) = heap.peek() {
            if (g, Reverse(i)) < (bound, Reverse(j)) {
                heap.push((g, Reverse(i)));
                continue;
            }
        }
        if g == 0 {
            break;
        }
        let rep = ids[i];
        let mut mine = BTreeSet::from([rep]);
        if let Some(prev) = owner[i] {
            plan.covered.get_mut(&ids[prev]).expect("owner recorded").remove(&rep);
        }
        owner[i] = Some(i);
        for &j in &sets[i] {
            if owner[j].is_none() {
                owner[j] = Some(i);
                mine.insert(ids[j]);
            }
        }
        plan.representatives.push(rep);
        plan.covered.insert(rep, mine);
    }
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{embedding_fingerprint, Item, LabelRecord};
    use crate::labeling::StagedStore;
    use crate::simgraph::{build_graph, cosine_distance, GraphOptions};
    use proptest::prelude::*;

    fn item(id: ItemId, angle: f64, account: u64, impressions: u64) -> Item {
        let e = vec![angle.cos(), angle.sin()];
        Item {
            item_id: id,
            exact_hash: embedding_fingerprint(&e),
            embedding: e,
            account_id: account,
            impressions,
            created_round: 0,
        }
    }

    fn at(d: f64) -> f64 {
        (1.0 - d).acos()
    }

    /// Seed 0 plus four near-duplicates at distances 0.01..0.04, and a far item.
    fn planted() -> (Corpus, SimilarityGraph) {
        let corpus = Corpus::new(vec![
            item(0, 1.0, 0, 5),
            item(1, 1.0 + at(0.01), 0, 5),
            item(2, 1.0 - at(0.02), 1, 5),
            item(3, 1.0 + at(0.03), 1, 5),
            item(4, 1.0 - at(0.04), 0, 5),
            item(9, -2.0, 2, 5),
        ])
        .unwrap();
        let graph = build_graph(corpus.items(), 0.25, &GraphOptions::exact()).unwrap();
        (corpus, graph)
    }

    fn store_with(corpus: &Corpus, records: Vec<LabelRecord>) -> KnownStore {
        KnownStore::from_records(records, corpus).unwrap()
    }

    fn set(ids: &[ItemId]) -> BTreeSet<ItemId> {
        ids.iter().copied().collect()
    }

    #[test]
    fn content_expansion() {
        let (_, g) = planted();
        assert!(expand_content(&g, &set(&[]), 0.25).unwrap().is_empty());
        assert_eq!(expand_content(&g, &set(&[0]), 0.05).unwrap(), set(&[1, 2, 3, 4]));
        assert!(expand_content(&g, &set(&[0, 1, 2, 3, 4]), 0.25).unwrap().is_empty());
        assert!(matches!(expand_content(&g, &set(&[77]), 0.1), Err(Error::UnknownItem(77))));
    }

    #[test]
    fn actor_expansion_rules() {
        let corpus = Corpus::new((0..8).map(|i| item(i, i as f64, if i < 5 { 1 } else { 2 }, 1)).collect()).unwrap();
        assert!(expand_actor(&corpus, &KnownStore::new(), 2, 0.5).unwrap().is_empty());
        // account 1: 3 labeled, 2 positive
        let store = store_with(
            &corpus,
            vec![LabelRecord::oracle(0, true, 1), LabelRecord::oracle(1, true, 1), LabelRecord::oracle(2, false, 1)],
        );
        assert_eq!(expand_actor(&corpus, &store, 2, 0.5).unwrap(), set(&[3, 4]));
        assert!(expand_actor(&corpus, &store, 3, 0.5).unwrap().is_empty());
        assert!(expand_actor(&corpus, &store, 1, 0.0).is_err());
    }

    #[test]
    fn actor_low_rate_not_flagged() {
        let corpus = Corpus::new((0..12).map(|i| item(i, i as f64, 3, 1)).collect()).unwrap();
        let mut recs = vec![LabelRecord::oracle(0, true, 1)];
        recs.extend((1..10).map(|i| LabelRecord::oracle(i, false, 1)));
        let store = store_with(&corpus, recs);
        assert!(expand_actor(&corpus, &store, 1, 0.5).unwrap().is_empty());
    }

    #[test]
    fn score_selection() {
        let (corpus, _) = planted();
        let scores: BTreeMap<ItemId, f64> = [(0, 0.9), (1, 0.5)].into_iter().collect();
        assert!(select_by_score(&corpus, &scores, 1.0).unwrap().is_empty());
        assert_eq!(select_by_score(&corpus, &scores, 0.0).unwrap(), set(&[0, 1]));
        assert_eq!(select_by_score(&corpus, &scores, 0.6).unwrap(), set(&[0]));
        let bad: BTreeMap<ItemId, f64> = [(0, 1.5)].into_iter().collect();
        assert!(matches!(select_by_score(&corpus, &bad, 0.5), Err(Error::ScoreOutOfRange { id: 0, .. })));
    }

    #[test]
    fn cross_round_dedup() {
        let (corpus, g) = planted();
        let cands = set(&[1, 3, 4, 9]);
        let none = dedup_cross_round(&cands, &KnownStore::new(), &corpus, &g, 0.05).unwrap();
        assert_eq!(none.kept, cands);
        assert!(none.routed.is_empty());

        // item 3 sits at distance 0.03 from reviewed item 0
        let d = cosine_distance(&corpus.get(0).unwrap().embedding, &corpus.get(3).unwrap().embedding).unwrap();
        assert!((d - 0.03).abs() < 1e-9);
        let store = store_with(&corpus, vec![LabelRecord::oracle(0, true, 1)]);
        let out = dedup_cross_round(&set(&[3, 9]), &store, &corpus, &g, 0.05).unwrap();
        assert_eq!(out.kept, set(&[9]));
        assert_eq!(out.routed, [(3, 0)].into_iter().collect());
    }

    #[test]
    fn cross_round_dedup_exact_copy() {
        let mut items = vec![item(0, 0.3, 0, 1), item(1, 2.0, 0, 1)];
        items.push(Item { item_id: 5, ..items[0].clone() });
        let corpus = Corpus::new(items).unwrap();
        // zero-radius graph has only the exact-copy edge; hash match must not rely on it
        let g = build_graph(corpus.items(), 0.0, &GraphOptions::blocked(1, 64, 3)).unwrap();
        let store = store_with(&corpus, vec![LabelRecord::oracle(0, false, 1)]);
        let out = dedup_cross_round(&set(&[1, 5]), &store, &corpus, &g, 0.0).unwrap();
        assert_eq!(out.routed, [(5, 0)].into_iter().collect());
        assert_eq!(out.kept, set(&[1]));
    }

    #[test]
    fn intra_batch_dedup() {
        let (corpus, g) = planted();
        let spread = dedup_intra_batch(&set(&[0, 9]), &corpus, &g, 0.05).unwrap();
        assert_eq!(spread.kept, set(&[0, 9]));
        assert!(spread.dup_of.is_empty());

        let out = dedup_intra_batch(&set(&[0, 1, 2, 3, 4, 9]), &corpus, &g, 0.05).unwrap();
        assert_eq!(out.kept, set(&[0, 9]));
        assert_eq!(out.dup_of, [(1, 0), (2, 0), (3, 0), (4, 0)].into_iter().collect());

        let again = dedup_intra_batch(&out.kept, &corpus, &g, 0.05).unwrap();
        assert_eq!(again.kept, out.kept);
        assert!(again.dup_of.is_empty());
    }

    #[test]
    fn eligibility_filter() {
        let corpus = Corpus::new(vec![item(0, 0.0, 0, 0), item(1, 1.0, 0, 0), item(2, 2.0, 0, 3), item(3, 3.0, 0, 3)]).unwrap();
        let store = store_with(&corpus, vec![LabelRecord::oracle(2, true, 1)]);
        assert!(filter_eligible(&set(&[0, 1]), &corpus, &store).unwrap().kept.is_empty());
        let out = filter_eligible(&set(&[0, 1, 2, 3]), &corpus, &store).unwrap();
        assert_eq!(out, Eligibility { kept: set(&[3]), inactive: 2, labeled: 1 });
        let staged = StagedStore::new(&store);
        assert!(matches!(filter_eligible(&set(&[8]), &corpus, &staged), Err(Error::UnknownItem(8))));
    }

    /// Clusters of sizes 5, 3 and 2 placed far apart on the circle.
    fn three_clusters() -> (Corpus, SimilarityGraph) {
        let mut items = Vec::new();
        let mut id = 0;
        for (center, size) in [(0.0, 5), (2.0, 3), (4.0, 2)] {
            for m in 0..size {
                items.push(item(id, center + m as f64 * 0.01, 0, 1));
                id += 1;
            }
        }
        let corpus = Corpus::new(items).unwrap();
        let graph = build_graph(corpus.items(), 0.25, &GraphOptions::exact()).unwrap();
        (corpus, graph)
    }

    fn brute_force_best(candidates: &BTreeSet<ItemId>, g: &SimilarityGraph, radius: f64, k: usize) -> usize {
        let ids: Vec<ItemId> = candidates.iter().copied().collect();
        let cover = |c: ItemId| -> BTreeSet<ItemId> {
            let mut s: BTreeSet<ItemId> = g
                .neighbors_within(c, radius)
                .unwrap()
                .into_iter()
                .map(|n| n.id)
                .filter(|id| candidates.contains(id))
                .collect();
            s.insert(c);
            s
        };
        let covers: Vec<BTreeSet<ItemId>> = ids.iter().map(|&c| cover(c)).collect();
        let k = k.min(ids.len());
        let mut best = 0;
        let mut pick: Vec<usize> = (0..k).collect();
        loop {
            let u: BTreeSet<ItemId> = pick.iter().flat_map(|&i| covers[i].iter().copied()).collect();
            best = best.max(u.len());
            // next k-combination in lexicographic order
            let mut i = k;
            loop {
                if i == 0 {
                    return best;
                }
                i -= 1;
                if pick[i] != i + ids.len() - k {
                    break;
                }
                if i == 0 {
                    return best;
                }
            }
            pick[i] += 1;
            for j in i + 1..k {
                pick[j] = pick[j - 1] + 1;
            }
        }
    }

    #[test]
    fn coverage_examples() {
        let (corpus, g) = three_clusters();
        let all: BTreeSet<ItemId> = corpus.items().iter().map(|i| i.item_id).collect();
        assert_eq!(max_coverage_sample(&all, &g, 0.1, 0).unwrap(), CoveragePlan::empty(0));

        let plan = max_coverage_sample(&all, &g, 0.1, 2).unwrap();
        assert_eq!(plan.coverage(), 8);
        assert_eq!(brute_force_best(&all, &g, 0.1, 2), 8);
        assert_eq!(plan.representatives, vec![0, 5]);

        let isolated = build_graph(corpus.items(), 0.0, &GraphOptions::exact()).unwrap();
        let plan = max_coverage_sample(&all, &isolated, 0.0, 50).unwrap();
        assert_eq!(plan.representatives, all.iter().copied().collect::<Vec<_>>());
    }

    #[test]
    fn representative_already_covered_owns_itself() {
        // a - b - c - d chain: b covers {a,b,c}, then c (already covered) is the
        // best remaining pick because it adds d
        let corpus = Corpus::new((0..4).map(|i| item(i, i as f64 * at(0.04), 0, 1)).collect()).unwrap();
        let g = build_graph(corpus.items(), 0.05, &GraphOptions::exact()).unwrap();
        let plan = max_coverage_sample(&set(&[0, 1, 2, 3]), &g, 0.05, 2).unwrap();
        assert_eq!(plan.representatives, vec![1, 2]);
        assert_eq!(plan.covered[&1], set(&[0, 1]));
        assert_eq!(plan.covered[&2], set(&[2, 3]));
    }

    #[test]
    fn impression_weighting_changes_choice() {
        let (corpus, g) = three_clusters();
        let all: BTreeSet<ItemId> = corpus.items().iter().map(|i| i.item_id).collect();
        let plan = max_coverage_sample_weighted(&all, &g, 0.1, 1, |id| if id >= 8 { 100 } else { 1 }).unwrap();
        assert_eq!(plan.representatives, vec![8]);
    }

    fn random_instance(seed: u64, n: usize) -> (Corpus, SimilarityGraph) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let items: Vec<Item> = (0..n).map(|i| item(i as ItemId, rng.random_range(0.0..1.5), 0, 1)).collect();
        let corpus = Corpus::new(items).unwrap();
        let graph = build_graph(corpus.items(), 0.02, &GraphOptions::exact()).unwrap();
        (corpus, graph)
    }

    proptest! {
        #[test]
        fn greedy_within_one_minus_inverse_e(seed in any::<u64>(), n in 1usize..=12, k in 1usize..=3) {
            let (corpus, g) = random_instance(seed, n);
            let all: BTreeSet<ItemId> = corpus.items().iter().map(|i| i.item_id).collect();
            let plan = max_coverage_sample(&all, &g, 0.02, k).unwrap();
            let opt = brute_force_best(&all, &g, 0.02, k);
            prop_assert!(plan.coverage() as f64 >= (1.0 - (-1.0f64).exp()) * opt as f64);
            // disjoint, inside the universe, each representative covers itself
            let mut seen = BTreeSet::new();
            for (r, s) in &plan.covered {
                prop_assert!(s.contains(r));
                for id in s {
                    prop_assert!(seen.insert(*id));
                    prop_assert!(all.contains(id));
                }
            }
            prop_assert!(plan.representatives.len() <= k);
        }

        #[test]
        fn dedup_idempotent_and_separated(seed in any::<u64>(), n in 1usize..40) {
            let (corpus, g) = random_instance(seed, n);
            let all: BTreeSet<ItemId> = corpus.items().iter().map(|i| i.item_id).collect();
            let out = dedup_intra_batch(&all, &corpus, &g, 0.01).unwrap();
            let again = dedup_intra_batch(&out.kept, &corpus, &g, 0.01).unwrap();
            prop_assert_eq!(&again.kept, &out.kept);
            prop_assert!(again.dup_of.is_empty());
            let kept: Vec<_> = out.kept.iter().copied().collect();
            for (i, &a) in kept.iter().enumerate() {
                for &b in &kept[i + 1..] {
                    let d = cosine_distance(&corpus.get(a).unwrap().embedding, &corpus.get(b).unwrap().embedding).unwrap();
                    prop_assert!(d > 0.01);
                }
            }
            for (dropped, k) in &out.dup_of {
                prop_assert!(out.kept.contains(k));
                prop_assert!(k < dropped);
            }
        }
    }
}
