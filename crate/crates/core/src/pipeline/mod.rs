//! Multi-round orchestration, baselines and metrics.
//!
//! A round runs the funnel stages in a fixed order, labels the sampled
//! representatives, propagates their labels and then commits every staged
//! record at once. A failing stage discards the staging buffer, so the store
//! is left exactly as it was before the round.

mod config;
mod metrics;

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Beta;

pub use config::{derive_seed_for_trial, ActorConfig, OracleConfig, PipelineConfig, ScoreConfig, Thresholds, PIPELINE_SCHEMA_VERSION};
pub use metrics::{compute_metrics, MetricsReport, ReportKind, RoundMetrics, Summary};

use crate::corpus::{Corpus, GroundTruth, ItemId, LabelRecord, Provenance};
use crate::error::{Error, Result};
use crate::funnel::{self, CandidateSet, CoveragePlan, Origin, StageAudit};
use crate::labeling::{self, CostMeter, KnownStore, LabelView, Oracle, SimulatedOracle, StagedStore};
use crate::simgraph::{build_graph, SimilarityGraph};

/// Everything a round reads; only `store`, `seeds` and `meter` change.
pub struct PipelineState<'a> {
    pub corpus: &'a Corpus,
    pub graph: &'a SimilarityGraph,
    pub store: KnownStore,
    /// Positive-labeled items as of the end of the last committed round.
    pub seeds: BTreeSet<ItemId>,
    pub scores: Option<BTreeMap<ItemId, f64>>,
    pub meter: CostMeter,
}

/// What one round did, before metrics are attached.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub round: u32,
    pub audit: Vec<StageAudit>,
    pub plan: CoveragePlan,
    pub oracle_records: Vec<LabelRecord>,
    pub propagated: Vec<LabelRecord>,
}

impl<'a> PipelineState<'a> {
    pub fn new(corpus: &'a Corpus, graph: &'a SimilarityGraph) -> Self {
        PipelineState {
            corpus,
            graph,
            store: KnownStore::new(),
            seeds: BTreeSet::new(),
            scores: None,
            meter: CostMeter::default(),
        }
    }

    pub fn with_scores(mut self, scores: BTreeMap<ItemId, f64>) -> Self {
        self.scores = Some(scores);
        self
    }

    /// Round 0: writes the revealed seed labels and propagates them.
    pub fn bootstrap(&mut self, seeds: &[(ItemId, bool)], config: &PipelineConfig) -> Result<RoundOutcome> {
        let mut staged = StagedStore::new(&self.store);
        let mut sources = Vec::with_capacity(seeds.len());
        let result = (|| {
            for &(id, label) in seeds {
                let rec = LabelRecord::seed(id, label, 0);
                staged.insert(rec.clone(), self.corpus.get(id)?.account_id)?;
                sources.push(rec);
            }
            labeling::propagate_labels(
                &sources,
                self.graph,
                config.thresholds.prop,
                self.corpus,
                &mut staged,
                0,
                &BTreeMap::new(),
            )
        })();
        let propagated = result.map_err(|e| e.at_stage(0, "bootstrap"))?;
        let pending = staged.into_pending();
        self.store.commit(pending);
        self.seeds = labeling::feedback_seeds(&self.store, 0);
        Ok(RoundOutcome {
            round: 0,
            audit: Vec::new(),
            plan: CoveragePlan::empty(0),
            oracle_records: Vec::new(),
            propagated,
        })
    }

    /// Runs one full funnel round and commits its labels atomically.
    pub fn run_round(&mut self, config: &PipelineConfig, oracle: &dyn Oracle, round: u32) -> Result<RoundOutcome> {
        let t = &config.thresholds;
        let corpus = self.corpus;
        let graph = self.graph;
        let store = &self.store;
        let mut audit = Vec::new();

        // selection
        let mut candidates = CandidateSet::new(round);
        let mut selected_total = 0;
        for &s in &self.seeds {
            let reached = funnel::expand_content(graph, &BTreeSet::from([s]), t.sim).map_err(|e| e.at_stage(round, "expand_content"))?;
            let mut origin = Origin::CONTENT_SIM;
            if store.record(s).is_some_and(|r| r.provenance == Provenance::Propagated) {
                origin |= Origin::FEEDBACK;
            }
            let reached: Vec<ItemId> = reached.into_iter().filter(|id| !self.seeds.contains(id)).collect();
            selected_total += reached.len();
            candidates.add_all(reached, origin);
        }
        if config.actor.enabled {
            let actor = funnel::expand_actor(corpus, store, config.actor.min_positives, config.actor.min_rate)
                .map_err(|e| e.at_stage(round, "expand_actor"))?;
            selected_total += actor.len();
            candidates.add_all(actor, Origin::ACTOR_SIM);
        }
        if config.score.enabled {
            if let Some(scores) = &self.scores {
                let by_score = funnel::select_by_score(corpus, scores, config.score.tau)
                    .map_err(|e| e.at_stage(round, "select_by_score"))?;
                selected_total += by_score.len();
                candidates.add_all(by_score, Origin::SCORE);
            }
        }
        let pool = candidates.ids();
        audit.push(StageAudit::new(round, "select", selected_total, pool.len(), &[("overlap", selected_total - pool.len())]));

        let cross = funnel::dedup_cross_round(&pool, store, corpus, graph, t.dup).map_err(|e| e.at_stage(round, "dedup_cross_round"))?;
        audit.push(StageAudit::new(round, "dedup_cross_round", pool.len(), cross.kept.len(), &[("dup_cross_round", cross.routed.len())]));

        let eligible = funnel::filter_eligible(&cross.kept, corpus, store).map_err(|e| e.at_stage(round, "filter_eligible"))?;
        audit.push(StageAudit::new(
            round,
            "filter_eligible",
            cross.kept.len(),
            eligible.kept.len(),
            &[("inactive", eligible.inactive), ("labeled", eligible.labeled)],
        ));

        let unique = funnel::dedup_intra_batch(&eligible.kept, corpus, graph, t.dup).map_err(|e| e.at_stage(round, "dedup_intra_batch"))?;
        audit.push(StageAudit::new(
            round,
            "dedup_intra_batch",
            eligible.kept.len(),
            unique.kept.len(),
            &[("dup_intra_batch", unique.dup_of.len())],
        ));

        let plan = if config.impression_weighted_sampling {
            funnel::max_coverage_sample_weighted(&unique.kept, graph, t.prop, config.budget_per_round, |id| {
                corpus.get(id).map_or(0, |it| it.impressions)
            })
        } else {
            funnel::max_coverage_sample(&unique.kept, graph, t.prop, config.budget_per_round)
        }
        .map_err(|e| e.at_stage(round, "sample"))?;
        let reps = plan.representatives.len();
        let covered = plan.coverage();
        audit.push(StageAudit::new(
            round,
            "sample",
            unique.kept.len(),
            reps,
            &[("covered", covered - reps), ("unsampled", unique.kept.len() - covered)],
        ));

        // labeling, staged
        let mut staged = StagedStore::new(store);
        let mut meter = self.meter;
        let oracle_records = labeling::oracle_label(&plan, oracle, corpus, &mut staged, round, &mut meter)
            .map_err(|e| e.at_stage(round, "oracle_label"))?;
        let propagated = labeling::propagate_labels(&oracle_records, graph, t.prop, corpus, &mut staged, round, &cross.routed)
            .map_err(|e| e.at_stage(round, "propagate_labels"))?;

        let pending = staged.into_pending();
        self.store.commit(pending);
        self.meter = meter;
        self.seeds = labeling::feedback_seeds(&self.store, round);
        Ok(RoundOutcome {
            round,
            audit,
            plan,
            oracle_records,
            propagated,
        })
    }
}

/// Picks `count` ground-truth positives uniformly at random as seed labels.
pub fn bootstrap_seeds(truth: &GroundTruth, corpus: &Corpus, count: usize, seed: u64) -> Vec<(ItemId, bool)> {
    let positives: Vec<ItemId> = corpus
        .items()
        .iter()
        .map(|it| it.item_id)
        .filter(|&id| truth.get(id) == Some(true))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<ItemId> = index::sample(&mut rng, positives.len(), count.min(positives.len()))
        .into_iter()
        .map(|i| positives[i])
        .collect();
    picked.sort_unstable();
    picked.into_iter().map(|id| (id, true)).collect()
}

/// Simulated weak-classifier scores for every item.
pub fn simulate_scores(truth: &GroundTruth, corpus: &Corpus, score: &ScoreConfig, seed: u64) -> Result<BTreeMap<ItemId, f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta = Beta::new(2.0, 2.0).expect("valid beta");
    let mut out = BTreeMap::new();
    for it in corpus.items() {
        let gt = truth.get(it.item_id).ok_or(Error::MissingGroundTruth(it.item_id))?;
        let flipped = rng.random_bool(1.0 - score.auc);
        let pull = score.jitter * rng.sample(beta);
        let s = if gt != flipped { 1.0 - pull } else { pull };
        out.insert(it.item_id, s.clamp(0.0, 1.0));
    }
    Ok(out)
}

/// Final state of a pipeline run.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub report: MetricsReport,
    pub store: KnownStore,
    pub meter: CostMeter,
    pub audit: Vec<StageAudit>,
}

fn round_metrics(outcome: &RoundOutcome, store: &KnownStore, truth: &GroundTruth, corpus: &Corpus) -> Result<RoundMetrics> {
    Ok(RoundMetrics {
        round: outcome.round,
        oracle_reviews: outcome.oracle_records.len() as u64,
        positives_oracle: outcome.oracle_records.iter().filter(|r| r.label).count() as u64,
        positives_propagated: outcome.propagated.iter().filter(|r| r.label).count() as u64,
        negatives_propagated: outcome.propagated.iter().filter(|r| !r.label).count() as u64,
        stages: outcome.audit.clone(),
        cumulative: compute_metrics(store.records(), truth, corpus)?,
    })
}

/// Builds the similarity graph and runs every round.
pub fn run_pipeline(corpus: &Corpus, truth: &GroundTruth, config: &PipelineConfig) -> Result<PipelineRun> {
    config.validate()?;
    let graph = build_graph(corpus.items(), config.thresholds.sim, &config.graph)?;
    run_pipeline_with_graph(corpus, truth, &graph, config, |_| {})
}

/// Runs every round over a prebuilt graph, calling `on_round` after each
/// committed round (including the round-0 bootstrap).
pub fn run_pipeline_with_graph(
    corpus: &Corpus,
    truth: &GroundTruth,
    graph: &SimilarityGraph,
    config: &PipelineConfig,
    mut on_round: impl FnMut(&RoundMetrics),
) -> Result<PipelineRun> {
    config.validate()?;
    if graph.radius() < config.thresholds.sim {
        return Err(Error::config("thresholds.sim", format!("exceeds graph radius {}", graph.radius())));
    }
    let oracle = SimulatedOracle::new(truth, config.oracle.tpr, config.oracle.tnr, config.oracle_seed())?
        .with_unit_cost(config.oracle.unit_cost);
    let mut state = PipelineState::new(corpus, graph);
    if config.score.enabled {
        state = state.with_scores(simulate_scores(truth, corpus, &config.score, config.score_seed())?);
    }

    let seeds = bootstrap_seeds(truth, corpus, config.bootstrap_seeds, config.bootstrap_seed());
    let mut rounds = Vec::with_capacity(config.rounds as usize + 1);
    let mut audit = Vec::new();
    let outcome = state.bootstrap(&seeds, config)?;
    let m = round_metrics(&outcome, &state.store, truth, corpus)?;
    on_round(&m);
    rounds.push(m);
    for round in 1..=config.rounds {
        let outcome = state.run_round(config, &oracle, round)?;
        audit.extend(outcome.audit.iter().cloned());
        let m = round_metrics(&outcome, &state.store, truth, corpus)?;
        on_round(&m);
        rounds.push(m);
    }

    let cumulative = compute_metrics(state.store.records(), truth, corpus)?;
    Ok(PipelineRun {
        report: MetricsReport {
            kind: ReportKind::Pipeline,
            corpus_hash: corpus.content_hash(),
            corpus_size: corpus.len() as u64,
            ground_truth_positives: truth.positive_count() as u64,
            rounds,
            cumulative,
        },
        store: state.store,
        meter: state.meter,
        audit,
    })
}

fn baseline_trial(
    corpus: &Corpus,
    truth: &GroundTruth,
    oracle: &dyn Oracle,
    ids: &[ItemId],
    trial: u32,
) -> Result<(RoundMetrics, Summary)> {
    let store = KnownStore::new();
    let mut staged = StagedStore::new(&store);
    let mut meter = CostMeter::default();
    let plan = CoveragePlan::from_representatives(ids.to_vec(), ids.len());
    let records = labeling::oracle_label(&plan, oracle, corpus, &mut staged, 1, &mut meter)?;
    let summary = compute_metrics(&records, truth, corpus)?;
    let positives = records.iter().filter(|r| r.label).count() as u64;
    Ok((
        RoundMetrics {
            round: trial,
            oracle_reviews: records.len() as u64,
            positives_oracle: positives,
            positives_propagated: 0,
            negatives_propagated: 0,
            stages: Vec::new(),
            cumulative: summary.clone(),
        },
        summary,
    ))
}

fn baseline_report(kind: ReportKind, corpus: &Corpus, truth: &GroundTruth, trials: Vec<(RoundMetrics, Summary)>) -> MetricsReport {
    let (rounds, summaries): (Vec<_>, Vec<_>) = trials.into_iter().unzip();
    MetricsReport {
        kind,
        corpus_hash: corpus.content_hash(),
        corpus_size: corpus.len() as u64,
        ground_truth_positives: truth.positive_count() as u64,
        rounds,
        cumulative: Summary::mean(&summaries).expect("at least one trial"),
    }
}

/// Reviews `total_budget` uniformly sampled items per trial with no
/// propagation; the cumulative summary is the mean over trials.
pub fn run_random_baseline(
    corpus: &Corpus,
    truth: &GroundTruth,
    total_budget: usize,
    oracle: &dyn Oracle,
    trials: u32,
    seed: u64,
) -> Result<MetricsReport> {
    if total_budget > corpus.len() {
        return Err(Error::BudgetExceedsCorpus {
            budget: total_budget,
            corpus_size: corpus.len(),
        });
    }
    if trials == 0 {
        return Err(Error::config("trials", "must be >= 1"));
    }
    let mut out = Vec::with_capacity(trials as usize);
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed_for_trial(seed, trial));
        let mut ids: Vec<ItemId> = index::sample(&mut rng, corpus.len(), total_budget)
            .into_iter()
            .map(|i| corpus.items()[i].item_id)
            .collect();
        ids.sort_unstable();
        out.push(baseline_trial(corpus, truth, oracle, &ids, trial)?);
    }
    Ok(baseline_report(ReportKind::RandomBaseline, corpus, truth, out))
}

/// Reviews the `budget` highest-scored items (ties to the lower id).
pub fn run_score_baseline(
    corpus: &Corpus,
    truth: &GroundTruth,
    scores: &BTreeMap<ItemId, f64>,
    budget: usize,
    oracle: &dyn Oracle,
) -> Result<MetricsReport> {
    if budget > corpus.len() {
        return Err(Error::BudgetExceedsCorpus {
            budget,
            corpus_size: corpus.len(),
        });
    }
    let mut ranked: Vec<(ItemId, f64)> = scores.iter().map(|(&id, &s)| (id, s)).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let ids: Vec<ItemId> = ranked.into_iter().take(budget).map(|(id, _)| id).collect();
    let trial = baseline_trial(corpus, truth, oracle, &ids, 0)?;
    Ok(baseline_report(ReportKind::ScoreBaseline, corpus, truth, vec![trial]))
}
