//! wasm-bindgen bindings for the browser demo in `www/`.
//!
//! The corpus lives on the unit sphere in three dimensions so it can be drawn
//! without a lossy projection: x is longitude, y is the z coordinate (equal
//! area). Results cross the boundary as JSON strings.

use std::collections::BTreeMap;

use review_funnel::corpus::{generate_corpus, GeneratorConfig, ItemId, Provenance};
use review_funnel::funnel::max_coverage_sample;
use review_funnel::labeling::SimulatedOracle;
use review_funnel::pipeline::{bootstrap_seeds, compute_metrics, run_random_baseline, PipelineConfig, PipelineState, Summary, Thresholds};
use review_funnel::simgraph::{build_graph, GraphOptions};
use review_funnel::{Corpus, GroundTruth};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Generator settings tuned for a few hundred points on the sphere.
pub fn demo_generator(n_clusters: usize, positive_rate: f64, seed: u64) -> GeneratorConfig {
    GeneratorConfig {
        n_clusters,
        cluster_size_mean: 8.0,
        positive_cluster_rate: positive_rate,
        embedding_dim: 3,
        noise_sigma: 0.25,
        dup_sigma: 0.04,
        n_accounts: (n_clusters / 4).max(1) as u64,
        rng_seed: seed,
        ..GeneratorConfig::default()
    }
}

/// Pipeline defaults scaled to the demo geometry.
pub fn demo_config() -> PipelineConfig {
    PipelineConfig {
        thresholds: Thresholds {
            dup: 0.003,
            prop: 0.02,
            sim: 0.06,
        },
        budget_per_round: 10,
        bootstrap_seeds: 3,
        graph: GraphOptions::exact(),
        ..PipelineConfig::default()
    }
}

#[derive(Serialize)]
struct CoverageView {
    representatives: Vec<usize>,
    /// Index of the owning representative per item, -1 if uncovered.
    owner: Vec<i64>,
    coverage: usize,
}

#[derive(Serialize)]
struct LabelView {
    index: usize,
    label: bool,
    provenance: Provenance,
    source: Option<usize>,
}

#[derive(Serialize)]
struct RoundView {
    round: u32,
    labels: Vec<LabelView>,
    candidates: usize,
    cumulative: Summary,
}

#[derive(Serialize)]
struct RunView {
    rounds: Vec<RoundView>,
    baseline_recall: f64,
    cumulative: Summary,
}

pub struct Scene {
    pub corpus: Corpus,
    pub truth: GroundTruth,
    index: BTreeMap<ItemId, usize>,
}

impl Scene {
    pub fn generate(n_clusters: usize, positive_rate: f64, seed: u64) -> Result<Scene, String> {
        let synth = generate_corpus(&demo_generator(n_clusters, positive_rate, seed)).map_err(|e| e.to_string())?;
        let corpus = Corpus::new(synth.items).map_err(|e| e.to_string())?;
        let index = corpus.items().iter().enumerate().map(|(i, it)| (it.item_id, i)).collect();
        Ok(Scene {
            corpus,
            truth: synth.ground_truth,
            index,
        })
    }

    /// Flat `[x0, y0, x1, y1, ...]` in `[0, 1]`.
    pub fn positions(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.corpus.len() * 2);
        for it in self.corpus.items() {
            let e = &it.embedding;
            let lon = e[1].atan2(e[0]);
            out.push((lon + std::f64::consts::PI) / std::f64::consts::TAU);
            out.push((1.0 - e[2]) / 2.0);
        }
        out
    }

    pub fn truth_flags(&self) -> Vec<u8> {
        self.corpus.items().iter().map(|it| self.truth.get(it.item_id) == Some(true)).map(u8::from).collect()
    }

    pub fn active_flags(&self) -> Vec<u8> {
        self.corpus.items().iter().map(|it| u8::from(it.is_active())).collect()
    }

    /// Greedy coverage over every item at radius `theta`.
    pub fn coverage_json(&self, theta: f64, k: usize) -> Result<String, String> {
        let graph = build_graph(self.corpus.items(), theta, &GraphOptions::exact()).map_err(|e| e.to_string())?;
        let universe = self.corpus.items().iter().map(|it| it.item_id).collect();
        let plan = max_coverage_sample(&universe, &graph, theta, k).map_err(|e| e.to_string())?;
        let mut owner = vec![-1i64; self.corpus.len()];
        for (rep, members) in &plan.covered {
            for m in members {
                owner[self.index[m]] = self.index[rep] as i64;
            }
        }
        let view = CoverageView {
            representatives: plan.representatives.iter().map(|id| self.index[id]).collect(),
            owner,
            coverage: plan.coverage(),
        };
        Ok(serde_json::to_string(&view).expect("view serializes"))
    }

    /// Runs the funnel and returns each round's new labels plus metrics.
    /// `config_json` is a (possibly partial) pipeline config.
    pub fn run_json(&self, config_json: &str) -> Result<String, String> {
        let mut config: PipelineConfig = if config_json.trim().is_empty() {
            demo_config()
        } else {
            serde_json::from_str(config_json).map_err(|e| e.to_string())?
        };
        config.graph = GraphOptions::exact();
        config.validate().map_err(|e| e.to_string())?;

        let graph = build_graph(self.corpus.items(), config.thresholds.sim, &config.graph).map_err(|e| e.to_string())?;
        let oracle = SimulatedOracle::new(&self.truth, config.oracle.tpr, config.oracle.tnr, config.oracle_seed()).map_err(|e| e.to_string())?;
        let mut state = PipelineState::new(&self.corpus, &graph);
        let seeds = bootstrap_seeds(&self.truth, &self.corpus, config.bootstrap_seeds, config.bootstrap_seed());

        let mut rounds = Vec::new();
        let mut outcome = state.bootstrap(&seeds, &config).map_err(|e| e.to_string())?;
        let mut seen = 0;
        for round in 0..=config.rounds {
            if round > 0 {
                outcome = state.run_round(&config, &oracle, round).map_err(|e| e.to_string())?;
            }
            let records = state.store.records();
            let labels = records[seen..]
                .iter()
                .map(|r| LabelView {
                    index: self.index[&r.item_id],
                    label: r.label,
                    provenance: r.provenance,
                    source: r.source_item_id.map(|s| self.index[&s]),
                })
                .collect();
            seen = records.len();
            rounds.push(RoundView {
                round,
                labels,
                candidates: outcome.audit.first().map_or(0, |a| a.output),
                cumulative: compute_metrics(records, &self.truth, &self.corpus).map_err(|e| e.to_string())?,
            });
        }
        let reviews = state.meter.calls as usize;
        let baseline = run_random_baseline(&self.corpus, &self.truth, reviews.min(self.corpus.len()), &oracle, 5, config.rng_seed)
            .map_err(|e| e.to_string())?;
        let view = RunView {
            cumulative: rounds.last().expect("round 0 always exists").cumulative.clone(),
            rounds,
            baseline_recall: baseline.cumulative.recall,
        };
        Ok(serde_json::to_string(&view).expect("view serializes"))
    }
}

/// The browser-facing handle.
#[wasm_bindgen]
pub struct Demo {
    scene: Scene,
}

#[wasm_bindgen]
impl Demo {
    /// Generates a corpus with `n_clusters` planted clusters.
    #[wasm_bindgen(constructor)]
    pub fn new(n_clusters: usize, positive_rate: f64, seed: u32) -> Result<Demo, JsError> {
        Scene::generate(n_clusters, positive_rate, seed as u64)
            .map(|scene| Demo { scene })
            .map_err(|e| JsError::new(&e))
    }

    pub fn len(&self) -> usize {
        self.scene.corpus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scene.corpus.is_empty()
    }

    pub fn positions(&self) -> Vec<f64> {
        self.scene.positions()
    }

    pub fn truth(&self) -> Vec<u8> {
        self.scene.truth_flags()
    }

    pub fn active(&self) -> Vec<u8> {
        self.scene.active_flags()
    }

    /// Default pipeline config for the demo geometry, as JSON.
    #[wasm_bindgen(js_name = defaultConfig)]
    pub fn default_config() -> String {
        serde_json::to_string(&demo_config()).expect("config serializes")
    }

    pub fn coverage(&self, theta: f64, k: usize) -> Result<String, JsError> {
        self.scene.coverage_json(theta, k).map_err(|e| JsError::new(&e))
    }

    pub fn run(&self, config_json: &str) -> Result<String, JsError> {
        self.scene.run_json(config_json).map_err(|e| JsError::new(&e))
    }
}
