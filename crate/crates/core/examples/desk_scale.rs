//! Runs the default 200k-item scenario and prints funnel vs baseline numbers.
//!
//! cargo run --release -p review-funnel --example desk_scale

use std::time::Instant;

use review_funnel::corpus::{generate_corpus, Corpus, GeneratorConfig};
use review_funnel::labeling::SimulatedOracle;
use review_funnel::pipeline::{run_pipeline_with_graph, run_random_baseline, PipelineConfig};
use review_funnel::simgraph::build_graph;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let gen = GeneratorConfig::default();
    let t = Instant::now();
    let synth = generate_corpus(&gen)?;
    let truth = synth.ground_truth.clone();
    let corpus = Corpus::new(synth.items)?;
    println!("generated {} items in {:.1?}", corpus.len(), t.elapsed());

    let config = PipelineConfig::default();
    let t = Instant::now();
    let graph = build_graph(corpus.items(), config.thresholds.sim, &config.graph)?;
    println!("graph: {} edges in {:.1?}", graph.edge_count(), t.elapsed());

    for seed in 1..=5 {
        let cfg = PipelineConfig { rng_seed: seed, ..config.clone() };
        let t = Instant::now();
        let run = run_pipeline_with_graph(&corpus, &truth, &graph, &cfg, |m| {
            println!(
                "  round {} reviews {} pos oracle/prop {}/{} recall {:.5}",
                m.round, m.oracle_reviews, m.positives_oracle, m.positives_propagated, m.cumulative.recall
            )
        })?;
        let c = &run.report.cumulative;
        let oracle = SimulatedOracle::new(&truth, cfg.oracle.tpr, cfg.oracle.tnr, cfg.oracle_seed())?;
        let base = run_random_baseline(&corpus, &truth, c.oracle_reviews as usize, &oracle, 5, seed)?;
        println!(
            "seed {seed}: reviews {} recall {:.5} baseline {:.5} ratio {:.1} amplification {:.2?} precision {:.3?} ({:.1?})",
            c.oracle_reviews,
            c.recall,
            base.cumulative.recall,
            c.recall / base.cumulative.recall,
            c.amplification,
            c.precision,
            t.elapsed()
        );
    }
    Ok(())
}
