//! `funnel`: generate synthetic corpora, run the review funnel, run
//! baselines and compare reports.

mod error;
mod manifest;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use review_funnel::corpus::{generate_corpus, load_corpus, save_corpus, save_labels, GeneratorConfig, GroundTruth};
use review_funnel::labeling::SimulatedOracle;
use review_funnel::pipeline::{run_pipeline_with_graph, run_random_baseline, run_score_baseline, simulate_scores};
use review_funnel::simgraph::build_graph;
use review_funnel::{Corpus, GraphMode, MetricsReport, PipelineConfig};
use serde::de::DeserializeOwned;

use crate::error::CliError;
use crate::manifest::{CorpusRef, RunManifest, AUDIT, CONFIG, GRAPH, LABELS, MANIFEST, METRICS};

#[derive(Parser)]
#[command(name = "funnel", version, about = "Budgeted review funnel over embedding corpora")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus with planted near-duplicate clusters.
    Generate {
        /// Generator config (JSON). Defaults apply to omitted fields.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output corpus file (JSONL).
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the multi-round funnel and write reports under --out.
    Run {
        #[arg(long, required_unless_present = "manifest")]
        corpus: Option<PathBuf>,
        /// Pipeline config (JSON). Defaults apply to omitted fields.
        #[arg(long, conflicts_with = "manifest")]
        config: Option<PathBuf>,
        /// Re-run from a previous run's manifest (corpus and config snapshot).
        #[arg(long, conflicts_with = "corpus")]
        manifest: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides `graph.mode` from the config.
        #[arg(long, value_enum)]
        graph_mode: Option<Mode>,
        /// Also write the similarity graph as graph.jsonl.
        #[arg(long)]
        dump_graph: bool,
    },
    /// Budget-matched baseline with no funnel and no propagation.
    Baseline {
        #[arg(long)]
        corpus: PathBuf,
        /// Total number of oracle reviews per trial.
        #[arg(long)]
        budget: usize,
        #[arg(long, default_value_t = 5)]
        trials: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Pipeline config supplying oracle (and score) parameters.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = BaselineKind::Random)]
        kind: BaselineKind,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare a run report against a baseline report.
    Compare {
        /// metrics.json of a run, or its output directory.
        #[arg(long)]
        run: PathBuf,
        /// metrics.json of a baseline, or its output directory.
        #[arg(long)]
        baseline: PathBuf,
        /// Minimum recall ratio for exit status 0.
        #[arg(long, default_value_t = 2.0)]
        floor: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Exact,
    Blocked,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum BaselineKind {
    Random,
    Score,
}

/// Reads a JSON document, reporting the path of the offending field.
pub(crate) fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let at = e.path().to_string();
        let message = if at == "." { e.inner().to_string() } else { format!("at `{at}`: {}", e.inner()) };
        CliError::Config {
            path: path.to_path_buf(),
            message,
        }
    })
}

fn load_pipeline_config(path: Option<&Path>) -> Result<PipelineConfig, CliError> {
    let config = match path {
        Some(p) => load_json(p)?,
        None => PipelineConfig::default(),
    };
    config.validate().map_err(|e| CliError::Config {
        path: path.map(Path::to_path_buf).unwrap_or_default(),
        message: e.to_string(),
    })?;
    Ok(config)
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(CliError::io(path))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))
}

fn load_corpus_with_truth(path: &Path) -> Result<(Corpus, GroundTruth), CliError> {
    let (corpus, truth) = load_corpus(path).map_err(CliError::core(format!("loading {}", path.display())))?;
    if let Some(missing) = corpus.items().iter().find(|it| truth.get(it.item_id).is_none()) {
        return Err(CliError::Config {
            path: path.to_path_buf(),
            message: format!("item {} has no ground truth; the simulated oracle needs it", missing.item_id),
        });
    }
    Ok((corpus, truth))
}

fn cmd_generate(config: Option<PathBuf>, out: PathBuf) -> Result<(), CliError> {
    let cfg: GeneratorConfig = match &config {
        Some(p) => load_json(p)?,
        None => GeneratorConfig::default(),
    };
    cfg.validate().map_err(|e| CliError::Config {
        path: config.clone().unwrap_or_default(),
        message: e.to_string(),
    })?;
    let synth = generate_corpus(&cfg).map_err(CliError::core("generating corpus"))?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    save_corpus(&out, &synth.items, Some(&synth.ground_truth)).map_err(CliError::core(format!("writing {}", out.display())))?;
    let positives = synth.ground_truth.positive_count();
    let rate = if synth.items.is_empty() { 0.0 } else { positives as f64 / synth.items.len() as f64 };
    println!(
        "items {} clusters {} positive_rate {:.4} dup_pairs {} -> {}",
        synth.items.len(),
        synth.clusters.len(),
        rate,
        synth.duplicate_pair_count(),
        out.display()
    );
    Ok(())
}

struct RunArgs {
    corpus: Option<PathBuf>,
    config: Option<PathBuf>,
    manifest: Option<PathBuf>,
    out: PathBuf,
    graph_mode: Option<Mode>,
    dump_graph: bool,
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let (corpus_path, mut config, expected_hash) = match &args.manifest {
        Some(m) => {
            let prev = RunManifest::load(m)?;
            prev.config.validate().map_err(|e| CliError::Config {
                path: m.clone(),
                message: e.to_string(),
            })?;
            (prev.corpus.path, prev.config, Some(prev.corpus.content_hash))
        }
        None => {
            let corpus = args.corpus.clone().ok_or_else(|| CliError::Usage("--corpus is required".into()))?;
            (corpus, load_pipeline_config(args.config.as_deref())?, None)
        }
    };
    if let Some(mode) = args.graph_mode {
        config.graph.mode = match mode {
            Mode::Exact => GraphMode::Exact,
            Mode::Blocked => GraphMode::Blocked,
        };
    }
    let (corpus, truth) = load_corpus_with_truth(&corpus_path)?;
    let hash = corpus.content_hash();
    if let Some(expected) = expected_hash.filter(|h| *h != hash) {
        return Err(CliError::HashMismatch { left: expected, right: hash });
    }

    let out = &args.out;
    create_dir(out)?;
    let mut outputs = vec![MANIFEST, CONFIG, AUDIT, METRICS, LABELS];
    if args.dump_graph {
        outputs.push(GRAPH);
    }
    let corpus_ref = CorpusRef {
        path: fs::canonicalize(&corpus_path).unwrap_or(corpus_path),
        content_hash: hash,
        items: corpus.len(),
    };
    let mut manifest = RunManifest::new("run", corpus_ref, config.clone(), &outputs);
    write_file(&out.join(CONFIG), &(serde_json::to_string_pretty(&config).expect("config serializes") + "\n"))?;
    manifest.write(out)?;

    let result = execute_run(&corpus, &truth, &config, out, args.dump_graph);
    manifest.finish(result.as_ref().map(|_| ()));
    manifest.write(out)?;
    result
}

fn execute_run(corpus: &Corpus, truth: &GroundTruth, config: &PipelineConfig, out: &Path, dump_graph: bool) -> Result<(), CliError> {
    let graph = build_graph(corpus.items(), config.thresholds.sim, &config.graph).map_err(CliError::core("building graph"))?;
    if dump_graph {
        let path = out.join(GRAPH);
        let f = File::create(&path).map_err(CliError::io(&path))?;
        graph.write_dump(BufWriter::new(f)).map_err(CliError::core("writing graph"))?;
    }

    let audit_path = out.join(AUDIT);
    let mut audit = BufWriter::new(File::create(&audit_path).map_err(CliError::io(&audit_path))?);
    let mut audit_err = None;
    let run = run_pipeline_with_graph(corpus, truth, &graph, config, |m| {
        // stream audit lines so a failed run keeps the rounds that finished
        for a in &m.stages {
            let line = serde_json::to_string(a).expect("audit serializes");
            if let Err(e) = writeln!(audit, "{line}").and_then(|_| audit.flush()) {
                audit_err.get_or_insert(e);
            }
        }
        println!(
            "round {} reviews {} positives {}/{} recall {:.6}",
            m.round, m.oracle_reviews, m.positives_oracle, m.positives_propagated, m.cumulative.recall
        );
    });
    drop(audit);
    if let Some(e) = audit_err {
        return Err(CliError::Io { path: audit_path, source: e });
    }
    let run = run.map_err(CliError::core("pipeline"))?;

    write_file(&out.join(METRICS), &(run.report.to_json() + "\n"))?;
    let labels = out.join(LABELS);
    save_labels(run.store.records(), &labels).map_err(CliError::core(format!("writing {}", labels.display())))?;
    Ok(())
}

struct BaselineArgs {
    corpus: PathBuf,
    budget: usize,
    trials: u32,
    seed: u64,
    config: Option<PathBuf>,
    kind: BaselineKind,
    out: PathBuf,
}

fn cmd_baseline(args: BaselineArgs) -> Result<(), CliError> {
    let config = load_pipeline_config(args.config.as_deref())?;
    let (corpus, truth) = load_corpus_with_truth(&args.corpus)?;
    let out = &args.out;
    create_dir(out)?;
    let corpus_ref = CorpusRef {
        path: fs::canonicalize(&args.corpus).unwrap_or_else(|_| args.corpus.clone()),
        content_hash: corpus.content_hash(),
        items: corpus.len(),
    };
    let mut manifest = RunManifest::new("baseline", corpus_ref, config.clone(), &[MANIFEST, METRICS]);
    manifest.baseline = Some(serde_json::json!({
        "kind": if args.kind == BaselineKind::Random { "random" } else { "score" },
        "budget": args.budget,
        "trials": args.trials,
        "seed": args.seed,
    }));
    manifest.write(out)?;

    let result = (|| {
        let oracle = SimulatedOracle::new(&truth, config.oracle.tpr, config.oracle.tnr, config.oracle_seed())
            .map_err(CliError::core("oracle"))?
            .with_unit_cost(config.oracle.unit_cost);
        let report = match args.kind {
            BaselineKind::Random => run_random_baseline(&corpus, &truth, args.budget, &oracle, args.trials, args.seed),
            BaselineKind::Score => simulate_scores(&truth, &corpus, &config.score, config.score_seed())
                .and_then(|scores| run_score_baseline(&corpus, &truth, &scores, args.budget, &oracle)),
        }
        .map_err(CliError::core("baseline"))?;
        let c = &report.cumulative;
        println!("baseline reviews {} recall {:.6} precision {:?}", c.oracle_reviews, c.recall, c.precision);
        write_file(&out.join(METRICS), &(report.to_json() + "\n"))
    })();
    manifest.finish(result.as_ref().map(|_| ()));
    manifest.write(out)?;
    result
}

fn load_report(path: &Path) -> Result<MetricsReport, CliError> {
    if path.is_dir() {
        load_json(&path.join(METRICS))
    } else {
        load_json(path)
    }
}

/// `run / baseline`, infinite when only the baseline is zero and 0 when both are.
fn recall_ratio(run: f64, baseline: f64) -> f64 {
    match (run > 0.0, baseline > 0.0) {
        (_, true) => run / baseline,
        (true, false) => f64::INFINITY,
        (false, false) => 0.0,
    }
}

fn cmd_compare(run: PathBuf, baseline: PathBuf, floor: f64) -> Result<(), CliError> {
    let a = load_report(&run)?;
    let b = load_report(&baseline)?;
    if a.corpus_hash != b.corpus_hash {
        return Err(CliError::HashMismatch {
            left: a.corpus_hash,
            right: b.corpus_hash,
        });
    }
    let (ra, rb) = (&a.cumulative, &b.cumulative);
    let ratio = recall_ratio(ra.recall, rb.recall);
    println!("recall run {:.6} baseline {:.6} ratio {ratio}", ra.recall, rb.recall);
    println!("review_fraction run {:.6} baseline {:.6}", ra.review_fraction, rb.review_fraction);
    let amp = |s: &Option<f64>| s.map_or("n/a".to_string(), |v| format!("{v:.3}"));
    println!("amplification run {} baseline {}", amp(&ra.amplification), amp(&rb.amplification));
    if ratio >= floor {
        println!("ok: ratio {ratio} >= floor {floor}");
        Ok(())
    } else {
        Err(CliError::BelowFloor { ratio, floor })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate { config, out } => cmd_generate(config, out),
        Command::Run {
            corpus,
            config,
            manifest,
            out,
            graph_mode,
            dump_graph,
        } => cmd_run(RunArgs {
            corpus,
            config,
            manifest,
            out,
            graph_mode,
            dump_graph,
        }),
        Command::Baseline {
            corpus,
            budget,
            trials,
            seed,
            config,
            kind,
            out,
        } => cmd_baseline(BaselineArgs {
            corpus,
            budget,
            trials,
            seed,
            config,
            kind,
            out,
        }),
        Command::Compare { run, baseline, floor } => cmd_compare(run, baseline, floor),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
