//! Command-line entry point: vocabulary and graph building, two-stage
//! training, generation, evaluation, and attention dumps.
//!
//! Exit codes: 0 success, 1 validation/usage errors, 2 runtime errors.
//! A config file can be given with `--config` or the `TEGKE_CONFIG`
//! environment variable; explicit CLI flags override file values.

use crate::data::{load_corpus, TopicEssayPair, Vocabulary, NUM_SPECIALS};
use crate::essay_decoder::{export_attention, DecodeMode};
use crate::evalx::evaluate;
use crate::kgraph::{
    extract_topic_graph, file_to_graph, graph_to_file, load_triples, TopicGraph, TripleStore,
};
use crate::model::{student_generate, Model, RelationVocab, TrainConfig};
use crate::nn::derived_rng;
use crate::tape::Tape;
use crate::trainer::{load, save, train_stage1, train_stage2, write_log, TrainState};
use crate::{Result, TegkeError};
use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "tegke", version, about = "Topic-to-essay generation")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build a vocabulary file from a JSONL corpus.
    BuildVocab {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 50_000)]
        max_size: usize,
    },
    /// Extract and cache one topic graph per corpus sample.
    BuildGraph {
        #[arg(long)]
        triples: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        hops: Option<usize>,
        #[arg(long)]
        per_hop: Option<usize>,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run one or both training stages.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        /// 1, 2, or all.
        #[arg(long, default_value = "all")]
        stage: String,
        #[arg(long)]
        checkpoint_dir: PathBuf,
        /// Resume from an existing checkpoint file.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        triples: PathBuf,
        /// Directory of cached graph-NNNNN.json files from build-graph.
        #[arg(long)]
        graph_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs_stage1: Option<usize>,
        #[arg(long)]
        epochs_stage2: Option<usize>,
        #[arg(long)]
        batch: Option<usize>,
    },
    /// Generate one essay for a comma-separated topic list.
    Generate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        topics: String,
        /// greedy or sample.
        #[arg(long, default_value = "greedy")]
        mode: String,
        #[arg(long)]
        max_len: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        triples: Option<PathBuf>,
        /// Cached graph JSON; overrides --triples.
        #[arg(long)]
        graph: Option<PathBuf>,
    },
    /// Generate for a test corpus and write a metric report.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        train_ref: PathBuf,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        triples: Option<PathBuf>,
        #[arg(long)]
        max_len: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Dump decoded tokens plus topic/graph attention weights as JSON.
    DumpAttention {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        topics: String,
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        triples: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        max_len: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Load the config file from `--config`, else `TEGKE_CONFIG`, else defaults.
fn load_config(explicit: Option<&Path>) -> Result<TrainConfig> {
    let from_env = std::env::var_os("TEGKE_CONFIG").map(PathBuf::from);
    let path = explicit.map(Path::to_path_buf).or(from_env);
    let cfg = match path {
        Some(p) => {
            let f = std::fs::File::open(&p).map_err(|e| {
                TegkeError::Validation(format!("cannot open config {}: {e}", p.display()))
            })?;
            serde_json::from_reader(f)?
        }
        None => TrainConfig::default(),
    };
    Ok(cfg)
}

fn parse_topics(spec: &str) -> Result<Vec<String>> {
    let topics: Vec<String> = spec
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect();
    if topics.is_empty() || topics.len() > 5 {
        return Err(TegkeError::Validation(
            "between 1 and 5 comma-separated topics are required".into(),
        ));
    }
    Ok(topics)
}

fn parse_mode(mode: &str) -> Result<DecodeMode> {
    match mode {
        "greedy" => Ok(DecodeMode::Greedy),
        "sample" => Ok(DecodeMode::Sample),
        other => Err(TegkeError::Validation(format!(
            "unknown mode {other}: expected greedy or sample"
        ))),
    }
}

fn graph_cache_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("graph-{index:05}.json"))
}

/// Graph for one sample: cached file, or fresh extraction from the store.
fn graph_for(
    topics: &[String],
    store: Option<&TripleStore>,
    cfg: &TrainConfig,
) -> Result<TopicGraph> {
    let empty = TripleStore::new();
    let s = store.unwrap_or(&empty);
    extract_topic_graph(s, topics, cfg.hops_max, cfg.per_hop)
}

fn render_essay(model: &Model, token_ids: &[usize]) -> String {
    token_ids
        .iter()
        .filter(|&&id| id >= NUM_SPECIALS)
        .map(|&id| model.vocab.token(id))
        .collect::<Vec<_>>()
        .join(" ")
}

fn load_store(path: Option<&Path>) -> Result<Option<TripleStore>> {
    path.map(load_triples).transpose()
}

fn cmd_build_vocab(corpus: &Path, out: &Path, max_size: usize) -> Result<()> {
    let pairs = load_corpus(corpus)?;
    let vocab = Vocabulary::build(&pairs, max_size)?;
    vocab.save(out)?;
    println!("wrote {} tokens to {}", vocab.len(), out.display());
    Ok(())
}

fn cmd_build_graph(
    triples: &Path,
    corpus: &Path,
    hops: Option<usize>,
    per_hop: Option<usize>,
    out_dir: &Path,
    config: Option<&Path>,
) -> Result<()> {
    let mut cfg = load_config(config)?;
    if let Some(h) = hops {
        cfg.hops_max = h;
    }
    if let Some(p) = per_hop {
        cfg.per_hop = p;
    }
    cfg.validate()?;
    let store = load_triples(triples)?;
    let pairs = load_corpus(corpus)?;
    std::fs::create_dir_all(out_dir)?;
    for (i, p) in pairs.iter().enumerate() {
        let g = extract_topic_graph(&store, &p.topics, cfg.hops_max, cfg.per_hop)?;
        graph_to_file(&g, &graph_cache_path(out_dir, i))?;
    }
    println!("wrote {} graphs to {}", pairs.len(), out_dir.display());
    Ok(())
}

fn load_graphs(
    pairs: &[TopicEssayPair],
    graph_dir: Option<&Path>,
    store: &TripleStore,
    cfg: &TrainConfig,
) -> Result<Vec<TopicGraph>> {
    match graph_dir {
        Some(dir) => (0..pairs.len())
            .map(|i| file_to_graph(&graph_cache_path(dir, i)))
            .collect(),
        None => pairs
            .iter()
            .map(|p| extract_topic_graph(store, &p.topics, cfg.hops_max, cfg.per_hop))
            .collect(),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    config: Option<&Path>,
    stage: &str,
    checkpoint_dir: &Path,
    resume: Option<&Path>,
    corpus: &Path,
    triples: &Path,
    graph_dir: Option<&Path>,
    seed: Option<u64>,
    epochs_stage1: Option<usize>,
    epochs_stage2: Option<usize>,
    batch: Option<usize>,
) -> Result<()> {
    let mut cfg = load_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(e) = epochs_stage1 {
        cfg.epochs_stage1 = e;
    }
    if let Some(e) = epochs_stage2 {
        cfg.epochs_stage2 = e;
    }
    if let Some(b) = batch {
        cfg.batch = b;
    }
    cfg.validate()?;
    let (run1, run2) = match stage {
        "1" => (true, false),
        "2" => (false, true),
        "all" => (true, true),
        other => {
            return Err(TegkeError::Validation(format!(
                "unknown stage {other}: expected 1, 2, or all"
            )))
        }
    };

    let pairs = load_corpus(corpus)?;
    let store = load_triples(triples)?;
    let mut state = match resume {
        Some(p) => {
            let s = load(p)?;
            let corpus_vocab = Vocabulary::build(&pairs, s.model.config.vocab_max)?;
            if corpus_vocab.digest() != s.model.vocab.digest() {
                return Err(TegkeError::Checkpoint(
                    "corpus vocabulary does not match the checkpoint's digest".into(),
                ));
            }
            s
        }
        None => {
            let vocab = Vocabulary::build(&pairs, cfg.vocab_max)?;
            let relations = RelationVocab::from_store(&store);
            TrainState::new(Model::new(cfg.clone(), vocab, relations)?)
        }
    };
    let cfg = state.model.config.clone();
    let graphs = load_graphs(&pairs, graph_dir, &store, &cfg)?;

    std::fs::create_dir_all(checkpoint_dir)?;
    let log_path = checkpoint_dir.join("train-log.jsonl");
    let mut log_file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&log_path)?;

    if run1 {
        let logs = train_stage1(&mut state, &pairs, &graphs, cfg.epochs_stage1 as u64)?;
        write_log(&mut log_file, &logs)?;
        save(&state, &checkpoint_dir.join("stage1.ckpt"))?;
    }
    if run2 {
        let logs = train_stage2(&mut state, &pairs, &graphs, cfg.epochs_stage2 as u64)?;
        write_log(&mut log_file, &logs)?;
        save(&state, &checkpoint_dir.join("stage2.ckpt"))?;
    }
    save(&state, &checkpoint_dir.join("final.ckpt"))?;
    println!(
        "finished at step {} (stage {}); checkpoints in {}",
        state.step,
        state.stage,
        checkpoint_dir.display()
    );
    Ok(())
}

struct GenerationSetup {
    model: Model,
    topic_ids: Vec<usize>,
    graph: TopicGraph,
    max_len: usize,
}

fn prepare_generation(
    checkpoint: &Path,
    topics: &str,
    graph: Option<&Path>,
    triples: Option<&Path>,
    max_len: Option<usize>,
) -> Result<GenerationSetup> {
    let state = load(checkpoint)?;
    let model = state.model;
    let topic_words = parse_topics(topics)?;
    let topic_ids: Vec<usize> = topic_words.iter().map(|t| model.vocab.id(t)).collect();
    let graph = match graph {
        Some(p) => file_to_graph(p)?,
        None => {
            let store = load_store(triples)?;
            graph_for(&topic_words, store.as_ref(), &model.config)?
        }
    };
    let max_len = max_len.unwrap_or(model.config.max_len);
    Ok(GenerationSetup {
        model,
        topic_ids,
        graph,
        max_len,
    })
}

fn cmd_generate(
    checkpoint: &Path,
    topics: &str,
    mode: &str,
    max_len: Option<usize>,
    seed: u64,
    out: Option<&Path>,
    triples: Option<&Path>,
    graph: Option<&Path>,
) -> Result<()> {
    let mode = parse_mode(mode)?;
    let setup = prepare_generation(checkpoint, topics, graph, triples, max_len)?;
    let mut tape = Tape::new();
    let pv = setup.model.params.vars(&mut tape);
    let mut rng = derived_rng(seed, "generate", 0);
    let trace = student_generate(
        &mut tape,
        &pv,
        &setup.model,
        &setup.graph,
        &setup.topic_ids,
        mode,
        setup.max_len,
        &mut rng,
    )?;
    let essay = render_essay(&setup.model, &trace.token_ids);
    match out {
        Some(p) => std::fs::write(p, format!("{essay}\n"))?,
        None => println!("{essay}"),
    }
    Ok(())
}

fn cmd_evaluate(
    checkpoint: &Path,
    test: &Path,
    train_ref: &Path,
    report: &Path,
    triples: Option<&Path>,
    max_len: Option<usize>,
    seed: u64,
) -> Result<()> {
    let state = load(checkpoint)?;
    let model = state.model;
    let test_pairs = load_corpus(test)?;
    let train_pairs = load_corpus(train_ref)?;
    let store = load_store(triples)?;
    let max_len = max_len.unwrap_or(model.config.max_len);
    let mut candidates = Vec::with_capacity(test_pairs.len());
    let mut references = Vec::with_capacity(test_pairs.len());
    for (i, p) in test_pairs.iter().enumerate() {
        let graph = graph_for(&p.topics, store.as_ref(), &model.config)?;
        let topic_ids: Vec<usize> = p.topics.iter().map(|t| model.vocab.id(t)).collect();
        let mut tape = Tape::new();
        let pv = model.params.vars(&mut tape);
        let mut rng = derived_rng(seed, "evaluate", i as u64);
        let trace = student_generate(
            &mut tape,
            &pv,
            &model,
            &graph,
            &topic_ids,
            DecodeMode::Greedy,
            max_len,
            &mut rng,
        )?;
        let essay = render_essay(&model, &trace.token_ids);
        candidates.push(TopicEssayPair {
            topics: p.topics.clone(),
            essay: essay.split_whitespace().map(str::to_string).collect(),
        });
        references.push(p.essay.clone());
    }
    let r = evaluate(&candidates, &references, &train_pairs, 4, 10)?;
    let json = serde_json::to_string_pretty(&r)?;
    std::fs::write(report, format!("{json}\n"))?;
    println!("{json}");
    Ok(())
}

fn cmd_dump_attention(
    checkpoint: &Path,
    topics: &str,
    graph: Option<&Path>,
    triples: Option<&Path>,
    out: &Path,
    max_len: Option<usize>,
    seed: u64,
) -> Result<()> {
    let setup = prepare_generation(checkpoint, topics, graph, triples, max_len)?;
    let mut tape = Tape::new();
    let pv = setup.model.params.vars(&mut tape);
    let mut rng = derived_rng(seed, "generate", 0);
    let trace = student_generate(
        &mut tape,
        &pv,
        &setup.model,
        &setup.graph,
        &setup.topic_ids,
        DecodeMode::Greedy,
        setup.max_len,
        &mut rng,
    )?;
    let dump = export_attention(&trace, &setup.graph, &setup.model.vocab);
    let json = serde_json::to_string_pretty(&dump)?;
    std::fs::write(out, format!("{json}\n"))?;
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::BuildVocab {
            corpus,
            out,
            max_size,
        } => cmd_build_vocab(&corpus, &out, max_size),
        Cmd::BuildGraph {
            triples,
            corpus,
            hops,
            per_hop,
            out_dir,
            config,
        } => cmd_build_graph(
            &triples,
            &corpus,
            hops,
            per_hop,
            &out_dir,
            config.as_deref(),
        ),
        Cmd::Train {
            config,
            stage,
            checkpoint_dir,
            resume,
            corpus,
            triples,
            graph_dir,
            seed,
            epochs_stage1,
            epochs_stage2,
            batch,
        } => cmd_train(
            config.as_deref(),
            &stage,
            &checkpoint_dir,
            resume.as_deref(),
            &corpus,
            &triples,
            graph_dir.as_deref(),
            seed,
            epochs_stage1,
            epochs_stage2,
            batch,
        ),
        Cmd::Generate {
            checkpoint,
            topics,
            mode,
            max_len,
            seed,
            out,
            triples,
            graph,
        } => cmd_generate(
            &checkpoint,
            &topics,
            &mode,
            max_len,
            seed,
            out.as_deref(),
            triples.as_deref(),
            graph.as_deref(),
        ),
        Cmd::Evaluate {
            checkpoint,
            test,
            train_ref,
            report,
            triples,
            max_len,
            seed,
        } => cmd_evaluate(
            &checkpoint,
            &test,
            &train_ref,
            &report,
            triples.as_deref(),
            max_len,
            seed,
        ),
        Cmd::DumpAttention {
            checkpoint,
            topics,
            graph,
            triples,
            out,
            max_len,
            seed,
        } => cmd_dump_attention(
            &checkpoint,
            &topics,
            graph.as_deref(),
            triples.as_deref(),
            &out,
            max_len,
            seed,
        ),
    }
}

fn exit_code(err: &TegkeError) -> i32 {
    match err {
        TegkeError::Validation(_)
        | TegkeError::Ingestion { .. }
        | TegkeError::Shape(_)
        | TegkeError::Structure(_) => 1,
        _ => 2,
    }
}

/// Parse and run; returns the process exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return 1;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
