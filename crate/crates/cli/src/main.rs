//! `gshot` command-line driver.
//!
//! Every command that writes artifacts takes `--out DIR` and leaves
//! `config.json` (the resolved flat config, seed included) and `run.json`
//! (command inputs) next to its outputs.

mod error;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use gshot::canon::{min_dfs_code, DfsCode};
use gshot::config::RunConfig;
use gshot::graph::{parse_dataset, split_dataset, synth_spring, write_dataset, GraphDataset, LabelOrder, SplitSpec, SpringConfig};
use gshot::meta::{meta_train, MetaRecord, MetaTask};
use gshot::metrics::evaluate;
use gshot::nn::{build_vocabulary, train_epochs, Checkpoint, EpochRecord, ModelParams, Vocabulary};
use gshot::sampler::generate_graphs;
use gshot::selfpaced::{fine_tune, vanilla_fine_tune, BatchRecord};

use error::Failure;

const THREADS_ENV: &str = "GSHOT_THREADS";

#[derive(Parser)]
#[command(name = "gshot", version, about = "Few-shot generative modeling of labeled graphs")]
struct Cli {
    /// worker threads; 1 is fully deterministic (also GSHOT_THREADS)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// flat JSON config file with dotted keys
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// override one config key, e.g. --set train.learning_rate=0.001
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// dataset files omit edge labels
    #[arg(long, global = true)]
    unlabeled_edges: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Out {
    /// output directory, created if missing
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Write the minimum DFS code of every graph
    Canon {
        dataset: PathBuf,
        #[command(flatten)]
        out: Out,
    },
    /// Seeded train/validation/test split
    Split {
        dataset: PathBuf,
        #[arg(long)]
        train: Option<f64>,
        #[arg(long)]
        validation: Option<f64>,
        #[arg(long)]
        test: Option<f64>,
        #[command(flatten)]
        out: Out,
    },
    /// Synthetic spring-particle graphs
    Synth {
        #[arg(long, default_value_t = 5)]
        particles: usize,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 5)]
        grid_side: usize,
        #[arg(long, default_value_t = 0.5)]
        edge_prob: f64,
        #[command(flatten)]
        out: Out,
    },
    /// Meta-train an initialization on auxiliary datasets
    MetaTrain {
        #[arg(long = "aux", required = true)]
        aux: Vec<PathBuf>,
        /// datasets whose labels and sizes the vocabulary must cover
        #[arg(long = "vocab-from")]
        vocab_from: Vec<PathBuf>,
        #[arg(long)]
        iterations: Option<usize>,
        #[command(flatten)]
        out: Out,
    },
    /// Standard training on the pooled auxiliary datasets
    Pretrain {
        #[arg(long = "aux", required = true)]
        aux: Vec<PathBuf>,
        #[arg(long = "vocab-from")]
        vocab_from: Vec<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[command(flatten)]
        out: Out,
    },
    /// Adapt a model to the target dataset; without --init, train from scratch
    FineTune {
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        validation: Option<PathBuf>,
        /// starting checkpoint
        #[arg(long)]
        init: Option<PathBuf>,
        /// plain minibatch fine-tuning instead of self-paced
        #[arg(long)]
        vanilla: bool,
        #[arg(long = "vocab-from")]
        vocab_from: Vec<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[command(flatten)]
        out: Out,
    },
    /// Sample graphs from a checkpoint
    Generate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        count: Option<usize>,
        /// training data used to size the tuple cap
        #[arg(long)]
        reference: Option<PathBuf>,
        #[command(flatten)]
        out: Out,
    },
    /// Score generated graphs against test and training graphs
    Evaluate {
        #[arg(long)]
        generated: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        train: PathBuf,
        #[command(flatten)]
        out: Out,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, Failure> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(s) => Some(s.trim().parse().map_err(|_| Failure::Usage(format!("{THREADS_ENV}={s:?} is not a count")))?),
            Err(_) => None,
        },
    };
    if n == Some(0) {
        return Err(Failure::Usage("thread count must be at least 1".into()));
    }
    Ok(n)
}

fn resolve_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        cfg.merge_json(&text)?;
    }
    for a in &cli.set {
        cfg.set_assignment(a)?;
    }
    if let Some(s) = cli.seed {
        cfg.set("seed", json!(s))?;
    }
    if cli.unlabeled_edges {
        cfg.set("data.unlabeled_edges", json!(true))?;
    }
    match &cli.command {
        Command::Split { train, validation, test, .. } => {
            for (k, v) in [("data.split_train", train), ("data.split_validation", validation), ("data.split_test", test)] {
                if let Some(v) = v {
                    cfg.set(k, json!(v))?;
                }
            }
        }
        Command::MetaTrain { iterations: Some(n), .. } => cfg.set("meta.iterations", json!(n))?,
        Command::Pretrain { epochs: Some(n), .. } | Command::FineTune { epochs: Some(n), .. } => {
            cfg.set("train.max_epochs", json!(n))?
        }
        Command::Generate { count: Some(n), .. } => cfg.set("generate.count", json!(n))?,
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let threads = thread_count(cli.threads)?;
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(format!("cannot start thread pool: {e}")))?;
    }
    let cfg = resolve_config(&cli)?;
    let threads = rayon::current_num_threads();
    match cli.command {
        Command::Canon { dataset, out } => {
            let d = load(&dataset, &cfg)?;
            let mut codes = String::new();
            for g in d.graphs() {
                codes.push_str(&min_dfs_code(g).to_string());
                codes.push('\n');
            }
            let mut labels = String::new();
            for (kind, set) in [("node", &d.space().node), ("edge", &d.space().edge)] {
                for (i, s) in set.symbols().iter().enumerate() {
                    labels.push_str(&format!("{kind}\t{i}\t{s}\n"));
                }
            }
            let dir = prepare(&out.out, &cfg, "canon", json!({ "dataset": dataset }), threads)?;
            write(&dir.join("codes.txt"), &codes)?;
            write(&dir.join("labels.tsv"), &labels)?;
            eprintln!("canonized {} graphs", d.len());
        }
        Command::Split { dataset, out, .. } => {
            let d = load(&dataset, &cfg)?;
            let s = &cfg.data;
            let spec = SplitSpec::new(s.split_train, s.split_validation, s.split_test, cfg.seed)?;
            let parts = split_dataset(&d, &spec)?;
            let dir = prepare(&out.out, &cfg, "split", json!({ "dataset": dataset }), threads)?;
            for (name, part) in ["train", "validation", "test"].iter().zip(&parts) {
                let text = part.as_ref().map(write_dataset).unwrap_or_default();
                write(&dir.join(format!("{name}.txt")), &text)?;
                eprintln!("{name}: {} graphs", part.as_ref().map_or(0, GraphDataset::len));
            }
        }
        Command::Synth { particles, count, grid_side, edge_prob, out } => {
            let sc = SpringConfig { particles, count, grid_side, edge_prob, seed: cfg.seed };
            let d = synth_spring(&sc)?;
            let args = json!({ "particles": particles, "count": count, "grid_side": grid_side, "edge_prob": edge_prob });
            let dir = prepare(&out.out, &cfg, "synth", args, threads)?;
            write(&dir.join("spring.txt"), &write_dataset(&d))?;
            eprintln!("wrote {} graphs", d.len());
        }
        Command::MetaTrain { aux, vocab_from, out, .. } => {
            let sets = load_all(&aux, &cfg)?;
            let extra = load_all(&vocab_from, &cfg)?;
            let v = vocabulary(&sets, &extra)?;
            let mut tasks = Vec::new();
            for d in &sets {
                let (train, validation) = holdout(d, &cfg)?;
                tasks.push(MetaTask {
                    name: d.name().to_string(),
                    train: v.encode_dataset(&train)?,
                    validation: encode_opt(&v, validation)?,
                });
            }
            let theta = ModelParams::init(cfg.model.dims(&v), cfg.seed)?;
            let dir = prepare(&out.out, &cfg, "meta-train", json!({ "aux": aux, "vocab_from": vocab_from }), threads)?;
            let mut log = String::from(MetaRecord::HEADER);
            log.push('\n');
            let outcome = meta_train(theta, &tasks, &v, &cfg.meta_config(), &cfg.train_config(), &mut |r| {
                if let Some(l) = r.validation_loss {
                    eprintln!("iteration {} validation {l:.4}", r.iteration + 1);
                }
                log.push_str(&r.to_tsv());
                log.push('\n');
            })?;
            write(&dir.join("meta_log.tsv"), &log)?;
            save(&dir, outcome.params, v, &cfg, outcome.iterations as u64)?;
            eprintln!("meta-trained for {} iterations", outcome.iterations);
        }
        Command::Pretrain { aux, vocab_from, out, .. } => {
            let sets = load_all(&aux, &cfg)?;
            let extra = load_all(&vocab_from, &cfg)?;
            let v = vocabulary(&sets, &extra)?;
            let mut train = Vec::new();
            let mut validation = Vec::new();
            for d in &sets {
                let (t, val) = holdout(d, &cfg)?;
                train.extend(v.encode_dataset(&t)?);
                validation.extend(encode_opt(&v, val)?);
            }
            let theta = ModelParams::init(cfg.model.dims(&v), cfg.seed)?;
            let dir = prepare(&out.out, &cfg, "pretrain", json!({ "aux": aux, "vocab_from": vocab_from }), threads)?;
            let mut log = epoch_header();
            let outcome = train_epochs(theta, &train, &v, &cfg.train_config(), &validation, &mut |r| epoch_line(&mut log, r))?;
            write(&dir.join("epochs.tsv"), &log)?;
            save(&dir, outcome.params, v, &cfg, outcome.optimizer_steps)?;
        }
        Command::FineTune { target, validation, init, vanilla, vocab_from, out, .. } => {
            let t = load(&target, &cfg)?;
            let val = validation.as_ref().map(|p| load(p, &cfg)).transpose()?;
            let (theta, v) = match &init {
                Some(path) => {
                    let ck = Checkpoint::load(path)?;
                    (ck.params, ck.vocab)
                }
                None => {
                    let mut sets = vec![t.clone()];
                    sets.extend(val.clone());
                    let v = vocabulary(&sets, &load_all(&vocab_from, &cfg)?)?;
                    (ModelParams::init(cfg.model.dims(&v), cfg.seed)?, v)
                }
            };
            let train = v.encode_dataset(&t)?;
            let monitor = match &val {
                Some(d) => v.encode_dataset(d)?,
                None => Vec::new(),
            };
            let args = json!({
                "target": target, "validation": validation, "init": init,
                "vanilla": vanilla, "vocab_from": vocab_from,
            });
            let dir = prepare(&out.out, &cfg, "fine-tune", args, threads)?;
            let tc = cfg.train_config();
            let mut log = epoch_header();
            let outcome = if vanilla {
                vanilla_fine_tune(theta, &train, &v, &tc, &monitor, &mut |r| epoch_line(&mut log, r))?
            } else {
                let mut batches = String::from(BatchRecord::HEADER);
                batches.push('\n');
                let o = fine_tune(
                    theta,
                    &train,
                    &v,
                    &cfg.selfpaced,
                    &tc,
                    &monitor,
                    &mut |b| {
                        batches.push_str(&b.to_tsv());
                        batches.push('\n');
                    },
                    &mut |r| epoch_line(&mut log, r),
                )?;
                eprintln!("initial threshold {:.4}", o.lambda0);
                write(&dir.join("batches.tsv"), &batches)?;
                o.train
            };
            write(&dir.join("epochs.tsv"), &log)?;
            save(&dir, outcome.params, v, &cfg, outcome.optimizer_steps)?;
        }
        Command::Generate { model, reference, out, .. } => {
            let ck = Checkpoint::load(&model)?;
            let max_edges = reference.as_ref().map(|p| load(p, &cfg)).transpose()?.map(|d| d.max_edges());
            let gc = cfg.generation_config(&ck.vocab, max_edges)?;
            let (graphs, report) = generate_graphs(&ck.params, &ck.vocab, &gc)?;
            let args = json!({ "model": model, "reference": reference, "max_tuples": gc.max_tuples });
            let dir = prepare(&out.out, &cfg, "generate", args, threads)?;
            let text = if graphs.is_empty() {
                String::new()
            } else {
                write_dataset(&GraphDataset::new("generated", graphs)?)
            };
            write(&dir.join("graphs.txt"), &text)?;
            write(&dir.join("generation_report.tsv"), &report.to_tsv())?;
            eprintln!("emitted {} of {} graphs in {} attempts", report.emitted, report.requested, report.attempts);
            if !report.complete() {
                eprintln!("warning: generation budget exhausted; the result is partial");
            }
        }
        Command::Evaluate { generated, test, train, out } => {
            let g = load(&generated, &cfg)?;
            let t = load(&test, &cfg)?;
            let tr = load(&train, &cfg)?;
            let report = evaluate(&g, &t, &tr, &cfg.eval)?;
            let args = json!({ "generated": generated, "test": test, "train": train });
            let dir = prepare(&out.out, &cfg, "evaluate", args, threads)?;
            write(&dir.join("metrics.txt"), &report.to_text())?;
            let json = serde_json::to_string_pretty(&report.to_json()).expect("report serializes") + "\n";
            write(&dir.join("metrics.json"), &json)?;
            print!("{}", report.to_text());
        }
    }
    Ok(())
}

fn load(path: &Path, cfg: &RunConfig) -> Result<GraphDataset, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    let name = path.file_stem().map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned());
    parse_dataset(&name, &text, cfg.data.unlabeled_edges).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn load_all(paths: &[PathBuf], cfg: &RunConfig) -> Result<Vec<GraphDataset>, Failure> {
    paths.iter().map(|p| load(p, cfg)).collect()
}

fn vocabulary(sets: &[GraphDataset], extra: &[GraphDataset]) -> Result<Vocabulary, Failure> {
    let all: Vec<&GraphDataset> = sets.iter().chain(extra).collect();
    Ok(build_vocabulary(&all, LabelOrder::Symbol)?)
}

/// Splits off `data.holdout` of a dataset to monitor training.
fn holdout(d: &GraphDataset, cfg: &RunConfig) -> Result<(GraphDataset, Option<GraphDataset>), Failure> {
    let h = cfg.data.holdout;
    if h == 0.0 {
        return Ok((d.clone(), None));
    }
    let [train, val, _] = split_dataset(d, &SplitSpec::new(1.0 - h, h, 0.0, cfg.seed)?)?;
    let train = train.ok_or_else(|| Failure::Data(format!("{}: holdout leaves no training graphs", d.name())))?;
    Ok((train, val))
}

fn encode_opt(v: &Vocabulary, d: Option<GraphDataset>) -> Result<Vec<DfsCode>, Failure> {
    Ok(match d {
        Some(d) => v.encode_dataset(&d)?,
        None => Vec::new(),
    })
}

fn epoch_header() -> String {
    "epoch\ttrain_loss\tmonitor_loss\n".into()
}

fn epoch_line(log: &mut String, r: &EpochRecord) {
    eprintln!("epoch {} train {:.4} monitor {:.4}", r.epoch + 1, r.train_loss, r.monitor_loss);
    log.push_str(&format!("{}\t{:.6}\t{:.6}\n", r.epoch, r.train_loss, r.monitor_loss));
}

fn prepare(dir: &Path, cfg: &RunConfig, command: &str, args: Value, threads: usize) -> Result<PathBuf, Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Data(format!("{}: {e}", dir.display())))?;
    write(&dir.join("config.json"), &cfg.to_json())?;
    let run = json!({ "command": command, "inputs": args, "seed": cfg.seed, "threads": threads });
    write(&dir.join("run.json"), &(serde_json::to_string_pretty(&run).expect("run record serializes") + "\n"))?;
    Ok(dir.to_path_buf())
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn save(dir: &Path, params: ModelParams, vocab: Vocabulary, cfg: &RunConfig, steps: u64) -> Result<(), Failure> {
    if !params.is_finite() {
        return Err(Failure::Numerical("trained parameters are not finite".into()));
    }
    let ck = Checkpoint { params, vocab, seed: cfg.seed, steps };
    ck.save(&dir.join("model.ckpt"))?;
    Ok(())
}
