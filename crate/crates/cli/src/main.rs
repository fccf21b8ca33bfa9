use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use scelmo::analysis::{oov_stats, render_report, ReportFormat};
use scelmo::corpus::{deduplicate, load_corpus, split_corpus, Corpus, SplitTag};
use scelmo::detector::{evaluate_real_bugs, train_detector, Binding, DetectorConfig, DetectorModel};
use scelmo::embeddings::sgns::SgnsConfig;
use scelmo::embeddings::vocab::{build_vocabulary, name_sequences};
use scelmo::embeddings::{random_provider, train_cbow, train_fasttext, EmbeddingTable, Method};
use scelmo::extraction::{read_instances, write_instances, ExtractConfig, LengthUnit, Pattern};
use scelmo::lm::{train_lm, CollapseWeights, LmConfig};
use scelmo::mutation::{build_dataset, operator_pool};
use scelmo::pipeline::{extract_corpus, in_split, provider_for, read_real_bugs, real_bug_instances, token_streams};
use scelmo::provider::ProviderMode;

#[derive(Parser)]
#[command(name = "scelmo", version, about = "Name-based JavaScript bug detection with static and contextual embeddings")]
struct Cli {
    /// Seed for every random choice of the stage.
    #[arg(long, global = true, env = "SCELMO_SEED", default_value_t = 7)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Walk a source tree and write tokens and ASTs as JSONL (provided by the exporter tool).
    Export {
        #[arg(long)]
        root: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = ".js")]
        ext: String,
    },
    /// Load exporter JSONL, deduplicate, split, and write a corpus store.
    Ingest(IngestArgs),
    /// Extract code instances of one bug pattern from a corpus store.
    Extract(ExtractArgs),
    /// Pair every instance with one seeded bug.
    Mutate(MutateArgs),
    /// Train random, CBOW or FastText token embeddings.
    TrainEmbeddings(EmbeddingArgs),
    /// Train the bidirectional language model.
    TrainLm(LmArgs),
    /// Train a bug detector for one pattern and feature provider.
    TrainDetector(DetectorArgs),
    /// Accuracy of a detector on a mutated dataset.
    Evaluate(EvaluateArgs),
    /// Recall and false-positive rate on real bug/fix pairs.
    EvalReal(EvalRealArgs),
    /// Report likely bugs in exported files as JSONL warnings.
    Detect(DetectArgs),
    /// Corpus statistics.
    #[command(subcommand)]
    Stats(StatsCommand),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    dedup: bool,
    #[arg(long, default_value_t = 0.66)]
    train_frac: f64,
    /// Split whole projects (first path component) instead of files.
    #[arg(long)]
    by_project: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    pattern: Pattern,
    /// Longest element kept, in characters (or tokens with --len-in-tokens).
    #[arg(long, default_value_t = 1000)]
    max_len: usize,
    #[arg(long)]
    len_in_tokens: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MutateArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EmbeddingArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    method: Method,
    #[arg(long, default_value_t = 200)]
    dim: usize,
    #[arg(long, default_value_t = 10_000)]
    vocab: usize,
    #[arg(long, default_value_t = 5)]
    window: usize,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    #[arg(long, default_value_t = 5)]
    negatives: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LmArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long, default_value_t = 2)]
    layers: usize,
    /// Hidden units per direction.
    #[arg(long, default_value_t = 100)]
    dim: usize,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, default_value_t = 100)]
    seq_len: usize,
    #[arg(long, default_value_t = 4)]
    batch: usize,
    #[arg(long, default_value_t = 0.002)]
    lr: f64,
    #[arg(long, default_value_t = 5.0)]
    clip: f64,
    #[arg(long, default_value_t = 50_000)]
    lm_vocab: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ProviderArgs {
    #[arg(long)]
    mode: ProviderMode,
    /// Embedding file for random, cbow and fasttext modes.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Language model file for the ELMo modes.
    #[arg(long)]
    lm: Option<PathBuf>,
    /// Comma-separated layer weights s_0..s_L (default: equal).
    #[arg(long, value_delimiter = ',')]
    layer_weights: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
}

#[derive(Args)]
struct DetectorArgs {
    #[arg(long)]
    pattern: Pattern,
    #[command(flatten)]
    provider: ProviderArgs,
    /// Mutated dataset from `mutate`.
    #[arg(long)]
    dataset: PathBuf,
    /// Corpus store the dataset was extracted from (needed by scelmo).
    #[arg(long)]
    store: Option<PathBuf>,
    #[arg(long, default_value = "train")]
    split: SplitTag,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 50)]
    batch: usize,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value_t = 0.2)]
    dropout: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    store: Option<PathBuf>,
    #[arg(long, default_value = "valid")]
    split: SplitTag,
}

#[derive(Args)]
struct EvalRealArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long, default_value_t = 0.75)]
    threshold: f64,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    model: PathBuf,
    /// Exporter JSONL with the files to check.
    #[arg(long)]
    file: PathBuf,
    #[arg(long, default_value_t = 0.75)]
    threshold: f64,
}

#[derive(Subcommand)]
enum StatsCommand {
    /// OOV rates of instance elements against an embedding vocabulary.
    Oov {
        #[arg(long)]
        instances: PathBuf,
        /// Embedding file whose vocabulary is used.
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long, default_value = "md")]
        format: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = e.downcast_ref::<scelmo::Error>().map_or("other", scelmo::Error::kind);
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {kind}: {msg}");
            ExitCode::from(1)
        }
    }
}

fn summary(v: Value) -> anyhow::Result<()> {
    let mut out = io::stdout().lock();
    writeln!(out, "{v}")?;
    Ok(())
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn load_store(path: &Path) -> anyhow::Result<Corpus> {
    let (c, _) = Corpus::load_store(path).with_context(|| format!("loading {}", path.display()))?;
    Ok(c)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Export { .. } => {
            bail!("export is provided by the separate exporter tool; feed its JSONL to `ingest`")
        }
        Command::Ingest(a) => {
            if !(0.0..=1.0).contains(&a.train_frac) {
                return Err(scelmo::Error::InvalidArgument(format!("train fraction {} outside [0,1]", a.train_frac)).into());
            }
            let mut corpus = load_corpus(&a.input)?;
            let loaded = corpus.len();
            if a.dedup {
                corpus = deduplicate(corpus);
            }
            let corpus = split_corpus(corpus, a.train_frac, seed, a.by_project)?;
            let config = json!({
                "input": path_str(&a.input), "dedup": a.dedup, "train_frac": a.train_frac,
                "by_project": a.by_project, "seed": seed,
            });
            corpus.save_store(&a.out, config)?;
            summary(json!({
                "files": corpus.len(), "loaded": loaded, "skipped": corpus.skipped,
                "train": corpus.split(SplitTag::Train).count(), "valid": corpus.split(SplitTag::Valid).count(),
            }))
        }
        Command::Extract(a) => {
            let corpus = load_store(&a.store)?;
            let cfg = ExtractConfig {
                max_elem_len: a.max_len,
                unit: if a.len_in_tokens { LengthUnit::Tokens } else { LengthUnit::Chars },
            };
            let (inst, stats) = extract_corpus(&corpus, a.pattern, &cfg, seed);
            let config = json!({"store": path_str(&a.store), "pattern": a.pattern, "extract": cfg, "seed": seed});
            write_instances(&a.out, config, &inst)?;
            summary(serde_json::to_value(stats)?)
        }
        Command::Mutate(a) => {
            let (header, inst) = read_instances(&a.input)?;
            let pool = operator_pool(&inst);
            let (data, stats) = build_dataset(&inst, &pool, seed)?;
            let mut config = header["config"].clone();
            config["mutation"] = json!({"input": path_str(&a.input), "seed": seed, "operators": pool});
            write_instances(&a.out, config, &data)?;
            summary(serde_json::to_value(stats)?)
        }
        Command::TrainEmbeddings(a) => {
            let corpus = load_store(&a.store)?;
            let vocab = build_vocabulary(&corpus, a.vocab)?;
            let cfg = SgnsConfig {
                dim: a.dim,
                window: a.window,
                epochs: a.epochs,
                lr: a.lr,
                negatives: a.negatives,
                seed,
            };
            let seqs = name_sequences(&corpus, SplitTag::Train);
            let table = match a.method {
                Method::Random => random_provider(&vocab, a.dim, seed),
                Method::Cbow => train_cbow(&seqs, &vocab, &cfg)?,
                Method::Fasttext => train_fasttext(&seqs, &vocab, &cfg)?,
            };
            table.save(&a.out)?;
            summary(json!({"method": a.method, "vocab": table.vocab.len(), "dim": table.dim(), "epoch_loss": table.epoch_loss}))
        }
        Command::TrainLm(a) => {
            let corpus = load_store(&a.store)?;
            let cfg = LmConfig {
                layers: a.layers,
                hidden: a.dim,
                seq_len: a.seq_len,
                batch: a.batch,
                epochs: a.epochs,
                lr: a.lr,
                clip: a.clip,
                lm_vocab_size: a.lm_vocab,
                seed,
                ..LmConfig::default()
            };
            let streams = token_streams(&corpus, SplitTag::Train);
            let (model, report) = train_lm(&streams, &cfg)?;
            model.save(&a.out)?;
            summary(serde_json::to_value(report)?)
        }
        Command::TrainDetector(a) => {
            let (_, data) = read_instances(&a.dataset)?;
            let data: Vec<_> = in_split(&data, a.split).into_iter().filter(|i| i.pattern == a.pattern).collect();
            let binding = binding_of(&a.provider)?;
            let provider = provider_for(a.provider.mode, &binding)?;
            let files = match &a.store {
                Some(p) => load_store(p)?,
                None => Corpus::default(),
            };
            let cfg = DetectorConfig {
                epochs: a.epochs,
                batch: a.batch,
                lr: a.lr,
                dropout: a.dropout,
                seed,
                ..DetectorConfig::default()
            };
            let mut model = train_detector(&data, provider.as_ref(), &files, &cfg)?;
            model.binding = binding;
            model.save(&a.out)?;
            summary(json!({"instances": data.len(), "epoch_loss": model.epoch_loss}))
        }
        Command::Evaluate(a) => {
            let model = DetectorModel::load(&a.model)?;
            let (_, data) = read_instances(&a.dataset)?;
            let data = in_split(&data, a.split);
            let provider = provider_for(model.mode, &model.binding)?;
            let files = match &a.store {
                Some(p) => load_store(p)?,
                None => Corpus::default(),
            };
            let report = model.evaluate(&data, provider.as_ref(), &files)?;
            summary(serde_json::to_value(report)?)
        }
        Command::EvalReal(a) => {
            let model = DetectorModel::load(&a.model)?;
            let (pairs, bad) = read_real_bugs(&a.pairs)?;
            let set = real_bug_instances(&pairs, model.pattern, &ExtractConfig::default(), seed);
            let provider = provider_for(model.mode, &model.binding)?;
            let report =
                evaluate_real_bugs(&model, &set.pairs, provider.as_ref(), &set.files, a.threshold, bad + set.skipped)?;
            summary(serde_json::to_value(report)?)
        }
        Command::Detect(a) => {
            let model = DetectorModel::load(&a.model)?;
            let corpus = load_corpus(&a.file)?;
            let provider = provider_for(model.mode, &model.binding)?;
            let (inst, _) = extract_corpus(&corpus, model.pattern, &ExtractConfig::default(), seed);
            let mut out = BufWriter::new(io::stdout().lock());
            for i in &inst {
                let p = model.predict(i, provider.as_ref(), &corpus)?;
                if p > a.threshold {
                    let file = corpus.file(i.file_id).map(|f| f.path.clone()).unwrap_or_default();
                    let w = json!({
                        "file": file, "span": [i.range.0, i.range.1], "pattern": model.pattern,
                        "elements": i.elements(), "probability": p,
                    });
                    writeln!(out, "{w}")?;
                }
            }
            out.flush()?;
            Ok(())
        }
        Command::Stats(StatsCommand::Oov { instances, vocab, format }) => {
            let format: ReportFormat = format.parse()?;
            let (_, inst) = read_instances(&instances)?;
            let table = EmbeddingTable::load(&vocab)?;
            let report = oov_stats(&inst, &table.vocab);
            print!("{}", render_report(&report, format));
            Ok(())
        }
    }
}

fn binding_of(a: &ProviderArgs) -> anyhow::Result<Binding> {
    let collapse = match &a.layer_weights {
        Some(s) => Some(CollapseWeights::new(s.clone(), a.gamma)?),
        None if a.gamma != 1.0 => bail!("--gamma needs --layer-weights"),
        None => None,
    };
    let abs = |p: &Option<PathBuf>| -> anyhow::Result<Option<String>> {
        p.as_ref()
            .map(|p| fs::canonicalize(p).map(|c| path_str(&c)).with_context(|| format!("resolving {}", p.display())))
            .transpose()
    };
    Ok(Binding { embeddings: abs(&a.embeddings)?, lm: abs(&a.lm)?, collapse })
}
