use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};

use simtopic::corpus::{fingerprint, load_corpus, load_matrix, write_file, TokenizedCorpus};
use simtopic::descriptors::DescriptorConfig;
use simtopic::discovery::discover;
use simtopic::inference::{batch_affinity, word_affinity};
use simtopic::metrics::{evaluate, EmbeddingStore, MetricConfig, TopicDistributions};
use simtopic::model::{load_trace, save_trace, KeyValues, TopicModel, VERSION};
use simtopic::schedule::{ThresholdSchedule, DEFAULT_MAX_ITERS};
use simtopic::tuning::{run_grid, GridSpec};

#[derive(Parser)]
#[command(
    name = "simtopic",
    version,
    about = "Deterministic topic discovery by cosine-similarity thresholding"
)]
struct Cli {
    /// Worker threads (defaults to all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// `key = value` file supplying defaults for any flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CorpusArgs {
    /// Document matrix (`dense r c` or `sparse r c` text file).
    #[arg(long)]
    matrix: PathBuf,
    /// Tokenized documents, one per line, aligned with the matrix rows.
    #[arg(long)]
    tokens: PathBuf,
}

#[derive(Args)]
struct MetricArgs {
    #[arg(long)]
    npmi_epsilon: Option<f64>,
    #[arg(long)]
    cv_window: Option<usize>,
    #[arg(long)]
    rbo_p: Option<f64>,
    #[arg(long)]
    kl_smoothing: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run discovery and write the snapshot trace.
    Fit {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        max_iters: Option<usize>,
        /// Output trace directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Pick the snapshot with `k` topics and extract its descriptors.
    Describe {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        top_n: Option<usize>,
        #[command(flatten)]
        metrics: MetricArgs,
        /// Output model directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a model's descriptors.
    Eval {
        #[arg(long)]
        model: PathBuf,
        /// Reference tokens, aligned with the documents the model was built on.
        #[arg(long)]
        tokens: PathBuf,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[command(flatten)]
        metrics: MetricArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search alpha and beta, reporting the best model per topic count.
    Grid {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Grid file with `alphas`, `betas`, `k_min`, `k_max`, `top_n` keys.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        k_min: Option<usize>,
        #[arg(long)]
        k_max: Option<usize>,
        #[arg(long)]
        top_n: Option<usize>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[command(flatten)]
        metrics: MetricArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Topic affinities for new documents, or for one vocabulary word.
    Infer {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, required_unless_present = "word")]
        matrix: Option<PathBuf>,
        #[arg(long, conflicts_with = "matrix")]
        word: Option<String>,
        #[arg(long)]
        temperature: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Bad flags or parameter values; reported with exit status 2.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(Usage(msg.into()))
}

/// Values from `--config`; command-line flags take precedence.
struct Settings(KeyValues);

impl Settings {
    fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Settings(KeyValues::default()));
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Ok(Settings(KeyValues::parse(&text)?))
    }

    fn get<T: std::str::FromStr>(&self, flag: Option<T>, key: &str) -> anyhow::Result<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| usage(format!("config: bad value `{v}` for `{key}`"))),
        }
    }

    fn or<T: std::str::FromStr>(
        &self,
        flag: Option<T>,
        key: &str,
        default: T,
    ) -> anyhow::Result<T> {
        Ok(self.get(flag, key)?.unwrap_or(default))
    }

    fn required<T: std::str::FromStr>(&self, flag: Option<T>, key: &str) -> anyhow::Result<T> {
        self.get(flag, key)?
            .ok_or_else(|| usage(format!("--{} is required", key.replace('_', "-"))))
    }

    fn metric_config(&self, m: MetricArgs) -> anyhow::Result<MetricConfig> {
        let d = MetricConfig::default();
        let cfg = MetricConfig {
            npmi_epsilon: self.or(m.npmi_epsilon, "npmi_epsilon", d.npmi_epsilon)?,
            cv_window: self.or(m.cv_window, "cv_window", d.cv_window)?,
            rbo_p: self.or(m.rbo_p, "rbo_p", d.rbo_p)?,
            kl_smoothing: self.or(m.kl_smoothing, "kl_smoothing", d.kl_smoothing)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => Ok(write_file(p, text.as_bytes())?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_store(path: Option<&Path>) -> anyhow::Result<Option<EmbeddingStore>> {
    path.map(EmbeddingStore::load)
        .transpose()
        .map_err(Into::into)
}

fn run(cmd: Command, settings: &Settings) -> anyhow::Result<()> {
    match cmd {
        Command::Fit {
            corpus,
            alpha,
            max_iters,
            out,
        } => {
            let alpha: f64 = settings.required(alpha, "alpha")?;
            let max_iters = settings.or(max_iters, "max_iters", DEFAULT_MAX_ITERS)?;
            let schedule = ThresholdSchedule::with_max_iters(alpha, max_iters)?;
            let bundle = load_corpus(&corpus.matrix, &corpus.tokens)?;
            let trace = discover(&bundle, &schedule)?;
            save_trace(&trace, &fingerprint(&bundle), &out)?;
            let ks: Vec<String> = trace.snapshots.iter().map(|s| s.k().to_string()).collect();
            eprintln!(
                "{} iterations, {}; topic counts: {}",
                trace.snapshots.len(),
                trace.termination.as_str(),
                ks.join(" ")
            );
        }
        Command::Describe {
            corpus,
            trace,
            k,
            beta,
            top_n,
            metrics,
            out,
        } => {
            let k: usize = settings.required(k, "k")?;
            let beta: f64 = settings.required(beta, "beta")?;
            let top_n = settings.or(top_n, "top_n", 10)?;
            let config = DescriptorConfig::new(beta, top_n)?;
            let metric_cfg = settings.metric_config(metrics)?;
            let bundle = load_corpus(&corpus.matrix, &corpus.tokens)?;
            let saved = load_trace(&trace)?;
            let fp = fingerprint(&bundle);
            if fp != saved.fingerprint {
                bail!(
                    "corpus fingerprint {fp} does not match the trace ({})",
                    saved.fingerprint
                );
            }
            let snapshot = saved.trace.with_k(k).ok_or_else(|| {
                let ks: Vec<String> = saved
                    .trace
                    .snapshots
                    .iter()
                    .map(|s| s.k().to_string())
                    .collect();
                usage(format!(
                    "no snapshot has k = {k}; available: {}",
                    ks.join(" ")
                ))
            })?;
            let model =
                TopicModel::build(snapshot, &bundle, saved.trace.alpha, &config, metric_cfg)?;
            model.save(&out)?;
            if let Some(r) = &model.descriptors.fallback_reason {
                eprintln!("warning: ranked by document frequency ({r})");
            }
            print!("{}", model.descriptors.to_text());
        }
        Command::Eval {
            model,
            tokens,
            embeddings,
            metrics,
            out,
        } => {
            let metric_cfg = settings.metric_config(metrics)?;
            let model = TopicModel::load(&model)?;
            let reference = TokenizedCorpus::load(&tokens)?;
            let store = load_store(embeddings.as_deref())?;
            let dist = TopicDistributions::from_selection(
                &model.descriptors.selected,
                &reference,
                metric_cfg.kl_smoothing,
            )?;
            let report = evaluate(
                &model.descriptors.per_topic_words,
                &reference,
                &dist,
                store.as_ref(),
                &metric_cfg,
            )?;
            for f in &report.flags {
                eprintln!("warning: {f}");
            }
            emit(out.as_deref(), &report.to_text())?;
        }
        Command::Grid {
            corpus,
            spec,
            k_min,
            k_max,
            top_n,
            embeddings,
            metrics,
            out,
        } => {
            let mut grid = match &spec {
                Some(p) => GridSpec::parse(
                    &std::fs::read_to_string(p)
                        .with_context(|| format!("reading {}", p.display()))?,
                )?,
                None => GridSpec::default(),
            };
            grid.k_min = settings.or(k_min, "k_min", grid.k_min)?;
            grid.k_max = settings.or(k_max, "k_max", grid.k_max)?;
            grid.top_n = settings.or(top_n, "top_n", grid.top_n)?;
            grid.validate()?;
            let metric_cfg = settings.metric_config(metrics)?;
            let bundle = load_corpus(&corpus.matrix, &corpus.tokens)?;
            let store = load_store(embeddings.as_deref())?;
            let result = run_grid(&bundle, &grid, &metric_cfg, store.as_ref())?;
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            write_file(&out.join("grid.txt"), result.to_text().as_bytes())?;
            let mut kv = KeyValues::default();
            kv.push("version", VERSION);
            kv.push("fingerprint", fingerprint(&bundle));
            kv.push("alphas", join(&grid.alphas));
            kv.push("betas", join(&grid.betas));
            kv.push("k_min", grid.k_min);
            kv.push("k_max", grid.k_max);
            kv.push("top_n", grid.top_n);
            kv.push("discover_runs", result.discover_runs);
            kv.push("winners", result.winners.len());
            kv.push(
                simtopic::model::TIMESTAMP_KEY,
                std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0),
            );
            write_file(&out.join("grid.manifest"), kv.to_text().as_bytes())?;
            for w in &result.warnings {
                eprintln!("warning: {w}");
            }
            eprintln!(
                "{} cells, {} winners",
                result.cells.len(),
                result.winners.len()
            );
        }
        Command::Infer {
            model,
            matrix,
            word,
            temperature,
            out,
        } => {
            let model = TopicModel::load(&model)?;
            let mut text = String::new();
            if let Some(word) = word {
                let a = word_affinity(&word, &model)?;
                if a.uniform_fallback {
                    eprintln!("warning: `{word}` has no score mass; uniform distribution");
                }
                let _ = writeln!(text, "{}", join(&a.distribution));
            } else {
                let temperature = settings.or(temperature, "temperature", 1.0)?;
                let path = matrix.ok_or_else(|| anyhow!("--matrix is required"))?;
                let docs = load_matrix(&path)?;
                let probs = batch_affinity(&docs, &model, temperature)?;
                for row in probs.rows() {
                    let _ = writeln!(text, "{}", join(row));
                }
            }
            emit(out.as_deref(), &text)?;
        }
    }
    Ok(())
}

fn join(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:?}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return 2;
    }
    match err.downcast_ref::<simtopic::Error>() {
        Some(e) if e.is_validation() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = Settings::load(cli.config.as_deref()).and_then(|settings| {
        let threads = settings.get(cli.threads, "threads")?;
        if threads == Some(0) {
            return Err(usage("--threads must be at least 1"));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.unwrap_or(0))
            .build()
            .context("starting worker pool")?;
        pool.install(|| run(cli.command, &settings))
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
