//! `synthline` command line.
//!
//! Exit codes: 0 success, 1 the configuration (or another input) failed
//! validation, 2 usage or runtime error.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use synthline_core::config::validate;
use synthline_core::expand::count_atomic_configurations;
use synthline_core::metrics::{diversity_report, Embedder, HashEmbedder, ReportOptions};
use synthline_core::resources;
use synthline_core::{
    deduplicate, expand_atomic_configurations, stratified_split, Configuration, Dataset, DedupMode, FeatureModel,
    LabelSpec,
};

use crate::embed::HttpEmbedder;
use crate::engine::{
    Backoff, ChatBackend, CompletionBackend, Generation, GenerationParams, MockBackend, RunOptions, RunStatus,
};
use crate::service::{self, ServiceConfig};
use crate::store::{self, file_sink, ColumnMapping, Format};

#[derive(Debug, Parser)]
#[command(name = "synthline", version, about = "Feature-model driven synthetic requirements data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a configuration against a feature model.
    Validate(ModelArgs),
    /// List the atomic configurations of a configuration.
    Expand {
        #[command(flatten)]
        model: ModelArgs,
        /// Print only how many there are.
        #[arg(long)]
        count_only: bool,
    },
    /// Generate one dataset file per label.
    Generate(GenerateArgs),
    /// Drop repeated texts.
    Dedup {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long = "out")]
        output: PathBuf,
        /// Compare texts byte for byte instead of after case and whitespace folding.
        #[arg(long)]
        strict: bool,
    },
    /// Compute the diversity report of a dataset.
    Metrics(MetricsArgs),
    /// Stratified train/test split.
    Split {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = 0.3)]
        test_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_train: PathBuf,
        #[arg(long)]
        out_test: PathBuf,
    },
    /// Serve the configurator API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Feature model file; the bundled Synthline model when omitted.
    #[arg(short = 'm', long = "model")]
    pub model: Option<PathBuf>,
    /// Configuration JSON file.
    #[arg(short = 'c', long = "config")]
    pub config: PathBuf,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Input format; guessed from the extension when omitted.
    #[arg(long)]
    pub format: Option<Format>,
    /// Column mapping JSON for external CSV corpora.
    #[arg(long)]
    pub mapping: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// JSON array of `{"label", "description"}`.
    #[arg(long)]
    pub labels: PathBuf,
    /// `mock`, or the base URL of a chat-completions API.
    #[arg(long)]
    pub backend: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "csv")]
    pub format: Format,
    /// Makes ids and timestamps reproducible; label `i` uses `seed + i`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 8)]
    pub concurrency: usize,
    #[arg(long, default_value_t = 3)]
    pub retries: u32,
    /// Base delay of the exponential backoff, in milliseconds.
    #[arg(long, default_value_t = 1000)]
    pub backoff_ms: u64,
    /// Model identifier sent to the API instead of the configuration's LLM label.
    #[arg(long)]
    pub model_name: Option<String>,
    /// Adds a system message to every request.
    #[arg(long)]
    pub system: Option<String>,
    #[arg(long)]
    pub max_tokens: Option<u32>,
    /// Per-request timeout in seconds.
    #[arg(long, default_value_t = 120)]
    pub timeout: u64,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// `hash`, or the URL of an embeddings endpoint.
    #[arg(long, default_value = "hash")]
    pub embedder: String,
    /// Model name sent to the embeddings endpoint.
    #[arg(long, default_value = "")]
    pub embed_model: String,
    #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
    pub ngrams: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
    #[arg(long)]
    pub report: PathBuf,
    /// Also write the histogram as `bin_lower,count` CSV.
    #[arg(long)]
    pub histogram: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = service::DEFAULT_PORT)]
    pub port: u16,
    #[arg(short = 'm', long = "model")]
    pub model: Option<PathBuf>,
    #[arg(long, default_value = "synthline-runs")]
    pub data_dir: PathBuf,
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
    /// Chat-completions base URL for runs that request the default backend.
    #[arg(long)]
    pub backend: Option<String>,
}

enum Failure {
    Invalid(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

type CmdResult = Result<(), Failure>;

/// Parses `argv` (including the program name) and runs the command.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(Failure::Invalid(msg)) => {
            if !msg.is_empty() {
                eprintln!("{msg}");
            }
            1
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

fn run(command: Command) -> CmdResult {
    match command {
        Command::Validate(args) => {
            let (model, config) = load(&args)?;
            let report = validate(&model, &config);
            println!("{report}");
            if report.valid {
                Ok(())
            } else {
                Err(Failure::Invalid(String::new()))
            }
        }
        Command::Expand { model, count_only } => {
            let (model, config) = load(&model)?;
            checked(&model, &config)?;
            if count_only {
                println!("{}", count_atomic_configurations(&model, &config).map_err(anyhow::Error::from)?);
            } else {
                let mut out = std::io::stdout().lock();
                for atomic in expand_atomic_configurations(&model, &config).map_err(anyhow::Error::from)? {
                    let line = serde_json::to_string(&atomic).context("serializing")?;
                    // A closed pipe (`| head`) ends the listing quietly.
                    if writeln!(out, "{line}").is_err() {
                        break;
                    }
                }
            }
            Ok(())
        }
        Command::Generate(args) => generate(args),
        Command::Dedup { input, output, strict } => {
            let dataset = read_input(&input)?;
            let mode = if strict { DedupMode::Exact } else { DedupMode::Normalized };
            let (kept, removed) = deduplicate(&dataset, mode);
            write_output(&kept, &output)?;
            eprintln!("kept {}, removed {removed}", kept.len());
            Ok(())
        }
        Command::Metrics(args) => metrics(args),
        Command::Split { input, test_fraction, seed, out_train, out_test } => {
            let dataset = read_input(&input)?;
            let (train, test) = stratified_split(&dataset, test_fraction, seed).map_err(anyhow::Error::from)?;
            write_output(&train, &out_train)?;
            write_output(&test, &out_test)?;
            eprintln!("train {}, test {}", train.len(), test.len());
            for (label, n) in &test.class_stats().per_class {
                eprintln!("  test {label}: {n}");
            }
            Ok(())
        }
        Command::Serve(args) => serve(args),
    }
}

fn read_model(path: Option<&Path>) -> anyhow::Result<FeatureModel> {
    match path {
        None => Ok(resources::synthline_model()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            FeatureModel::parse(&text).with_context(|| format!("parsing {}", p.display()))
        }
    }
}

fn load(args: &ModelArgs) -> anyhow::Result<(FeatureModel, Configuration)> {
    let model = read_model(args.model.as_deref())?;
    let text = fs::read_to_string(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
    let config = Configuration::from_json(&text).with_context(|| format!("parsing {}", args.config.display()))?;
    Ok((model, config))
}

fn checked(model: &FeatureModel, config: &Configuration) -> CmdResult {
    let report = validate(model, config);
    if report.valid {
        Ok(())
    } else {
        Err(Failure::Invalid(report.to_string()))
    }
}

fn input_format(path: &Path, explicit: Option<Format>) -> anyhow::Result<Format> {
    explicit
        .or_else(|| Format::from_path(path))
        .with_context(|| format!("cannot tell the format of {}; pass --format", path.display()))
}

fn read_input(input: &InputArgs) -> anyhow::Result<Dataset> {
    let path = &input.input;
    let result = match &input.mapping {
        Some(m) => {
            let text = fs::read_to_string(m).with_context(|| format!("reading {}", m.display()))?;
            store::read_external(path, &ColumnMapping::from_json(&text)?)
        }
        None => store::read_dataset(path, input_format(path, input.format)?),
    };
    result.with_context(|| format!("reading {}", path.display()))
}

fn write_output(dataset: &Dataset, path: &Path) -> anyhow::Result<()> {
    store::write_dataset(dataset, input_format(path, None)?, path).with_context(|| format!("writing {}", path.display()))
}

/// File-name form of a label: `Non-Measurable` -> `non-measurable`.
pub fn label_slug(label: &str) -> String {
    let mut out = String::new();
    for c in label.chars() {
        if c.is_alphanumeric() {
            out.extend(c.to_lowercase());
        } else if !out.ends_with('-') {
            out.push('-');
        }
    }
    let out = out.trim_matches('-').to_string();
    if out.is_empty() {
        "label".into()
    } else {
        out
    }
}

fn generate(args: GenerateArgs) -> CmdResult {
    let (model, config) = load(&args.model)?;
    checked(&model, &config)?;
    let labels_text = fs::read_to_string(&args.labels).with_context(|| format!("reading {}", args.labels.display()))?;
    let labels: Vec<LabelSpec> = serde_json::from_str(&labels_text).context("parsing the labels file")?;
    if labels.is_empty() {
        return Err(Failure::Invalid("the labels file lists no labels".into()));
    }
    for l in &labels {
        l.check().map_err(|e| Failure::Invalid(format!("label `{}`: {e}", l.label)))?;
    }
    let mut slugs: Vec<String> = labels.iter().map(|l| label_slug(&l.label)).collect();
    slugs.sort();
    slugs.dedup();
    if slugs.len() != labels.len() {
        return Err(Failure::Invalid("two labels map to the same output file name".into()));
    }

    let mut params = GenerationParams::from_configuration(&model, &config);
    params.max_concurrency = args.concurrency;
    params.retry_limit = args.retries;
    params.max_tokens = args.max_tokens;
    if let Some(name) = &args.model_name {
        params.model_name = name.clone();
    }
    params.check().map_err(|e| Failure::Invalid(e.to_string()))?;
    // Planning every run up front surfaces configuration problems before any request.
    let backoff = Backoff { base: Duration::from_millis(args.backoff_ms), ..Backoff::default() };
    let mut plans = Vec::with_capacity(labels.len());
    for (i, label) in labels.iter().enumerate() {
        let options = RunOptions {
            seed: args.seed.map(|s| s.wrapping_add(i as u64)),
            backoff,
            template: None,
        };
        let generation = Generation::prepare(&model, &config, label, params.clone(), options)
            .map_err(|e| Failure::Invalid(e.to_string()))?;
        plans.push((label, generation));
    }

    let backend: Arc<dyn CompletionBackend> = if args.backend == "mock" {
        Arc::new(MockBackend::new())
    } else {
        if !args.backend.starts_with("http://") && !args.backend.starts_with("https://") {
            return Err(Failure::Invalid(format!("--backend must be `mock` or an http(s) URL, got `{}`", args.backend)));
        }
        Arc::new(
            ChatBackend::with_timeout(&args.backend, Duration::from_secs(args.timeout)).with_system(args.system.clone()),
        )
    };
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;

    let runtime = tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
        .context("starting the async runtime")?;
    let mut all_ok = true;
    for (label, generation) in plans {
        let path = args.out.join(format!("{}.{}", label_slug(&label.label), args.format.extension()));
        let mut sink = file_sink(&path, args.format).with_context(|| format!("creating {}", path.display()))?;
        let run = runtime.block_on(generation.execute(backend.clone(), sink.as_mut()));
        eprintln!(
            "{}: {:?}, {}/{} samples -> {} (run {})",
            label.label,
            run.status,
            run.produced,
            run.requested(),
            path.display(),
            run.id
        );
        if let Some(e) = &run.error {
            eprintln!("  {e}");
        }
        all_ok &= run.status == RunStatus::Completed;
    }
    if !all_ok {
        return Err(Failure::Runtime(anyhow::anyhow!("some runs did not complete")));
    }
    Ok(())
}

fn metrics(args: MetricsArgs) -> CmdResult {
    if args.bins == 0 {
        return Err(Failure::Invalid("--bins must be positive".into()));
    }
    if args.ngrams.is_empty() || args.ngrams.contains(&0) {
        return Err(Failure::Invalid("--ngrams must list positive integers".into()));
    }
    let embedder: Box<dyn Embedder> = match args.embedder.as_str() {
        "hash" => Box::new(HashEmbedder::default()),
        url if url.starts_with("http://") || url.starts_with("https://") => {
            Box::new(HttpEmbedder::new(url, args.embed_model.clone()))
        }
        other => return Err(Failure::Invalid(format!("--embedder must be `hash` or an http(s) URL, got `{other}`"))),
    };
    let dataset = read_input(&args.input)?;
    if dataset.is_empty() {
        return Err(Failure::Runtime(anyhow::anyhow!("the dataset is empty")));
    }
    let options = ReportOptions { n_values: args.ngrams.clone(), bin_count: args.bins };
    let report = diversity_report(&dataset, embedder.as_ref(), &options).map_err(anyhow::Error::from)?;
    let json = serde_json::to_string_pretty(&report).context("serializing the report")?;
    fs::write(&args.report, json + "\n").with_context(|| format!("writing {}", args.report.display()))?;
    if let Some(h) = &args.histogram {
        fs::write(h, report.histogram.to_csv()).with_context(|| format!("writing {}", h.display()))?;
    }
    let name = args.input.input.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset");
    print!("{}", report.to_table(name));
    Ok(())
}

fn serve(args: ServeArgs) -> CmdResult {
    let model = read_model(args.model.as_deref())?;
    let mut config = ServiceConfig::new(model, args.data_dir);
    config.ui_dir = args.ui_dir;
    config.default_backend = args
        .backend
        .as_deref()
        .map(|url| Arc::new(ChatBackend::new(url)) as Arc<dyn CompletionBackend>);
    let runtime = tokio::runtime::Runtime::new().context("starting the async runtime")?;
    runtime
        .block_on(service::serve(config, args.port))
        .context("serving")?;
    Ok(())
}
