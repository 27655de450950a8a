//! `adtrace`: stage commands over a shared TOML config.
//!
//! ```text
//! adtrace gen-seeds --config adtrace.toml
//! adtrace crawl     --config adtrace.toml
//! adtrace extract   --config adtrace.toml
//! adtrace classify  --config adtrace.toml [--input FILE] [--attr product|title|text]
//! adtrace sink      --config adtrace.toml
//! adtrace report    --config adtrace.toml [--top-k 20] [--csv-dir DIR]
//! adtrace induce    --config adtrace.toml --domain shop.example --examples DIR
//! ```
//!
//! Stage summaries go to stdout as one JSON line; logs go to stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adtrace_core::config::{ConfigError, PipelineConfig, TextAttribute};
use adtrace_core::pipeline::{Pipeline, PipelineError};
use adtrace_core::report::{distribution_csv, distribution_table, domains_csv, domains_table};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser)]
#[command(name = "adtrace", version, about = "Collect and filter wildlife-product marketplace ads")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline configuration file.
    #[arg(long, short, default_value = "adtrace.toml")]
    config: PathBuf,
    /// Pin the clock and record ids for reproducible runs.
    #[arg(long)]
    test_mode: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Attr {
    Product,
    Title,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Expand search-URL patterns against the species keyword list.
    GenSeeds(Common),
    /// Crawl the seed domains into the page store.
    Crawl(Common),
    /// Extract product fields from stored pages.
    Extract(Common),
    /// Zero-shot classify extracted products and mark relevant ones.
    Classify {
        #[command(flatten)]
        common: Common,
        /// Classify records from a Parquet file/directory or classified JSONL instead.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, value_enum)]
        attr: Option<Attr>,
        /// Candidate labels, one per line.
        #[arg(long)]
        labels_file: Option<PathBuf>,
        /// `baseline` or a zero-shot endpoint URL.
        #[arg(long)]
        backend: Option<String>,
        #[arg(long)]
        min_prob: Option<f64>,
    },
    /// Write relevant records as Parquet partitions and upload them.
    Sink(Common),
    /// Train per-domain extraction rules from annotated example pages.
    Induce {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        domain: String,
        /// Directory of `<name>/page.html` + `<name>/expected.json` pairs.
        #[arg(long)]
        examples: PathBuf,
    },
    /// Label distribution and top domains for the relevant labels.
    Report {
        #[command(flatten)]
        common: Common,
        /// Parquet file/directory or classified JSONL; default the classified file.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Labels counted in the domain table (repeatable).
        #[arg(long = "label")]
        labels: Vec<String>,
        #[arg(long, default_value_t = 20)]
        top_k: usize,
        /// Also write `labels.csv` and `domains.csv` here.
        #[arg(long)]
        csv_dir: Option<PathBuf>,
        /// Print CSV instead of aligned tables.
        #[arg(long)]
        csv: bool,
    },
}

fn load(common: &Common) -> Result<PipelineConfig, PipelineError> {
    if !common.config.exists() {
        return Err(PipelineError::MissingInput(common.config.clone()));
    }
    let mut cfg = PipelineConfig::load(&common.config)?;
    cfg.run.test_mode |= common.test_mode;
    Ok(cfg)
}

fn print_json(v: &impl serde::Serialize) {
    println!("{}", serde_json::to_string(v).expect("summaries serialize"));
}

fn write_file(path: &Path, text: &str) -> Result<(), PipelineError> {
    std::fs::write(path, text).map_err(|source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    })
}

async fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::GenSeeds(c) => {
            let p = Pipeline::new(load(&c)?);
            let _lock = p.lock()?;
            let s = p.gen_seeds()?;
            if s.seeds == 0 {
                tracing::warn!("no seeds generated");
            }
            println!("{s}");
        }
        Command::Crawl(c) => {
            let p = Pipeline::new(load(&c)?);
            let _lock = p.lock()?;
            print_json(&p.crawl().await?);
        }
        Command::Extract(c) => {
            let p = Pipeline::new(load(&c)?);
            let _lock = p.lock()?;
            print_json(&p.extract()?);
        }
        Command::Classify {
            common,
            input,
            attr,
            labels_file,
            backend,
            min_prob,
        } => {
            let mut cfg = load(&common)?;
            if let Some(a) = attr {
                cfg.classify.attribute = match a {
                    Attr::Product => TextAttribute::Product,
                    Attr::Title => TextAttribute::Title,
                    Attr::Text => TextAttribute::Text,
                };
            }
            if let Some(f) = labels_file {
                cfg.classify.labels_file = Some(f);
            }
            if let Some(b) = backend {
                cfg.classify.backend = b;
            }
            if let Some(m) = min_prob {
                cfg.classify.min_prob = m;
            }
            cfg.validate()?;
            let p = Pipeline::new(cfg);
            let _lock = p.lock()?;
            print_json(&p.classify(input.as_deref()).await?);
        }
        Command::Sink(c) => {
            let p = Pipeline::new(load(&c)?);
            let _lock = p.lock()?;
            print_json(&p.sink().await?);
        }
        Command::Induce {
            common,
            domain,
            examples,
        } => {
            let p = Pipeline::new(load(&common)?);
            let _lock = p.lock()?;
            print_json(&p.induce(&domain, &examples)?);
        }
        Command::Report {
            common,
            input,
            labels,
            top_k,
            csv_dir,
            csv,
        } => {
            let p = Pipeline::new(load(&common)?);
            let _lock = p.lock()?;
            let filter = (!labels.is_empty()).then_some(labels);
            let r = p.report(input.as_deref(), filter, top_k)?;
            if csv {
                print!("{}", distribution_csv(&r.distribution));
                println!();
                print!("{}", domains_csv(&r.top_domains));
            } else {
                print!("{}", distribution_table(&r.distribution));
                println!();
                println!("top {} domains for {}", top_k, r.domain_labels.join(", "));
                print!("{}", domains_table(&r.top_domains));
            }
            if let Some(dir) = csv_dir {
                std::fs::create_dir_all(&dir).map_err(|source| PipelineError::Io {
                    path: dir.display().to_string(),
                    source,
                })?;
                write_file(&dir.join("labels.csv"), &distribution_csv(&r.distribution))?;
                write_file(&dir.join("domains.csv"), &domains_csv(&r.top_domains))?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("ADTRACE_LOG").unwrap_or_else(|_| "info".into()),
        )
        .init();
    let cli = Cli::parse();
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    match runtime.block_on(run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut err = json!({ "error": e.to_string() });
            if let PipelineError::Upload { stage, processed, failed, .. } = &e {
                err["stage"] = json!(stage);
                err["processed"] = json!(processed);
                err["failed"] = json!(failed);
            }
            eprintln!("{err}");
            if matches!(e, PipelineError::Config(ConfigError::MissingVar(_))) {
                eprintln!("hint: set the variable or remove the reference from the config");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
