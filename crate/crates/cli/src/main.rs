//! Command-line entry point: config resolution, thread-pool setup, dispatch,
//! and machine-readable error records on failure.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use panelkit_cli::commands::{self, Ctx};
use panelkit_cli::config::{self, parse_toml, ValidationErrors};
use panelkit_cli::report::AnalysisReport;

#[derive(Parser)]
#[command(
    name = "panelkit",
    version,
    about = "Spatial panel causal-inference engine: exposure indices, fixed-effects DID, shift-share IV, randomization inference, LISA"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for reports and side tables.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Seed for anything random (required for permute / lisa / simulate;
    /// overrides the config value).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: PANELKIT_THREADS or all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Clean, dedupe, and aggregate postings into a neighborhood-year panel.
    Ingest {
        /// Override config `postings`.
        #[arg(long)]
        postings: Option<PathBuf>,
    },
    /// Score occupations from model assessments and aggregate to neighborhoods.
    Exposure {
        #[arg(long)]
        assessments: Option<PathBuf>,
        #[arg(long)]
        postings: Option<PathBuf>,
    },
    /// Fit the pre-determined difference-in-differences model.
    Did {
        /// Override config `input.panel`.
        #[arg(long)]
        panel: Option<PathBuf>,
    },
    /// Fit the event-study specification with the joint pre-trend test.
    EventStudy {
        #[arg(long)]
        panel: Option<PathBuf>,
    },
    /// Randomization inference / placebo shuffles.
    Permute {
        /// Override config `b`.
        #[arg(long)]
        b: Option<usize>,
    },
    /// Build the shift-share instrument and fit the long-difference IV.
    Bartik {},
    /// Fit the triple-difference mechanism test.
    TripleDid {
        /// Override config `moderator`.
        #[arg(long)]
        moderator: Option<String>,
    },
    /// Fit the two-way fixed-effects interaction (mechanism) model.
    FeInteract {},
    /// Local spatial association with permutation significance.
    Lisa {
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        permutations: Option<usize>,
    },
    /// Generate synthetic fixtures with planted ground truth.
    Simulate {
        /// Override config `kind`.
        #[arg(long)]
        kind: Option<String>,
    },
    /// Render saved report documents as text tables.
    Report {
        /// Report JSON files (alternative to config `inputs`).
        inputs: Vec<PathBuf>,
    },
}

fn load_config_text(cli: &Cli) -> Result<String> {
    match &cli.config {
        Some(path) => std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display())),
        None => Ok(String::new()),
    }
}

fn thread_count(cli: &Cli) -> Option<usize> {
    cli.threads.or_else(|| {
        std::env::var("PANELKIT_THREADS").ok().and_then(|v| v.parse().ok())
    })
}

fn dispatch(cli: &Cli) -> Result<AnalysisReport> {
    let ctx = Ctx { out: cli.out.clone(), seed: cli.seed };
    let text = load_config_text(cli)?;
    match &cli.command {
        Command::Ingest { postings } => {
            let mut cfg: config::IngestConfig = parse_toml(&text)?;
            if postings.is_some() {
                cfg.postings = postings.clone();
            }
            commands::ingest::run(&ctx, &cfg)
        }
        Command::Exposure { assessments, postings } => {
            let mut cfg: config::ExposureConfig = parse_toml(&text)?;
            if assessments.is_some() {
                cfg.assessments = assessments.clone();
            }
            if postings.is_some() {
                cfg.postings = postings.clone();
            }
            commands::exposure::run(&ctx, &cfg)
        }
        Command::Did { panel } => {
            let mut cfg: config::DidConfig = parse_toml(&text)?;
            if panel.is_some() {
                cfg.input.panel = panel.clone();
            }
            commands::did::run(&ctx, &cfg)
        }
        Command::EventStudy { panel } => {
            let mut cfg: config::DidConfig = parse_toml(&text)?;
            if panel.is_some() {
                cfg.input.panel = panel.clone();
            }
            commands::event_study::run(&ctx, &cfg)
        }
        Command::Permute { b } => {
            let mut cfg: config::PermuteConfig = parse_toml(&text)?;
            if let Some(b) = b {
                cfg.b = *b;
            }
            commands::permute::run(&ctx, &cfg)
        }
        Command::Bartik {} => {
            let cfg: config::BartikConfig = parse_toml(&text)?;
            commands::bartik::run(&ctx, &cfg)
        }
        Command::TripleDid { moderator } => {
            let mut cfg: config::DidConfig = parse_toml(&text)?;
            if moderator.is_some() {
                cfg.moderator = moderator.clone();
            }
            commands::triple_did::run(&ctx, &cfg)
        }
        Command::FeInteract {} => {
            let cfg: config::FeInteractConfig = parse_toml(&text)?;
            commands::fe_interact::run(&ctx, &cfg)
        }
        Command::Lisa { alpha, permutations } => {
            let mut cfg: config::LisaConfig = parse_toml(&text)?;
            if let Some(a) = alpha {
                cfg.alpha = *a;
            }
            if let Some(p) = permutations {
                cfg.permutations = *p;
            }
            commands::lisa::run(&ctx, &cfg)
        }
        Command::Simulate { kind } => {
            let mut cfg: config::SimulateConfig = parse_toml(&text)?;
            if let Some(kind) = kind {
                cfg.kind = Some(parse_toml(&format!("kind = \"{kind}\""))
                    .map(|c: config::SimulateConfig| c.kind.expect("parsed"))?);
            }
            commands::simulate::run(&ctx, &cfg)
        }
        Command::Report { inputs } => {
            let mut cfg: config::ReportConfig = parse_toml(&text)?;
            if !inputs.is_empty() {
                cfg.inputs = inputs.clone();
            }
            commands::report_cmd::run(&ctx, &cfg)
        }
    }
}

fn command_slug(cli: &Cli) -> &'static str {
    match cli.command {
        Command::Ingest { .. } => "ingest",
        Command::Exposure { .. } => "exposure",
        Command::Did { .. } => "did",
        Command::EventStudy { .. } => "event_study",
        Command::Permute { .. } => "permute",
        Command::Bartik {} => "bartik",
        Command::TripleDid { .. } => "triple_did",
        Command::FeInteract {} => "fe_interact",
        Command::Lisa { .. } => "lisa",
        Command::Simulate { .. } => "simulate",
        Command::Report { .. } => "report",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = thread_count(&cli) {
        // ignore AlreadyInitialized in case of repeated in-process use
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match dispatch(&cli) {
        Ok(report) => {
            let path = cli.out.join(format!("{}_report.json", command_slug(&cli)));
            if let Err(e) = report.write(&path) {
                eprintln!("{}", error_record(&e));
                return ExitCode::FAILURE;
            }
            println!("{}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_record(&e));
            ExitCode::FAILURE
        }
    }
}

/// Machine-readable error record: one JSON object on stderr.
fn error_record(e: &anyhow::Error) -> String {
    let fields: Vec<String> = match e.downcast_ref::<ValidationErrors>() {
        Some(v) => v.0.clone(),
        None => Vec::new(),
    };
    serde_json::json!({
        "error": {
            "message": e.to_string(),
            "fields": fields,
        }
    })
    .to_string()
}
