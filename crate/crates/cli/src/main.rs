use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tracelens::encoding::Encoding;
use tracelens::pipeline::{self, PipelineConfig, PipelineOutcome, Stage};
use tracelens::reporting::render_results_table;
use tracelens::synth::{self, LeakKind, LeakSpec, SynthConfig};
use tracelens::Error;

const DEFAULT_OUT: &str = "tracelens-out";

#[derive(Parser)]
#[command(
    name = "tracelens",
    version,
    about = "Outcome classification of process traces with leakage auditing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Log stage progress to stderr (RUST_LOG overrides).
    #[arg(short, long, global = true)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Read the input log.
    Ingest(RunArgs),
    /// Label traces and write class statistics.
    Label(RunArgs),
    /// Audit for leaks and apply bias removal.
    Audit(RunArgs),
    /// Duplicate-aware train/test split.
    Split(RunArgs),
    /// Fit encodings on the training split.
    Encode(RunArgs),
    /// Train the configured models.
    Train(RunArgs),
    /// Cross-validated and held-out AUROC.
    Evaluate(RunArgs),
    /// Global relevance scores.
    Explain(RunArgs),
    /// Charts and tables.
    Report(RunArgs),
    /// The whole pipeline.
    Run(RunArgs),
    /// Generate a synthetic labelled log.
    Synth(SynthArgs),
}

/// Every stage subcommand runs the pipeline up to and including that stage.
#[derive(Args)]
struct RunArgs {
    /// Pipeline config (.toml or .json).
    #[arg(short, long)]
    config: PathBuf,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory [default: $TRACELENS_OUT or ./tracelens-out].
    #[arg(short, long, env = "TRACELENS_OUT")]
    out: Option<PathBuf>,
    /// Remove every leak the audit detects.
    #[arg(long, conflicts_with = "with_bias")]
    remove_detected: bool,
    /// Keep the log as is: no detected or configured removals.
    #[arg(long)]
    with_bias: bool,
    /// Restrict to these encodings (repeatable).
    #[arg(long, value_parser = parse_encoding)]
    encoding: Vec<Encoding>,
    /// Restrict to these models (repeatable): lr, dt, attn.
    #[arg(long)]
    model: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum LeakArg {
    ClassExclusive,
    PositionalEnd,
}

#[derive(Args)]
struct SynthArgs {
    /// Generator settings (.toml or .json); flags below override it.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory [default: $TRACELENS_OUT or ./tracelens-out].
    #[arg(short, long, env = "TRACELENS_OUT")]
    out: Option<PathBuf>,
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    traces: Option<usize>,
    #[arg(long)]
    unique_per_class: Option<usize>,
    /// Inject a leak of this kind.
    #[arg(long, value_enum)]
    leak: Option<LeakArg>,
    /// Activity name used for the injected leak.
    #[arg(long, default_value = "Payment")]
    leak_activity: String,
}

fn parse_encoding(s: &str) -> Result<Encoding, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn stage_of(cmd: &Command) -> Option<(Stage, &RunArgs)> {
    Some(match cmd {
        Command::Ingest(a) => (Stage::Ingest, a),
        Command::Label(a) => (Stage::Label, a),
        Command::Audit(a) => (Stage::Audit, a),
        Command::Split(a) => (Stage::Split, a),
        Command::Encode(a) => (Stage::Encode, a),
        Command::Train(a) => (Stage::Train, a),
        Command::Evaluate(a) => (Stage::Evaluate, a),
        Command::Explain(a) => (Stage::Explain, a),
        Command::Report(a) | Command::Run(a) => (Stage::Report, a),
        Command::Synth(_) => return None,
    })
}

fn out_dir(out: &Option<PathBuf>) -> PathBuf {
    out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn apply_overrides(cfg: &mut PipelineConfig, args: &RunArgs) {
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if args.remove_detected {
        cfg.bias.remove_detected = true;
    }
    if args.with_bias {
        cfg.bias.remove_detected = false;
        cfg.bias.removals.clear();
    }
    if !args.encoding.is_empty() {
        cfg.encodings = args.encoding.clone();
        if args.model.is_empty() {
            // keep only models that can use one of the chosen encodings
            let tokens = cfg.encodings.contains(&Encoding::Tokens);
            let ngrams = cfg.encodings.iter().any(|e| e.ngram_order().is_some());
            cfg.models.retain(|m| if m == "attn" { tokens } else { ngrams });
        }
    }
    if !args.model.is_empty() {
        cfg.models = args.model.clone();
    }
}

fn summarize(out: &Path, outcome: &PipelineOutcome) {
    if let Some(audit) = &outcome.audit {
        if audit.findings.is_empty() {
            println!("audit: no leaks detected");
        }
        for f in &audit.findings {
            println!(
                "audit: leak '{}' ({:?}, {} class, support {:.3})",
                f.activity, f.mode, f.class, f.support
            );
        }
        if let Some((_, s)) = &outcome.removal {
            println!(
                "audit: removed {} events, dropped {} traces",
                s.removed_events, s.dropped_traces
            );
        }
    }
    if !outcome.results.is_empty() {
        print!("{}", render_results_table(&outcome.results));
    }
    let last = outcome.completed.last().map_or("none", |s| s.as_str());
    println!("completed through '{last}'; artifacts in {}", out.display());
}

fn run_stage(until: Stage, args: &RunArgs) -> Result<(), Error> {
    let mut cfg = PipelineConfig::load(&args.config)?;
    apply_overrides(&mut cfg, args);
    let out = out_dir(&args.out);
    let outcome = pipeline::run(&cfg, &out, until)?;
    summarize(&out, &outcome);
    Ok(())
}

fn run_synth(args: &SynthArgs) -> Result<(), Error> {
    let mut cfg = match &args.config {
        Some(p) => SynthConfig::load(p)?,
        None => SynthConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(n) = &args.name {
        cfg.name = n.clone();
    }
    if let Some(n) = args.traces {
        cfg.n_traces = n;
    }
    if let Some(n) = args.unique_per_class {
        cfg.unique_per_class = n;
    }
    if let Some(kind) = args.leak {
        cfg.leak = Some(LeakSpec {
            activity: args.leak_activity.clone(),
            kind: match kind {
                LeakArg::ClassExclusive => LeakKind::ClassExclusive,
                LeakArg::PositionalEnd => LeakKind::PositionalEnd,
            },
        });
    }
    let log = synth::generate(&cfg)?;
    let out = out_dir(&args.out);
    std::fs::create_dir_all(&out).map_err(|e| Error::file(&out, e))?;
    let ndjson = out.join(format!("{}.ndjson", cfg.name));
    let csv = out.join(format!("{}.csv", cfg.name));
    log.save(&ndjson)?;
    synth::write_csv_events(&log, &csv)?;
    let settings = out.join(format!("{}.synth.json", cfg.name));
    std::fs::write(&settings, serde_json::to_string_pretty(&cfg)? + "\n")
        .map_err(|e| Error::file(&settings, e))?;
    println!(
        "wrote {} traces to {} and {}",
        log.len(),
        ndjson.display(),
        csv.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match stage_of(&cli.command) {
        Some((stage, args)) => run_stage(stage, args),
        None => match &cli.command {
            Command::Synth(args) => run_synth(args),
            _ => unreachable!(),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let usage = matches!(e, Error::Config(_)) || e.stage() == Some("config");
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}
