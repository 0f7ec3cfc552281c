use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use dynmatroid::harness::{
    self, bench_csv, EstimatorKind, FamilySpec, GenParams, Pattern, RunConfig, TraceRecord,
};
use dynmatroid::value::parse_rational;

#[derive(Parser)]
#[command(
    name = "dynmatroid",
    version,
    about = "Dynamic matroid estimators: traces, replay, verification, benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a trace.
    Gen(GenArgs),
    /// Replay a trace through one estimator and write a report.
    Run(RunArgs),
    /// Replay a trace and check every prefix against exact values.
    Verify(RunArgs),
    /// Summarize per-update rank queries over several traces.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenArgs {
    /// uniform:R, partition:C0,C1,..., graphic:V or binary:D
    #[arg(long)]
    family: FamilySpec,
    /// mix, growth, window or oscillation
    #[arg(long, default_value = "mix")]
    mode: Pattern,
    #[arg(long, default_value_t = 100)]
    length: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Live-element cap for mix, window and oscillation.
    #[arg(long, default_value_t = 10)]
    window: usize,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    #[arg(long)]
    family: FamilySpec,
    #[arg(long, default_value = "0.25", value_parser = parse_eps)]
    eps: dynmatroid::Rational,
    #[arg(long, default_value_t = 3)]
    phi_max: u64,
    #[arg(long, default_value_t = 4)]
    beta_max: u64,
    #[arg(long, default_value_t = 16)]
    n_max: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    c: u32,
    /// Leading constant of the sampling probabilities.
    #[arg(long, default_value_t = 24.0)]
    sampling_constant: f64,
    /// minbase weights are drawn from 0..=max-weight.
    #[arg(long, default_value_t = 8)]
    max_weight: u64,
}

impl ConfigArgs {
    fn run_config(&self) -> RunConfig {
        RunConfig {
            eps: self.eps,
            phi_max: self.phi_max,
            beta_max: self.beta_max,
            n_max: self.n_max,
            seed: self.seed,
            c: self.c,
            sampling_constant: self.sampling_constant,
            max_weight: self.max_weight,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    trace: PathBuf,
    /// pack-wc, pack-amortized, cover-det, cover-sampled or minbase
    estimator: EstimatorKind,
    #[command(flatten)]
    config: ConfigArgs,
    /// CSV report path; the JSON lines twin goes next to it with a
    /// `.jsonl` extension. stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(required = true)]
    traces: Vec<PathBuf>,
    /// Comma-separated estimator names.
    #[arg(long, value_delimiter = ',', default_value = "minbase")]
    estimators: Vec<EstimatorKind>,
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_eps(s: &str) -> Result<dynmatroid::Rational, String> {
    parse_rational(s).map_err(|e| e.to_string())
}

fn read_trace(path: &Path) -> Result<Vec<TraceRecord>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(harness::read_trace(BufReader::new(f))?)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn gen(args: GenArgs) -> Result<ExitCode> {
    let params = GenParams {
        family: args.family,
        pattern: args.mode,
        length: args.length,
        seed: args.seed,
        window: args.window,
    };
    let trace = harness::generate(&params)?;
    emit(args.out.as_deref(), &harness::trace_to_string(&trace))?;
    Ok(ExitCode::SUCCESS)
}

fn run(args: RunArgs) -> Result<ExitCode> {
    let trace = read_trace(&args.trace)?;
    let report = harness::run(
        &trace,
        &args.config.family,
        args.estimator,
        &args.config.run_config(),
    )?;
    match &args.out {
        Some(p) => {
            emit(Some(p), &report.to_csv())?;
            emit(Some(&p.with_extension("jsonl")), &report.to_jsonl())?;
        }
        None => emit(None, &report.to_csv())?,
    }
    Ok(ExitCode::SUCCESS)
}

fn verify(args: RunArgs) -> Result<ExitCode> {
    let trace = read_trace(&args.trace)?;
    let report = harness::verify(
        &trace,
        &args.config.family,
        args.estimator,
        &args.config.run_config(),
    )?;
    let text = report.to_text();
    emit(args.out.as_deref(), &text)?;
    Ok(if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn bench(args: BenchArgs) -> Result<ExitCode> {
    let mut traces = Vec::new();
    for p in &args.traces {
        traces.push((p.display().to_string(), read_trace(p)?));
    }
    let rows = harness::bench(
        &traces,
        &args.config.family,
        &args.estimators,
        &args.config.run_config(),
    )?;
    emit(args.out.as_deref(), &bench_csv(&rows))?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Run(a) => run(a),
        Command::Verify(a) => verify(a),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
