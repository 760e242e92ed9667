use std::fs;
use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use covkit::chainio::{read_chain, write_chain, Format};
use covkit::diagnostics::StopEstimator;
use covkit::windows::DEFAULT_CONDITION_TOL;
use covkit::{BatchSchedule, ChainMatrix, Estimator, StoppingConfig};
use covkit_cli::*;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "covkit", version, about = "Asymptotic covariance estimation for MCMC output")]
struct Cli {
    /// Worker threads for replication-level parallelism (falls back to COVKIT_THREADS, then 1).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the asymptotic covariance matrix of a chain file.
    Estimate(EstimateArgs),
    /// Simulate an AR(1) or VAR(1) reference chain.
    Simulate(SimulateArgs),
    /// Time estimators and compare them against the true covariance.
    Bench(BenchArgs),
    /// Check the consistency conditions of a lag window over a grid of b.
    CheckWindow(CheckWindowArgs),
    /// Multivariate effective sample size and confidence-region volume.
    Ess(EssArgs),
    /// Run the ESS-based sequential stopping rule.
    Stop(StopArgs),
    /// Coverage probability of confidence regions on a reference chain.
    Coverage(CoverageArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Chain file, or '-' for stdin.
    #[arg(long, short)]
    input: String,
    /// csv or bin.
    #[arg(long, default_value = "csv")]
    format: String,
}

#[derive(Args)]
struct EstimatorArgs {
    /// bm, obm, sv or wbm.
    #[arg(long, default_value = "wbm")]
    method: String,
    /// Lag window for sv and wbm (bartlett, tukey-hanning, flat-top, truncation, parzen:<q>, scaled-bartlett:<eta>).
    #[arg(long)]
    window: Option<String>,
    /// pow:<nu>, doubling:<nu> or fixed:<b>.
    #[arg(long, default_value = "pow:0.3333333333333333")]
    schedule: String,
}

#[derive(Args)]
struct ModelArgs {
    /// ar1 or var1.
    #[arg(long, default_value = "ar1")]
    model: String,
    /// AR(1) coefficient.
    #[arg(long, default_value_t = 0.5)]
    phi: f64,
    /// VAR(1) dimension.
    #[arg(long, short, default_value_t = 5)]
    p: usize,
    /// VAR(1) coefficient scale in (0, 1].
    #[arg(long, default_value_t = 0.9)]
    scale: f64,
    /// VAR(1) eigenvalue offset.
    #[arg(long, default_value_t = 1.0)]
    offset: f64,
    /// Seed for the random VAR(1) coefficient matrix.
    #[arg(long, default_value_t = 1)]
    phi_seed: u64,
}

#[derive(Args)]
struct OutArgs {
    /// Output path (stdout when omitted).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    est: EstimatorArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, short, default_value_t = 10_000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// csv or bin.
    #[arg(long, default_value = "csv")]
    format: String,
    /// Write a y1,...,yp header row (csv only).
    #[arg(long)]
    header: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Comma-separated dimensions (var1 only).
    #[arg(long, value_delimiter = ',', default_value = "10")]
    p_grid: Vec<usize>,
    /// Comma-separated chain lengths.
    #[arg(long, value_delimiter = ',', default_value = "100000")]
    n_grid: Vec<usize>,
    /// Comma-separated estimators: bm, obm, sv:<window>, wbm:<window>.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "bm,obm,sv:bartlett,wbm:bartlett,sv:flat-top,wbm:flat-top,sv:tukey-hanning,wbm:tukey-hanning"
    )]
    methods: Vec<String>,
    #[arg(long, default_value = "pow:0.3333333333333333")]
    schedule: String,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// time or variance.
    #[arg(long, default_value = "time")]
    mode: String,
    /// Baseline estimator for variance ratios.
    #[arg(long)]
    baseline: Option<String>,
    /// Also write the cells as tidy CSV to this path.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct CheckWindowArgs {
    #[arg(long)]
    window: String,
    /// Comma-separated truncation points (default: powers of two 4..=4096).
    #[arg(long, value_delimiter = ',')]
    b: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_CONDITION_TOL)]
    tol: f64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct EssArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    est: EstimatorArgs,
    /// Confidence level for the region volume.
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct StopArgs {
    /// Chain file to consume; when omitted a reference chain is simulated.
    #[arg(long, short)]
    input: Option<String>,
    #[arg(long, default_value = "csv")]
    format: String,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Maximum samples to simulate.
    #[arg(long, default_value_t = 10_000_000)]
    max_n: usize,
    #[arg(long)]
    threshold: f64,
    #[arg(long, default_value_t = 1000)]
    min_n: usize,
    #[arg(long, default_value_t = 100)]
    check_interval: usize,
    /// bm or wbm (flat top).
    #[arg(long, default_value = "wbm")]
    method: String,
    #[arg(long, default_value = "doubling:0.3333333333333333")]
    schedule: String,
    /// Include the (n, ess) trace in the output.
    #[arg(long)]
    trace: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct CoverageArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, short, default_value_t = 10_000)]
    n: usize,
    #[command(flatten)]
    est: EstimatorArgs,
    /// Comma-separated confidence levels.
    #[arg(long, value_delimiter = ',', default_value = "0.9")]
    level: Vec<f64>,
    #[arg(long, default_value_t = 500)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutArgs,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn format_of(s: &str) -> CliResult<Format> {
    Ok(s.parse::<Format>()?)
}

fn load(input: &str, format: &str) -> CliResult<ChainMatrix> {
    let format = format_of(format)?;
    let chain = if input == "-" {
        let mut buf = Vec::new();
        io::stdin().read_to_end(&mut buf)?;
        read_chain(buf.as_slice(), format)
    } else {
        covkit::chainio::load_chain(input, format)
    };
    chain.map_err(|e| usage(format!("{input}: {e}")))
}

fn schedule_of(s: &str) -> CliResult<BatchSchedule> {
    Ok(s.parse::<BatchSchedule>()?)
}

fn estimator_of(a: &EstimatorArgs) -> CliResult<Estimator> {
    // wbm defaults to the flat top window.
    let window = match (a.method.as_str(), a.window.as_deref()) {
        ("wbm", None) => Some("flat-top"),
        (_, w) => w,
    };
    parse_estimator(&a.method, window)
}

fn model_of(m: &ModelArgs) -> CliResult<ModelSpec> {
    Ok(ModelSpec {
        kind: m.model.parse()?,
        phi: m.phi,
        p: m.p,
        scale: m.scale,
        offset: m.offset,
        phi_seed: m.phi_seed,
    })
}

fn write_bytes(out: &OutArgs, bytes: &[u8]) -> CliResult<()> {
    match &out.out {
        Some(path) => fs::write(path, bytes).map_err(|e| usage(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn emit<T: Serialize>(out: &OutArgs, value: &T) -> CliResult<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| usage(e.to_string()))?;
    s.push('\n');
    write_bytes(out, s.as_bytes())
}

fn run(cli: Cli) -> CliResult<i32> {
    let threads = resolve_threads(cli.threads, std::env::var("COVKIT_THREADS").ok().as_deref())?;
    install_threads(threads);
    match cli.command {
        Command::Estimate(a) => {
            let estimator = estimator_of(&a.est)?;
            let schedule = schedule_of(&a.est.schedule)?;
            let chain = load(&a.input.input, &a.input.format)?;
            emit(&a.out, &run_estimate(&chain, &estimator, &schedule)?)?;
        }
        Command::Simulate(a) => {
            let format = format_of(&a.format)?;
            if a.n < 2 {
                return Err(usage("n must be >= 2"));
            }
            let chain = model_of(&a.model)?.to_model()?.generate(a.n, a.seed)?;
            let mut buf = Vec::new();
            write_chain(&mut buf, &chain, format, a.header)?;
            write_bytes(&a.out, &buf)?;
        }
        Command::Bench(a) => {
            let estimators = a.methods.iter().map(|m| parse_estimator_label(m)).collect::<CliResult<Vec<_>>>()?;
            let config = BenchConfig {
                model: model_of(&a.model)?,
                p_grid: a.p_grid,
                n_grid: a.n_grid,
                estimators,
                schedule: schedule_of(&a.schedule)?,
                reps: a.reps,
                seed: a.seed,
                mode: a.mode.parse()?,
                baseline: a.baseline.as_deref().map(parse_estimator_label).transpose()?,
                threads,
            };
            let report = run_bench(&config)?;
            if let Some(path) = &a.csv {
                fs::write(path, report.to_csv()).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            }
            emit(&a.out, &report)?;
        }
        Command::CheckWindow(a) => {
            let grid = if a.b.is_empty() { default_b_grid() } else { a.b };
            let report = run_check_window(&a.window, &grid, a.tol)?;
            emit(&a.out, &report)?;
            return Ok(report.exit_code());
        }
        Command::Ess(a) => {
            let estimator = estimator_of(&a.est)?;
            let schedule = schedule_of(&a.est.schedule)?;
            let chain = load(&a.input.input, &a.input.format)?;
            emit(&a.out, &run_ess(&chain, &estimator, &schedule, a.level)?)?;
        }
        Command::Stop(a) => {
            let estimator = match a.method.as_str() {
                "bm" => StopEstimator::Bm,
                "wbm" => StopEstimator::WbmFlatTop,
                m => return Err(usage(format!("stop supports --method bm or wbm, got '{m}'"))),
            };
            let config = StoppingConfig {
                ess_threshold: a.threshold,
                min_n: a.min_n,
                check_interval: a.check_interval,
                schedule: schedule_of(&a.schedule)?,
                estimator,
            };
            config.validate()?;
            let report = match &a.input {
                Some(path) => run_stop_chain(&load(path, &a.format)?, &config, a.trace)?,
                None => run_stop_model(&model_of(&a.model)?, a.seed, a.max_n, &config, a.trace)?,
            };
            emit(&a.out, &report)?;
        }
        Command::Coverage(a) => {
            let report = run_coverage(
                &model_of(&a.model)?,
                a.n,
                &estimator_of(&a.est)?,
                &schedule_of(&a.est.schedule)?,
                &a.level,
                a.reps,
                a.seed,
            )?;
            emit(&a.out, &report)?;
        }
    }
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
