//! `covkit bench`: timing, MSE and variance-ratio grids over reference chains.

use std::fmt::Write as _;

use covkit::experiment::{run_paired, PairedConfig, PairedRun};
use covkit::{BatchSchedule, Estimator, LagWindow, Method};
use serde::Serialize;

use crate::{CliError, CliResult, ModelKind, ModelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchMode {
    /// Wall time and MSE per estimator.
    Time,
    /// Adds the diagonal variance ratio against a baseline estimator.
    Variance,
}

impl std::str::FromStr for BenchMode {
    type Err = CliError;
    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "time" => Ok(BenchMode::Time),
            "variance" => Ok(BenchMode::Variance),
            _ => Err(CliError::Usage(format!("unknown bench mode '{s}' (expected time or variance)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub model: ModelSpec,
    /// Ignored for AR(1).
    pub p_grid: Vec<usize>,
    pub n_grid: Vec<usize>,
    pub estimators: Vec<Estimator>,
    pub schedule: BatchSchedule,
    pub reps: usize,
    pub seed: u64,
    pub mode: BenchMode,
    /// Denominator of `variance_ratio` in variance mode.
    pub baseline: Option<Estimator>,
    pub threads: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchCell {
    pub model: ModelKind,
    pub p: usize,
    pub n: usize,
    pub b: usize,
    pub estimator: String,
    pub method: Method,
    pub window: Option<LagWindow>,
    pub reps: usize,
    pub mean_wall_time_s: f64,
    pub median_wall_time_s: f64,
    pub mc_se_time_s: f64,
    pub mean_mse: f64,
    pub variance_ratio: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Fingerprint {
    pub cpu: String,
    pub logical_cpus: usize,
    pub threads: usize,
    /// Replications ran concurrently (timed kernels themselves never do).
    pub parallel_replications: bool,
    pub os: &'static str,
    pub arch: &'static str,
    pub version: &'static str,
}

impl Fingerprint {
    pub fn detect(threads: usize) -> Self {
        let cpu = std::fs::read_to_string("/proc/cpuinfo")
            .ok()
            .and_then(|s| {
                s.lines()
                    .find(|l| l.starts_with("model name"))
                    .and_then(|l| l.split_once(':'))
                    .map(|(_, v)| v.trim().to_string())
            })
            .unwrap_or_else(|| "unknown".into());
        Fingerprint {
            cpu,
            logical_cpus: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            threads,
            parallel_replications: threads > 1,
            os: std::env::consts::OS,
            arch: std::env::consts::ARCH,
            version: env!("CARGO_PKG_VERSION"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub mode: BenchMode,
    pub schedule: String,
    pub seed: u64,
    pub baseline: Option<String>,
    pub environment: Fingerprint,
    pub cells: Vec<BenchCell>,
}

pub const CSV_HEADER: &str = "model,p,n,b,estimator,method,window,reps,mean_wall_time_s,median_wall_time_s,mc_se_time_s,mean_mse,variance_ratio,error";

impl BenchReport {
    /// Tidy CSV, one row per cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        for c in &self.cells {
            let model = match c.model {
                ModelKind::Ar1 => "ar1",
                ModelKind::Var1 => "var1",
            };
            let _ = writeln!(
                out,
                "{model},{},{},{},{},{},{},{},{:e},{:e},{:e},{:e},{},{}",
                c.p,
                c.n,
                c.b,
                c.estimator,
                c.method,
                c.window.map(|w| w.to_string()).unwrap_or_default(),
                c.reps,
                c.mean_wall_time_s,
                c.median_wall_time_s,
                c.mc_se_time_s,
                c.mean_mse,
                opt(c.variance_ratio),
                c.error.as_deref().unwrap_or("").replace([',', '\n'], ";"),
            );
        }
        out
    }
}

fn validate(config: &BenchConfig) -> CliResult<()> {
    if config.reps < 3 {
        return Err(CliError::Usage(format!("bench needs reps >= 3 (got {})", config.reps)));
    }
    if config.n_grid.is_empty() || config.estimators.is_empty() {
        return Err(CliError::Usage("bench needs at least one n and one estimator".into()));
    }
    if config.model.kind == ModelKind::Var1 && config.p_grid.is_empty() {
        return Err(CliError::Usage("bench needs at least one p for var1".into()));
    }
    if config.mode == BenchMode::Variance && config.baseline.is_none() {
        return Err(CliError::Usage("variance mode needs --baseline".into()));
    }
    config.schedule.validate()?;
    Ok(())
}

/// Runs every `(p, n, estimator)` cell. Estimators in a `(p, n)` cell see the
/// same chains (seed `seed + r` in replication `r`). A failing cell records
/// its error and the grid continues.
pub fn run_bench(config: &BenchConfig) -> CliResult<BenchReport> {
    validate(config)?;
    let parallel = config.threads > 1;
    let p_grid = match config.model.kind {
        ModelKind::Ar1 => vec![1],
        ModelKind::Var1 => config.p_grid.clone(),
    };
    let mut cells = Vec::new();
    for &p in &p_grid {
        let spec = config.model.with_p(p);
        let model = match spec.to_model() {
            Ok(m) => m,
            Err(e) => {
                for &n in &config.n_grid {
                    for est in &config.estimators {
                        cells.push(failed_cell(config, &spec, n, est, &e));
                    }
                }
                continue;
            }
        };
        for &n in &config.n_grid {
            let run_one = |est: Estimator| -> CliResult<PairedRun> {
                let cfg = PairedConfig {
                    model: model.clone(),
                    n,
                    schedule: config.schedule,
                    reps: config.reps,
                    seed: config.seed,
                    parallel,
                };
                // Warm-up, discarded.
                let chain = model.generate(n, config.seed)?;
                est.estimate(&chain, covkit::estimators::batch_size(n, &config.schedule))?;
                Ok(run_paired(&cfg, &[est])?)
            };
            let baseline = match (config.mode, config.baseline) {
                (BenchMode::Variance, Some(b)) => Some(run_one(b)),
                _ => None,
            };
            for est in &config.estimators {
                match run_one(*est) {
                    Ok(run) => {
                        let s = run.summary(0);
                        let ratio = match &baseline {
                            Some(Ok(base)) => Some(ratio(&run, base)),
                            _ => None,
                        };
                        let error = match &baseline {
                            Some(Err(e)) => Some(format!("baseline failed: {e}")),
                            _ => None,
                        };
                        cells.push(BenchCell {
                            model: spec.kind,
                            p: spec.dimension(),
                            n,
                            b: s.b_used,
                            estimator: s.label,
                            method: est.method(),
                            window: est.window(),
                            reps: s.reps,
                            mean_wall_time_s: s.mean_wall_time_s,
                            median_wall_time_s: s.median_wall_time_s,
                            mc_se_time_s: s.mc_se_time_s,
                            mean_mse: s.mean_mse,
                            variance_ratio: ratio,
                            error,
                        });
                    }
                    Err(e) => cells.push(failed_cell(config, &spec, n, est, &e)),
                }
            }
        }
    }
    Ok(BenchReport {
        mode: config.mode,
        schedule: config.schedule.to_string(),
        seed: config.seed,
        baseline: config.baseline.map(|b| b.to_string()),
        environment: Fingerprint::detect(config.threads),
        cells,
    })
}

fn ratio(run: &PairedRun, base: &PairedRun) -> f64 {
    let (a, b) = (run.variance_matrix(0), base.variance_matrix(0));
    let p = a.nrows();
    (0..p).map(|d| a[(d, d)] / b[(d, d)]).sum::<f64>() / p as f64
}

fn failed_cell(config: &BenchConfig, spec: &ModelSpec, n: usize, est: &Estimator, e: &CliError) -> BenchCell {
    BenchCell {
        model: spec.kind,
        p: spec.dimension(),
        n,
        b: covkit::estimators::batch_size(n, &config.schedule),
        estimator: est.to_string(),
        method: est.method(),
        window: est.window(),
        reps: 0,
        mean_wall_time_s: f64::NAN,
        median_wall_time_s: f64::NAN,
        mc_se_time_s: f64::NAN,
        mean_mse: f64::NAN,
        variance_ratio: None,
        error: Some(e.to_string()),
    }
}
