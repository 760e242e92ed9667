//! Subcommand implementations behind the `covkit` binary.
//!
//! Every `run_*` function returns a serialisable report; `main.rs` only parses
//! flags, moves bytes and maps [`CliError`] to exit codes.

use std::fmt;
use std::str::FromStr;

use covkit::chains::make_phi;
use covkit::diagnostics::{
    coverage_experiment_levels, multivariate_ess, region_volume, sequential_stop, ReferenceModel,
    StopEstimator, StopResult,
};
use covkit::estimators::batch_size;
use covkit::windows::check_conditions;
use covkit::{
    BatchSchedule, ChainMatrix, ConditionReport, Error, Estimator, LagWindow, Method, RegionSpec,
    StoppingConfig,
};
use serde::Serialize;

pub mod bench;

pub use bench::{run_bench, BenchCell, BenchConfig, BenchMode, BenchReport, Fingerprint};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONDITION: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable input, invalid configuration.
    Usage(String),
    /// A computation failed for numerical reasons.
    Numeric(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Numeric(_) => EXIT_NUMERIC,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Numeric(_) => "numeric",
        }
    }

    /// The document written to stderr.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "error": {
                "kind": self.kind(),
                "message": self.to_string(),
                "exit_code": self.exit_code(),
            }
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Numeric(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_numeric() {
            CliError::Numeric(e)
        } else {
            CliError::Usage(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Thread count from `--threads`, else `COVKIT_THREADS`, else 1.
pub fn resolve_threads(flag: Option<usize>, env: Option<&str>) -> CliResult<usize> {
    let n = match (flag, env) {
        (Some(n), _) => n,
        (None, Some(s)) if !s.trim().is_empty() => s
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("COVKIT_THREADS must be a positive integer, got {s:?}")))?,
        _ => 1,
    };
    if n == 0 {
        return Err(CliError::Usage("thread count must be >= 1".into()));
    }
    Ok(n)
}

/// Installs the global rayon pool. Later calls are ignored by rayon, so this
/// is meant to run once at start-up.
pub fn install_threads(n: usize) {
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
}

pub fn parse_window(name: &str) -> CliResult<LagWindow> {
    Ok(name.parse::<LagWindow>()?)
}

/// Builds an estimator from `--method` and `--window`.
pub fn parse_estimator(method: &str, window: Option<&str>) -> CliResult<Estimator> {
    let method: Method = method.parse()?;
    let window = window.map(parse_window).transpose()?;
    Ok(Estimator::from_parts(method, window)?)
}

/// `method` or `method:window`, for example `bm`, `wbm:flat-top`, `sv:parzen:2`.
pub fn parse_estimator_label(label: &str) -> CliResult<Estimator> {
    match label.split_once(':') {
        Some((m, w)) => parse_estimator(m, Some(w)),
        None => parse_estimator(label, None),
    }
}

/// Reference chain selection shared by `simulate`, `stop`, `coverage` and `bench`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// AR(1) coefficient.
    pub phi: f64,
    /// Random-coefficient VAR(1) settings.
    pub p: usize,
    pub scale: f64,
    pub offset: f64,
    pub phi_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ar1,
    Var1,
}

impl FromStr for ModelKind {
    type Err = CliError;
    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "ar1" => Ok(ModelKind::Ar1),
            "var1" => Ok(ModelKind::Var1),
            _ => Err(CliError::Usage(format!("unknown model '{s}' (expected ar1 or var1)"))),
        }
    }
}

impl ModelSpec {
    pub fn to_model(&self) -> CliResult<ReferenceModel> {
        Ok(match self.kind {
            ModelKind::Ar1 => {
                covkit::Ar1Model::new(self.phi, 0)?;
                ReferenceModel::Ar1 { phi: self.phi }
            }
            ModelKind::Var1 => ReferenceModel::Var1 {
                phi: make_phi(self.p, self.phi_seed, self.offset, self.scale)?,
            },
        })
    }

    pub fn with_p(&self, p: usize) -> ModelSpec {
        ModelSpec { p, ..*self }
    }

    pub fn dimension(&self) -> usize {
        match self.kind {
            ModelKind::Ar1 => 1,
            ModelKind::Var1 => self.p,
        }
    }
}

fn rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub method: Method,
    pub window: Option<LagWindow>,
    pub b_used: usize,
    pub n_used: usize,
    pub n: usize,
    pub p: usize,
    /// Row-major: `matrix[i][j]`.
    pub matrix: Vec<Vec<f64>>,
    pub min_eigenvalue: f64,
    pub wall_time_ms: f64,
}

pub fn run_estimate(chain: &ChainMatrix, estimator: &Estimator, schedule: &BatchSchedule) -> CliResult<EstimateReport> {
    schedule.validate()?;
    let b = batch_size(chain.n(), schedule);
    let est = estimator.estimate(chain, b)?;
    Ok(EstimateReport {
        method: est.method,
        window: est.window,
        b_used: est.b_used,
        n_used: est.n_used,
        n: chain.n(),
        p: chain.p(),
        matrix: rows(&est.matrix),
        min_eigenvalue: est.min_eigenvalue,
        wall_time_ms: est.wall_time.as_secs_f64() * 1e3,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckWindowReport {
    pub window: LagWindow,
    pub tol: f64,
    pub cond1_all: bool,
    pub passes_all: bool,
    pub reports: Vec<ConditionReport>,
}

impl CheckWindowReport {
    /// 0 when every grid point passes, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.passes_all {
            EXIT_OK
        } else {
            EXIT_CONDITION
        }
    }
}

/// Powers of two from 4 to 4096.
pub fn default_b_grid() -> Vec<usize> {
    (2..=12).map(|j| 1usize << j).collect()
}

pub fn run_check_window(window: &str, grid: &[usize], tol: f64) -> CliResult<CheckWindowReport> {
    let window = parse_window(window)?;
    if grid.is_empty() {
        return Err(CliError::Usage("empty b grid".into()));
    }
    let reports = grid
        .iter()
        .map(|&b| check_conditions(&window, b, tol))
        .collect::<covkit::Result<Vec<_>>>()?;
    Ok(CheckWindowReport {
        window,
        tol,
        cond1_all: reports.iter().all(|r| r.cond1_holds),
        passes_all: reports.iter().all(|r| r.passes),
        reports,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EssReport {
    pub method: Method,
    pub window: Option<LagWindow>,
    pub b: usize,
    pub n: usize,
    pub p: usize,
    pub ess: f64,
    pub ess_per_sample: f64,
    pub level: f64,
    pub volume: f64,
    pub psd_projected: bool,
}

pub fn run_ess(chain: &ChainMatrix, estimator: &Estimator, schedule: &BatchSchedule, level: f64) -> CliResult<EssReport> {
    schedule.validate()?;
    let b = batch_size(chain.n(), schedule);
    let est = estimator.estimate(chain, b)?;
    let ess = multivariate_ess(chain, &est)?;
    let region = RegionSpec::from_chain(chain, &est, level)?;
    Ok(EssReport {
        method: est.method,
        window: est.window,
        b: est.b_used,
        n: chain.n(),
        p: chain.p(),
        ess: ess.ess,
        ess_per_sample: ess.ess / chain.n() as f64,
        level,
        volume: region_volume(&region)?,
        psd_projected: ess.psd_projected || region.psd_projected,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StopReport {
    pub estimator: StopEstimator,
    pub schedule: String,
    pub ess_threshold: f64,
    pub min_n: usize,
    pub check_interval: usize,
    pub stopped: bool,
    pub stopped_at: Option<usize>,
    pub consumed: usize,
    pub checks: usize,
    pub final_ess: Option<f64>,
    pub psd_projected: bool,
    pub trace: Option<Vec<(usize, f64)>>,
}

pub fn stop_report(config: &StoppingConfig, result: StopResult, keep_trace: bool) -> StopReport {
    StopReport {
        estimator: config.estimator,
        schedule: config.schedule.to_string(),
        ess_threshold: config.ess_threshold,
        min_n: config.min_n,
        check_interval: config.check_interval,
        stopped: result.stopped_at.is_some(),
        stopped_at: result.stopped_at,
        consumed: result.consumed,
        checks: result.ess_trace.len(),
        final_ess: result.ess_trace.last().map(|t| t.1),
        psd_projected: result.psd_projected,
        trace: keep_trace.then_some(result.ess_trace),
    }
}

/// Runs the stopping rule over the rows of an in-memory chain.
pub fn run_stop_chain(chain: &ChainMatrix, config: &StoppingConfig, keep_trace: bool) -> CliResult<StopReport> {
    let r = sequential_stop(chain.rows(), chain.p(), config)?;
    Ok(stop_report(config, r, keep_trace))
}

/// Runs the stopping rule on a freshly simulated reference chain, drawing at
/// most `max_n` samples.
pub fn run_stop_model(
    model: &ModelSpec,
    seed: u64,
    max_n: usize,
    config: &StoppingConfig,
    keep_trace: bool,
) -> CliResult<StopReport> {
    let r = match model.to_model()? {
        ReferenceModel::Ar1 { phi } => {
            let feed = covkit::Ar1Model::new(phi, seed)?.sampler()?.map(|x| [x]);
            sequential_stop(feed.take(max_n), 1, config)?
        }
        ReferenceModel::Var1 { phi } => {
            let p = phi.nrows();
            let feed = covkit::Var1Model::new(phi, seed)?.sampler()?;
            sequential_stop(feed.take(max_n), p, config)?
        }
    };
    Ok(stop_report(config, r, keep_trace))
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverageLevel {
    pub level: f64,
    pub coverage: f64,
    pub mc_se: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverageReport {
    pub model: ModelKind,
    pub p: usize,
    pub n: usize,
    pub method: Method,
    pub window: Option<LagWindow>,
    pub b: usize,
    pub reps: usize,
    pub seed: u64,
    pub psd_projected: usize,
    pub results: Vec<CoverageLevel>,
}

pub fn run_coverage(
    model: &ModelSpec,
    n: usize,
    estimator: &Estimator,
    schedule: &BatchSchedule,
    levels: &[f64],
    reps: usize,
    seed: u64,
) -> CliResult<CoverageReport> {
    if levels.is_empty() {
        return Err(CliError::Usage("no coverage levels given".into()));
    }
    let reference = model.to_model()?;
    let res = coverage_experiment_levels(&reference, n, estimator, schedule, levels, reps, seed)?;
    Ok(CoverageReport {
        model: model.kind,
        p: model.dimension(),
        n,
        method: estimator.method(),
        window: estimator.window(),
        b: res[0].b,
        reps,
        seed,
        psd_projected: res[0].psd_projected,
        results: levels
            .iter()
            .zip(&res)
            .map(|(&level, r)| CoverageLevel { level, coverage: r.coverage, mc_se: r.mc_se })
            .collect(),
    })
}
