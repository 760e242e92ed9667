//! From covariance estimates to decisions: effective sample size, confidence
//! ellipsoids, the sequential stopping rule and coverage experiments.
//!
//! Flat top estimates may be indefinite. Anything here that needs a
//! determinant or an inverse first passes the estimate through
//! [`psd_project`] and reports whether that changed it.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::chains::{ar1_generate, var1_generate, Ar1Model, Var1Model};
use crate::error::{Error, Result};
use crate::estimators::{
    autocovariance, batch_size, doubling_b, BatchSchedule, ChainMatrix, CovEstimate, Estimator,
};
use crate::linalg::mirror_upper;
use crate::streaming::StreamState;
use crate::windows::LagWindow;

/// Relative floor used by [`psd_project`]: `eps = PSD_FLOOR * max(lambda_max, 1)`.
pub const PSD_FLOOR: f64 = 1e-10;

/// Result of [`psd_project`].
#[derive(Debug, Clone, PartialEq)]
pub struct Projected {
    pub matrix: DMatrix<f64>,
    /// True when any eigenvalue was raised to the floor.
    pub projected: bool,
    /// Smallest eigenvalue of the input.
    pub input_min_eigenvalue: f64,
}

/// Raises eigenvalues below `eps = 1e-10 * max(lambda_max, 1)` to `eps`.
///
/// Eigenvalues within relative `1e-4` of the floor count as already clamped,
/// which makes the projection idempotent despite reconstruction rounding.
pub fn psd_project(cov: &DMatrix<f64>) -> Projected {
    let eig = SymmetricEigen::new(cov.clone());
    let lmax = eig.eigenvalues.max();
    let lmin = eig.eigenvalues.min();
    let eps = PSD_FLOOR * lmax.max(1.0);
    if lmin >= eps * (1.0 - 1e-4) {
        return Projected { matrix: cov.clone(), projected: false, input_min_eigenvalue: lmin };
    }
    let clamped = eig.eigenvalues.map(|l| l.max(eps));
    let q = &eig.eigenvectors;
    let mut m = q * DMatrix::from_diagonal(&clamped) * q.transpose();
    // Average the two triangles, then mirror for exact symmetry.
    m = (&m + m.transpose()) * 0.5;
    mirror_upper(&mut m);
    Projected { matrix: m, projected: true, input_min_eigenvalue: lmin }
}

fn log_det_pd(m: &DMatrix<f64>) -> Result<f64> {
    match m.clone().cholesky() {
        Some(c) => Ok(2.0 * c.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()),
        None => Err(Error::NotPositiveDefinite {
            min_eigenvalue: SymmetricEigen::new(m.clone()).eigenvalues.min(),
        }),
    }
}

/// Sample covariance with denominator `n`.
pub fn sample_covariance(chain: &ChainMatrix) -> DMatrix<f64> {
    autocovariance(chain, 0).expect("lag 0 is always in range")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ess {
    pub ess: f64,
    pub psd_projected: bool,
}

/// `n (det Lambda / det Sigma)^{1/p}` with `Lambda` the sample covariance.
pub fn multivariate_ess(chain: &ChainMatrix, cov: &CovEstimate) -> Result<Ess> {
    multivariate_ess_from(&sample_covariance(chain), &cov.matrix, chain.n())
}

/// [`multivariate_ess`] from precomputed `Lambda` and `Sigma`.
pub fn multivariate_ess_from(lambda: &DMatrix<f64>, sigma: &DMatrix<f64>, n: usize) -> Result<Ess> {
    let p = sigma.nrows();
    if lambda.shape() != sigma.shape() {
        return Err(Error::DimensionMismatch { expected: p, found: lambda.nrows() });
    }
    if p > n {
        return Err(Error::Config(format!("effective sample size needs p <= n (p = {p}, n = {n})")));
    }
    let proj = psd_project(sigma);
    let ratio = (log_det_pd(lambda)? - log_det_pd(&proj.matrix)?) / p as f64;
    Ok(Ess { ess: n as f64 * ratio.exp(), psd_projected: proj.projected })
}

/// Upper `prob` quantile of the chi-square distribution with `df` degrees of
/// freedom, by bisection on the regularized lower incomplete gamma function.
pub fn chi2_quantile(df: u32, prob: f64) -> Result<f64> {
    if df == 0 {
        return Err(Error::Config("chi-square degrees of freedom must be >= 1".into()));
    }
    if !(prob > 0.0 && prob < 1.0) {
        return Err(Error::Config(format!("probability must be in (0, 1), got {prob}")));
    }
    let a = df as f64 / 2.0;
    let cdf = |x: f64| gamma_lr(a, x / 2.0);
    let mut lo = 0.0;
    let mut hi = df as f64;
    while cdf(hi) < prob {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < prob {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi.max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Confidence ellipsoid `{theta : n (c - theta)^T Sigma^{-1} (c - theta) <= chi2_{p, level}}`.
#[derive(Debug, Clone)]
pub struct RegionSpec {
    pub level: f64,
    pub center: Vec<f64>,
    /// Covariance after [`psd_project`].
    pub cov: DMatrix<f64>,
    pub n: usize,
    pub psd_projected: bool,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    critical: f64,
}

impl RegionSpec {
    pub fn new(level: f64, center: Vec<f64>, cov: &DMatrix<f64>, n: usize) -> Result<Self> {
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::Config(format!("level must be in (0, 1), got {level}")));
        }
        if center.len() != cov.nrows() || !cov.is_square() {
            return Err(Error::DimensionMismatch { expected: cov.nrows(), found: center.len() });
        }
        if n == 0 {
            return Err(Error::Config("region needs n >= 1".into()));
        }
        let proj = psd_project(cov);
        let chol = proj.matrix.clone().cholesky().ok_or(Error::NotPositiveDefinite {
            min_eigenvalue: proj.input_min_eigenvalue,
        })?;
        let critical = chi2_quantile(cov.nrows() as u32, level)?;
        Ok(RegionSpec {
            level,
            center,
            cov: proj.matrix,
            n,
            psd_projected: proj.projected,
            chol,
            critical,
        })
    }

    /// Region centred at the chain mean with the given estimate.
    pub fn from_chain(chain: &ChainMatrix, estimate: &CovEstimate, level: f64) -> Result<Self> {
        RegionSpec::new(level, chain.mean(), &estimate.matrix, chain.n())
    }

    pub fn p(&self) -> usize {
        self.center.len()
    }

    /// `chi2_{p, level}`.
    pub fn critical_value(&self) -> f64 {
        self.critical
    }

    /// `n (c - theta)^T Sigma^{-1} (c - theta)`.
    pub fn statistic(&self, theta: &[f64]) -> Result<f64> {
        if theta.len() != self.p() {
            return Err(Error::DimensionMismatch { expected: self.p(), found: theta.len() });
        }
        let d = DVector::from_iterator(self.p(), self.center.iter().zip(theta).map(|(c, t)| c - t));
        let y = self.chol.solve(&d);
        Ok(self.n as f64 * d.dot(&y))
    }
}

/// Volume of the ellipsoid:
/// `2 pi^{p/2} / (p Gamma(p/2)) * (chi2 / n)^{p/2} * det(Sigma)^{1/2}`.
pub fn region_volume(region: &RegionSpec) -> Result<f64> {
    let p = region.p() as f64;
    let log_det = 2.0 * region.chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let log_unit_ball = std::f64::consts::LN_2 + 0.5 * p * std::f64::consts::PI.ln()
        - p.ln()
        - ln_gamma(0.5 * p);
    let log_vol = log_unit_ball + 0.5 * p * (region.critical / region.n as f64).ln() + 0.5 * log_det;
    Ok(log_vol.exp())
}

/// Closed-region membership test.
pub fn region_contains(region: &RegionSpec, theta: &[f64]) -> Result<bool> {
    Ok(region.statistic(theta)? <= region.critical)
}

/// Which estimator the stopping rule evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopEstimator {
    Bm,
    WbmFlatTop,
}

/// Settings of [`sequential_stop`].
///
/// With a [`BatchSchedule::Doubling`] schedule the rule runs on a
/// [`StreamState`] and keeps only batch means; other schedules retain the
/// samples and recompute the estimate offline at each check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingConfig {
    pub ess_threshold: f64,
    pub min_n: usize,
    pub check_interval: usize,
    pub schedule: BatchSchedule,
    pub estimator: StopEstimator,
}

impl StoppingConfig {
    pub fn new(ess_threshold: f64, min_n: usize) -> Self {
        StoppingConfig {
            ess_threshold,
            min_n,
            check_interval: 100,
            schedule: BatchSchedule::Doubling(1.0 / 3.0),
            estimator: StopEstimator::WbmFlatTop,
        }
    }

    fn initial_b(&self) -> usize {
        match self.schedule {
            BatchSchedule::Doubling(nu) => doubling_b(self.min_n, nu),
            s => batch_size(self.min_n, &s),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if !(self.ess_threshold > 0.0) {
            return Err(Error::Config("ess threshold must be positive".into()));
        }
        if self.check_interval == 0 {
            return Err(Error::Config("check interval must be >= 1".into()));
        }
        if self.min_n < 4 * self.initial_b() {
            return Err(Error::Config(format!(
                "min_n = {} must be at least 4 times the initial batch size {}",
                self.min_n,
                self.initial_b()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StopResult {
    /// Sample count at which the threshold was first met, if it was.
    pub stopped_at: Option<usize>,
    /// `(n, ess)` at every check.
    pub ess_trace: Vec<(usize, f64)>,
    pub consumed: usize,
    pub psd_projected: bool,
}

/// Running mean and scatter for the sample covariance.
struct Welford {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
    delta: Vec<f64>,
}

impl Welford {
    fn new(p: usize) -> Self {
        Welford { n: 0, mean: vec![0.0; p], m2: vec![0.0; p * p], delta: vec![0.0; p] }
    }

    fn push(&mut self, x: &[f64]) {
        let p = x.len();
        self.n += 1;
        for j in 0..p {
            self.delta[j] = x[j] - self.mean[j];
            self.mean[j] += self.delta[j] / self.n as f64;
        }
        for i in 0..p {
            let di = self.delta[i];
            for j in i..p {
                self.m2[i * p + j] += di * (x[j] - self.mean[j]);
            }
        }
    }

    fn covariance(&self) -> DMatrix<f64> {
        let p = self.mean.len();
        crate::linalg::symmetric_from_upper(&self.m2, p, 1.0 / self.n as f64)
    }
}

/// Consumes `feed` until the multivariate ESS reaches the threshold.
///
/// Checks happen at `n = min_n, min_n + check_interval, ...`. If the feed
/// runs dry first, `stopped_at` is `None`.
pub fn sequential_stop<I>(feed: I, p: usize, config: &StoppingConfig) -> Result<StopResult>
where
    I: IntoIterator,
    I::Item: AsRef<[f64]>,
{
    config.validate()?;
    let mut welford = Welford::new(p);
    let mut stream = match config.schedule {
        BatchSchedule::Doubling(nu) => Some(StreamState::new(p, nu)?),
        _ => None,
    };
    let mut kept: Vec<f64> = Vec::new();
    let mut trace = Vec::new();
    let mut projected_any = false;
    let mut n = 0usize;
    for sample in feed {
        let x = sample.as_ref();
        match stream.as_mut() {
            Some(s) => s.push(x).map_err(|e| at(n + 1, e))?,
            None => {
                if x.len() != p {
                    return Err(at(n + 1, Error::DimensionMismatch { expected: p, found: x.len() }));
                }
                kept.extend_from_slice(x);
            }
        }
        welford.push(x);
        n += 1;
        if n < config.min_n || !(n - config.min_n).is_multiple_of(config.check_interval) {
            continue;
        }
        let estimate = match stream.as_ref() {
            Some(s) => match config.estimator {
                StopEstimator::Bm => s.estimate_bm(),
                StopEstimator::WbmFlatTop => s.estimate_flat_top(),
            },
            None => {
                let chain = ChainMatrix::new(kept.clone(), n, p).map_err(|e| at(n, e))?;
                let b = batch_size(n, &config.schedule);
                match config.estimator {
                    StopEstimator::Bm => Estimator::Bm,
                    StopEstimator::WbmFlatTop => Estimator::Wbm(LagWindow::BartlettFlatTop),
                }
                .estimate(&chain, b)
            }
        }
        .map_err(|e| at(n, e))?;
        let ess = multivariate_ess_from(&welford.covariance(), &estimate.matrix, n)
            .map_err(|e| at(n, e))?;
        projected_any |= ess.psd_projected;
        trace.push((n, ess.ess));
        if ess.ess >= config.ess_threshold {
            return Ok(StopResult {
                stopped_at: Some(n),
                ess_trace: trace,
                consumed: n,
                psd_projected: projected_any,
            });
        }
    }
    Ok(StopResult { stopped_at: None, ess_trace: trace, consumed: n, psd_projected: projected_any })
}

fn at(n: usize, e: Error) -> Error {
    Error::AtSample { n, source: Box::new(e) }
}

/// A reference chain with known mean zero.
#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceModel {
    Ar1 { phi: f64 },
    Var1 { phi: DMatrix<f64> },
}

impl ReferenceModel {
    pub fn p(&self) -> usize {
        match self {
            ReferenceModel::Ar1 { .. } => 1,
            ReferenceModel::Var1 { phi } => phi.nrows(),
        }
    }

    /// Chain of length `n` drawn with `seed`.
    pub fn generate(&self, n: usize, seed: u64) -> Result<ChainMatrix> {
        match self {
            ReferenceModel::Ar1 { phi } => ar1_generate(&Ar1Model::new(*phi, seed)?, n),
            ReferenceModel::Var1 { phi } => var1_generate(&Var1Model::new(phi.clone(), seed)?, n),
        }
    }

    /// Closed-form `Sigma`.
    pub fn true_sigma(&self) -> Result<DMatrix<f64>> {
        match self {
            ReferenceModel::Ar1 { phi } => {
                Ok(DMatrix::from_element(1, 1, crate::chains::ar1_true_sigma(*phi)?))
            }
            ReferenceModel::Var1 { phi } => crate::chains::var1_true_sigma(phi),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageResult {
    pub coverage: f64,
    /// `sqrt(c (1 - c) / reps)`.
    pub mc_se: f64,
    pub reps: usize,
    pub b: usize,
    /// Replications whose estimate had to be projected.
    pub psd_projected: usize,
}

/// Fraction of `reps` replications whose confidence region contains the true
/// mean zero. Replication `r` uses seed `seed + r`, so the result does not
/// depend on scheduling and is paired across estimators.
pub fn coverage_experiment(
    model: &ReferenceModel,
    n: usize,
    estimator: &Estimator,
    schedule: &BatchSchedule,
    level: f64,
    reps: usize,
    seed: u64,
) -> Result<CoverageResult> {
    Ok(coverage_experiment_levels(model, n, estimator, schedule, &[level], reps, seed)?.remove(0))
}

/// [`coverage_experiment`] at several levels over the same replications.
pub fn coverage_experiment_levels(
    model: &ReferenceModel,
    n: usize,
    estimator: &Estimator,
    schedule: &BatchSchedule,
    levels: &[f64],
    reps: usize,
    seed: u64,
) -> Result<Vec<CoverageResult>> {
    if reps < 10 {
        return Err(Error::Config(format!("coverage needs reps >= 10 (got {reps})")));
    }
    schedule.validate()?;
    let b = batch_size(n, schedule);
    let p = model.p();
    let zero = vec![0.0; p];
    let outcomes: Vec<(Vec<bool>, bool)> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let chain = model.generate(n, seed.wrapping_add(r as u64))?;
            let est = estimator.estimate(&chain, b)?;
            let mut hits = Vec::with_capacity(levels.len());
            let mut projected = false;
            for &level in levels {
                let region = RegionSpec::from_chain(&chain, &est, level)?;
                projected = region.psd_projected;
                hits.push(region_contains(&region, &zero)?);
            }
            Ok((hits, projected))
        })
        .collect::<Result<_>>()?;
    let projected = outcomes.iter().filter(|o| o.1).count();
    Ok((0..levels.len())
        .map(|i| {
            let c = outcomes.iter().filter(|o| o.0[i]).count() as f64 / reps as f64;
            CoverageResult {
                coverage: c,
                mc_se: (c * (1.0 - c) / reps as f64).sqrt(),
                reps,
                b,
                psd_projected: projected,
            }
        })
        .collect())
}
