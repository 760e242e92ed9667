//! Paired replication runs: every estimator sees the same chain in each
//! replication, which is what makes variance and MSE ratios meaningful at
//! modest replication counts.

use std::time::Duration;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::diagnostics::ReferenceModel;
use crate::error::{Error, Result};
use crate::estimators::{batch_size, mse, BatchSchedule, Estimator};

/// What one estimator produced in one replication.
#[derive(Debug, Clone)]
pub struct RepResult {
    pub matrix: DMatrix<f64>,
    pub wall_time: Duration,
    pub b_used: usize,
    pub min_eigenvalue: f64,
}

/// Results of [`run_paired`], indexed `[estimator][replication]`.
#[derive(Debug, Clone)]
pub struct PairedRun {
    pub estimators: Vec<Estimator>,
    pub truth: DMatrix<f64>,
    pub n: usize,
    pub b: usize,
    pub results: Vec<Vec<RepResult>>,
}

/// Experiment settings.
#[derive(Debug, Clone)]
pub struct PairedConfig {
    pub model: ReferenceModel,
    pub n: usize,
    pub schedule: BatchSchedule,
    pub reps: usize,
    pub seed: u64,
    /// Run replications on the rayon pool. Timings are then noisier.
    pub parallel: bool,
}

/// Generates `reps` chains (seed `seed + r`) and runs every estimator on each.
pub fn run_paired(config: &PairedConfig, estimators: &[Estimator]) -> Result<PairedRun> {
    if config.reps == 0 {
        return Err(Error::Config("reps must be >= 1".into()));
    }
    if estimators.is_empty() {
        return Err(Error::Config("no estimators given".into()));
    }
    config.schedule.validate()?;
    let b = batch_size(config.n, &config.schedule);
    let truth = config.model.true_sigma()?;
    let one = |r: usize| -> Result<Vec<RepResult>> {
        let chain = config.model.generate(config.n, config.seed.wrapping_add(r as u64))?;
        estimators
            .iter()
            .map(|e| {
                let est = e.estimate(&chain, b)?;
                Ok(RepResult {
                    matrix: est.matrix,
                    wall_time: est.wall_time,
                    b_used: est.b_used,
                    min_eigenvalue: est.min_eigenvalue,
                })
            })
            .collect()
    };
    let by_rep: Vec<Vec<RepResult>> = if config.parallel {
        (0..config.reps).into_par_iter().map(one).collect::<Result<_>>()?
    } else {
        (0..config.reps).map(one).collect::<Result<_>>()?
    };
    let mut results: Vec<Vec<RepResult>> = vec![Vec::with_capacity(config.reps); estimators.len()];
    for rep in by_rep {
        for (i, r) in rep.into_iter().enumerate() {
            results[i].push(r);
        }
    }
    Ok(PairedRun { estimators: estimators.to_vec(), truth, n: config.n, b, results })
}

/// Per-estimator summary.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub label: String,
    pub reps: usize,
    pub b_used: usize,
    pub mean_wall_time_s: f64,
    pub median_wall_time_s: f64,
    pub mc_se_time_s: f64,
    pub mean_mse: f64,
}

impl PairedRun {
    pub fn reps(&self) -> usize {
        self.results[0].len()
    }

    /// Entrywise mean of the estimates.
    pub fn mean_matrix(&self, i: usize) -> DMatrix<f64> {
        let rs = &self.results[i];
        let mut m = DMatrix::zeros(self.truth.nrows(), self.truth.ncols());
        for r in rs {
            m += &r.matrix;
        }
        m / rs.len() as f64
    }

    /// Entrywise sample variance (denominator `reps - 1`).
    pub fn variance_matrix(&self, i: usize) -> DMatrix<f64> {
        let rs = &self.results[i];
        let mean = self.mean_matrix(i);
        let mut v = DMatrix::zeros(mean.nrows(), mean.ncols());
        for r in rs {
            let d = &r.matrix - &mean;
            v += d.component_mul(&d);
        }
        v / (rs.len().max(2) - 1) as f64
    }

    /// Mean over diagonal entries of `Var[i] / Var[j]`.
    pub fn variance_ratio(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.variance_matrix(i), self.variance_matrix(j));
        let p = a.nrows();
        (0..p).map(|d| a[(d, d)] / b[(d, d)]).sum::<f64>() / p as f64
    }

    /// Mean over replications of the squared Frobenius error per entry.
    pub fn mean_mse(&self, i: usize) -> f64 {
        let rs = &self.results[i];
        rs.iter().map(|r| mse(&r.matrix, &self.truth).expect("shapes agree")).sum::<f64>()
            / rs.len() as f64
    }

    /// `mean_mse(i) / mean_mse(j)`.
    pub fn mse_ratio(&self, i: usize, j: usize) -> f64 {
        self.mean_mse(i) / self.mean_mse(j)
    }

    pub fn times(&self, i: usize) -> Vec<f64> {
        self.results[i].iter().map(|r| r.wall_time.as_secs_f64()).collect()
    }

    pub fn summary(&self, i: usize) -> Summary {
        let t = self.times(i);
        let mean = t.iter().sum::<f64>() / t.len() as f64;
        let var = if t.len() > 1 {
            t.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (t.len() - 1) as f64
        } else {
            0.0
        };
        Summary {
            label: self.estimators[i].to_string(),
            reps: t.len(),
            b_used: self.results[i][0].b_used,
            mean_wall_time_s: mean,
            median_wall_time_s: median(&t),
            mc_se_time_s: (var / t.len() as f64).sqrt(),
            mean_mse: self.mean_mse(i),
        }
    }
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.is_empty() {
        f64::NAN
    } else if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}
