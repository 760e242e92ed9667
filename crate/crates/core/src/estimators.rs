//! Estimators of the asymptotic covariance matrix `Sigma`.
//!
//! Every estimator takes an `n x p` [`ChainMatrix`] and a batch size or
//! truncation point `b` with `2 <= b <= n/2`.
//!
//! - [`bm`]: non-overlapping batch means.
//! - [`obm`]: overlapping batch means.
//! - [`sv`]: spectral variance, `Gamma(0) + sum_k w(k) [Gamma(k) + Gamma(k)^T]`.
//! - [`wbm`]: weighted batch means,
//!   `sum_k k^2 delta2(k) / (a_k - 1) sum_l (Ybar_l(k) - Ybar)(Ybar_l(k) - Ybar)^T`.
//! - [`wbm_flat_top_fast`] and [`sv_flat_top_fast`]: the flat top windows written
//!   as `2 X(b) - X(b/2)` of two Bartlett-type estimators.
//!
//! When `n` is not a multiple of a batch size the earliest rows are dropped so
//! the most recent draws are kept. The batch means estimators centre on the
//! mean of the rows they keep; the spectral and overlapping estimators use all
//! rows and the full-chain mean.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{add_outer_upper, min_eigenvalue, mirror_upper, symmetric_from_upper};
use crate::windows::{second_differences, weights, LagWindow};

/// `|delta2(k)|` below this is treated as zero by [`wbm`].
pub const DELTA2_SKIP: f64 = 1e-15;

/// Output of a chain, one row per iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainMatrix {
    data: Vec<f64>,
    n: usize,
    p: usize,
}

impl ChainMatrix {
    /// Wraps row-major `data` of `n` rows and `p` columns.
    pub fn new(data: Vec<f64>, n: usize, p: usize) -> Result<Self> {
        if n < 2 || p < 1 {
            return Err(Error::ChainShape { n, p });
        }
        if data.len() != n * p {
            return Err(Error::DimensionMismatch { expected: n * p, found: data.len() });
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { row: i / p, col: i % p });
        }
        Ok(ChainMatrix { data, n, p })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let p = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * p);
        for r in rows {
            let r = r.as_ref();
            if r.len() != p {
                return Err(Error::DimensionMismatch { expected: p, found: r.len() });
            }
            data.extend_from_slice(r);
        }
        ChainMatrix::new(data, rows.len(), p)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.p..(t + 1) * self.p]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.p)
    }

    /// Row-major backing storage.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// Column means over all rows.
    pub fn mean(&self) -> Vec<f64> {
        mean_rows(&self.data, self.p)
    }

    /// The last `m` rows.
    pub fn tail(&self, m: usize) -> Result<ChainMatrix> {
        let m = m.min(self.n);
        ChainMatrix::new(self.data[(self.n - m) * self.p..].to_vec(), m, self.p)
    }

    /// The first `m` rows.
    pub fn head(&self, m: usize) -> Result<ChainMatrix> {
        let m = m.min(self.n);
        ChainMatrix::new(self.data[..m * self.p].to_vec(), m, self.p)
    }

    /// Rows mapped by `y -> A y + c`, where `A` is `q x p`.
    pub fn affine(&self, a: &DMatrix<f64>, c: &[f64]) -> Result<ChainMatrix> {
        if a.ncols() != self.p {
            return Err(Error::DimensionMismatch { expected: self.p, found: a.ncols() });
        }
        if c.len() != a.nrows() {
            return Err(Error::DimensionMismatch { expected: a.nrows(), found: c.len() });
        }
        let q = a.nrows();
        let mut out = Vec::with_capacity(self.n * q);
        for r in self.rows() {
            for i in 0..q {
                let mut s = c[i];
                for j in 0..self.p {
                    s += a[(i, j)] * r[j];
                }
                out.push(s);
            }
        }
        ChainMatrix::new(out, self.n, q)
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.p, &self.data)
    }

    fn centered(&self, center: &[f64]) -> Vec<f64> {
        let mut c = self.data.clone();
        for r in c.chunks_exact_mut(self.p) {
            for (x, m) in r.iter_mut().zip(center) {
                *x -= m;
            }
        }
        c
    }
}

fn mean_rows(data: &[f64], p: usize) -> Vec<f64> {
    let mut m = vec![0.0; p];
    let mut rows = 0usize;
    for r in data.chunks_exact(p) {
        for (a, x) in m.iter_mut().zip(r) {
            *a += x;
        }
        rows += 1;
    }
    for a in &mut m {
        *a /= rows as f64;
    }
    m
}

/// Estimator family of a [`CovEstimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Bm,
    Obm,
    Sv,
    Wbm,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Bm => "bm",
            Method::Obm => "obm",
            Method::Sv => "sv",
            Method::Wbm => "wbm",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bm" => Ok(Method::Bm),
            "obm" => Ok(Method::Obm),
            "sv" => Ok(Method::Sv),
            "wbm" => Ok(Method::Wbm),
            _ => Err(Error::Config(format!(
                "unknown method {s:?}; valid methods: bm, obm, sv, wbm"
            ))),
        }
    }
}

/// An estimate of `Sigma` with the rows and batch size it used.
#[derive(Debug, Clone)]
pub struct CovEstimate {
    /// Symmetric `p x p` estimate; `matrix == matrix^T` holds exactly.
    pub matrix: DMatrix<f64>,
    pub method: Method,
    pub window: Option<LagWindow>,
    pub b_used: usize,
    /// Number of chain rows that entered the estimate.
    pub n_used: usize,
    /// Flat top estimates can be indefinite; nothing is projected here.
    pub min_eigenvalue: f64,
    /// Time spent in the numeric kernel.
    pub wall_time: Duration,
}

impl CovEstimate {
    pub(crate) fn finish(
        mut matrix: DMatrix<f64>,
        method: Method,
        window: Option<LagWindow>,
        b_used: usize,
        n_used: usize,
        started: Instant,
    ) -> Self {
        let wall_time = started.elapsed();
        mirror_upper(&mut matrix);
        let min_eigenvalue = min_eigenvalue(&matrix);
        CovEstimate { matrix, method, window, b_used, n_used, min_eigenvalue, wall_time }
    }

    pub fn p(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Policy mapping a chain length to a batch size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BatchSchedule {
    /// `floor(n^nu)`.
    PowerRule(f64),
    /// Smallest power of two `>= n^nu`.
    Doubling(f64),
    Fixed(usize),
}

impl Default for BatchSchedule {
    fn default() -> Self {
        BatchSchedule::PowerRule(1.0 / 3.0)
    }
}

impl BatchSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BatchSchedule::PowerRule(nu) | BatchSchedule::Doubling(nu) => {
                if nu > 0.0 && nu < 1.0 {
                    Ok(())
                } else {
                    Err(Error::Config(format!("schedule exponent nu must be in (0, 1), got {nu}")))
                }
            }
            BatchSchedule::Fixed(0) => {
                Err(Error::Config("fixed batch size must be positive".into()))
            }
            BatchSchedule::Fixed(_) => Ok(()),
        }
    }
}

/// `n^nu`, snapped to the nearest integer when within relative `1e-9` of it,
/// so exact powers such as `1000^(1/3)` are not lost to rounding.
pub(crate) fn power_snapped(n: usize, nu: f64) -> f64 {
    let x = (n as f64).powf(nu);
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.max(1.0) {
        r
    } else {
        x
    }
}

/// Smallest `2^k >= n^nu` with `k >= 1`.
pub(crate) fn doubling_b(n: usize, nu: f64) -> usize {
    let target = power_snapped(n.max(1), nu);
    let mut b = 2usize;
    while (b as f64) < target {
        b *= 2;
    }
    b
}

/// Batch size for a chain of length `n`, clamped to `[2, n/2]`.
pub fn batch_size(n: usize, schedule: &BatchSchedule) -> usize {
    let raw = match *schedule {
        BatchSchedule::PowerRule(nu) => power_snapped(n, nu).floor() as usize,
        BatchSchedule::Doubling(nu) => doubling_b(n, nu),
        BatchSchedule::Fixed(b) => b,
    };
    raw.clamp(2, (n / 2).max(2))
}

fn check_range(b: usize, n: usize, min: usize) -> Result<()> {
    if b < min || b > n / 2 {
        return Err(Error::BatchSize { b, n, min });
    }
    Ok(())
}

/// Lag-`k` sample autocovariance `(1/n) sum_t (Y_t - Ybar)(Y_{t+k} - Ybar)^T`.
pub fn autocovariance(chain: &ChainMatrix, k: usize) -> Result<DMatrix<f64>> {
    let (n, p) = (chain.n, chain.p);
    if k >= n {
        return Err(Error::LagOutOfRange { k, n });
    }
    let c = chain.centered(&chain.mean());
    let mut g = DMatrix::zeros(p, p);
    for t in 0..n - k {
        let (x, y) = (&c[t * p..(t + 1) * p], &c[(t + k) * p..(t + k + 1) * p]);
        for i in 0..p {
            for j in 0..p {
                g[(i, j)] += x[i] * y[j];
            }
        }
    }
    Ok(g / n as f64)
}

/// Means of `count` consecutive batches of `size` rows starting at row `start`.
fn batch_means(chain: &ChainMatrix, size: usize, start: usize, count: usize) -> Vec<f64> {
    let p = chain.p;
    let mut means = vec![0.0; count * p];
    for (l, m) in means.chunks_exact_mut(p).enumerate() {
        let lo = (start + l * size) * p;
        for r in chain.data[lo..lo + size * p].chunks_exact(p) {
            for (a, x) in m.iter_mut().zip(r) {
                *a += x;
            }
        }
        for a in m.iter_mut() {
            *a /= size as f64;
        }
    }
    means
}

/// Upper triangle of `sum_l (m_l - center)(m_l - center)^T`, row-major.
fn scatter_upper(means: &[f64], p: usize, center: &[f64]) -> Vec<f64> {
    let mut acc = vec![0.0; p * p];
    let mut d = vec![0.0; p];
    for m in means.chunks_exact(p) {
        for ((di, mi), ci) in d.iter_mut().zip(m).zip(center) {
            *di = mi - ci;
        }
        add_outer_upper(&mut acc, &d);
    }
    acc
}

/// `b / (a - 1) sum_l (m_l - mbar)(m_l - mbar)^T` over `a` batch means of
/// batch size `b`, centred on their own average.
pub(crate) fn bm_from_means(means: &[f64], p: usize, b: usize) -> Result<DMatrix<f64>> {
    let a = means.len() / p;
    if a < 2 {
        return Err(Error::InsufficientBatches { needed: 2, have: a });
    }
    let center = mean_rows(means, p);
    let acc = scatter_upper(means, p, &center);
    Ok(symmetric_from_upper(&acc, p, b as f64 / (a - 1) as f64))
}

/// Non-overlapping batch means with batch size `b`.
pub fn bm(chain: &ChainMatrix, b: usize) -> Result<CovEstimate> {
    check_range(b, chain.n, 2)?;
    let started = Instant::now();
    let a = chain.n / b;
    let means = batch_means(chain, b, chain.n - a * b, a);
    let m = bm_from_means(&means, chain.p, b)?;
    Ok(CovEstimate::finish(m, Method::Bm, None, b, a * b, started))
}

/// Overlapping batch means over all `n - b + 1` windows of length `b`.
pub fn obm(chain: &ChainMatrix, b: usize) -> Result<CovEstimate> {
    let (n, p) = (chain.n, chain.p);
    check_range(b, n, 2)?;
    let started = Instant::now();
    let c = chain.centered(&chain.mean());
    // Sliding window sum of the centred rows.
    let mut s = vec![0.0; p];
    for r in c[..b * p].chunks_exact(p) {
        for (a, x) in s.iter_mut().zip(r) {
            *a += x;
        }
    }
    let mut acc = vec![0.0; p * p];
    let mut d = vec![0.0; p];
    let inv_b = 1.0 / b as f64;
    for l in 0..=n - b {
        if l > 0 {
            let (out, inn) = (&c[(l - 1) * p..l * p], &c[(l + b - 1) * p..(l + b) * p]);
            for ((a, o), i) in s.iter_mut().zip(out).zip(inn) {
                *a += i - o;
            }
        }
        for (di, si) in d.iter_mut().zip(&s) {
            *di = si * inv_b;
        }
        add_outer_upper(&mut acc, &d);
    }
    let (nf, bf) = (n as f64, b as f64);
    let scale = nf * bf / ((nf - bf) * (nf - bf + 1.0));
    let m = symmetric_from_upper(&acc, p, scale);
    Ok(CovEstimate::finish(m, Method::Obm, None, b, n, started))
}

/// Accumulates `sum_t c_t c_t^T` (upper) and, for each weight vector `w`,
/// `sum_t c_t z_t^T` with `z_t = sum_{k=1}^{b} w[k] c_{t+k}` (full `p x p`).
fn lag_sums(c: &[f64], p: usize, windows: &[&[f64]]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = c.len() / p;
    let mut g0 = vec![0.0; p * p];
    let mut zs: Vec<Vec<f64>> = windows.iter().map(|_| vec![0.0; p * p]).collect();
    let mut z = vec![0.0; p];
    for t in 0..n {
        let ct = &c[t * p..(t + 1) * p];
        add_outer_upper(&mut g0, ct);
        for (w, acc) in windows.iter().zip(zs.iter_mut()) {
            let kmax = (w.len() - 1).min(n - 1 - t);
            if kmax == 0 {
                continue;
            }
            z.iter_mut().for_each(|v| *v = 0.0);
            for (k, &wk) in w.iter().enumerate().take(kmax + 1).skip(1) {
                if wk == 0.0 {
                    continue;
                }
                let row = &c[(t + k) * p..(t + k + 1) * p];
                for (zi, ri) in z.iter_mut().zip(row) {
                    *zi += wk * ri;
                }
            }
            for i in 0..p {
                let ci = ct[i];
                for (a, zj) in acc[i * p..(i + 1) * p].iter_mut().zip(&z) {
                    *a += ci * zj;
                }
            }
        }
    }
    (g0, zs)
}

/// `(G0 + Z + Z^T) / n` as a symmetric matrix.
fn assemble_sv(g0: &[f64], z: &[f64], p: usize, n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(p, p);
    let nf = n as f64;
    for i in 0..p {
        for j in i..p {
            let v = (g0[i * p + j] + z[i * p + j] + z[j * p + i]) / nf;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Spectral variance estimator with lag window `window` truncated at `b`.
pub fn sv(chain: &ChainMatrix, window: &LagWindow, b: usize) -> Result<CovEstimate> {
    let w = weights(window, b)?;
    let b = window.effective_b(b);
    check_range(b, chain.n, 2)?;
    let started = Instant::now();
    let c = chain.centered(&chain.mean());
    let (g0, zs) = lag_sums(&c, chain.p, &[&w]);
    let m = assemble_sv(&g0, &zs[0], chain.p, chain.n);
    Ok(CovEstimate::finish(m, Method::Sv, Some(*window), b, chain.n, started))
}

/// Flat top spectral variance as `2 SV_bartlett(b) - SV_bartlett(b/2)`.
///
/// Odd `b` is rounded down; needs `4 <= b <= n/2` after rounding.
pub fn sv_flat_top_fast(chain: &ChainMatrix, b: usize) -> Result<CovEstimate> {
    let b = b - b % 2;
    check_range(b, chain.n, 4)?;
    let started = Instant::now();
    let full = weights(&LagWindow::Bartlett, b)?;
    let half = weights(&LagWindow::Bartlett, b / 2)?;
    let p = chain.p;
    let c = chain.centered(&chain.mean());
    let (g0, zs) = lag_sums(&c, p, &[&full, &half]);
    let s1 = assemble_sv(&g0, &zs[0], p, chain.n);
    let s2 = assemble_sv(&g0, &zs[1], p, chain.n);
    let m = s1 * 2.0 - s2;
    Ok(CovEstimate::finish(m, Method::Sv, Some(LagWindow::BartlettFlatTop), b, chain.n, started))
}

/// Generic weighted batch means.
///
/// Batch sizes whose second difference is below [`DELTA2_SKIP`] in magnitude
/// are skipped outright. For each remaining `k` the earliest `n - a_k k` rows
/// are dropped and the batch means are centred on the mean of the kept rows,
/// so the Bartlett window reproduces [`bm`] and the flat top window reproduces
/// `2 bm(b) - bm(b/2)`.
pub fn wbm(chain: &ChainMatrix, window: &LagWindow, b: usize) -> Result<CovEstimate> {
    let d2 = second_differences(window, b)?;
    let b = window.effective_b(b);
    let (n, p) = (chain.n, chain.p);
    check_range(b, n, 2)?;
    let started = Instant::now();

    // Prefix sums of the centred chain give every batch mean in O(p).
    let c = chain.centered(&chain.mean());
    let mut prefix = vec![0.0; (n + 1) * p];
    for t in 0..n {
        for j in 0..p {
            prefix[(t + 1) * p + j] = prefix[t * p + j] + c[t * p + j];
        }
    }
    let mut total = vec![0.0; p * p];
    let mut means = Vec::new();
    let mut center = vec![0.0; p];
    let mut n_used = 0;
    for (k, &dk) in d2.iter().enumerate().skip(1) {
        if dk.abs() < DELTA2_SKIP {
            continue;
        }
        let a = n / k;
        let start = n - a * k;
        n_used = n_used.max(a * k);
        let kept = (n - start) as f64;
        for j in 0..p {
            center[j] = (prefix[n * p + j] - prefix[start * p + j]) / kept;
        }
        means.clear();
        for l in 0..a {
            let (lo, hi) = ((start + l * k) * p, (start + (l + 1) * k) * p);
            for j in 0..p {
                means.push((prefix[hi + j] - prefix[lo + j]) / k as f64);
            }
        }
        let acc = scatter_upper(&means, p, &center);
        let coef = (k * k) as f64 * dk / (a - 1) as f64;
        for (t, s) in total.iter_mut().zip(&acc) {
            *t += coef * s;
        }
    }
    let m = symmetric_from_upper(&total, p, 1.0);
    Ok(CovEstimate::finish(m, Method::Wbm, Some(*window), b, n_used, started))
}

/// Flat top weighted batch means, `2 bm(b) - bm(b/2)`.
///
/// Odd `b` is rounded down; needs `4 <= b <= n/2` after rounding. One pass
/// computes the half-size batch means and the full-size ones are formed by
/// averaging adjacent pairs.
pub fn wbm_flat_top_fast(chain: &ChainMatrix, b: usize) -> Result<CovEstimate> {
    let b = b - b % 2;
    let n = chain.n;
    check_range(b, n, 4)?;
    let started = Instant::now();
    let (p, h) = (chain.p, b / 2);
    let a_half = n / h;
    let a_full = n / b;
    let half = batch_means(chain, h, n - a_half * h, a_half);
    // a_half is 2 a_full or 2 a_full + 1; in the odd case the first half batch
    // lies before the first full batch.
    let skip = a_half - 2 * a_full;
    let mut full = Vec::with_capacity(a_full * p);
    for pair in half[skip * p..].chunks_exact(2 * p) {
        let (x, y) = pair.split_at(p);
        full.extend(x.iter().zip(y).map(|(u, v)| (u + v) / 2.0));
    }
    let m = bm_from_means(&full, p, b)? * 2.0 - bm_from_means(&half, p, h)?;
    Ok(CovEstimate::finish(
        m,
        Method::Wbm,
        Some(LagWindow::BartlettFlatTop),
        b,
        a_half * h,
        started,
    ))
}

/// Mean of squared entrywise differences.
pub fn mse(estimate: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<f64> {
    if estimate.shape() != truth.shape() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            found: estimate.len(),
        });
    }
    Ok((estimate - truth).iter().map(|e| e * e).sum::<f64>() / truth.len() as f64)
}

/// A fully specified estimator: method plus lag window where one applies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Estimator {
    Bm,
    Obm,
    Sv(LagWindow),
    Wbm(LagWindow),
}

impl Estimator {
    pub fn from_parts(method: Method, window: Option<LagWindow>) -> Result<Estimator> {
        match (method, window) {
            (Method::Bm, None) => Ok(Estimator::Bm),
            (Method::Obm, None) => Ok(Estimator::Obm),
            (Method::Sv, Some(w)) => Ok(Estimator::Sv(w)),
            (Method::Wbm, Some(w)) => Ok(Estimator::Wbm(w)),
            (Method::Bm | Method::Obm, Some(_)) => {
                Err(Error::Config(format!("method {method} does not take a window")))
            }
            (Method::Sv | Method::Wbm, None) => {
                Err(Error::Config(format!("method {method} requires --window")))
            }
        }
    }

    pub fn method(&self) -> Method {
        match self {
            Estimator::Bm => Method::Bm,
            Estimator::Obm => Method::Obm,
            Estimator::Sv(_) => Method::Sv,
            Estimator::Wbm(_) => Method::Wbm,
        }
    }

    pub fn window(&self) -> Option<LagWindow> {
        match self {
            Estimator::Sv(w) | Estimator::Wbm(w) => Some(*w),
            _ => None,
        }
    }

    /// Runs the estimator, taking the flat top fast path for weighted batch
    /// means whenever the truncation point allows it.
    pub fn estimate(&self, chain: &ChainMatrix, b: usize) -> Result<CovEstimate> {
        match self {
            Estimator::Bm => bm(chain, b),
            Estimator::Obm => obm(chain, b),
            Estimator::Sv(w) => sv(chain, w, b),
            Estimator::Wbm(LagWindow::BartlettFlatTop) if b >= 4 => wbm_flat_top_fast(chain, b),
            Estimator::Wbm(w) => wbm(chain, w, b),
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Estimator::Bm => f.write_str("bm"),
            Estimator::Obm => f.write_str("obm"),
            Estimator::Sv(w) => write!(f, "sv-{w}"),
            Estimator::Wbm(w) => write!(f, "wbm-{w}"),
        }
    }
}

impl fmt::Display for BatchSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BatchSchedule::PowerRule(nu) => write!(f, "pow:{nu}"),
            BatchSchedule::Doubling(nu) => write!(f, "doubling:{nu}"),
            BatchSchedule::Fixed(b) => write!(f, "fixed:{b}"),
        }
    }
}

impl FromStr for BatchSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::Config(format!(
                "bad schedule {s:?}; expected pow:<nu>, doubling:<nu> or fixed:<b>"
            ))
        };
        let (kind, arg) = s.split_once(':').ok_or_else(bad)?;
        let schedule = match kind.trim() {
            "pow" => BatchSchedule::PowerRule(arg.trim().parse().map_err(|_| bad())?),
            "doubling" => BatchSchedule::Doubling(arg.trim().parse().map_err(|_| bad())?),
            "fixed" => BatchSchedule::Fixed(arg.trim().parse().map_err(|_| bad())?),
            _ => return Err(bad()),
        };
        schedule.validate()?;
        Ok(schedule)
    }
}
