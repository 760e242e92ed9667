//! Naive reference implementations shared by the integration tests and the
//! acceptance suite. Every formula is evaluated literally with explicit loops.
#![allow(dead_code)]

use covkit::chains::{make_phi, var1_generate};
use covkit::windows::window_weight;
use covkit::{ChainMatrix, LagWindow, Var1Model};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rel_frob(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let d = (a - b).norm();
    let s = b.norm();
    if s == 0.0 {
        d
    } else {
        d / s
    }
}

fn row_mean(chain: &ChainMatrix, from: usize, to: usize) -> Vec<f64> {
    let p = chain.p();
    let mut m = vec![0.0; p];
    for t in from..to {
        for (a, x) in m.iter_mut().zip(chain.row(t)) {
            *a += x;
        }
    }
    m.iter().map(|v| v / (to - from) as f64).collect()
}

/// `sum_l (m_l - c)(m_l - c)^T` for batch means of size `k` over the rows
/// `[n - a k, n)`.
fn batch_scatter(chain: &ChainMatrix, k: usize, center: &[f64]) -> (DMatrix<f64>, usize) {
    let (n, p) = (chain.n(), chain.p());
    let a = n / k;
    let start = n - a * k;
    let mut s = DMatrix::zeros(p, p);
    for l in 0..a {
        let m = row_mean(chain, start + l * k, start + (l + 1) * k);
        for i in 0..p {
            for j in 0..p {
                s[(i, j)] += (m[i] - center[i]) * (m[j] - center[j]);
            }
        }
    }
    (s, a)
}

pub fn naive_bm(chain: &ChainMatrix, b: usize) -> DMatrix<f64> {
    let n = chain.n();
    let a = n / b;
    // Centre on the mean of the retained rows.
    let center = row_mean(chain, n - a * b, n);
    let (s, a) = batch_scatter(chain, b, &center);
    s * (b as f64 / (a - 1) as f64)
}

pub fn naive_obm(chain: &ChainMatrix, b: usize) -> DMatrix<f64> {
    let (n, p) = (chain.n(), chain.p());
    let ybar = row_mean(chain, 0, n);
    let mut s = DMatrix::zeros(p, p);
    for l in 0..=n - b {
        let m = row_mean(chain, l, l + b);
        for i in 0..p {
            for j in 0..p {
                s[(i, j)] += (m[i] - ybar[i]) * (m[j] - ybar[j]);
            }
        }
    }
    let (nf, bf) = (n as f64, b as f64);
    s * (nf * bf / ((nf - bf) * (nf - bf + 1.0)))
}

pub fn naive_autocov(chain: &ChainMatrix, k: usize) -> DMatrix<f64> {
    let (n, p) = (chain.n(), chain.p());
    let ybar = row_mean(chain, 0, n);
    let mut g = DMatrix::zeros(p, p);
    for t in 0..n - k {
        for i in 0..p {
            for j in 0..p {
                g[(i, j)] += (chain.row(t)[i] - ybar[i]) * (chain.row(t + k)[j] - ybar[j]);
            }
        }
    }
    g / n as f64
}

pub fn naive_sv(chain: &ChainMatrix, window: &LagWindow, b: usize) -> DMatrix<f64> {
    let b = window.effective_b(b);
    let mut s = naive_autocov(chain, 0);
    for k in 1..=b.min(chain.n() - 1) {
        let w = window_weight(window, k as i64, b).unwrap();
        if w != 0.0 {
            let g = naive_autocov(chain, k);
            s += (&g + g.transpose()) * w;
        }
    }
    s
}

/// Every `k` in `1..=b`, no skipping of small second differences; batch means
/// at size `k` are centred on the mean of the rows kept at that size.
pub fn naive_wbm(chain: &ChainMatrix, window: &LagWindow, b: usize) -> DMatrix<f64> {
    let b = window.effective_b(b);
    let n = chain.n();
    let w = |k: usize| window_weight(window, k as i64, b).unwrap();
    let mut s = DMatrix::zeros(chain.p(), chain.p());
    for k in 1..=b {
        let d2 = w(k - 1) - 2.0 * w(k) + w(k + 1);
        let a = n / k;
        let center = row_mean(chain, n - a * k, n);
        let (sc, a) = batch_scatter(chain, k, &center);
        s += sc * ((k * k) as f64 * d2 / (a - 1) as f64);
    }
    s
}

/// A random chain with serial correlation and a non-zero mean, plus a batch
/// size in `[4, n/3]`.
pub fn random_case(seed: u64) -> (ChainMatrix, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(50..=200);
    let p = rng.random_range(1..=3);
    let scale = rng.random_range(0.1..0.9);
    let phi = make_phi(p, seed, 1.0, scale).unwrap();
    let chain = var1_generate(&Var1Model::new(phi, seed).unwrap(), n).unwrap();
    let shift: Vec<f64> = (0..p).map(|_| rng.random_range(-5.0..5.0)).collect();
    let chain = chain.affine(&DMatrix::identity(p, p), &shift).unwrap();
    let b = rng.random_range(4..=n / 3);
    (chain, b)
}

pub fn random_cases(count: u64) -> Vec<(ChainMatrix, usize)> {
    (0..count).map(|i| random_case(1000 + i)).collect()
}
