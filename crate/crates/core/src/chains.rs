//! Reference chains with closed-form asymptotic covariance.
//!
//! AR(1): `X_t = phi X_{t-1} + e_t`, `e_t ~ N(0, 1)`, with
//! `Sigma = 1 / (1 - phi)^2`.
//!
//! VAR(1): `X_t = Phi X_{t-1} + e_t`, `e_t ~ N_p(0, I)`. The stationary
//! covariance solves `vec(V) = (I - Phi (x) Phi)^{-1} vec(I)` and
//! `Sigma = (I - Phi)^{-1} V + V (I - Phi^T)^{-1} - V`.
//!
//! Both generators start from the stationary law, so there is no burn-in.
//! Randomness comes from ChaCha8 seeded with `seed_from_u64`; normals use the
//! ziggurat sampler of `rand_distr::StandardNormal`. Output is bit-identical
//! for a given seed on a given build.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::estimators::ChainMatrix;
use crate::linalg::{mirror_upper, spectral_radius};

/// Largest dimension accepted by the dense `p^2 x p^2` stationary solve.
pub const MAX_KRONECKER_P: usize = 60;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ar1Model {
    pub phi: f64,
    pub seed: u64,
}

impl Ar1Model {
    pub fn new(phi: f64, seed: u64) -> Result<Self> {
        check_phi(phi)?;
        Ok(Ar1Model { phi, seed })
    }

    /// Infinite stream of draws starting from `N(0, 1/(1 - phi^2))`.
    pub fn sampler(&self) -> Result<Ar1Sampler> {
        check_phi(self.phi)?;
        let mut rng = rng(self.seed);
        let z: f64 = rng.sample(StandardNormal);
        let x = z / (1.0 - self.phi * self.phi).sqrt();
        Ok(Ar1Sampler { phi: self.phi, rng, x: None, x0: x })
    }
}

fn check_phi(phi: f64) -> Result<()> {
    if !(phi.abs() < 1.0) {
        return Err(Error::NotStationary(phi));
    }
    Ok(())
}

pub struct Ar1Sampler {
    phi: f64,
    rng: ChaCha8Rng,
    x: Option<f64>,
    x0: f64,
}

impl Iterator for Ar1Sampler {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let x = match self.x {
            None => self.x0,
            Some(prev) => {
                let e: f64 = self.rng.sample(StandardNormal);
                self.phi * prev + e
            }
        };
        self.x = Some(x);
        Some(x)
    }
}

/// `n` draws of an AR(1) chain as an `n x 1` matrix.
pub fn ar1_generate(model: &Ar1Model, n: usize) -> Result<ChainMatrix> {
    let data: Vec<f64> = model.sampler()?.take(n).collect();
    ChainMatrix::new(data, n, 1)
}

/// `1 / (1 - phi)^2`.
pub fn ar1_true_sigma(phi: f64) -> Result<f64> {
    check_phi(phi)?;
    Ok(1.0 / ((1.0 - phi) * (1.0 - phi)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Var1Model {
    pub phi: DMatrix<f64>,
    pub seed: u64,
}

impl Var1Model {
    pub fn new(phi: DMatrix<f64>, seed: u64) -> Result<Self> {
        check_stable(&phi)?;
        Ok(Var1Model { phi, seed })
    }

    pub fn p(&self) -> usize {
        self.phi.nrows()
    }

    /// Infinite stream of draws starting from `N_p(0, V)`.
    pub fn sampler(&self) -> Result<Var1Sampler> {
        let v = var1_stationary(&self.phi)?;
        let chol = v
            .cholesky()
            .ok_or(Error::Singular("stationary covariance is not positive definite"))?;
        let l = chol.l();
        let p = self.p();
        let mut rng = rng(self.seed);
        let z: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        let x0 = (0..p).map(|i| (0..=i).map(|j| l[(i, j)] * z[j]).sum()).collect();
        let mut phi = Vec::with_capacity(p * p);
        for i in 0..p {
            phi.extend(self.phi.row(i).iter());
        }
        Ok(Var1Sampler { phi, p, rng, x: x0, started: false, scratch: vec![0.0; p] })
    }
}

fn check_stable(phi: &DMatrix<f64>) -> Result<()> {
    if !phi.is_square() || phi.nrows() == 0 {
        return Err(Error::Config(format!(
            "Phi must be a non-empty square matrix (got {}x{})",
            phi.nrows(),
            phi.ncols()
        )));
    }
    if phi.iter().any(|x| !x.is_finite()) {
        return Err(Error::Config("Phi has non-finite entries".into()));
    }
    let rho = spectral_radius(phi);
    if !(rho < 1.0) {
        return Err(Error::NotStable { spectral_radius: rho });
    }
    Ok(())
}

pub struct Var1Sampler {
    /// Row-major Phi.
    phi: Vec<f64>,
    p: usize,
    rng: ChaCha8Rng,
    x: Vec<f64>,
    started: bool,
    scratch: Vec<f64>,
}

impl Var1Sampler {
    /// Advances the chain and writes the new state into `out`.
    pub fn next_into(&mut self, out: &mut [f64]) {
        if self.started {
            let p = self.p;
            for i in 0..p {
                let row = &self.phi[i * p..(i + 1) * p];
                let e: f64 = self.rng.sample(StandardNormal);
                self.scratch[i] = row.iter().zip(&self.x).map(|(a, x)| a * x).sum::<f64>() + e;
            }
            std::mem::swap(&mut self.x, &mut self.scratch);
        }
        self.started = true;
        out.copy_from_slice(&self.x);
    }
}

impl Iterator for Var1Sampler {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        let mut out = vec![0.0; self.p];
        self.next_into(&mut out);
        Some(out)
    }
}

/// `n` draws of a VAR(1) chain as an `n x p` matrix.
pub fn var1_generate(model: &Var1Model, n: usize) -> Result<ChainMatrix> {
    let p = model.p();
    let mut sampler = model.sampler()?;
    let mut data = vec![0.0; n * p];
    for row in data.chunks_exact_mut(p) {
        sampler.next_into(row);
    }
    ChainMatrix::new(data, n, p)
}

/// Stationary covariance `V` of a VAR(1) with unit innovation covariance.
///
/// Solves the `p^2 x p^2` system by dense LU, which costs `O(p^6)`; `p` is
/// limited to [`MAX_KRONECKER_P`].
pub fn var1_stationary(phi: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_stable(phi)?;
    let p = phi.nrows();
    if p > MAX_KRONECKER_P {
        return Err(Error::DimensionTooLarge { p, max: MAX_KRONECKER_P });
    }
    let system = DMatrix::<f64>::identity(p * p, p * p) - phi.kronecker(phi);
    let rhs = DMatrix::<f64>::identity(p, p).reshape_generic(nalgebra::Dyn(p * p), nalgebra::Dyn(1));
    let vec_v = system
        .lu()
        .solve(&rhs)
        .ok_or(Error::Singular("I - Phi (x) Phi"))?;
    // vec() stacks columns, matching nalgebra's column-major storage.
    let v = DMatrix::from_column_slice(p, p, vec_v.as_slice());
    let mut v = (&v + v.transpose()) * 0.5;
    mirror_upper(&mut v);
    Ok(v)
}

/// `Sigma = (I - Phi)^{-1} V + V (I - Phi^T)^{-1} - V`.
pub fn var1_true_sigma(phi: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let v = var1_stationary(phi)?;
    let p = phi.nrows();
    let x = (DMatrix::<f64>::identity(p, p) - phi)
        .lu()
        .solve(&v)
        .ok_or(Error::Singular("I - Phi"))?;
    let mut sigma = &x + x.transpose() - &v;
    mirror_upper(&mut sigma);
    Ok(sigma)
}

/// Random stable coefficient matrix `scale * B / (m + offset)` with `B = A A^T`,
/// `A` standard normal and `m` the largest eigenvalue of `B`.
pub fn make_phi(p: usize, seed: u64, offset: f64, scale: f64) -> Result<DMatrix<f64>> {
    if p == 0 {
        return Err(Error::Config("p must be positive".into()));
    }
    if !(offset > 0.0) {
        return Err(Error::Config(format!("offset must be positive (got {offset})")));
    }
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(Error::Config(format!("scale must be in (0, 1] (got {scale})")));
    }
    let mut rng = rng(seed);
    let a = DMatrix::from_fn(p, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut b = &a * a.transpose();
    mirror_upper(&mut b);
    let m = SymmetricEigen::new(b.clone()).eigenvalues.max();
    Ok(b * (scale / (m + offset)))
}
