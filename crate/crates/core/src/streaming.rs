//! Online batch means with a doubling batch size.
//!
//! The batch size follows `b = min { 2^k : 2^k >= n^nu, k >= 1 }`. Only batch
//! means are stored: a ledger of closed batches of size `b/2` and the ledger
//! of size `b` obtained by averaging adjacent pairs of it. When `b` doubles the
//! size-`b` ledger becomes the new half-size ledger and is paired up again, so
//! memory stays `O(n / b)` and each push is amortised `O(p)`.
//!
//! Partial batches never enter an estimate. When `n` is a multiple of the
//! final `b` both estimates coincide with [`crate::estimators::bm`] and
//! [`crate::estimators::wbm_flat_top_fast`] on the stored chain.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::estimators::{bm_from_means, doubling_b, CovEstimate, Method};
use crate::windows::LagWindow;

const MAGIC: &[u8; 4] = b"CVKS";
pub const SNAPSHOT_VERSION: u32 = 1;

/// Running state of the online estimator. Single writer.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamState {
    p: usize,
    nu: f64,
    current_b: usize,
    /// Closed batch means at `current_b / 2`, row-major.
    half: Vec<f64>,
    /// Closed batch means at `current_b`; entry `i` averages half batches `2i`, `2i + 1`.
    full: Vec<f64>,
    /// Sum and count of the rows after the last closed half batch.
    open_sum: Vec<f64>,
    open_count: usize,
    total_count: usize,
    running_sum: Vec<f64>,
}

impl StreamState {
    pub fn new(p: usize, nu: f64) -> Result<Self> {
        if p == 0 {
            return Err(Error::Config("stream dimension p must be positive".into()));
        }
        if !(nu > 0.0 && nu < 1.0) {
            return Err(Error::Config(format!("nu must be in (0, 1), got {nu}")));
        }
        Ok(StreamState {
            p,
            nu,
            current_b: 2,
            half: Vec::new(),
            full: Vec::new(),
            open_sum: vec![0.0; p],
            open_count: 0,
            total_count: 0,
            running_sum: vec![0.0; p],
        })
    }

    /// `nu = 1/3`.
    pub fn with_default_nu(p: usize) -> Result<Self> {
        StreamState::new(p, 1.0 / 3.0)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn current_b(&self) -> usize {
        self.current_b
    }

    pub fn total_count(&self) -> usize {
        self.total_count
    }

    /// Closed batch means at the current batch size, row-major.
    pub fn batch_means(&self) -> &[f64] {
        &self.full
    }

    /// Closed batch means at half the current batch size, row-major.
    pub fn half_batch_means(&self) -> &[f64] {
        &self.half
    }

    pub fn num_batches(&self) -> usize {
        self.full.len() / self.p
    }

    pub fn num_half_batches(&self) -> usize {
        self.half.len() / self.p
    }

    /// Rows not covered by a closed batch of size `current_b`.
    pub fn open_count(&self) -> usize {
        self.total_count - self.num_batches() * self.current_b
    }

    pub fn running_sum(&self) -> &[f64] {
        &self.running_sum
    }

    /// Mean of all pushed samples.
    pub fn mean(&self) -> Vec<f64> {
        self.running_sum.iter().map(|s| s / self.total_count as f64).collect()
    }

    pub fn push(&mut self, sample: &[f64]) -> Result<()> {
        if sample.len() != self.p {
            return Err(Error::DimensionMismatch { expected: self.p, found: sample.len() });
        }
        if let Some(col) = sample.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { row: self.total_count, col });
        }
        for ((r, o), x) in self.running_sum.iter_mut().zip(&mut self.open_sum).zip(sample) {
            *r += x;
            *o += x;
        }
        self.open_count += 1;
        self.total_count += 1;

        let h = self.current_b / 2;
        if self.open_count == h {
            // h is a power of two, so sum / h is exact.
            self.half.extend(self.open_sum.iter().map(|s| s / h as f64));
            self.open_sum.iter_mut().for_each(|s| *s = 0.0);
            self.open_count = 0;
            if self.num_half_batches().is_multiple_of(2) {
                let k = self.half.len() - 2 * self.p;
                let merged = pair_mean(&self.half[k..], self.p);
                self.full.extend(merged);
            }
        }

        let target = doubling_b(self.total_count, self.nu);
        while self.current_b < target {
            self.double();
        }
        Ok(())
    }

    fn double(&mut self) {
        let p = self.p;
        let h = self.current_b / 2;
        if self.num_half_batches() % 2 == 1 {
            // The unpaired half batch joins the open rows of the new half size.
            let last = self.half.split_off(self.half.len() - p);
            for (o, m) in self.open_sum.iter_mut().zip(&last) {
                *o += m * h as f64;
            }
            self.open_count += h;
        }
        self.half = std::mem::take(&mut self.full);
        self.full = self
            .half
            .chunks_exact(2 * p)
            .flat_map(|pair| pair_mean(pair, p))
            .collect();
        self.current_b *= 2;
    }

    /// Batch means estimate over the closed batches of size `current_b`.
    pub fn estimate_bm(&self) -> Result<CovEstimate> {
        let started = Instant::now();
        let a = self.num_batches();
        if a < 2 {
            return Err(Error::InsufficientBatches { needed: 2, have: a });
        }
        let m = bm_from_means(&self.full, self.p, self.current_b)?;
        Ok(CovEstimate::finish(m, Method::Bm, None, self.current_b, a * self.current_b, started))
    }

    /// Flat top weighted batch means, `2 BM(b) - BM(b/2)` over closed batches.
    pub fn estimate_flat_top(&self) -> Result<CovEstimate> {
        let started = Instant::now();
        let a = self.num_batches();
        if a < 2 || self.num_half_batches() < 4 {
            return Err(Error::InsufficientBatches { needed: 4, have: self.num_half_batches() });
        }
        let b = self.current_b;
        let m = bm_from_means(&self.full, self.p, b)? * 2.0 - bm_from_means(&self.half, self.p, b / 2)?;
        let n_used = self.num_half_batches() * (b / 2);
        Ok(CovEstimate::finish(m, Method::Wbm, Some(LagWindow::BartlettFlatTop), b, n_used, started))
    }

    /// Serialises the state: a fixed header followed by little-endian `f64`
    /// running sum, open-batch sum and half-size batch means in row order.
    ///
    /// ```text
    /// magic "CVKS" | version u32 | p u64 | nu f64 | current_b u64 | total_count u64
    /// | half_batches u64 | open_count u64 | running_sum[p] | open_sum[p] | half[half_batches * p]
    /// ```
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(56 + 8 * (2 * self.p + self.half.len()));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
        {
            let v = self.p as u64;
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.nu.to_le_bytes());
        for v in [
            self.current_b as u64,
            self.total_count as u64,
            self.num_half_batches() as u64,
            self.open_count as u64,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for x in self.running_sum.iter().chain(&self.open_sum).chain(&self.half) {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Format("bad stream snapshot magic".into()));
        }
        let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
        if version != SNAPSHOT_VERSION {
            return Err(Error::Format(format!("unsupported snapshot version {version}")));
        }
        let p = r.u64()? as usize;
        let nu = r.f64()?;
        let current_b = r.u64()? as usize;
        let total_count = r.u64()? as usize;
        let half_batches = r.u64()? as usize;
        let open_count = r.u64()? as usize;
        let mut state = StreamState::new(p, nu)?;
        let expected = 8 * p.checked_mul(2 + half_batches).ok_or_else(|| Error::Format("size overflow".into()))?;
        if bytes.len() - r.pos != expected {
            return Err(Error::Format(format!(
                "snapshot body has {} bytes, expected {expected}",
                bytes.len() - r.pos
            )));
        }
        state.running_sum = r.f64s(p)?;
        state.open_sum = r.f64s(p)?;
        state.half = r.f64s(half_batches * p)?;
        state.current_b = current_b;
        state.total_count = total_count;
        state.open_count = open_count;
        let consistent = current_b.is_power_of_two()
            && current_b >= 2
            && current_b == doubling_b(total_count, nu).max(2)
            && open_count < current_b / 2
            && half_batches * (current_b / 2) + open_count == total_count;
        if !consistent {
            return Err(Error::Format("inconsistent stream snapshot header".into()));
        }
        state.full = state.half.chunks_exact(2 * p).flat_map(|pair| pair_mean(pair, p)).collect();
        Ok(state)
    }
}

fn pair_mean(pair: &[f64], p: usize) -> impl Iterator<Item = f64> + '_ {
    let (x, y) = pair.split_at(p);
    x.iter().zip(&y[..p]).map(|(u, v)| (u + v) / 2.0)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(k).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format("truncated stream snapshot".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, k: usize) -> Result<Vec<f64>> {
        (0..k).map(|_| self.f64()).collect()
    }
}
