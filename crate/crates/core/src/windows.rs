//! Lag windows and their finite differences.
//!
//! A lag window `w(k)` with truncation point `b` is an even function on the
//! integers with `|w(k)| <= 1`, `w(0) = 1` and `w(k) = 0` for `|k| >= b`. The
//! weighted batch means estimator weights the batch size `k` term by
//! `k^2 * delta2(k)`, where
//!
//! ```text
//! delta1(k) = w(k - 1) - w(k)
//! delta2(k) = w(k - 1) - 2 w(k) + w(k + 1)
//! ```
//!
//! so the cost of that estimator is driven by how many `delta2(k)` are nonzero.
//! Strong consistency additionally needs `sum_{k=1}^{b} k delta2(k) = 1` and a
//! vanishing `sum_{k=1}^{b} |delta2(k)|` (at a rate that depends on the mixing
//! of the chain, which cannot be computed). [`check_conditions`] evaluates the
//! first exactly and reports the second along a geometric grid of `b`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tolerance for `|sum k delta2(k) - 1|`.
pub const DEFAULT_CONDITION_TOL: f64 = 1e-9;

/// Number of doublings in the `abs_sum_trend` grid of a [`ConditionReport`].
const TREND_DOUBLINGS: u32 = 6;

/// A lag-window family.
///
/// The truncation point `b` is not part of the window; it is passed to every
/// evaluation so that the same family can be used with any batch size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum LagWindow {
    /// `1 - |k|/b` for `|k| <= b`.
    Bartlett,
    /// `(1 + cos(pi |k| / b)) / 2` for `|k| <= b`.
    TukeyHanning,
    /// `1` for `|k| <= b/2`, then `2 (1 - |k|/b)` up to `b`. Needs even `b`.
    BartlettFlatTop,
    /// `1` for `|k| < b`.
    SimpleTruncation,
    /// `1 - |k|^q / b^q` for `|k| <= b`; `q = 1` is Bartlett.
    Parzen { q: u32 },
    /// `1 - eta |k| / b` for `|k| < b`, with `0 < eta <= 2` and `eta != 1`.
    ScaledBartlett { eta: f64 },
}

impl LagWindow {
    /// Names accepted by [`FromStr`].
    pub const NAMES: &'static [&'static str] = &[
        "bartlett",
        "tukey-hanning",
        "flat-top",
        "truncation",
        "parzen:<q>",
        "scaled-bartlett:<eta>",
    ];

    pub fn validate(&self) -> Result<()> {
        match *self {
            LagWindow::Parzen { q: 0 } => Err(Error::InvalidWindow(
                "parzen exponent q must be a positive integer".into(),
            )),
            LagWindow::ScaledBartlett { eta } => {
                if !eta.is_finite() || eta <= 0.0 {
                    Err(Error::InvalidWindow(format!(
                        "scaled-bartlett eta must be positive (got {eta})"
                    )))
                } else if eta == 1.0 {
                    Err(Error::InvalidWindow(
                        "scaled-bartlett with eta = 1 is the Bartlett window".into(),
                    ))
                } else if eta > 2.0 {
                    // 1 - eta (b-1)/b < -1 for large b.
                    Err(Error::InvalidWindow(format!(
                        "scaled-bartlett eta = {eta} violates |w(k)| <= 1; need eta <= 2"
                    )))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Truncation point actually used for a requested `b`: the flat top window
    /// rounds down to the nearest even integer (at least 2), every other
    /// family uses `b` unchanged.
    pub fn effective_b(&self, b: usize) -> usize {
        match self {
            LagWindow::BartlettFlatTop => (b - b % 2).max(2),
            _ => b,
        }
    }

    /// True when `delta2(k)` vanishes except at a handful of lags, so the
    /// weighted batch means estimator needs only that many batch sizes.
    pub fn has_sparse_delta2(&self) -> bool {
        matches!(
            self,
            LagWindow::Bartlett
                | LagWindow::BartlettFlatTop
                | LagWindow::SimpleTruncation
                | LagWindow::Parzen { q: 1 }
                | LagWindow::ScaledBartlett { .. }
        )
    }

    /// `w(k)` for an already validated window and effective truncation point.
    pub(crate) fn weight_unchecked(&self, k: i64, b: usize) -> f64 {
        let k = k.unsigned_abs() as usize;
        let bf = b as f64;
        match *self {
            LagWindow::Bartlett | LagWindow::Parzen { q: 1 } => {
                if k <= b {
                    (b - k) as f64 / bf
                } else {
                    0.0
                }
            }
            LagWindow::TukeyHanning => {
                if k <= b {
                    (1.0 + (PI * k as f64 / bf).cos()) / 2.0
                } else {
                    0.0
                }
            }
            LagWindow::BartlettFlatTop => {
                if 2 * k <= b {
                    1.0
                } else if k <= b {
                    2.0 * (b - k) as f64 / bf
                } else {
                    0.0
                }
            }
            LagWindow::SimpleTruncation => {
                if k < b {
                    1.0
                } else {
                    0.0
                }
            }
            LagWindow::Parzen { q } => {
                if k <= b {
                    1.0 - (k as f64 / bf).powi(q as i32)
                } else {
                    0.0
                }
            }
            LagWindow::ScaledBartlett { eta } => {
                if k < b {
                    1.0 - eta * k as f64 / bf
                } else {
                    0.0
                }
            }
        }
    }

    pub(crate) fn delta2_unchecked(&self, k: i64, b: usize) -> f64 {
        self.weight_unchecked(k - 1, b) - 2.0 * self.weight_unchecked(k, b)
            + self.weight_unchecked(k + 1, b)
    }
}

fn check_b(b: usize) -> Result<()> {
    if b == 0 {
        return Err(Error::Config("truncation point b must be >= 1".into()));
    }
    Ok(())
}

/// `w(k)` with truncation point `b`.
pub fn window_weight(window: &LagWindow, k: i64, b: usize) -> Result<f64> {
    check_b(b)?;
    window.validate()?;
    Ok(window.weight_unchecked(k, window.effective_b(b)))
}

/// First difference `w(k-1) - w(k)`.
pub fn delta1(window: &LagWindow, k: i64, b: usize) -> Result<f64> {
    check_b(b)?;
    window.validate()?;
    let b = window.effective_b(b);
    Ok(window.weight_unchecked(k - 1, b) - window.weight_unchecked(k, b))
}

/// Second difference `w(k-1) - 2 w(k) + w(k+1)`.
pub fn delta2(window: &LagWindow, k: i64, b: usize) -> Result<f64> {
    check_b(b)?;
    window.validate()?;
    Ok(window.delta2_unchecked(k, window.effective_b(b)))
}

/// Weights `w(0), ..., w(b)` at the effective truncation point.
pub fn weights(window: &LagWindow, b: usize) -> Result<Vec<f64>> {
    check_b(b)?;
    window.validate()?;
    let b = window.effective_b(b);
    Ok((0..=b as i64).map(|k| window.weight_unchecked(k, b)).collect())
}

/// Second differences indexed by lag: element `k` is `delta2(k)` for
/// `k = 1..=b`; element 0 is unused and set to zero.
pub fn second_differences(window: &LagWindow, b: usize) -> Result<Vec<f64>> {
    check_b(b)?;
    window.validate()?;
    let b = window.effective_b(b);
    let mut d = vec![0.0; b + 1];
    for (k, slot) in d.iter_mut().enumerate().skip(1) {
        *slot = window.delta2_unchecked(k as i64, b);
    }
    Ok(d)
}

/// Outcome of [`check_conditions`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub window: LagWindow,
    /// Truncation point after any flat-top adjustment.
    pub b: usize,
    pub tol: f64,
    /// `sum_{k=1}^{b} k * delta2(k)`.
    pub sum_k_delta2: f64,
    /// `sum_{k=1}^{b} |delta2(k)|`.
    pub abs_sum_delta2: f64,
    /// `|sum_k_delta2 - 1| <= tol`.
    pub cond1_holds: bool,
    /// `(b', abs_sum_delta2(b'))` for `b' = b, 2b, 4b, ...`.
    pub abs_sum_trend: Vec<(usize, f64)>,
    /// The absolute sum at the end of the trend is at most half its first value.
    pub abs_sum_decays: bool,
    /// `cond1_holds && abs_sum_decays`.
    pub passes: bool,
}

/// `(sum_k k delta2(k), sum_k |delta2(k)|)` over `k = 1..=b` at the effective
/// truncation point, without the trend of [`check_conditions`].
pub fn delta2_sums(window: &LagWindow, b: usize) -> Result<(f64, f64)> {
    check_b(b)?;
    window.validate()?;
    Ok(sums(window, window.effective_b(b)))
}

fn sums(window: &LagWindow, b: usize) -> (f64, f64) {
    let mut weighted = Neumaier::default();
    let mut abs = Neumaier::default();
    for k in 1..=b {
        let d = window.delta2_unchecked(k as i64, b);
        weighted.add(k as f64 * d);
        abs.add(d.abs());
    }
    (weighted.total(), abs.total())
}

/// Evaluates the consistency conditions of `window` at truncation point `b`.
pub fn check_conditions(window: &LagWindow, b: usize, tol: f64) -> Result<ConditionReport> {
    window.validate()?;
    if b < 2 {
        return Err(Error::Config(format!("condition check needs b >= 2 (got {b})")));
    }
    if !(tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive (got {tol})")));
    }
    let b = window.effective_b(b);
    let (sum_k_delta2, abs_sum_delta2) = sums(window, b);
    let abs_sum_trend: Vec<(usize, f64)> = (0..=TREND_DOUBLINGS)
        .map(|j| {
            let bj = b << j;
            (bj, sums(window, bj).1)
        })
        .collect();
    let first = abs_sum_trend[0].1;
    let last = abs_sum_trend[abs_sum_trend.len() - 1].1;
    let abs_sum_decays = last <= 0.5 * first;
    let cond1_holds = (sum_k_delta2 - 1.0).abs() <= tol;
    Ok(ConditionReport {
        window: *window,
        b,
        tol,
        sum_k_delta2,
        abs_sum_delta2,
        cond1_holds,
        abs_sum_trend,
        abs_sum_decays,
        passes: cond1_holds && abs_sum_decays,
    })
}

/// Compensated summation.
#[derive(Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

impl fmt::Display for LagWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LagWindow::Bartlett => f.write_str("bartlett"),
            LagWindow::TukeyHanning => f.write_str("tukey-hanning"),
            LagWindow::BartlettFlatTop => f.write_str("flat-top"),
            LagWindow::SimpleTruncation => f.write_str("truncation"),
            LagWindow::Parzen { q } => write!(f, "parzen:{q}"),
            LagWindow::ScaledBartlett { eta } => write!(f, "scaled-bartlett:{eta}"),
        }
    }
}

impl FromStr for LagWindow {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || {
            Error::InvalidWindow(format!(
                "unknown window {s:?}; valid names: {}",
                LagWindow::NAMES.join(", ")
            ))
        };
        let (name, arg) = match s.split_once(':') {
            Some((name, arg)) => (name, Some(arg)),
            None => (s, None),
        };
        let window = match (name.trim().to_ascii_lowercase().as_str(), arg) {
            ("bartlett", None) => LagWindow::Bartlett,
            ("tukey-hanning", None) => LagWindow::TukeyHanning,
            ("flat-top", None) => LagWindow::BartlettFlatTop,
            ("truncation", None) => LagWindow::SimpleTruncation,
            ("parzen", Some(q)) => LagWindow::Parzen {
                q: q.trim().parse().map_err(|_| {
                    Error::InvalidWindow(format!("parzen needs an integer q (got {q:?})"))
                })?,
            },
            ("scaled-bartlett", Some(eta)) => LagWindow::ScaledBartlett {
                eta: eta.trim().parse().map_err(|_| {
                    Error::InvalidWindow(format!("scaled-bartlett needs a real eta (got {eta:?})"))
                })?,
            },
            ("parzen", None) => {
                return Err(Error::InvalidWindow("parzen requires q, e.g. parzen:2".into()))
            }
            ("scaled-bartlett", None) => {
                return Err(Error::InvalidWindow(
                    "scaled-bartlett requires eta, e.g. scaled-bartlett:2".into(),
                ))
            }
            _ => return Err(unknown()),
        };
        window.validate()?;
        Ok(window)
    }
}

impl From<LagWindow> for String {
    fn from(w: LagWindow) -> String {
        w.to_string()
    }
}

impl TryFrom<String> for LagWindow {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const ALL: [LagWindow; 8] = [
        LagWindow::Bartlett,
        LagWindow::TukeyHanning,
        LagWindow::BartlettFlatTop,
        LagWindow::SimpleTruncation,
        LagWindow::Parzen { q: 2 },
        LagWindow::Parzen { q: 3 },
        LagWindow::ScaledBartlett { eta: 2.0 },
        LagWindow::ScaledBartlett { eta: 0.5 },
    ];

    #[test]
    fn weights_at_named_lags() {
        assert_eq!(window_weight(&LagWindow::Bartlett, 0, 10).unwrap(), 1.0);
        assert_eq!(window_weight(&LagWindow::Bartlett, 5, 10).unwrap(), 0.5);
        assert_eq!(window_weight(&LagWindow::BartlettFlatTop, 5, 10).unwrap(), 1.0);
        assert!((window_weight(&LagWindow::BartlettFlatTop, 8, 10).unwrap() - 0.4).abs() < 1e-15);
        assert!((window_weight(&LagWindow::TukeyHanning, 5, 10).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn second_differences_match_closed_forms() {
        let d = |w: LagWindow, k| delta2(&w, k, 10).unwrap();
        assert!(d(LagWindow::Bartlett, 3).abs() < 1e-15);
        assert!((d(LagWindow::Bartlett, 10) - 0.1).abs() < 1e-15);
        assert!((d(LagWindow::BartlettFlatTop, 5) + 0.2).abs() < 1e-15);
        assert!((d(LagWindow::BartlettFlatTop, 10) - 0.2).abs() < 1e-15);
        assert_eq!(d(LagWindow::SimpleTruncation, 10), 1.0);
        assert_eq!(d(LagWindow::SimpleTruncation, 9), -1.0);
    }

    #[test]
    fn first_difference() {
        assert!((delta1(&LagWindow::Bartlett, 4, 10).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(delta1(&LagWindow::BartlettFlatTop, 3, 10).unwrap(), 0.0);
    }

    #[test]
    fn configuration_errors() {
        assert!(window_weight(&LagWindow::Parzen { q: 0 }, 1, 10).is_err());
        assert!(window_weight(&LagWindow::ScaledBartlett { eta: 1.0 }, 1, 10).is_err());
        assert!(window_weight(&LagWindow::ScaledBartlett { eta: -0.5 }, 1, 10).is_err());
        assert!(window_weight(&LagWindow::ScaledBartlett { eta: 2.5 }, 1, 10).is_err());
        assert!(window_weight(&LagWindow::Bartlett, 1, 0).is_err());
        assert!("parzen".parse::<LagWindow>().is_err());
        assert!("scaled-bartlett".parse::<LagWindow>().is_err());
        assert!("scaled-bartlett:1".parse::<LagWindow>().is_err());
        let err = "hann".parse::<LagWindow>().unwrap_err().to_string();
        assert!(err.contains("tukey-hanning") && err.contains("flat-top"));
    }

    #[test]
    fn names_round_trip() {
        for w in ALL {
            assert_eq!(w.to_string().parse::<LagWindow>().unwrap(), w);
        }
    }

    #[test]
    fn flat_top_rounds_b_down_to_even() {
        let w = LagWindow::BartlettFlatTop;
        assert_eq!(w.effective_b(11), 10);
        assert_eq!(w.effective_b(1), 2);
        assert_eq!(window_weight(&w, 8, 11).unwrap(), window_weight(&w, 8, 10).unwrap());
        assert_eq!(check_conditions(&w, 65, 1e-9).unwrap().b, 64);
    }

    #[test]
    fn bartlett_condition_sum_is_one() {
        let r = check_conditions(&LagWindow::Bartlett, 100, DEFAULT_CONDITION_TOL).unwrap();
        assert!((r.sum_k_delta2 - 1.0).abs() < 1e-12);
        assert!(r.cond1_holds && r.passes);
    }

    #[test]
    fn tukey_hanning_condition_sum_is_one() {
        let r = check_conditions(&LagWindow::TukeyHanning, 64, DEFAULT_CONDITION_TOL).unwrap();
        assert!((r.sum_k_delta2 - 1.0).abs() < 1e-10);
        assert!(r.passes);
    }

    #[test]
    fn truncation_abs_sum_does_not_decay() {
        // delta2(b-1) = -1 and delta2(b) = 1, whatever b is.
        for b in [4, 10, 37, 256] {
            let r = check_conditions(&LagWindow::SimpleTruncation, b, 1e-9).unwrap();
            assert_eq!(r.abs_sum_delta2, 2.0);
            assert!(r.abs_sum_trend.iter().all(|&(_, s)| s == 2.0));
            assert!(!r.abs_sum_decays);
            assert!(!r.passes);
        }
    }

    #[test]
    fn scaled_bartlett_abs_sum_does_not_vanish() {
        let r = check_conditions(&LagWindow::ScaledBartlett { eta: 2.0 }, 8, 1e-9).unwrap();
        // |delta2(b-1)| + |delta2(b)| = 1 + (1 - 2/b) -> 2.
        for &(b, s) in &r.abs_sum_trend {
            assert!((s - (2.0 - 2.0 / b as f64)).abs() < 1e-12, "b = {b}: {s}");
        }
        assert!(!r.abs_sum_decays && !r.passes);
    }

    #[test]
    fn flat_top_abs_sum_is_four_over_b() {
        let r = check_conditions(&LagWindow::BartlettFlatTop, 32, 1e-9).unwrap();
        for &(b, s) in &r.abs_sum_trend {
            assert!((s - 4.0 / b as f64).abs() < 1e-14);
        }
        assert!(r.passes);
    }

    #[test]
    fn condition_check_preconditions() {
        assert!(check_conditions(&LagWindow::Bartlett, 1, 1e-9).is_err());
        assert!(check_conditions(&LagWindow::Bartlett, 10, 0.0).is_err());
    }

    fn any_window() -> impl Strategy<Value = LagWindow> {
        prop_oneof![
            Just(LagWindow::Bartlett),
            Just(LagWindow::TukeyHanning),
            Just(LagWindow::BartlettFlatTop),
            Just(LagWindow::SimpleTruncation),
            (1u32..6).prop_map(|q| LagWindow::Parzen { q }),
            (0.05f64..2.0)
                .prop_filter("eta != 1", |e| (e - 1.0).abs() > 1e-9)
                .prop_map(|eta| LagWindow::ScaledBartlett { eta }),
        ]
    }

    proptest! {
        #[test]
        fn lag_window_axioms(w in any_window(), b in 1usize..500, k in -1000i64..1000) {
            let wk = window_weight(&w, k, b).unwrap();
            prop_assert_eq!(wk, window_weight(&w, -k, b).unwrap());
            prop_assert!(wk.abs() <= 1.0);
            prop_assert_eq!(window_weight(&w, 0, b).unwrap(), 1.0);
            if k.unsigned_abs() as usize >= w.effective_b(b) {
                prop_assert_eq!(wk, 0.0);
            }
        }

        #[test]
        fn delta2_is_the_literal_second_difference(w in any_window(), b in 1usize..500, k in 1i64..501) {
            let lhs = delta2(&w, k, b).unwrap();
            let rhs = window_weight(&w, k - 1, b).unwrap() - 2.0 * window_weight(&w, k, b).unwrap()
                + window_weight(&w, k + 1, b).unwrap();
            prop_assert_eq!(lhs.to_bits(), rhs.to_bits());
        }

        #[test]
        fn flat_top_delta2_support(half in 2usize..300) {
            let b = 2 * half;
            let d = second_differences(&LagWindow::BartlettFlatTop, b).unwrap();
            let support: Vec<usize> = (1..=b).filter(|&k| d[k].abs() > 1e-12).collect();
            prop_assert_eq!(support, vec![half, b]);
        }
    }
}
