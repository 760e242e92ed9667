//! Monte Carlo checks against closed-form truths.

use covkit::chains::{ar1_generate, make_phi};
use covkit::diagnostics::{
    coverage_experiment_levels, multivariate_ess, sequential_stop, ReferenceModel, StopEstimator,
};
use covkit::estimators::{bm, obm, wbm_flat_top_fast};
use covkit::experiment::{run_paired, PairedConfig};
use covkit::{Ar1Model, BatchSchedule, Estimator, LagWindow, StoppingConfig, StreamState};
use rayon::prelude::*;

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn ar1(phi: f64, n: usize, seed: u64) -> covkit::ChainMatrix {
    ar1_generate(&Ar1Model::new(phi, seed).unwrap(), n).unwrap()
}

#[test]
fn bm_on_iid_normals_averages_to_one() {
    let v: Vec<f64> = (0..200u64)
        .into_par_iter()
        .map(|s| bm(&ar1(0.0, 100_000, s), 46).unwrap().matrix[(0, 0)])
        .collect();
    let m = mean(&v);
    assert!((m - 1.0).abs() < 0.05, "{m}");
}

#[test]
fn obm_on_ar1_half_averages_to_four() {
    let v: Vec<f64> = (0..200u64)
        .into_par_iter()
        .map(|s| obm(&ar1(0.5, 100_000, 500 + s), 46).unwrap().matrix[(0, 0)])
        .collect();
    let m = mean(&v);
    assert!((m - 4.0).abs() < 0.4, "{m}");
}

#[test]
fn streaming_bm_on_iid_normals() {
    let v: Vec<f64> = (0..100u64)
        .into_par_iter()
        .map(|s| {
            let mut st = StreamState::with_default_nu(1).unwrap();
            for x in Ar1Model::new(0.0, 900 + s).unwrap().sampler().unwrap().take(100_000) {
                st.push(&[x]).unwrap();
            }
            st.estimate_bm().unwrap().matrix[(0, 0)]
        })
        .collect();
    let m = mean(&v);
    assert!((m - 1.0).abs() < 0.1, "{m}");
}

#[test]
fn ess_of_iid_chain_is_near_n() {
    let r: Vec<f64> = (0..100u64)
        .into_par_iter()
        .map(|s| {
            let c = ar1(0.0, 100_000, 2000 + s);
            multivariate_ess(&c, &wbm_flat_top_fast(&c, 46).unwrap()).unwrap().ess / 1e5
        })
        .collect();
    let m = mean(&r);
    assert!((0.8..=1.2).contains(&m), "{m}");
}

#[test]
fn stopping_rule_tracks_autocorrelation() {
    let cfg = StoppingConfig::new(5000.0, 1000);
    let stop = |phi: f64, seed: u64| {
        let feed = Ar1Model::new(phi, seed).unwrap().sampler().unwrap().map(|x| [x]);
        sequential_stop(feed.take(2_000_000), 1, &cfg).unwrap().stopped_at.unwrap()
    };
    let pairs: Vec<(usize, usize)> =
        (0..50u64).into_par_iter().map(|s| (stop(0.0, 3000 + s), stop(0.9, 3000 + s))).collect();
    let iid: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
    let m = mean(&iid);
    assert!((3500.0..=7500.0).contains(&m), "{m}");
    let later = pairs.iter().filter(|(a, b)| b > a).count();
    assert!(later as f64 >= 0.95 * pairs.len() as f64, "{later}");
}

#[test]
fn stopping_with_bm_estimator() {
    let cfg = StoppingConfig { estimator: StopEstimator::Bm, ..StoppingConfig::new(5000.0, 1000) };
    let feed = Ar1Model::new(0.0, 5).unwrap().sampler().unwrap().map(|x| [x]);
    let r = sequential_stop(feed.take(100_000), 1, &cfg).unwrap();
    let n = r.stopped_at.unwrap();
    assert!((3000..=8000).contains(&n), "{n}");
}

#[test]
fn iid_bm_coverage_near_nominal() {
    let r = coverage_experiment_levels(
        &ReferenceModel::Ar1 { phi: 0.0 },
        10_000,
        &Estimator::Bm,
        &BatchSchedule::PowerRule(0.5),
        &[0.9, 0.99],
        500,
        42,
    )
    .unwrap();
    assert_eq!(r[0].b, 100);
    assert!((0.86..=0.93).contains(&r[0].coverage), "{}", r[0].coverage);
    assert!(r[1].coverage >= r[0].coverage);
}

#[test]
fn mse_falls_with_n_on_fixed_phi() {
    let phi = make_phi(5, 17, 1.0, 0.5).unwrap();
    let ests = [
        Estimator::Bm,
        Estimator::Obm,
        Estimator::Sv(LagWindow::BartlettFlatTop),
        Estimator::Wbm(LagWindow::BartlettFlatTop),
        Estimator::Sv(LagWindow::TukeyHanning),
        Estimator::Wbm(LagWindow::TukeyHanning),
    ];
    let run = |n| {
        let cfg = PairedConfig {
            model: ReferenceModel::Var1 { phi: phi.clone() },
            n,
            schedule: BatchSchedule::default(),
            reps: 50,
            seed: 99,
            parallel: true,
        };
        run_paired(&cfg, &ests).unwrap()
    };
    let (small, large) = (run(10_000), run(100_000));
    for (i, e) in ests.iter().enumerate() {
        assert!(large.mean_mse(i) < small.mean_mse(i), "{e}");
    }
}
