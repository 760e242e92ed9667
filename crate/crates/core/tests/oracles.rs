mod common;

use common::*;
use covkit::estimators::{bm, obm, sv, sv_flat_top_fast, wbm, wbm_flat_top_fast};
use covkit::{ChainMatrix, Estimator, LagWindow, StreamState};
use nalgebra::DMatrix;
use proptest::prelude::*;

const WINDOWS: [LagWindow; 6] = [
    LagWindow::Bartlett,
    LagWindow::TukeyHanning,
    LagWindow::BartlettFlatTop,
    LagWindow::SimpleTruncation,
    LagWindow::Parzen { q: 2 },
    LagWindow::ScaledBartlett { eta: 0.5 },
];

#[test]
fn optimized_estimators_match_naive_loops() {
    for (chain, b) in random_cases(40) {
        let check = |got: &DMatrix<f64>, want: &DMatrix<f64>, what: &str| {
            let e = rel_frob(got, want);
            assert!(e < 1e-10, "{what} n={} p={} b={b}: {e:e}", chain.n(), chain.p());
        };
        check(&bm(&chain, b).unwrap().matrix, &naive_bm(&chain, b), "bm");
        check(&obm(&chain, b).unwrap().matrix, &naive_obm(&chain, b), "obm");
        for w in WINDOWS {
            check(&sv(&chain, &w, b).unwrap().matrix, &naive_sv(&chain, &w, b), &format!("sv {w}"));
            check(&wbm(&chain, &w, b).unwrap().matrix, &naive_wbm(&chain, &w, b), &format!("wbm {w}"));
        }
        let ft = LagWindow::BartlettFlatTop;
        check(&sv_flat_top_fast(&chain, b).unwrap().matrix, &naive_sv(&chain, &ft, b), "sv ft fast");
        check(&wbm_flat_top_fast(&chain, b).unwrap().matrix, &naive_wbm(&chain, &ft, b), "wbm ft fast");
    }
}

#[test]
fn n200_p3_spectral_variance() {
    let (chain, _) = (0..)
        .map(random_case)
        .find(|(c, _)| c.n() >= 190 && c.p() == 3)
        .unwrap();
    let chain = chain.tail(190).unwrap();
    for w in WINDOWS {
        assert!(rel_frob(&sv(&chain, &w, 20).unwrap().matrix, &naive_sv(&chain, &w, 20)) < 1e-10);
    }
}

#[test]
fn bartlett_and_flat_top_identities() {
    for (chain, b) in random_cases(40) {
        let b = b - b % 2;
        let bm_b = bm(&chain, b).unwrap().matrix;
        let bm_h = bm(&chain, b / 2).unwrap().matrix;
        let wb = wbm(&chain, &LagWindow::Bartlett, b).unwrap().matrix;
        assert!(rel_frob(&wb, &bm_b) < 1e-12);
        let wf = wbm(&chain, &LagWindow::BartlettFlatTop, b).unwrap().matrix;
        let two = &bm_b * 2.0 - &bm_h;
        assert!(rel_frob(&wf, &two) < 1e-12);
        assert!(rel_frob(&wbm_flat_top_fast(&chain, b).unwrap().matrix, &wf) < 1e-12);
        let sf = sv(&chain, &LagWindow::BartlettFlatTop, b).unwrap().matrix;
        let s2 = sv(&chain, &LagWindow::Bartlett, b).unwrap().matrix * 2.0
            - sv(&chain, &LagWindow::Bartlett, b / 2).unwrap().matrix;
        assert!(rel_frob(&sf, &s2) < 1e-10);
        assert!(rel_frob(&sv_flat_top_fast(&chain, b).unwrap().matrix, &sf) < 1e-10);
    }
}

#[test]
fn streaming_matches_offline() {
    // 16 * 2^k multiples that end exactly on a batch boundary.
    for (seed, n) in [(1u64, 1024usize), (2, 4096), (3, 8192), (4, 32768)] {
        let (chain, _) = random_case(seed);
        let p = chain.p();
        let long = covkit::chains::var1_generate(
            &covkit::Var1Model::new(covkit::chains::make_phi(p, seed, 1.0, 0.5).unwrap(), seed).unwrap(),
            n,
        )
        .unwrap();
        let mut s = StreamState::with_default_nu(p).unwrap();
        for row in long.rows() {
            s.push(row).unwrap();
        }
        let b = s.current_b();
        assert_eq!(n % b, 0);
        let eb = s.estimate_bm().unwrap();
        assert_eq!(eb.b_used, b);
        assert!(rel_frob(&eb.matrix, &bm(&long, b).unwrap().matrix) < 1e-12);
        let ef = s.estimate_flat_top().unwrap();
        assert!(rel_frob(&ef.matrix, &wbm_flat_top_fast(&long, b).unwrap().matrix) < 1e-12);
    }
}

fn arb_chain() -> impl Strategy<Value = ChainMatrix> {
    (40usize..120, 1usize..4).prop_flat_map(|(n, p)| {
        proptest::collection::vec(-10.0f64..10.0, n * p)
            .prop_map(move |d| ChainMatrix::new(d, n, p).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn affine_equivariance(chain in arb_chain(), seed in 0u64..1000, b in 4usize..13) {
        let p = chain.p();
        let a = DMatrix::from_fn(p, p, |i, j| ((seed as usize + 3 * i + 7 * j) % 11) as f64 / 5.0 - 1.0)
            + DMatrix::identity(p, p) * 2.0;
        let c: Vec<f64> = (0..p).map(|i| i as f64 * 3.5 - 2.0).collect();
        let moved = chain.affine(&a, &c).unwrap();
        for e in [
            Estimator::Bm,
            Estimator::Obm,
            Estimator::Sv(LagWindow::TukeyHanning),
            Estimator::Sv(LagWindow::BartlettFlatTop),
            Estimator::Wbm(LagWindow::BartlettFlatTop),
            Estimator::Wbm(LagWindow::Parzen { q: 3 }),
        ] {
            let s = e.estimate(&chain, b).unwrap().matrix;
            let want = &a * &s * a.transpose();
            let got = e.estimate(&moved, b).unwrap().matrix;
            let scale = want.norm().max(1e-300);
            prop_assert!((&got - &want).norm() <= 1e-9 * scale, "{}", e);
        }
    }

    #[test]
    fn estimates_symmetric_with_recorded_min_eigenvalue(chain in arb_chain(), b in 4usize..13) {
        for w in WINDOWS {
            for e in [Estimator::Sv(w), Estimator::Wbm(w)] {
                let est = e.estimate(&chain, b).unwrap();
                prop_assert_eq!(&est.matrix, &est.matrix.transpose());
                let lmin = est.matrix.clone().symmetric_eigen().eigenvalues.min();
                prop_assert!((lmin - est.min_eigenvalue).abs() <= 1e-9 * est.matrix.norm().max(1.0));
            }
        }
    }
}
