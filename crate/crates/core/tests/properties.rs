mod common;

use common::{cn_mat, cn_vec, rel};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sgalm::manifold::{extract, inner, lift, project_tangent, random_point, retract};
use sgalm::metrics;
use sgalm::model::{array_response, ChannelSet, Scenario};
use sgalm::oracle::bruteforce_metrics;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metrics_match_loops(seed in any::<u64>(), m in 1usize..12, k in 1usize..4, n in 0usize..4, extra in 0usize..3, noise in 1e-3f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let users: Vec<_> = (0..k).map(|_| cn_vec(&mut rng, m, 1.0)).collect();
        let targets: Vec<_> = (0..n).map(|_| cn_vec(&mut rng, m, 1.0)).collect();
        let v = cn_mat(&mut rng, m, k + extra, 1.0);
        let oracle = bruteforce_metrics(&v, &users, &targets, noise).unwrap();
        let sinrs = metrics::sinrs(&v, &users, noise).unwrap();
        for (a, b) in sinrs.iter().zip(&oracle.sinr) {
            prop_assert!(rel(*a, *b) <= 1e-10);
        }
        for (g, b) in targets.iter().zip(&oracle.beampattern_gain) {
            prop_assert!(rel(metrics::beampattern_gain(&v, g).unwrap(), *b) <= 1e-10);
        }
        prop_assert!(rel(metrics::transmit_power(&v), oracle.power) <= 1e-10);
        let rate: f64 = oracle.sinr.iter().map(|g| (1.0 + g).log2()).sum();
        prop_assert!(rel(metrics::sum_rate(&v, &users, noise).unwrap(), rate) <= 1e-10);
    }

    #[test]
    fn sinr_ignores_common_scaling(seed in any::<u64>(), exp in -6i32..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let users: Vec<_> = (0..3).map(|_| cn_vec(&mut rng, 6, 1.0)).collect();
        let v = cn_mat(&mut rng, 6, 4, 1.0);
        let c = 2f64.powi(exp);
        let scaled: Vec<_> = users.iter().map(|h| h * Complex64::new(c, 0.0)).collect();
        let a = metrics::sinrs(&v, &users, 0.3).unwrap();
        let b = metrics::sinrs(&v, &scaled, 0.3 * c * c).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!(rel(*x, *y) <= 1e-12);
        }
    }

    #[test]
    fn lift_extract_round_trip(seed in any::<u64>(), m in 1usize..10, cols in 1usize..5, fill in 0.01f64..1.0, p_max in 0.1f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = cn_mat(&mut rng, m, cols, 1.0);
        let v = v.scale((fill * p_max).sqrt() / v.norm());
        let point = lift(&v, p_max).unwrap();
        prop_assert!((point.matrix().norm() - 1.0).abs() <= 1e-12);
        prop_assert!((point.slack() - (1.0 - fill)).abs() <= 1e-12);
        let back = extract(&point, p_max);
        prop_assert!((&back - &v).norm() <= 1e-12 * v.norm());
    }

    #[test]
    fn lifted_residuals_match_physical(seed in any::<u64>(), m in 2usize..8, k in 1usize..3, n in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let users: Vec<_> = (0..k).map(|_| cn_vec(&mut rng, m, 1.0)).collect();
        let targets: Vec<_> = (0..n).map(|_| cn_vec(&mut rng, m, 1.0)).collect();
        let p_max = 2.0;
        let channels = ChannelSet::new(users.clone(), targets.clone(), p_max).unwrap();
        let sc = Scenario::new(channels, 0.5, vec![1.0; n], vec![2.0; k]).unwrap();
        let point = random_point(m + 1, k + n, &mut rng);
        let v = extract(&point, p_max);
        let res = metrics::residuals(&point, &sc).unwrap();
        let oracle = bruteforce_metrics(&v, &users, &targets, 0.5).unwrap();
        for (r, g) in res.sensing.iter().zip(&oracle.beampattern_gain) {
            prop_assert!((r - (1.0 - g)).abs() <= 1e-10 * g.max(1.0));
        }
        for (r, g) in res.sinr.iter().zip(&oracle.sinr) {
            prop_assert!((r - (2.0 - g)).abs() <= 1e-10 * g.max(1.0));
        }
        prop_assert!(oracle.power <= p_max * (1.0 + 1e-12));
    }

    #[test]
    fn projection_is_tangent_and_idempotent(seed in any::<u64>(), rows in 2usize..10, cols in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_point(rows, cols, &mut rng);
        let g = cn_mat(&mut rng, rows, cols, 3.0);
        let xi = project_tangent(&x, &g);
        prop_assert!(inner(x.matrix(), xi.matrix()).abs() <= 1e-12 * g.norm());
        let again = project_tangent(&x, xi.matrix());
        prop_assert!((again.matrix() - xi.matrix()).norm() <= 1e-12 * g.norm());
        let y = retract(&x, &xi, 0.7).unwrap();
        prop_assert!((y.matrix().norm() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn array_response_has_unit_entries(range in 1.0f64..100.0, angle in -90.0f64..90.0, half in 1usize..40) {
        let a = array_response(range, angle, 2 * half + 1, 5.55e-3).unwrap();
        prop_assert!(a.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        prop_assert!((a[half] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }
}
