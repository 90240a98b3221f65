//! Property-based invariants.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rehmc_core::adapt::{finalize_shrinkage, CovarianceAccumulator, CovarianceMode, DualAveraging};
use rehmc_core::baseline::softmax;
use rehmc_core::estimators::{
    ess_from_mse, weighted_mean, weighted_quantile, weighted_variance, WeightedSampleSet,
};
use rehmc_core::hmc::accept_probability;
use rehmc_core::integrator::{leapfrog_step, simulate_trajectory};
use rehmc_core::nuts::{recycle_evenly_indices, FrozenTree};
use rehmc_core::targets::{make_gaussian, GaussianSpec};
use rehmc_core::{MassMatrix, Matrix, PhasePoint};

fn samples() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec(-100.0..100.0f64, n),
            prop::collection::vec(0.01..10.0f64, n),
        )
    })
}

proptest! {
    #[test]
    fn weighted_moments_ignore_weight_scale((v, w) in samples(), big in prop::bool::ANY) {
        let s = WeightedSampleSet::from_parts(v.clone(), w.clone()).unwrap();
        let f = if big { 1e6 } else { 1e-6 };
        let scaled = WeightedSampleSet::from_parts(v, w.iter().map(|x| x * f).collect()).unwrap();
        let (m, m2) = (weighted_mean(&s).unwrap(), weighted_mean(&scaled).unwrap());
        prop_assert!((m - m2).abs() <= 1e-9 * m.abs().max(1.0));
        let (a, b) = (weighted_variance(&s).unwrap(), weighted_variance(&scaled).unwrap());
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }

    #[test]
    fn unit_weights_match_plain_averages(v in prop::collection::vec(-50.0..50.0f64, 1..60)) {
        let s = WeightedSampleSet::unweighted(v.clone());
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        prop_assert!((weighted_mean(&s).unwrap() - mean).abs() <= 1e-12 * mean.abs().max(1.0));
        prop_assert!((weighted_variance(&s).unwrap() - var).abs() <= 1e-12 * var.max(1.0));
    }

    #[test]
    fn quantile_is_monotone((v, w) in samples(), q1 in 0.001..0.999f64, q2 in 0.001..0.999f64) {
        let s = WeightedSampleSet::from_parts(v, w).unwrap();
        let (lo, hi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
        prop_assert!(weighted_quantile(&s, lo).unwrap() <= weighted_quantile(&s, hi).unwrap());
    }

    #[test]
    fn ess_of_iid_equivalent_chain_is_n(m in 1e-8..1e3f64, n in 1usize..100_000) {
        prop_assert_eq!(ess_from_mse(m, m, n).unwrap(), n as f64);
    }

    #[test]
    fn shrinkage_matches_direct_formula(
        entries in prop::collection::vec(-2.0..2.0f64, 9),
        n in 0usize..1000,
    ) {
        // AᵀA is positive semidefinite
        let a = Matrix::from_row_major(3, 3, entries).unwrap();
        let emp = a.transpose().matmul(&a);
        let got = finalize_shrinkage(&emp, n).unwrap();
        let nf = n as f64;
        for i in 0..3 {
            for j in 0..3 {
                let ridge = if i == j { 5.0 / (5.0 + nf) * 1e-3 } else { 0.0 };
                let want = nf / (5.0 + nf) * emp[(i, j)] + ridge;
                prop_assert!((got[(i, j)] - want).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn diagonal_mode_is_dense_diagonal(
        pts in prop::collection::vec((prop::collection::vec(-10.0..10.0f64, 3), 0.1..5.0f64), 1..50),
    ) {
        let mut dense = CovarianceAccumulator::new(3, CovarianceMode::Dense);
        let mut diag = CovarianceAccumulator::new(3, CovarianceMode::Diagonal);
        for (x, w) in &pts {
            dense.update(x, *w).unwrap();
            diag.update(x, *w).unwrap();
        }
        let (a, b) = (dense.covariance(), diag.covariance());
        prop_assert!(a.max_asymmetry() == 0.0);
        for i in 0..3 {
            prop_assert!((a[(i, i)] - b[(i, i)]).abs() <= 1e-12);
        }
    }

    #[test]
    fn dual_averaging_is_deterministic(stats in prop::collection::vec(0.0..1.0f64, 1..200)) {
        let mut a = DualAveraging::new(0.3, 0.7).unwrap();
        let mut b = DualAveraging::new(0.3, 0.7).unwrap();
        for s in &stats {
            a.update(*s);
            b.update(*s);
        }
        prop_assert_eq!(a.final_step_size().to_bits(), b.final_step_size().to_bits());
    }

    #[test]
    fn softmax_is_a_probability_vector(x in prop::collection::vec(-1e3..1e3f64, 1..30)) {
        let w = softmax(&x);
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(w.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn leapfrog_is_reversible(
        theta in prop::collection::vec(-3.0..3.0f64, 3),
        p in prop::collection::vec(-3.0..3.0f64, 3),
        eps in 0.01..0.5f64,
        steps in 1usize..40,
    ) {
        let t = make_gaussian(GaussianSpec::Diagonal { variances: vec![1.0, 2.0, 0.5] }).unwrap();
        let m = MassMatrix::identity(3);
        let z = PhasePoint::new(theta.clone(), p.clone(), &t, &m).unwrap();
        let end = simulate_trajectory(&z, eps, steps, &t, &m).unwrap().pop().unwrap();
        let mut flipped = end.clone();
        flipped.negate_momentum();
        let mut back = simulate_trajectory(&flipped, eps, steps, &t, &m).unwrap().pop().unwrap();
        back.negate_momentum();
        for (a, b) in back.theta().iter().zip(&theta) {
            prop_assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
        }
        for (a, b) in back.momentum().iter().zip(&p) {
            prop_assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
        }
    }

    #[test]
    fn acceptance_probability_is_in_unit_interval(
        a in -5.0..5.0f64, b in -5.0..5.0f64, pa in -5.0..5.0f64, pb in -5.0..5.0f64,
    ) {
        let t = make_gaussian(GaussianSpec::IidStandard { dim: 1 }).unwrap();
        let m = MassMatrix::identity(1);
        let x = PhasePoint::new(vec![a], vec![pa], &t, &m).unwrap();
        let y = PhasePoint::new(vec![b], vec![pb], &t, &m).unwrap();
        let alpha = accept_probability(&x, &y);
        prop_assert!((0.0..=1.0).contains(&alpha));
        let step = leapfrog_step(&x, 0.0, &t, &m).unwrap();
        prop_assert_eq!(accept_probability(&x, &step), 1.0);
    }

    #[test]
    fn evenly_spread_allocates_exactly_k(
        mask in prop::collection::vec(prop::bool::ANY, 16),
        k in 1usize..40,
        seed in 0u64..1000,
    ) {
        prop_assume!(mask.iter().any(|a| *a));
        let t = make_gaussian(GaussianSpec::IidStandard { dim: 1 }).unwrap();
        let m = MassMatrix::identity(1);
        let leaves: Vec<PhasePoint> = (0..16)
            .map(|i| PhasePoint::new(vec![i as f64], vec![0.0], &t, &m).unwrap())
            .collect();
        let tree = FrozenTree::new(leaves, mask.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut other = ChaCha8Rng::seed_from_u64(seed + 1);
        for idx in [
            recycle_evenly_indices(&tree, k, &mut rng),
            tree.recycle_evenly_streaming(k, &mut rng, &mut other),
        ] {
            prop_assert_eq!(idx.len(), k);
            prop_assert!(idx.iter().all(|&i| mask[i]));
        }
        let simple = tree.recycle_simple(k, &mut rng, &mut other);
        prop_assert_eq!(simple.len(), k.min(tree.n_acceptable()));
        let mut sorted = simple.clone();
        sorted.sort_unstable();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), simple.len());
        prop_assert!(mask[tree.select_uniform(&mut rng, &mut other)]);
    }
}
