//! Property tests for the operator invariants, Γ-calculus identities, the
//! population chain, and the perturbation bounds.

use difgeo::bridge::population_coarse_chain;
use difgeo::data::{FeatureCloud, LabelVector};
use difgeo::nalgebra::{DMatrix, DVector};
use difgeo::observables::{gamma, label_boundary_energy, raw_leakage};
use difgeo::operator::{build_operator, remove_self_loops, DEFAULT_MASS_FLOOR};
use difgeo::stability::{lemma_bounds_check, lipschitz_bound_check};
use proptest::prelude::*;

fn cloud_strategy(max_n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..=max_n, 1usize..=3).prop_flat_map(|(n, d)| {
        prop::collection::vec(prop::collection::vec(-1.0..1.0f64, d), n)
    })
}

fn clamp_to_unit_ball(rows: &mut [Vec<f64>]) {
    for row in rows.iter_mut() {
        let norm: f64 = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1.0 {
            for v in row.iter_mut() {
                *v /= norm;
            }
        }
    }
}

proptest! {
    #[test]
    fn operator_rows_are_stochastic(rows in cloud_strategy(16), eps in 0.1..4.0f64) {
        let cloud = FeatureCloud::from_rows(&rows).unwrap();
        let op = build_operator(&cloud, eps).unwrap();
        for i in 0..cloud.n() {
            let row_sum: f64 = op.transition().row(i).sum();
            prop_assert!((row_sum - 1.0).abs() <= 1e-12);
            prop_assert_eq!(op.kernel()[(i, i)], 1.0);
            for j in 0..cloud.n() {
                prop_assert_eq!(op.kernel()[(i, j)], op.kernel()[(j, i)]);
            }
        }
    }

    #[test]
    fn gamma_is_bilinear_and_nonnegative(
        rows in cloud_strategy(12),
        scale_a in -3.0..3.0f64,
        scale_b in -3.0..3.0f64,
        seed in 0u64..1000,
    ) {
        let cloud = FeatureCloud::from_rows(&rows).unwrap();
        let n = cloud.n();
        let op = build_operator(&cloud, 0.5).unwrap();
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let f = DVector::from_fn(n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let h = DVector::from_fn(n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let k = DVector::from_fn(n, |_, _| rng.random::<f64>() * 2.0 - 1.0);

        // linearity in the first slot
        let combo = &f * scale_a + &h * scale_b;
        let lhs = gamma(&op, &combo, &k).unwrap();
        let rhs = gamma(&op, &f, &k).unwrap() * scale_a + gamma(&op, &h, &k).unwrap() * scale_b;
        prop_assert!((lhs - rhs).abs().max() <= 1e-12);

        // symmetry and positivity
        let fh = gamma(&op, &f, &h).unwrap();
        let hf = gamma(&op, &h, &f).unwrap();
        prop_assert!((fh - hf).abs().max() <= 1e-13);
        let ff = gamma(&op, &f, &f).unwrap();
        prop_assert!(ff.min() >= -1e-15);
    }

    #[test]
    fn energy_identity_holds(rows in cloud_strategy(14), eps in 0.2..2.0f64, label_seed in 0u64..100) {
        let cloud = FeatureCloud::from_rows(&rows).unwrap();
        let n = cloud.n();
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(label_seed);
        let k = 2 + (n % 2);
        let labels = LabelVector::new((0..n).map(|_| rng.random_range(0..k)).collect(), k).unwrap();

        let op = build_operator(&cloud, eps).unwrap();
        let direct = label_boundary_energy(&op, &labels).unwrap();
        let mut via_gamma = 0.0;
        for a in 0..k {
            let g_a = DVector::from_fn(n, |i, _| if labels.label(i) == a { 1.0 } else { 0.0 });
            via_gamma += gamma(&op, &g_a, &g_a).unwrap().sum() / n as f64;
        }
        prop_assert!((direct - via_gamma).abs() <= 1e-12);
        let raw = raw_leakage(&op, &labels).unwrap();
        prop_assert!((raw - eps * direct).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&raw));
    }

    #[test]
    fn self_loop_identity_on_valid_rows(rows in cloud_strategy(12), eps in 0.2..2.0f64) {
        let cloud = FeatureCloud::from_rows(&rows).unwrap();
        let op = build_operator(&cloud, eps).unwrap();
        let slf = remove_self_loops(&op, DEFAULT_MASS_FLOOR);
        for i in 0..cloud.n() {
            if !slf.valid_rows()[i] {
                continue;
            }
            let row_sum: f64 = slf.transition().row(i).sum();
            prop_assert!((row_sum - 1.0).abs() <= 1e-12);
            for j in 0..cloud.n() {
                if i != j {
                    let lhs = slf.transition()[(i, j)] * (1.0 - op.transition()[(i, i)]);
                    prop_assert!((lhs - op.transition()[(i, j)]).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn population_chain_detailed_balance(
        k in 2usize..8,
        seed in 0u64..10_000,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut c = DMatrix::zeros(k, k);
        for a in 0..k {
            for b in (a + 1)..k {
                let v = rng.random::<f64>() * 5.0;
                c[(a, b)] = v;
                c[(b, a)] = v;
            }
        }
        let chain = population_coarse_chain(&c).unwrap();
        for a in 0..k {
            let row_sum: f64 = chain.transition.row(a).sum();
            prop_assert!((row_sum - 1.0).abs() <= 1e-12);
            for b in 0..k {
                let lhs = chain.stationary[a] * chain.transition[(a, b)];
                let rhs = chain.stationary[b] * chain.transition[(b, a)];
                prop_assert!((lhs - rhs).abs() <= 1e-14);
            }
        }
        prop_assert!((0.0..=1.0).contains(&chain.leakage));
    }

    #[test]
    fn lipschitz_and_lemma_bounds_hold(
        mut rows in cloud_strategy(10),
        shift_seed in 0u64..10_000,
        log_sigma in -8.0..-1.0f64,
        eps_pick in 0usize..3,
    ) {
        clamp_to_unit_ball(&mut rows);
        let cloud = FeatureCloud::from_rows(&rows).unwrap();
        let sigma = 10f64.powf(log_sigma);
        let perturbed = difgeo::stability::perturb_cloud(&cloud, sigma, shift_seed).unwrap();
        let mut p_rows: Vec<Vec<f64>> = (0..perturbed.n())
            .map(|i| (0..perturbed.dim()).map(|j| perturbed.points()[(i, j)]).collect())
            .collect();
        clamp_to_unit_ball(&mut p_rows);
        let perturbed = FeatureCloud::from_rows(&p_rows).unwrap();

        let eps = [0.5, 1.0, 2.0][eps_pick];
        let check = lipschitz_bound_check(&cloud, &perturbed, eps).unwrap();
        prop_assert!(check.satisfied, "{check:?}");
        let lemmas = lemma_bounds_check(&cloud, &perturbed, eps).unwrap();
        prop_assert!(lemmas.distance_ok && lemmas.kernel_ok, "{lemmas:?}");
    }
}
