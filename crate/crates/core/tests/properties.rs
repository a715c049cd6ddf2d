//! Randomized invariant checks. Each property encodes a structural guarantee
//! the library promises regardless of input: determinism, bounds, symmetry,
//! partition laws, and equivariances.

use cogres_core::cognition::make_delay_target;
use cogres_core::connectome::{aggregate_cbt, pearson_connectome};
use cogres_core::evaluation::make_folds;
use cogres_core::graphmetrics::{kl_divergence, KL_BINS, KL_SMOOTHING};
use cogres_core::model::{
    Activation, Connectome, ReservoirConfig, SubjectEntry, SubjectManifest, TimeSeries, UpdateForm,
};
use cogres_core::reservoir::{estimate_spectral_radius, init_reservoir, run_reservoir};
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_input(t: usize, d: usize, seed: u64) -> TimeSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    TimeSeries::new(Array2::from_shape_fn((t, d), |_| rng.gen_range(-1.0..1.0))).unwrap()
}

fn random_series(t: usize, d: usize, seed: u64) -> TimeSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    TimeSeries::new(Array2::from_shape_fn((t, d), |_| rng.gen_range(-3.0..3.0))).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn reservoir_runs_are_deterministic_and_bounded(
        seed in 0u64..500,
        t in 5usize..40,
        d in 1usize..4,
        leak in 0.05f64..1.0,
    ) {
        let cfg = ReservoirConfig {
            size: 12,
            leak,
            spectral_target: 1.2,
            seed,
            ..ReservoirConfig::default()
        };
        let w = init_reservoir(&cfg, d).unwrap();
        let input = random_input(t, d, seed ^ 0xabc);
        let h0 = Array1::zeros(12);
        let a = run_reservoir(&w, &input, &cfg, &h0).unwrap();
        let b = run_reservoir(&w, &input, &cfg, &h0).unwrap();
        prop_assert_eq!(a.states(), b.states());
        // tanh output is strictly inside (-1,1); the leak keeps convex
        // combinations of such values inside [-1,1]
        for v in a.states() {
            prop_assert!(v.abs() <= 1.0, "state {v} escaped the tanh envelope");
        }
    }

    #[test]
    fn zero_leak_freezes_the_state(seed in 0u64..200, t in 3usize..20) {
        let cfg = ReservoirConfig {
            size: 8,
            leak: 0.0,
            update_form: UpdateForm::LeakOutside,
            seed,
            ..ReservoirConfig::default()
        };
        let w = init_reservoir(&cfg, 2).unwrap();
        let input = random_input(t, 2, seed + 9);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 17);
        let h0 = Array1::from_shape_fn(8, |_| rng.gen_range(-0.5..0.5));
        let run = run_reservoir(&w, &input, &cfg, &h0).unwrap();
        for row in run.states().rows() {
            for (a, b) in row.iter().zip(h0.iter()) {
                prop_assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn pearson_connectome_is_well_formed(seed in 0u64..500, t in 3usize..40, r in 2usize..8) {
        let series = random_series(t, r, seed);
        let c = pearson_connectome(&series).unwrap();
        for i in 0..r {
            prop_assert_eq!(c.weights()[[i, i]], 1.0);
            for j in 0..r {
                prop_assert_eq!(c.weights()[[i, j]], c.weights()[[j, i]]);
                prop_assert!(c.weights()[[i, j]].abs() <= 1.0);
            }
        }
    }

    #[test]
    fn aggregation_ignores_subject_order(seed in 0u64..200, k in 1usize..5) {
        let conns: Vec<Connectome> = (0..k)
            .map(|i| pearson_connectome(&random_series(30, 5, seed * 31 + i as u64)).unwrap())
            .collect();
        let forward = aggregate_cbt(&conns).unwrap();
        let mut reversed: Vec<Connectome> = conns.clone();
        reversed.reverse();
        let backward = aggregate_cbt(&reversed).unwrap();
        prop_assert_eq!(forward.weights(), backward.weights());
    }

    #[test]
    fn radius_estimate_is_scale_equivariant(seed in 0u64..200, c in 0.25f64..4.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = Array2::from_shape_fn((10, 10), |_| rng.gen_range(-1.0..1.0));
        let base = estimate_spectral_radius(&w, 1e-10, 10_000).unwrap();
        let scaled = estimate_spectral_radius(&(&w * c), 1e-10, 10_000).unwrap();
        prop_assert!(
            (scaled - c * base).abs() <= 1e-9 * (c * base).max(1e-12),
            "rho({c} W) = {scaled}, c rho(W) = {}",
            c * base
        );
    }

    #[test]
    fn folds_partition_every_group(seed in 0u64..200, na in 3usize..20, nb in 3usize..20) {
        let mut subjects = Vec::new();
        for i in 0..na {
            subjects.push(SubjectEntry {
                id: format!("a{i}"),
                path: format!("a{i}.csv").into(),
                group: "A".into(),
            });
        }
        for i in 0..nb {
            subjects.push(SubjectEntry {
                id: format!("b{i}"),
                path: format!("b{i}.csv").into(),
                group: "B".into(),
            });
        }
        let manifest = SubjectManifest { atlas_dim: 4, subjects };
        let plan = make_folds(&manifest, 3, seed).unwrap();
        // every subject lands in exactly one fold
        prop_assert_eq!(plan.assignments().len(), na + nb);
        for fold in plan.assignments().values() {
            prop_assert!(*fold < 3);
        }
        // stratification: each fold's share of a group is within one
        // subject of the even split
        for (prefix, n) in [("a", na), ("b", nb)] {
            for fold in 0..3usize {
                let got = plan
                    .assignments()
                    .iter()
                    .filter(|(id, f)| id.starts_with(prefix) && **f == fold)
                    .count();
                let lo = n / 3;
                let hi = n.div_ceil(3);
                prop_assert!(
                    (lo..=hi).contains(&got),
                    "group {prefix}: {got} of {n} in fold {fold}"
                );
            }
        }
        // determinism under the same seed
        prop_assert_eq!(&plan, &make_folds(&manifest, 3, seed).unwrap());
    }

    #[test]
    fn kl_is_nonnegative_and_zero_on_self(seed in 0u64..500, n in 4usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let q: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let d = kl_divergence(&p, &q, KL_BINS, KL_SMOOTHING).unwrap();
        prop_assert!(d >= 0.0);
        let zero = kl_divergence(&p, &p, KL_BINS, KL_SMOOTHING).unwrap();
        prop_assert!(zero < 1e-12);
    }

    #[test]
    fn delay_target_reproduces_the_shifted_rows(seed in 0u64..200, t in 5usize..40, tau in 1u32..6) {
        let input = random_input(t, 2, seed);
        let target = make_delay_target(&input, tau);
        prop_assert_eq!(target.timepoints(), t);
        for row in 0..t {
            for col in 0..2 {
                let expect = if row >= tau as usize {
                    input.data()[[row - tau as usize, col]]
                } else {
                    0.0
                };
                prop_assert_eq!(target.data()[[row, col]], expect);
            }
        }
    }

    #[test]
    fn linear_identity_reservoir_is_exactly_the_recurrence(
        seed in 0u64..200, t in 2usize..15,
    ) {
        // leak_inside with linear activation is h(t) = a W_in x(t) + (1-a) W h(t-1);
        // replay it by hand and demand bit equality
        let cfg = ReservoirConfig {
            size: 6,
            leak: 0.3,
            spectral_target: 0.8,
            activation: Activation::Linear,
            update_form: UpdateForm::LeakInside,
            seed,
            ..ReservoirConfig::default()
        };
        let w = init_reservoir(&cfg, 2).unwrap();
        let input = random_input(t, 2, seed + 3);
        let run = run_reservoir(&w, &input, &cfg, &Array1::zeros(6)).unwrap();
        let mut h = Array1::<f64>::zeros(6);
        for step in 0..t {
            let x = input.data().row(step);
            h = w.w_in().dot(&x) * cfg.leak + w.w_res().dot(&h) * (1.0 - cfg.leak);
            for (a, b) in run.states().row(step).iter().zip(h.iter()) {
                prop_assert_eq!(a, b);
            }
        }
    }
}
