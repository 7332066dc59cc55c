mod common;

use approx::assert_relative_eq;
use oamrs::fp::{inner_step, optimize, surrogate_objective, update_auxiliaries, FpConfig};
use oamrs::metrics::{evaluate_problem, sinr_common, sinr_private, ExclusionRule, SplitPolicy, Target};
use oamrs::signal::total_power;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rule(independent: bool) -> ExclusionRule {
    if independent {
        ExclusionRule::Independent
    } else {
        ExclusionRule::Joint
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sinr_grids_match_brute_force(seed in any::<u64>(), independent in any::<bool>(), fraction in 0.05f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let problem = common::random_problem(&mut rng, 2, rule(independent));
        let p = common::random_precoder(&mut rng, &problem, fraction);
        for (target, h, rows) in [(Target::A, &problem.channels.a, problem.rx_a()), (Target::B, &problem.channels.b, problem.rx_b())] {
            let gp = sinr_private(h, &p, target, problem.noise_power, problem.exclusion).unwrap();
            let gc = sinr_common(h, &p, target, problem.noise_power, problem.exclusion).unwrap();
            for m in 0..problem.tx_count() {
                for n in 0..rows {
                    assert_relative_eq!(gp.values[(m, n)], common::private_sinr(&problem, &p, target, m, n), max_relative = 1e-10);
                    assert_relative_eq!(gc.values[(m, n)], common::common_sinr(&problem, &p, target, m, n), max_relative = 1e-10);
                }
            }
        }
        let report = evaluate_problem(&problem, &p, SplitPolicy::Equal).unwrap();
        assert_relative_eq!(report.sum, common::true_sum(&problem, &p), max_relative = 1e-10);
    }

    #[test]
    fn surrogate_is_tight_at_updated_auxiliaries(seed in any::<u64>(), independent in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let problem = common::random_problem(&mut rng, 3, rule(independent));
        let p = common::random_precoder(&mut rng, &problem, 0.7);
        let aux = update_auxiliaries(&problem, &p).unwrap();
        let s = surrogate_objective(&problem, &p, &aux).unwrap();
        prop_assert!((s - common::true_sum(&problem, &p)).abs() <= 1e-9);
    }

    #[test]
    fn surrogate_never_exceeds_objective(seed in any::<u64>(), independent in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let problem = common::random_problem(&mut rng, 3, rule(independent));
        let anchor = common::random_precoder(&mut rng, &problem, 0.5);
        let aux = update_auxiliaries(&problem, &anchor).unwrap();
        let p = common::random_precoder(&mut rng, &problem, 0.9);
        let s = surrogate_objective(&problem, &p, &aux).unwrap();
        prop_assert!(s <= common::true_sum(&problem, &p) + 1e-9);
    }

    #[test]
    fn inner_step_ascends_and_stays_feasible(seed in any::<u64>(), independent in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let problem = common::random_problem(&mut rng, 3, rule(independent));
        let p = common::random_precoder(&mut rng, &problem, 1.0);
        let aux = update_auxiliaries(&problem, &p).unwrap();
        let before = surrogate_objective(&problem, &p, &aux).unwrap();
        let q = inner_step(&problem, &p, &aux, &FpConfig::default()).unwrap();
        prop_assert!(total_power(&q) <= problem.power_budget * (1.0 + 1e-9));
        prop_assert!(surrogate_objective(&problem, &q, &aux).unwrap() >= before - 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn traces_are_monotone_and_feasible(seed in any::<u64>(), independent in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let problem = common::random_problem(&mut rng, 2, rule(independent));
        let cfg = FpConfig { starts: 1, ..FpConfig::default().with_seed(seed) };
        let (state, report) = optimize(&problem, &cfg).unwrap();
        for w in state.objective_trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9);
        }
        for p in &state.power_trace {
            prop_assert!(*p <= problem.power_budget * (1.0 + 1e-9));
        }
        prop_assert!(report.sum >= 0.0);
        prop_assert!((report.sum - common::true_sum(&problem, &state.precoder)).abs() <= 1e-9);
    }
}

#[test]
fn toy_instance_matches_grid_for_several_seeds() {
    let problem = common::toy_problem();
    let oracle = common::toy_grid_optimum(false);
    assert!((oracle - 11f64.log2()).abs() < 1e-12);
    let mut sums = Vec::new();
    for seed in [0, 1, 2, 3] {
        let (_, report) = optimize(&problem, &FpConfig::default().with_seed(seed)).unwrap();
        assert!((report.sum - oracle).abs() <= 0.02 * oracle, "seed {seed}: {}", report.sum);
        sums.push(report.sum);
    }
    assert!((sums[0] - sums[1]).abs() <= 0.01 * sums[0]);
}

#[test]
fn toy_ratios_match_scalar_values() {
    let problem = common::toy_problem();
    let mut p = problem.zero_precoder();
    p.private_a[(0, 0)] = common::c(1.0);
    p.private_b[(0, 0)] = common::c(0.5);
    p.common[(0, 0)] = common::c(1.0);
    let aux = update_auxiliaries(&problem, &p).unwrap();
    assert_relative_eq!(aux.y_private_a().unwrap()[(0, 0)].re, 1.0 / 0.35, max_relative = 1e-12);
    assert_relative_eq!(common::private_sinr(&problem, &p, Target::A, 0, 0), 2.857142857142857, max_relative = 1e-12);
}
