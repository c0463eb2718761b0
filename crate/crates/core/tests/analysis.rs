mod common;

use cmdp_psrl::analysis::{check_span_bound, diameter, gain_and_bias, long_run_average, stationary_distribution};
use cmdp_psrl::envs::{build_queue_env, random_ergodic_cmdp, QueueSpec};
use cmdp_psrl::{Signal, StochasticPolicy, TransitionKernel};
use common::{power_iteration, push_forward, random_policy};
use proptest::prelude::*;

#[test]
fn stationary_matches_power_iteration() {
    for seed in 0..100 {
        let s_n = 2 + seed as usize % 7;
        let a_n = 1 + seed as usize % 4;
        let cmdp = random_ergodic_cmdp(seed, s_n, a_n, 0).unwrap();
        let pi = random_policy(seed, s_n, a_n);
        let d = stationary_distribution(cmdp.kernel(), &pi).unwrap();
        let reference = power_iteration(cmdp.kernel(), &pi, 100_000);
        for (x, y) in d.iter().zip(&reference) {
            assert!((x - y).abs() < 1e-8, "seed {seed}");
        }
        let next = push_forward(cmdp.kernel(), &pi, &d);
        for (x, y) in d.iter().zip(&next) {
            assert!((x - y).abs() < 1e-10, "seed {seed}: not a fixed point");
        }
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn queue_uniform_policy_stationary() {
    let cmdp = build_queue_env(&QueueSpec::default()).unwrap();
    let pi = StochasticPolicy::uniform(6, 16);
    let d = stationary_distribution(cmdp.kernel(), &pi).unwrap();
    let reference = power_iteration(cmdp.kernel(), &pi, 10_000);
    for (x, y) in d.iter().zip(&reference) {
        assert!((x - y).abs() < 1e-8);
    }
}

#[test]
fn long_run_average_is_stationary_expectation() {
    let cmdp = random_ergodic_cmdp(4, 5, 3, 2).unwrap();
    let pi = random_policy(4, 5, 3);
    let d = power_iteration(cmdp.kernel(), &pi, 100_000);
    for (signal, table) in [
        (Signal::Reward, cmdp.reward()),
        (Signal::Cost(0), &cmdp.costs()[0]),
        (Signal::Cost(1), &cmdp.costs()[1]),
    ] {
        let v = long_run_average(&cmdp, &pi, signal).unwrap();
        assert!((v - common::average(&d, &pi, table)).abs() < 1e-9);
    }
    assert!(long_run_average(&cmdp, &pi, Signal::Cost(2)).is_err());
}

#[test]
fn gain_matches_long_run_average() {
    for seed in 0..20 {
        let cmdp = random_ergodic_cmdp(seed, 4, 2, 0).unwrap();
        let pi = random_policy(seed, 4, 2);
        let (gain, bias) = gain_and_bias(cmdp.kernel(), &pi, cmdp.reward()).unwrap();
        let avg = long_run_average(&cmdp, &pi, Signal::Reward).unwrap();
        assert!((gain - avg).abs() < 1e-9);
        assert_eq!(bias[0], 0.0);
    }
}

#[test]
fn span_within_scaled_diameter() {
    for seed in 0..50 {
        let s_n = 2 + seed as usize % 5;
        let a_n = 1 + seed as usize % 3;
        let cmdp = random_ergodic_cmdp(1000 + seed, s_n, a_n, 1).unwrap();
        let pi = random_policy(seed, s_n, a_n);
        for table in [cmdp.reward(), &cmdp.costs()[0]] {
            let check = check_span_bound(cmdp.kernel(), &pi, table).unwrap();
            assert!(check.holds(), "seed {seed}: span {} > {}", check.span, check.bound());
        }
    }
}

#[test]
fn queue_diameter() {
    // Value iteration in an independent Python reference.
    let cmdp = build_queue_env(&QueueSpec::default()).unwrap();
    let d = diameter(cmdp.kernel()).unwrap();
    assert!((d - 13.8916015625).abs() < 1e-6, "{d}");
}

#[test]
fn two_state_diameter() {
    // From either state the best action moves with probability 1/2.
    let kernel = TransitionKernel::new(2, 2, vec![0.9, 0.1, 0.5, 0.5, 0.5, 0.5, 0.8, 0.2]).unwrap();
    assert!((diameter(&kernel).unwrap() - 2.0).abs() < 1e-8);
}

#[test]
fn disconnected_kernel_has_no_diameter() {
    let kernel = TransitionKernel::new(2, 1, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
    assert!(diameter(&kernel).is_err());
}

fn permute(kernel: &TransitionKernel, perm: &[usize]) -> TransitionKernel {
    // state s of the new kernel is state perm[s] of the old one
    TransitionKernel::from_fn(kernel.num_states(), kernel.num_actions(), |s, a, x| {
        kernel.prob(perm[s], a, perm[x])
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn diameter_is_invariant_under_relabeling(seed in 0u64..10_000, rot in 0usize..5) {
        let cmdp = random_ergodic_cmdp(seed, 5, 2, 0).unwrap();
        let perm: Vec<usize> = (0..5).map(|s| (s + rot) % 5).rev().collect();
        let a = diameter(cmdp.kernel()).unwrap();
        let b = diameter(&permute(cmdp.kernel(), &perm)).unwrap();
        prop_assert!((a - b).abs() < 1e-7 * (1.0 + a));
    }

    #[test]
    fn stationary_is_a_distribution(seed in 0u64..10_000, s_n in 1usize..7, a_n in 1usize..4) {
        let cmdp = random_ergodic_cmdp(seed, s_n, a_n, 0).unwrap();
        let pi = random_policy(seed, s_n, a_n);
        let d = stationary_distribution(cmdp.kernel(), &pi).unwrap();
        prop_assert!(d.iter().all(|&x| x >= 0.0));
        prop_assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
