mod common;

use cmdp_psrl::envs::{build_queue_env, random_ergodic_cmdp, QueueSpec};
use cmdp_psrl::lp::{build_occupancy_lp, solve_constrained_occupancy, solve_lp, LinearProgram, LpStatus};
use cmdp_psrl::posterior::{sample_kernel, TransitionCounts};
use cmdp_psrl::rng::{stream_rng, Stream};
use cmdp_psrl::{Direction, Error, OccupancyMeasure, TabularCmdp};
use common::{average, grid_oracle, stationary_exact, two_action_policy, vertex_enumeration};
use rand::Rng;

#[test]
fn simplex_matches_vertex_enumeration() {
    let mut rng = stream_rng(7, Stream::Generator);
    for _ in 0..20 {
        let n = 3;
        let m = rng.random_range(2..=4);
        let c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..2.0)).collect();
        let mut rows: Vec<(Vec<f64>, f64)> = (0..m)
            .map(|_| ((0..n).map(|_| rng.random_range(-1.0..3.0)).collect(), rng.random_range(0.5..4.0)))
            .collect();
        // keep the region bounded
        rows.push((vec![1.0; n], 5.0));
        let mut lp = LinearProgram::new(c.clone());
        for (a, b) in &rows {
            lp.add_le(a.clone(), *b);
        }
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        let oracle = vertex_enumeration(&c, &rows).unwrap();
        assert!((sol.objective_value - oracle).abs() < 1e-7, "{} vs {}", sol.objective_value, oracle);
    }
}

#[test]
fn unconstrained_matches_deterministic_enumeration() {
    for seed in 0..20 {
        let s_n = 2 + (seed as usize % 2);
        let cmdp = random_ergodic_cmdp(seed, s_n, 2, 0).unwrap();
        let lp_value = solve_constrained_occupancy(&cmdp, None).unwrap().optimal_value;
        let mut best = f64::NEG_INFINITY;
        for mask in 0..(1u32 << s_n) {
            let p: Vec<f64> = (0..s_n).map(|s| f64::from((mask >> s) & 1)).collect();
            let pi = two_action_policy(&p);
            let d = stationary_exact(cmdp.kernel(), &pi);
            best = best.max(average(&d, &pi, cmdp.reward()));
        }
        assert!((lp_value - best).abs() < 1e-6, "seed {seed}: {lp_value} vs {best}");
    }
}

#[test]
fn single_constraint_matches_grid_oracle() {
    for seed in 0..20 {
        let s_n = 2 + (seed as usize % 2);
        let cmdp = random_ergodic_cmdp(100 + seed, s_n, 2, 1).unwrap();
        let lp_value = solve_constrained_occupancy(&cmdp, None).unwrap().optimal_value;
        let oracle = grid_oracle(&cmdp);
        assert!(lp_value >= oracle - 1e-9, "seed {seed}: LP {lp_value} below oracle {oracle}");
        assert!(lp_value - oracle < 1e-3, "seed {seed}: LP {lp_value} vs oracle {oracle}");
    }
}

#[test]
fn solutions_are_valid_occupancies_and_feasible() {
    for seed in 0..50 {
        let cmdp = random_ergodic_cmdp(seed, 5, 3, 2).unwrap();
        let sol = solve_constrained_occupancy(&cmdp, None).unwrap();
        let occ = OccupancyMeasure::new(sol.occupancy.table().clone(), cmdp.kernel()).unwrap();
        for k in 0..2 {
            assert!(occ.expectation(&cmdp.costs()[k]) <= cmdp.thresholds()[k] + 1e-8);
        }
        assert!((occ.expectation(cmdp.reward()) - sol.optimal_value).abs() < 1e-9);

        // The extracted policy reproduces the occupancy on the true chain.
        let d = stationary_exact(cmdp.kernel(), &sol.policy);
        for s in 0..5 {
            for a in 0..3 {
                assert!((d[s] * sol.policy.prob(s, a) - occ.get(s, a)).abs() < 1e-8);
            }
        }
    }
}

#[test]
fn vacuous_constraint_does_not_change_the_optimum() {
    for seed in 0..10 {
        let base = random_ergodic_cmdp(seed, 4, 3, 0).unwrap();
        let cost = cmdp_psrl::StateActionTable::from_fn(4, 3, |s, a| (s + a) as f64);
        let loose = TabularCmdp::new(
            base.kernel().clone(),
            base.reward().clone(),
            vec![cost],
            vec![1e6],
            vec![Direction::AtMost],
        )
        .unwrap();
        let a = solve_constrained_occupancy(&base, None).unwrap().optimal_value;
        let b = solve_constrained_occupancy(&loose, None).unwrap().optimal_value;
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn optimum_is_monotone_in_threshold() {
    for seed in 0..10 {
        let cmdp = random_ergodic_cmdp(seed, 4, 3, 1).unwrap();
        let mut last = f64::NEG_INFINITY;
        for step in 0..8 {
            let threshold = cmdp.thresholds()[0] + 0.05 * step as f64;
            let relaxed = TabularCmdp::new(
                cmdp.kernel().clone(),
                cmdp.reward().clone(),
                cmdp.costs().to_vec(),
                vec![threshold],
                vec![Direction::AtMost],
            )
            .unwrap();
            let v = solve_constrained_occupancy(&relaxed, None).unwrap().optimal_value;
            assert!(v >= last - 1e-9);
            last = v;
        }
    }
}

#[test]
fn impossible_threshold_is_infeasible() {
    let cmdp = random_ergodic_cmdp(3, 4, 3, 1).unwrap();
    let strict = TabularCmdp::new(
        cmdp.kernel().clone(),
        cmdp.reward().clone(),
        cmdp.costs().to_vec(),
        vec![-1.0],
        vec![Direction::AtMost],
    )
    .unwrap();
    assert_eq!(solve_constrained_occupancy(&strict, None), Err(Error::Infeasible));
}

#[test]
fn repeated_solves_are_bit_identical() {
    let cmdp = build_queue_env(&QueueSpec::default()).unwrap();
    let a = solve_constrained_occupancy(&cmdp, None).unwrap();
    let b = solve_constrained_occupancy(&cmdp, None).unwrap();
    assert_eq!(a, b);
}

#[test]
fn queue_optimum_value() {
    // Independently computed with scipy's HiGHS solver on the same program.
    let cmdp = build_queue_env(&QueueSpec::default()).unwrap();
    let sol = solve_constrained_occupancy(&cmdp, None).unwrap();
    assert!((sol.optimal_value - 4.339684866251375).abs() < 1e-9, "{}", sol.optimal_value);
}

#[test]
fn degenerate_sampled_queue_program() {
    // Occupancy LP on a posterior draw that once broke the ratio test.
    let lp = common::parse_listing(include_str!("data/degenerate_queue_lp.txt"));
    let sol = solve_lp(&lp).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    // scipy HiGHS reference value
    assert!((sol.objective_value - 3.454503746006356).abs() < 1e-9);
}

#[test]
fn sampled_queue_programs_solve_cleanly() {
    let cmdp = build_queue_env(&QueueSpec::default()).unwrap();
    let mut counts = TransitionCounts::new(6, 16);
    let mut env = stream_rng(1, Stream::Environment);
    let mut post = stream_rng(1, Stream::Posterior);
    let mut s = 0;
    for round in 0..300 {
        for _ in 0..50 {
            let a = env.random_range(0..16);
            let u: f64 = env.random();
            let row = cmdp.kernel().row(s, a);
            let mut next = 0;
            let mut acc = row[0];
            while u >= acc && next + 1 < row.len() {
                next += 1;
                acc += row[next];
            }
            counts.update(s, a, next).unwrap();
            s = next;
        }
        let kernel = sample_kernel(&counts, &mut post);
        let lp = build_occupancy_lp(&cmdp, Some(&kernel));
        match solve_lp(&lp) {
            Ok(sol) => {
                if sol.status == LpStatus::Optimal {
                    assert!(lp.max_residual(&sol.x) < 1e-8, "round {round}");
                }
            }
            Err(e) => panic!("round {round}: {e}"),
        }
    }
}
