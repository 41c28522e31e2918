use nash_core::oracle::{monitored_run, strategy_distance};
use nash_core::problems::*;
use nash_core::{solve, ProblemSpec, Schedule, SolveStatus, SolverParams};
use proptest::prelude::*;

type Instance = (&'static str, ProblemSpec<f64>, InstanceMeta<f64>);

fn with_known() -> Vec<Instance> {
    let (a, am) = consensus_two_boxes();
    let (b, bm) = consensus_ring();
    let (c, cm) = matching_pennies();
    let (d, dm) = shared_constraint_pair(5.0);
    let (e, em) = box_quadratic();
    vec![
        ("two boxes", a, am),
        ("ring", b, bm),
        ("pennies", c, cm),
        ("shared", d, dm),
        ("box quadratic", e, em),
    ]
}

fn schedules() -> Vec<(&'static str, Schedule)> {
    vec![
        ("sync", Schedule::synchronous()),
        ("cyclic", Schedule::cyclic(1, 4)),
        ("random", Schedule::random(11, 0.4, 5, 4)),
    ]
}

#[test]
fn fejer_separation_and_feasibility_hold_every_tick() {
    for (name, spec, meta) in with_known() {
        let zbar = meta.known.unwrap().solution_tuple(&spec);
        let params = SolverParams::for_problem(&spec);
        for (sname, schedule) in schedules() {
            let (m, _, _) = monitored_run(&spec, &params, &schedule, zbar.clone(), 1500).unwrap();
            assert!(m.worst_fejer_increase <= 1e-10, "{name}/{sname}: {}", m.worst_fejer_increase);
            assert!(m.worst_separation <= 1e-8, "{name}/{sname}: {}", m.worst_separation);
            assert!(m.worst_infeasibility <= 1e-12, "{name}/{sname}: {}", m.worst_infeasibility);
            assert!(m.worst_descent_gap <= 1e-9, "{name}/{sname}: {}", m.worst_descent_gap);
            assert_eq!(m.theta_sign_failures, 0, "{name}/{sname}");
        }
    }
}

#[test]
fn step_norms_are_summable() {
    let mut all: Vec<(&str, ProblemSpec<f64>)> = with_known().into_iter().map(|(n, s, _)| (n, s)).collect();
    all.push(("lasso", lasso_small().0));
    for (name, spec) in all {
        let mut params = SolverParams::for_problem(&spec);
        params.tol = -1.0;
        params.max_iters = 5000;
        let r = solve(&spec, &params, &Schedule::synchronous(), None).unwrap();
        assert_eq!(r.iterations(), 5000);
        let head: f64 = r.reports[..500].iter().map(|t| t.step_norm).sum();
        let tail: f64 = r.reports[4500..].iter().map(|t| t.step_norm).sum();
        assert!(tail <= 0.01 * head, "{name}: head {head}, tail {tail}");
    }
}

#[test]
fn limit_does_not_depend_on_schedule() {
    let mut all: Vec<(&str, ProblemSpec<f64>)> = with_known().into_iter().map(|(n, s, _)| (n, s)).collect();
    all.push(("lasso", lasso_small().0));
    for (name, spec) in all {
        let params = SolverParams::for_problem(&spec);
        let xs: Vec<Vec<Vec<f64>>> = schedules()
            .into_iter()
            .map(|(sname, s)| {
                let r = solve(&spec, &params, &s, None).unwrap();
                assert_eq!(r.status, SolveStatus::Converged, "{name}/{sname}");
                r.tuple.x
            })
            .collect();
        for x in &xs[1..] {
            assert!(strategy_distance(x, &xs[0]) <= 1e-4, "{name}: {x:?} vs {:?}", xs[0]);
        }
    }
}

#[test]
fn convergence_under_every_lag_bound() {
    let (spec, meta) = shared_constraint_pair::<f64>(5.0);
    let known = meta.known.unwrap();
    for d in 0..=5 {
        let mut params = SolverParams::for_problem(&spec);
        params.max_lag = d;
        let r = solve(&spec, &params, &Schedule::random(d as u64, 0.3, d, 4), None).unwrap();
        assert_eq!(r.status, SolveStatus::Converged, "D = {d}");
        assert!(strategy_distance(r.x(), &known.x) < 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_schedules_stay_fejer(seed in 0u64..10_000, prob in 0.1f64..1.0, lag in 0usize..6, window in 0usize..5) {
        let (spec, meta) = consensus_ring::<f64>();
        let zbar = meta.known.unwrap().solution_tuple(&spec);
        let params = SolverParams::for_problem(&spec);
        let schedule = Schedule::random(seed, prob, lag, window);
        prop_assert!(schedule.audit(300, 3, 0).is_empty());
        let (m, _, _) = monitored_run(&spec, &params, &schedule, zbar, 300).unwrap();
        prop_assert!(m.worst_fejer_increase <= 1e-10);
        prop_assert!(m.worst_separation <= 1e-8);
        prop_assert!(m.worst_infeasibility <= 1e-12);
    }

    #[test]
    fn shared_constraint_solutions_match_multiplier_formula(rhs in -2.0f64..15.0) {
        let (spec, meta) = shared_constraint_pair::<f64>(rhs);
        let known = meta.known.unwrap();
        let exact = nash_core::oracle::quadratic_game_exact(&spec).unwrap();
        prop_assert!(strategy_distance(&exact.x, &known.x) < 1e-10);
        prop_assert!(strategy_distance(&exact.v_star, &known.v_star) < 1e-10);
    }
}
