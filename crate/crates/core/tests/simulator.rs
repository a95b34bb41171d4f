use fence_core::analysis::{build_closed_loop, solve_regulator_equation};
use fence_core::model::*;
use fence_core::simulator::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn paper_gains() -> Gains {
    Gains::new(2.2, 6.0, 0.1, 3.0, 20.0).unwrap()
}

fn c2_gains() -> Gains {
    Gains::new(2.2, 33.0, 0.1, 3.0, 20.0).unwrap()
}

fn single_agent(x: Vec2, s1: f64, dt: f64, t_end: f64) -> Scenario {
    let mut sc = Scenario::random(1, 0, paper_gains(), s1);
    sc.initial_agents = vec![AgentState::at_rest(x)];
    sc.dt = dt;
    sc.t_end = t_end;
    sc.log_stride = 1;
    sc
}

fn max_target_error(log: &TrajectoryLog, x0: Vec2, v0: Vec2, s1: f64) -> f64 {
    log.iter()
        .map(|(t, s)| {
            let (x, v) = target_state_at(x0, v0, s1, t);
            (s.target.x_d - x).norm().max((s.target.v_d - v).norm())
        })
        .fold(0.0, f64::max)
}

#[test]
fn integrated_target_matches_closed_form() {
    let (x0, v0) = (Vec2::new(2.0, 8.0), Vec2::new(0.5, 0.5));
    let log = run(&single_agent(Vec2::new(-15.0, 0.0), -0.1, 1e-3, 20.0)).unwrap();
    assert!(max_target_error(&log, x0, v0, -0.1) < 1e-10);
}

#[test]
fn target_error_is_fourth_order() {
    let (x0, v0) = (Vec2::new(2.0, 8.0), Vec2::new(0.5, 0.5));
    let coarse = max_target_error(&run(&single_agent(Vec2::ZERO, -1.0, 0.2, 20.0)).unwrap(), x0, v0, -1.0);
    let fine = max_target_error(&run(&single_agent(Vec2::ZERO, -1.0, 0.1, 20.0)).unwrap(), x0, v0, -1.0);
    let ratio = coarse / fine;
    assert!((12.0..20.0).contains(&ratio), "error ratio {ratio}");
}

#[test]
fn lone_agent_tracks_constant_velocity_target() {
    let mut sc = single_agent(Vec2::new(-10.0, 15.0), 0.0, 0.01, 200.0);
    sc.log_stride = 100;
    let log = run(&sc).unwrap();
    let last = log.last().unwrap();
    assert!(last.fencing_error.norm() < 1e-2, "{:?}", last.fencing_error);
    assert!(last.max_velocity_error() < 1e-2);
}

#[test]
fn agent_on_reference_trajectory_stays_there() {
    let g = paper_gains();
    let reg = solve_regulator_equation(&build_closed_loop(&g, -0.1)).unwrap();
    let mut sc = single_agent(Vec2::ZERO, -0.1, 0.01, 30.0);
    sc.initial_agents = vec![reg.reference_state(&sc.target0)];
    let log = run(&sc).unwrap();
    for (_, s) in log.iter() {
        let a = s.agents[0].unwrap();
        let e = reg.error_state(&a, &s.target);
        assert!(e.to_array().iter().all(|c| c.abs() < 1e-9), "{e:?}");
    }
    let m = metrics(&log, &Thresholds::default());
    assert_eq!(m.velocity_converged_at, Some(0.0));
    assert_eq!(m.fencing_converged_at, Some(0.0));
}

#[test]
fn identical_scenarios_give_identical_logs() {
    let sc = Scenario::paper(DEFAULT_SEED);
    let mut short = sc.clone();
    short.t_end = 30.0;
    assert_eq!(run(&short).unwrap(), run(&short).unwrap());
}

#[test]
fn relabelling_agents_relabels_the_log() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for (n, controller) in [(4, false), (5, false), (4, true)] {
        let mut sc = Scenario::random(n, 17, paper_gains(), -0.1);
        sc.t_end = 40.0;
        if controller {
            sc.controller = ControllerKind::LabelFixed { offsets: default_offsets(n) };
        }
        sc.dropout = Some(Dropout { agent: 1, time: 10.0 });
        let base = run(&sc).unwrap();
        for _ in 0..3 {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            assert_eq!(run(&sc.permuted(&perm)).unwrap(), base.permuted(&perm), "perm {perm:?}");
        }
    }
}

#[test]
fn c2_gains_never_collide() {
    let mut count = 0;
    for n in 3..=6 {
        for seed in 0..5u64 {
            let mut sc = Scenario::random(n, 1000 + seed, c2_gains(), -0.1);
            sc.t_end = 100.0;
            let log = run(&sc).unwrap_or_else(|e| panic!("n={n} seed={seed}: {e}"));
            let m = metrics(&log, &Thresholds::default());
            assert!(!m.collision && m.min_distance_overall > 2.0, "n={n} seed={seed}");
            count += 1;
        }
    }
    assert!(count >= 20);
}

#[test]
fn logged_lyapunov_function_never_increases() {
    let mut sc = Scenario::random(4, 5, c2_gains(), -0.1);
    sc.t_end = 60.0;
    sc.log_stride = 1;
    let log = run(&sc).unwrap();
    let v: Vec<f64> = log.snapshots.iter().map(|s| s.lyapunov_v1.unwrap()).collect();
    for w in v.windows(2) {
        assert!(w[1] <= w[0] + 1e-6 * (1.0 + w[0]), "{} -> {}", w[0], w[1]);
    }
    assert!(v.last().unwrap() < &v[0]);
}

#[test]
fn paper_gains_log_no_lyapunov_value() {
    let mut sc = Scenario::paper(DEFAULT_SEED);
    sc.t_end = 1.0;
    assert!(run(&sc).unwrap().snapshots.iter().all(|s| s.lyapunov_v1.is_none()));
}

#[test]
fn constant_velocity_target_is_fenced() {
    let mut sc = Scenario::random(4, 8, c2_gains(), 0.0);
    sc.gains.k2 = fence_core::controller::c2_consistent_k2(2.2, 0.1, 3.0, 0.0);
    sc.t_end = 200.0;
    let log = run(&sc).unwrap();
    let m = metrics(&log, &Thresholds::default());
    assert!(!m.collision);
    assert!(m.hull_contains_target_from.is_some());
    assert!(log.last().unwrap().fencing_error.norm() < 0.5);
}

#[test]
fn dropout_removes_the_agent() {
    let mut sc = Scenario::paper(DEFAULT_SEED);
    sc.t_end = 30.0;
    sc.dropout = Some(Dropout { agent: 3, time: 20.0 });
    let log = run(&sc).unwrap();
    for (t, s) in log.iter() {
        let expect = if t < 20.0 - 1e-9 { 4 } else { 3 };
        assert_eq!(s.alive_count(), expect, "t={t}");
        assert_eq!(s.agents[3].is_none(), expect == 3);
        assert_eq!(s.velocity_errors[3].is_none(), expect == 3);
    }
}

#[test]
fn head_on_approach_is_reported_as_collision() {
    let mut sc = Scenario::random(2, 0, paper_gains(), -0.1);
    sc.initial_agents = vec![
        AgentState { v: Vec2::new(400.0, 0.0), ..AgentState::at_rest(Vec2::new(-3.0, 0.0)) },
        AgentState { v: Vec2::new(-400.0, 0.0), ..AgentState::at_rest(Vec2::new(3.0, 0.0)) },
    ];
    sc.dt = 0.01;
    match run(&sc) {
        Err(SimError::Collision { distance, log, .. }) => {
            assert!(distance <= 2.0 || distance.is_nan());
            assert!(!log.is_empty());
        }
        other => panic!("expected a collision, got {other:?}"),
    }
}

#[test]
fn label_fixed_close_approach_is_flagged_in_metrics() {
    let mut sc = Scenario::random(2, 0, paper_gains(), -0.1);
    sc.initial_agents = vec![AgentState::at_rest(Vec2::new(-5.0, 0.0)), AgentState::at_rest(Vec2::new(5.0, 0.0))];
    sc.controller = ControllerKind::LabelFixed { offsets: vec![Vec2::new(0.5, 0.0), Vec2::new(-0.5, 0.0)] };
    sc.t_end = 60.0;
    let m = metrics(&run(&sc).unwrap(), &Thresholds::default());
    assert!(m.collision);
    assert!(m.min_distance_overall <= 2.0);
}

#[test]
fn huge_step_diverges() {
    let mut sc = Scenario::paper(DEFAULT_SEED);
    sc.controller = ControllerKind::LabelFixed { offsets: default_offsets(4) };
    sc.dt = 5.0;
    sc.t_end = 1000.0;
    assert!(matches!(run(&sc), Err(SimError::Diverged { .. })));
}

#[test]
fn invalid_scenarios_are_rejected() {
    let base = Scenario::paper(DEFAULT_SEED);
    let mut close = base.clone();
    close.initial_agents[1].x = close.initial_agents[0].x + Vec2::new(1.0, 0.0);
    assert!(matches!(run(&close), Err(SimError::Invalid(_))));

    let mut late = base.clone();
    late.dropout = Some(Dropout { agent: 0, time: 500.0 });
    assert!(matches!(run(&late), Err(SimError::Invalid(_))));

    let mut offsets = base.clone();
    offsets.controller = ControllerKind::LabelFixed { offsets: default_offsets(3) };
    assert!(matches!(run(&offsets), Err(SimError::Invalid(_))));

    let mut bad = base.clone();
    bad.gains.k4 = 30.0;
    assert!(matches!(run(&bad), Err(SimError::Invalid(_))));
}

#[test]
fn same_controller_comparison_has_unit_ratio() {
    let mut sc = Scenario::paper(DEFAULT_SEED);
    sc.t_end = 20.0;
    let c = compare(&sc, ControllerKind::LabelFree, ControllerKind::LabelFree, &Thresholds::default());
    assert_eq!(c.oscillation_ratio, Some(1.0));
    assert_eq!(c.first.unwrap(), c.second.unwrap());
}

#[test]
fn random_starts_respect_spacing_and_box() {
    let pp = PotentialParams::new(2.0, 10.0).unwrap();
    for seed in 0..50 {
        let pos = random_positions(6, seed, &pp);
        for (i, a) in pos.iter().enumerate() {
            assert!(a.x.abs() <= 20.0 && a.y.abs() <= 20.0);
            assert!(pos[i + 1..].iter().all(|b| (*a - *b).norm() > 4.0));
        }
    }
    assert_eq!(random_positions(4, 3, &pp), random_positions(4, 3, &pp));
}
