mod common;

use homotopy_planner::geometry::CaseTag;
use homotopy_planner::model::{assemble, Encoding, GameSpec, Mode, RegionMarkers};
use homotopy_planner::sim::{
    compute_metrics, realized_class, run_mpc, verify_intersample, MpcConfig, SimOutcome, SimStep, SimTrace,
};
use homotopy_planner::solver::{brute_force, solve_miqp, BnbConfig, SolveStats};

fn single(p: homotopy_planner::model::PlayerSpec, horizon: usize, dt: f64) -> GameSpec {
    GameSpec { players: vec![p], conflicts: vec![], horizon, dt, big_m: None, mode: Mode::FreeHomotopy, encoding: Encoding::SixBinary }
}

#[test]
fn unconstrained_player_matches_closed_form() {
    // With cost P·Σu² − r·(s_N − s_0), each u_k moves s_N by dt²·(N−1−k), so
    // u_k = r·dt²·(N−1−k) / (2P) while no limit is active.
    let mut p = common::player("a", 0.0, 1.0, 3.0);
    p.progress_reward = 1.0;
    let (n, dt) = (6, 0.5);
    let spec = single(p, n, dt);
    let (sol, _) = solve_miqp(&assemble(&spec).unwrap(), &BnbConfig::default()).unwrap();
    for k in 0..n {
        let expect = dt * dt * (n - 1 - k) as f64 / 2.0;
        assert!((sol.trajectories[0].u[k] - expect).abs() < 1e-6, "u[{k}] = {}", sol.trajectories[0].u[k]);
    }
    assert!((sol.trajectories[0].u[0] - 0.625).abs() < 1e-6);
}

#[test]
fn receding_horizon_reaches_speed_limit() {
    let mut p = common::player("a", 0.0, 0.0, 3.0);
    p.goal_s = 20.0;
    let spec = single(p, 6, 0.5);
    let trace = run_mpc(&spec, &MpcConfig::default()).unwrap();
    assert_eq!(trace.outcome, SimOutcome::Completed);
    let v = &trace.v[0];
    assert!(v.windows(2).all(|w| w[1] >= w[0] - 1e-7), "{v:?}");
    assert!(v.iter().all(|&x| x <= 3.0 + 1e-7));
    assert!((v.last().unwrap() - 3.0).abs() < 1e-6);
    assert!(*trace.s[0].last().unwrap() >= 20.0 - 1e-6);
    assert!(trace.dynamics_residual() <= 1e-9);
}

#[test]
fn faster_player_passes_first() {
    let b = common::bounds(CaseTag::Point, (6.0, 2.0, 0.0), (6.0, 2.0, 0.0));
    let spec = common::two_player(
        common::player("fast", 0.0, 7.0, 8.0),
        common::player("slow", 0.0, 1.0, 8.0),
        b,
        4,
        0.5,
        Mode::FreeHomotopy,
    );
    let objective = |bit: u8| {
        let m = assemble(&spec.with_mode(Mode::FixedHomotopy(vec![Some(bit)]))).unwrap();
        brute_force(&m, 24).map(|s| s.objective).unwrap_or(f64::INFINITY)
    };
    let (first, second) = (objective(0), objective(1));
    assert!(first < second, "fast first {first}, slow first {second}");

    let (sol, _) = solve_miqp(&assemble(&spec).unwrap(), &BnbConfig::default()).unwrap();
    assert_eq!(sol.homotopy.unwrap().bits(), "0");
    assert!((sol.objective - first).abs() < 1e-6);
    let s: Vec<Vec<f64>> = sol.trajectories.iter().map(|t| t.s.clone()).collect();
    assert_eq!(realized_class(&s, &spec), vec![Some(0)]);
}

fn manual_trace(s: Vec<f64>, dt: f64) -> SimTrace {
    let v: Vec<f64> = s.windows(2).map(|w| (w[1] - w[0]) / dt).chain(std::iter::once(0.0)).collect();
    let steps = (0..s.len() - 1)
        .map(|i| SimStep { step: i, u: vec![0.0], stats: SolveStats::default(), class: None, objective: 0.0, fallback: false })
        .collect();
    SimTrace { dt, s: vec![s], v: vec![v], steps, outcome: SimOutcome::Completed, player_ids: vec!["a".into()] }
}

#[test]
fn metrics_examples() {
    let mut p = common::player("a", 0.0, 5.0, 10.0);
    p.region = Some(RegionMarkers { entry_s: 10.0, exit_s: 30.0, wait_radius: 1.5 });
    let spec = single(p.clone(), 4, 0.5);

    let trace = manual_trace((0..=14).map(|i| 2.5 * i as f64).collect(), 0.5);
    let m = compute_metrics(&trace, &spec).unwrap();
    assert!((m.players[0].t_r - 4.0).abs() < 1e-12);
    assert!((m.players[0].t_w - 0.3).abs() < 1e-12);
    assert_eq!(m.players[0].c_r, 0.0);
    // The state at index 12 is the first one at the exit marker.
    assert!((m.task.tct - 6.0).abs() < 1e-12);
    assert!((m.task.np - 30.0).abs() < 1e-12);
    assert!((m.task.np_over_tct - 5.0).abs() < 1e-12);

    let still = manual_trace(vec![0.0; 5], 0.5);
    let m = compute_metrics(&still, &spec).unwrap();
    assert_eq!(m.task.np, 0.0);
    assert_eq!(m.players[0].t_r, 0.0);

    p.region = None;
    assert!(compute_metrics(&still, &single(p, 4, 0.5)).is_err());
}

#[test]
fn intersample_check_flags_corner_cutting() {
    let b = common::bounds(CaseTag::General, (10.0, 2.0, 14.0), (10.0, 2.0, 14.0));
    let spec = common::two_player(
        common::player("a", 0.0, 0.0, 8.0),
        common::player("b", 0.0, 0.0, 8.0),
        b,
        2,
        0.5,
        Mode::FreeHomotopy,
    );
    // Both endpoints are outside the area, the straight segment between them is not.
    let diagonal = vec![vec![0.0, 30.0], vec![0.0, 30.0]];
    let r = verify_intersample(&diagonal, &spec, 50);
    assert_eq!(r.segments_checked, 1);
    assert!(!r.is_clean());

    // One player clears the area first, the other then follows along the boundary.
    let ordered = vec![vec![0.0, 30.0, 30.0], vec![0.0, 0.0, 30.0]];
    let r = verify_intersample(&ordered, &spec, 50);
    assert_eq!(r.segments_checked, 2);
    assert!(r.is_clean(), "{:?}", r.violations);
}

#[test]
fn warm_start_does_not_change_plans() {
    let spec = common::bundled();
    let run = |warm_start: bool| run_mpc(&spec, &MpcConfig { max_steps: 5, warm_start, ..MpcConfig::default() }).unwrap();
    let (warm, cold) = (run(true), run(false));
    assert_eq!(warm.steps.len(), 5);
    for (a, b) in warm.steps.iter().zip(&cold.steps) {
        let tol = 1e-6 * (1.0 + a.objective.abs());
        assert!((a.objective - b.objective).abs() <= tol, "step {}: {} vs {}", a.step, a.objective, b.objective);
    }
    assert!(warm.dynamics_residual() <= 1e-9);
    assert!(cold.dynamics_residual() <= 1e-9);
}
