//! Acceptance criteria 1–10. Each test prints one `PASS`/`FAIL` line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod common;

use std::io::Write;
use std::process::Command;
use std::time::{Duration, Instant};

use homotopy_planner::geometry::{
    build_path, collision_bounds, conflict_interval, classify_case, CaseTag, Footprint,
};
use homotopy_planner::homotopy::{deadlock_check, default_n_csp, enumerate_classes, rank_classes, ClassStatus, DeadlockStatus, RankConfig};
use homotopy_planner::model::{assemble, inside_collision_area, Encoding, GameSpec, HomotopyAssignment, Mode, Row, RowKind, Solution, VarKey};
use homotopy_planner::sim::{compute_metrics, realized_class, run_mpc, verify_solution, verify_trace, MpcConfig, SimOutcome};
use homotopy_planner::solver::{best_response_gaps, brute_force, solve_miqp, solve_qp, BnbConfig, QpProblem, QpSettings, QpStatus, SolveStats};
use homotopy_planner::SolverError;

type Outcome = Result<String, String>;

fn report(n: u32, title: &str, f: impl FnOnce() -> Outcome) {
    let t0 = Instant::now();
    let r = f();
    let secs = t0.elapsed().as_secs_f64();
    let line = match &r {
        Ok(detail) => format!("criterion {n:>2} PASS  {title} ({secs:.1} s): {detail}\n"),
        Err(why) => format!("criterion {n:>2} FAIL  {title} ({secs:.1} s): {why}\n"),
    };
    // Written past the test harness capture so the line shows in every run.
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
    if let Err(why) = r {
        panic!("criterion {n} failed: {why}");
    }
}

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn class(bits: &str) -> HomotopyAssignment {
    bits.parse().unwrap()
}

fn solve(spec: &GameSpec) -> Result<(Solution, SolveStats), SolverError> {
    solve_miqp(&assemble(spec).map_err(SolverError::from)?, &BnbConfig::default())
}

fn nash_gap(spec: &GameSpec, sol: &Solution) -> f64 {
    let m = assemble(spec).unwrap();
    best_response_gaps(&m, &sol.raw).unwrap().into_iter().fold(0.0, f64::max)
}

#[test]
fn criterion_01_deadlock_reproduction() {
    report(1, "deadlock classes of the bundled scenario", || {
        let spec = common::bundled();
        let t0 = Instant::now();
        let n_csp = default_n_csp(&spec);
        let mut flagged = Vec::new();
        let classes = enumerate_classes(&spec).map_err(|e| e.to_string())?;
        ensure!(classes.len() == 16, "expected 16 classes, got {}", classes.len());
        for c in &classes {
            if deadlock_check(&spec, c, n_csp).map_err(|e| e.to_string())? == DeadlockStatus::Deadlock {
                flagged.push(c.bits());
            }
        }
        let elapsed = t0.elapsed();
        ensure!(flagged == ["0100", "0101"], "flagged {flagged:?}");
        ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
        Ok(format!("flagged {flagged:?} in {:.2} s", elapsed.as_secs_f64()))
    });
}

#[test]
fn criterion_02_global_optimality_consistency() {
    report(2, "free objective equals best fixed-class objective", || {
        let spec = common::bundled();
        let t0 = Instant::now();
        let config = RankConfig { jobs: 4, keep_solutions: true, ..RankConfig::default() };
        let ranking = rank_classes(&spec, &config).map_err(|e| e.to_string())?;
        let elapsed = t0.elapsed();
        let feasible: Vec<_> = ranking.reports.iter().filter(|r| r.status == ClassStatus::Feasible).collect();
        ensure!(feasible.len() == 14, "{} feasible classes", feasible.len());
        let best = feasible.iter().filter_map(|r| r.objective).fold(f64::INFINITY, f64::min);
        let free = ranking.free.as_ref().ok_or("free problem infeasible")?;
        ensure!((free.objective - best).abs() <= 1e-6, "free {} vs best fixed {best}", free.objective);
        let argmin: Vec<String> = ranking.optimal_set(1e-6).iter().map(|c| c.bits()).collect();
        ensure!(argmin.iter().any(|b| b == "1011"), "1011 not among the optimal classes {argmin:?}");
        let chosen = free.class.as_ref().map(|c| c.bits()).unwrap_or_default();
        ensure!(chosen == "1011", "free solve chose {chosen}");
        for r in &feasible {
            let sol = r.solution.as_ref().ok_or("solution not kept")?;
            let gap = nash_gap(&spec.with_mode(Mode::fixed(&r.class)), sol);
            ensure!(gap < 1e-6, "class {} best-response gap {gap}", r.class.bits());
        }
        ensure!(elapsed < Duration::from_secs(300), "took {elapsed:?}");
        Ok(format!(
            "free {:.6} = min fixed {:.6}; free chose {chosen}; tied optimal set {argmin:?}",
            free.objective, best
        ))
    });
}

#[test]
fn criterion_03_baseline_equivalence() {
    report(3, "constraint-free baseline matches free homotopy with more nodes", || {
        let spec = common::bundled();
        let (free, fs) = solve(&spec.with_mode(Mode::FreeHomotopy)).map_err(|e| e.to_string())?;
        let (none, ns) = solve(&spec.with_mode(Mode::ConstraintFree)).map_err(|e| e.to_string())?;
        ensure!((free.objective - none.objective).abs() <= 1e-6, "free {} vs none {}", free.objective, none.objective);
        ensure!(ns.nodes_explored > fs.nodes_explored, "nodes none {} <= free {}", ns.nodes_explored, fs.nodes_explored);
        Ok(format!(
            "objective {:.6}; nodes none {} > free {}",
            free.objective, ns.nodes_explored, fs.nodes_explored
        ))
    });
}

#[test]
fn criterion_04_oracle_equivalence() {
    report(4, "branch-and-bound matches brute force on random instances", || {
        let t0 = Instant::now();
        let mut rng = common::rng(4);
        let cases = [CaseTag::General, CaseTag::Merge, CaseTag::Point, CaseTag::Opposite];
        let (mut compared, mut infeasible, mut worst) = (0, 0, 0.0f64);
        let mut i = 0;
        while compared < 50 {
            let spec = common::random_instance(&mut rng, cases[i % cases.len()]);
            i += 1;
            let m = assemble(&spec).map_err(|e| e.to_string())?;
            ensure!(m.binary_columns().len() <= 24, "instance {i} has {} binaries", m.binary_columns().len());
            let bnb = solve_miqp(&m, &BnbConfig::default());
            let oracle = brute_force(&m, 24);
            match (bnb, oracle) {
                (Ok((a, _)), Ok(b)) => {
                    let d = (a.objective - b.objective).abs();
                    ensure!(d <= 1e-6, "instance {i}: bnb {} vs brute {}", a.objective, b.objective);
                    worst = worst.max(d);
                    compared += 1;
                }
                (Err(SolverError::Infeasible), Err(SolverError::Infeasible)) => infeasible += 1,
                (a, b) => return Err(format!("instance {i}: bnb {:?} vs brute {:?}", a.map(|r| r.0.objective), b.map(|s| s.objective))),
            }
        }
        let elapsed = t0.elapsed();
        ensure!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
        Ok(format!("{compared} solved instances agree (max diff {worst:.1e}), {infeasible} agreed infeasible"))
    });
}

#[test]
fn criterion_05_encoding_equivalence() {
    report(5, "six-binary and refined encodings agree", || {
        let mut rng = common::rng(5);
        let (mut compared, mut worst) = (0, 0.0f64);
        let mut i = 0;
        while compared < 20 {
            let mut spec = common::random_instance(&mut rng, CaseTag::General);
            i += 1;
            if spec.mode == Mode::ConstraintFree {
                spec.mode = Mode::FreeHomotopy;
            }
            let six = solve(&spec);
            let refined = solve(&GameSpec { encoding: Encoding::Refined, ..spec.clone() });
            match (six, refined) {
                (Ok((a, _)), Ok((b, _))) => {
                    let d = (a.objective - b.objective).abs();
                    ensure!(d <= 1e-6, "instance {i}: six {} vs refined {}", a.objective, b.objective);
                    worst = worst.max(d);
                    compared += 1;
                }
                (Err(SolverError::Infeasible), Err(SolverError::Infeasible)) => {}
                (a, b) => return Err(format!("instance {i}: six {:?} vs refined {:?}", a.map(|r| r.0.objective), b.map(|r| r.0.objective))),
            }
        }
        Ok(format!("{compared} instances agree (max diff {worst:.1e})"))
    });
}

#[test]
fn criterion_06_nash_certificate() {
    report(6, "no player improves unilaterally", || {
        let mut worst = 0.0f64;
        let mut count = 0;
        let mut rng = common::rng(6);
        let cases = [CaseTag::General, CaseTag::Merge, CaseTag::Point];
        for i in 0..30 {
            let mut spec = common::random_instance(&mut rng, cases[i % cases.len()]);
            if i % 2 == 1 {
                spec.encoding = if spec.conflicts[0].bounds.case == CaseTag::General && spec.mode != Mode::ConstraintFree {
                    Encoding::Refined
                } else {
                    Encoding::SixBinary
                };
            }
            if let Ok((sol, _)) = solve(&spec) {
                let g = nash_gap(&spec, &sol);
                ensure!(g < 1e-6, "random instance {i}: gap {g}");
                worst = worst.max(g);
                count += 1;
            }
        }
        let spec = common::bundled();
        for mode in [Mode::FreeHomotopy, Mode::ConstraintFree] {
            let (sol, _) = solve(&spec.with_mode(mode.clone())).map_err(|e| e.to_string())?;
            let g = nash_gap(&spec.with_mode(mode.clone()), &sol);
            ensure!(g < 1e-6, "bundled {mode}: gap {g}");
            worst = worst.max(g);
            count += 1;
        }
        Ok(format!("{count} solutions, largest best-response improvement {worst:.1e}"))
    });
}

#[test]
fn criterion_07_collision_and_intersample_safety() {
    report(7, "solutions and the receding-horizon trace are collision free", || {
        let mut rng = common::rng(7);
        let cases = [CaseTag::General, CaseTag::Merge, CaseTag::Point, CaseTag::Opposite];
        let mut checked = 0;
        for i in 0..40 {
            let spec = common::random_instance(&mut rng, cases[i % cases.len()]);
            if spec.mode == Mode::ConstraintFree {
                continue;
            }
            if let Ok((sol, _)) = solve(&spec) {
                let r = verify_solution(&sol, &spec, 10);
                ensure!(r.is_clean(), "random instance {i}: {:?}", r.violations.first());
                checked += 1;
            }
        }
        let spec = common::bundled();
        for bits in ["1011", "0000", "1111"] {
            let fixed = spec.with_mode(Mode::fixed(&class(bits)));
            let (sol, _) = solve(&fixed).map_err(|e| e.to_string())?;
            let r = verify_solution(&sol, &fixed, 10);
            ensure!(r.is_clean(), "class {bits}: {:?}", r.violations.first());
            checked += 1;
        }

        let trace = run_mpc(&spec, &MpcConfig::default()).map_err(|e| e.to_string())?;
        ensure!(trace.outcome == SimOutcome::Completed, "simulation ended with {:?}", trace.outcome);
        let r = verify_trace(&trace, &spec, 10);
        ensure!(r.is_clean(), "trace: {:?}", r.violations.first());
        for (ci, c) in spec.conflicts.iter().enumerate() {
            for k in 0..trace.n_states() {
                let (x, y) = (trace.s[c.pair.0][k], trace.s[c.pair.1][k]);
                ensure!(!inside_collision_area(&c.bounds, x, y, 1e-6), "pair {ci} state {k} inside at ({x}, {y})");
            }
        }
        let m = compute_metrics(&trace, &spec).map_err(|e| e.to_string())?;
        let t_r: Vec<String> = m.players.iter().map(|p| format!("{:.2}", p.t_r)).collect();
        let realized: Vec<String> = realized_class(&trace.s, &spec).iter().map(|b| b.map_or("-".into(), |b| b.to_string())).collect();
        Ok(format!(
            "{checked} solutions clean; trace of {} steps clean over {} segments; realized class {}, t_r {t_r:?}",
            trace.steps.len(),
            r.segments_checked,
            realized.join("")
        ))
    });
}

/// Gaussian elimination with partial pivoting.
fn linear_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

#[test]
fn criterion_08_qp_engine_correctness() {
    report(8, "KKT residuals and the analytic transfer problem", || {
        // One player, N = 2, dT = 1, from rest at s = 0 to s(2) = 2 with P = 1, r = 0.
        let mut p = common::player("a", 0.0, 0.0, 10.0);
        p.progress_reward = 0.0;
        let spec = GameSpec { players: vec![p], conflicts: vec![], horizon: 2, dt: 1.0, big_m: None, mode: Mode::FreeHomotopy, encoding: Encoding::SixBinary };
        let mut m = assemble(&spec).map_err(|e| e.to_string())?;
        let s2 = m.col(VarKey::S { player: 0, k: 2 }).unwrap();
        m.eq_rows.push(Row::new(vec![(s2, 1.0)], 2.0, RowKind::Dynamics));
        let prob = QpProblem { quad: &m.quad, linear: &m.linear, eq_rows: &m.eq_rows, le_rows: &m.le_rows, lower: &m.lower, upper: &m.upper };
        let r = solve_qp(&prob, &QpSettings::default()).map_err(|e| e.to_string())?;
        ensure!(r.status == QpStatus::Optimal, "status {:?}", r.status);
        ensure!(r.kkt_residual <= 1e-7, "transfer KKT residual {}", r.kkt_residual);
        // Eliminating the states leaves min u0² + u1² subject to dT²·u0 = 2 - s0 - 2·dT·v0.
        let kkt = linear_solve(
            vec![vec![2.0, 0.0, 1.0], vec![0.0, 2.0, 0.0], vec![1.0, 0.0, 0.0]],
            vec![0.0, 0.0, 2.0],
        );
        let u: Vec<f64> = (0..2).map(|k| r.point[m.col(VarKey::U { player: 0, k }).unwrap()]).collect();
        let err = (u[0] - kkt[0]).abs().max((u[1] - kkt[1]).abs());
        ensure!(err <= 1e-8, "u {u:?} vs analytic {:?}", &kkt[..2]);
        let obj_err = (r.objective + m.constant - (kkt[0].powi(2) + kkt[1].powi(2))).abs();
        ensure!(obj_err <= 1e-8, "objective error {obj_err}");

        let spec = common::bundled();
        let mut worst = r.kkt_residual;
        let mut uncertified = 0;
        let mut solves = 0;
        let mut runs: Vec<SolveStats> = Vec::new();
        for mode in [Mode::FreeHomotopy, Mode::fixed(&class("1011")), Mode::fixed(&class("0110"))] {
            runs.push(solve(&spec.with_mode(mode)).map_err(|e| e.to_string())?.1);
        }
        let mut rng = common::rng(8);
        for i in 0..20 {
            let spec = common::random_instance(&mut rng, [CaseTag::General, CaseTag::Point][i % 2]);
            if let Ok((_, st)) = solve(&spec) {
                runs.push(st);
            }
        }
        for st in &runs {
            worst = worst.max(st.max_kkt_residual);
            uncertified += st.uncertified_qps;
            solves += st.qp_solves;
        }
        ensure!(uncertified == 0, "{uncertified} relaxations accepted without certification");
        ensure!(worst <= 1e-7, "largest accepted KKT residual {worst}");
        Ok(format!("transfer u = ({:.10}, {:.10}) err {err:.1e}; {solves} QP solves, max residual {worst:.1e}", u[0], u[1]))
    });
}

#[test]
fn criterion_09_geometry_oracle() {
    report(9, "perpendicular crossing against interval arithmetic", || {
        let (l, w, scan) = (3.6, 1.5, 0.1);
        let a = build_path(&[(0.0, 0.0), (40.0, 0.0)], 0.1).map_err(|e| e.to_string())?;
        let b = build_path(&[(20.0, -20.0), (20.0, 20.0)], 0.1).map_err(|e| e.to_string())?;
        let fp = Footprint::new(l, w).map_err(|e| e.to_string())?;
        let ci = conflict_interval(&a, &b, fp, fp, scan).map_err(|e| e.to_string())?.ok_or("no conflict found")?;
        // Overlap iff |s - 20| <= (l + w) / 2 and |t - 20| <= (l + w) / 2.
        let half = (l + w) / 2.0;
        let expect = [20.0 - half, 20.0 + half, 20.0 - half, 20.0 + half];
        let got = [ci.s_enter, ci.s_exit, ci.t_enter, ci.t_exit];
        for (g, e) in got.iter().zip(expect) {
            ensure!((g - e).abs() <= scan + 1e-9, "interval {got:?} vs oracle {expect:?}");
        }
        let case = classify_case(&ci, &a, &b);
        let cb = collision_bounds(&ci, l, l, case);
        for pb in [cb.first, cb.second] {
            let (xlo, xhi) = pb.exit.ok_or("exit bounds missing")?;
            ensure!((pb.entry_hi - pb.entry_lo - l).abs() <= 1e-12, "entry width {}", pb.entry_hi - pb.entry_lo);
            ensure!((xhi - xlo - l).abs() <= 1e-12, "exit width {}", xhi - xlo);
        }
        ensure!((cb.first.entry_lo - (ci.s_enter - l / 2.0)).abs() <= 1e-12, "entry_lo not s_enter - l/2");
        Ok(format!("interval {got:?} vs oracle {expect:?}, case {}", case.as_str()))
    });
}

#[test]
fn criterion_10_determinism() {
    report(10, "enumerate reports are byte-identical across job counts", || {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let run = |jobs: &str, name: &str| {
            let out = dir.path().join(name);
            let status = Command::new(env!("CARGO_BIN_EXE_hplan"))
                .args(["enumerate", "round_kackertstrasse", "--jobs", jobs, "--out"])
                .arg(&out)
                .output()
                .expect("spawn hplan");
            (status, out)
        };
        let outputs = std::thread::scope(|s| {
            let h: Vec<_> = [("1", "a.csv"), ("1", "b.csv"), ("4", "c.csv")]
                .into_iter()
                .map(|(j, n)| s.spawn(move || run(j, n)))
                .collect();
            h.into_iter().map(|h| h.join().unwrap()).collect::<Vec<_>>()
        });
        let mut texts = Vec::new();
        for (o, path) in &outputs {
            ensure!(o.status.success(), "hplan failed: {}", String::from_utf8_lossy(&o.stderr));
            texts.push(std::fs::read(path).map_err(|e| e.to_string())?);
        }
        ensure!(texts[0] == texts[1], "two --jobs 1 runs differ");
        ensure!(texts[0] == texts[2], "--jobs 1 and --jobs 4 differ");
        let rows = texts[0].iter().filter(|&&c| c == b'\n').count();
        Ok(format!("3 runs identical ({} bytes, {rows} lines)", texts[0].len()))
    });
}
