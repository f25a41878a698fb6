mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use homotopy_planner::geometry::CaseTag;
use homotopy_planner::model::{Mode, RegionMarkers};
use homotopy_planner::scenario::{parse_scenario, write_scenario};
use proptest::prelude::*;

fn hplan(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hplan")).args(args).current_dir(dir).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn objective_line(o: &Output) -> f64 {
    stdout(o).lines().find_map(|l| l.strip_prefix("objective ")).unwrap().parse().unwrap()
}

fn small_scenario(v0: f64) -> String {
    let mut a = common::player("1", 0.0, v0, 10.0);
    let mut b = common::player("2", 0.0, v0 * 0.5, 10.0);
    a.region = Some(RegionMarkers { entry_s: 1.0, exit_s: 8.0, wait_radius: 1.0 });
    b.region = Some(RegionMarkers { entry_s: 1.0, exit_s: 8.0, wait_radius: 1.0 });
    a.goal_s = 8.0;
    b.goal_s = 8.0;
    let spec = common::two_player(a, b, common::bounds(CaseTag::Point, (1.0, 2.0, 0.0), (1.0, 2.0, 0.0)), 6, 0.5, Mode::FreeHomotopy);
    write_scenario(&spec)
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&hplan(&["--help"], d)), 0);
    assert_eq!(code(&hplan(&["solve", "round_kackertstrasse", "--no-such-flag"], d)), 64);
    assert_eq!(code(&hplan(&["solve", "missing.json"], d)), 2);

    fs::write(d.join("bad.json"), "{ not json").unwrap();
    assert_eq!(code(&hplan(&["solve", "bad.json"], d)), 2);

    let text = small_scenario(4.0);
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let c = v["conflicts"][0].clone();
    v["conflicts"].as_array_mut().unwrap().push(c);
    fs::write(d.join("dup.json"), v.to_string()).unwrap();
    assert_eq!(code(&hplan(&["solve", "dup.json"], d)), 3);

    fs::write(d.join("wp.csv"), "player,x,y\n1,0,0\n1,0,0\n2,5,-5\n2,5,5\n").unwrap();
    assert_eq!(code(&hplan(&["geometry", "wp.csv", "--out", "g.json"], d)), 4);

    // Both players start at speed 10 just before a point conflict: one step carries both through it.
    fs::write(d.join("fast.json"), small_scenario(10.0).replace("\"v0\": 5.0", "\"v0\": 10.0")).unwrap();
    let o = hplan(&["solve", "fast.json", "--mode", "fixed:0"], d);
    assert_eq!(code(&o), 5, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("class <0>"));
}

#[test]
fn deadlock_command_flags_the_bundled_pair() {
    let dir = tempfile::tempdir().unwrap();
    let o = hplan(&["deadlock", "round_kackertstrasse"], dir.path());
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    let flagged: Vec<&str> =
        out.lines().filter(|l| l.contains("deadlock")).filter_map(|l| l.split(',').next()).collect();
    assert_eq!(flagged, ["0100", "0101"], "{out}");
}

#[test]
fn solve_fixed_best_class_equals_free_and_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let fixed = hplan(&["solve", "round_kackertstrasse", "--mode", "fixed:1011", "--out", "a.csv"], d);
    let free = hplan(&["solve", "round_kackertstrasse", "--out", "b.csv"], d);
    let again = hplan(&["solve", "round_kackertstrasse", "--out", "c.csv"], d);
    for o in [&fixed, &free, &again] {
        assert_eq!(code(o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert!((objective_line(&fixed) - objective_line(&free)).abs() <= 1e-6);
    assert!(stdout(&free).contains("class <1,0,1,1>"));
    assert_eq!(fs::read(d.join("b.csv")).unwrap(), fs::read(d.join("c.csv")).unwrap());
}

#[test]
fn geometry_command_reproduces_crossing_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("wp.csv"), "player,x,y\n1,0,0\n1,40,0\n2,20,-20\n2,20,20\n").unwrap();
    let o = hplan(&["geometry", "wp.csv", "--out", "g.json", "--length", "3.6", "--width", "1.5"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("g.json")).unwrap()).unwrap();
    let c = &v["conflicts"][0];
    assert_eq!(c["case"], "general");
    // Body half-diagonal along the path plus half the length on either side of the crossing at 20.
    let (lo, hi) = (20.0 - 2.55 - 1.8, 20.0 + 2.55 + 1.8);
    for side in ["first", "second"] {
        let b: Vec<f64> = c["bounds"][side].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
        assert!((b[0] - lo).abs() <= 0.1 + 1e-9, "{b:?}");
        assert!((b[3] - hi).abs() <= 0.1 + 1e-9, "{b:?}");
        assert!((b[1] - b[0] - 3.6).abs() <= 1e-9);
    }
}

#[test]
fn simulate_and_plot_write_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("s.json"), small_scenario(4.0)).unwrap();
    let o = hplan(&["simulate", "s.json", "--out-dir", "."], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["trace.csv", "steps.csv", "metrics.csv"] {
        assert!(fs::metadata(d.join(f)).unwrap().len() > 0, "{f}");
    }
    let o = hplan(&["plot", "trace.csv", "--scenario", "s.json", "--pair", "1,2"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["plane.svg", "time.svg"] {
        assert!(fs::read_to_string(d.join(f)).unwrap().starts_with("<svg"), "{f}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn scenario_round_trip(seed in 0u64..10_000, case in prop_oneof![
        Just(CaseTag::General), Just(CaseTag::Merge), Just(CaseTag::Point), Just(CaseTag::Opposite)
    ]) {
        let mut spec = common::random_instance(&mut common::rng(seed), case);
        spec.players[0].region = Some(RegionMarkers { entry_s: 1.5, exit_s: 7.25, wait_radius: 0.1 });
        let back = parse_scenario(&write_scenario(&spec), None).unwrap();
        prop_assert_eq!(back, spec);
    }
}
