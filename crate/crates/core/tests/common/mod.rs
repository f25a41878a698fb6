#![allow(dead_code)]

use homotopy_planner::geometry::{CaseTag, ConflictBounds, Footprint, PlayerBounds};
use homotopy_planner::model::{Conflict, Encoding, GameSpec, Mode, PlayerSpec};
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};

pub fn player(id: &str, s0: f64, v0: f64, v_max: f64) -> PlayerSpec {
    PlayerSpec {
        id: id.into(),
        s0,
        v0,
        v_max,
        a_min: -4.0,
        a_max: 3.0,
        effort_weight: 1.0,
        progress_reward: 5.0,
        footprint: Footprint { length: 2.0, width: 1.0 },
        goal_s: s0 + 100.0,
        region: None,
    }
}

/// Bounds with equal-length entry and exit windows; `exit` is the exit window start.
pub fn bounds(case: CaseTag, a: (f64, f64, f64), b: (f64, f64, f64)) -> ConflictBounds {
    let make = |(lo, len, exit): (f64, f64, f64)| match case {
        CaseTag::Merge => PlayerBounds::new(lo, lo + len, None),
        CaseTag::Point => PlayerBounds::new(lo, lo + len, Some((lo, lo + len))),
        CaseTag::General | CaseTag::Opposite => PlayerBounds::new(lo, lo + len, Some((exit, exit + len))),
    };
    ConflictBounds { first: make(a), second: make(b), case }
}

pub fn two_player(p0: PlayerSpec, p1: PlayerSpec, b: ConflictBounds, horizon: usize, dt: f64, mode: Mode) -> GameSpec {
    GameSpec {
        players: vec![p0, p1],
        conflicts: vec![Conflict { pair: (0, 1), bounds: b }],
        horizon,
        dt,
        big_m: None,
        mode,
        encoding: Encoding::SixBinary,
    }
}

/// Random two-player instance with one conflict whose windows lie within reach.
///
/// The horizon is capped so the six-binary free encoding stays within 24 binaries.
pub fn random_instance(rng: &mut StdRng, case: CaseTag) -> GameSpec {
    let per_k = if matches!(case, CaseTag::Merge | CaseTag::Point) { 4 } else { 6 };
    let max_n = (23 / per_k).min(4);
    let horizon = rng.random_range(1..=max_n);
    let dt = rng.random_range(0.4..1.0);
    let mut mk = |id: &str| {
        let v_max = rng.random_range(4.0..8.0);
        let s0 = rng.random_range(0.0..3.0);
        let v0 = rng.random_range(0.0..v_max);
        let reach = s0 + v_max * horizon as f64 * dt;
        let lo = rng.random_range(s0 + 0.5..reach.max(s0 + 1.0));
        let len = rng.random_range(0.5..3.0);
        let exit = lo + rng.random_range(0.0..6.0);
        (player(id, s0, v0, v_max), (lo, len, exit))
    };
    let (a, ba) = mk("a");
    let (b, bb) = mk("b");
    let modes = [Mode::FreeHomotopy, Mode::ConstraintFree, Mode::FixedHomotopy(vec![Some(0)]), Mode::FixedHomotopy(vec![Some(1)])];
    let mode = modes[rng.random_range(0..modes.len())].clone();
    two_player(a, b, bounds(case, ba, bb), horizon, dt, mode)
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn bundled() -> GameSpec {
    homotopy_planner::scenario::round_kackertstrasse()
}
