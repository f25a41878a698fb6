//! Receding-horizon simulation and evaluation metrics.

use crate::error::{ModelError, SolverError};
use crate::model::{
    assemble, inside_collision_area, GameSpec, HomotopyAssignment, MixedIntegerQP, Mode, Solution, VarKey,
};
use crate::solver::{solve_miqp, BnbConfig, SolveStats};

#[derive(Debug, Clone, PartialEq)]
pub struct MpcConfig {
    pub mode: Mode,
    pub max_steps: usize,
    pub warm_start: bool,
    /// Fix the class chosen at step 0 for the rest of the run.
    pub freeze_class: bool,
    pub bnb: BnbConfig,
}

impl Default for MpcConfig {
    fn default() -> Self {
        MpcConfig { mode: Mode::FreeHomotopy, max_steps: 400, warm_start: true, freeze_class: false, bnb: BnbConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimStep {
    pub step: usize,
    /// Applied control per player.
    pub u: Vec<f64>,
    pub stats: SolveStats,
    pub class: Option<HomotopyAssignment>,
    pub objective: f64,
    /// The previous plan was replayed because this step's problem was infeasible.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimOutcome {
    Completed,
    MaxSteps,
    /// Infeasible at `step` after the one-step fallback was spent.
    Infeasible { step: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub dt: f64,
    /// `s[p][i]`, `v[p][i]` for executed states `i = 0..=steps.len()`.
    pub s: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub steps: Vec<SimStep>,
    pub outcome: SimOutcome,
    pub player_ids: Vec<String>,
}

impl SimTrace {
    pub fn n_states(&self) -> usize {
        self.s.first().map(|s| s.len()).unwrap_or(0)
    }

    /// Largest deviation of the executed states from the dynamics under the applied controls.
    pub fn dynamics_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, st) in self.steps.iter().enumerate() {
            for p in 0..self.s.len() {
                let ds = self.s[p][i + 1] - (self.s[p][i] + self.dt * self.v[p][i]);
                let dv = self.v[p][i + 1] - (self.v[p][i] + self.dt * st.u[p]);
                worst = worst.max(ds.abs()).max(dv.abs());
            }
        }
        worst
    }
}

fn step_spec(base: &GameSpec, s: &[f64], v: &[f64], mode: &Mode) -> GameSpec {
    let mut spec = base.with_mode(mode.clone());
    spec.big_m = None;
    for (p, pl) in spec.players.iter_mut().enumerate() {
        pl.s0 = s[p];
        pl.v0 = v[p];
        if pl.goal_s <= pl.s0 {
            pl.goal_s = pl.s0 + 1.0;
        }
    }
    spec
}

/// Binaries of `prev` shifted one step earlier, the last step repeated.
fn shifted_seed(prev_miqp: &MixedIntegerQP, prev: &Solution, next: &MixedIntegerQP) -> Vec<f64> {
    let n = prev_miqp.horizon;
    let shift = |k: usize| (k + 1).min(n);
    next.columns
        .iter()
        .map(|key| {
            let src = match *key {
                VarKey::Sigma { pair, region, k } => VarKey::Sigma { pair, region, k: shift(k) },
                VarKey::GroupSigma { pair, group, k } => VarKey::GroupSigma { pair, group, k: shift(k) },
                VarKey::Eps { pair, group, k } => VarKey::Eps { pair, group, k: shift(k) },
                VarKey::Xi { pair, group, k } => VarKey::Xi { pair, group, k: shift(k) },
                other => other,
            };
            prev_miqp.col(src).map(|j| prev.raw[j]).unwrap_or(0.0)
        })
        .collect()
}

/// Runs the loop until every player passes its exit marker (or goal).
///
/// Infeasibility and the step limit end the run early; the trace up to that
/// point is returned with the corresponding [`SimOutcome`].
pub fn run_mpc(spec: &GameSpec, config: &MpcConfig) -> Result<SimTrace, SolverError> {
    spec.with_mode(config.mode.clone()).validate()?;
    let np = spec.players.len();
    let mut s: Vec<Vec<f64>> = spec.players.iter().map(|p| vec![p.s0]).collect();
    let mut v: Vec<Vec<f64>> = spec.players.iter().map(|p| vec![p.v0]).collect();
    let mut steps = Vec::new();
    let mut mode = config.mode.clone();
    let mut prev: Option<(MixedIntegerQP, Solution, usize)> = None;
    let mut fallback_spent = false;
    let exits: Vec<f64> = spec.players.iter().map(|p| p.exit_s()).collect();
    let done = |s: &Vec<Vec<f64>>| (0..np).all(|p| *s[p].last().unwrap() >= exits[p]);

    let mut outcome = SimOutcome::MaxSteps;
    for step in 0..config.max_steps {
        if done(&s) {
            outcome = SimOutcome::Completed;
            break;
        }
        let cur_s: Vec<f64> = s.iter().map(|x| *x.last().unwrap()).collect();
        let cur_v: Vec<f64> = v.iter().map(|x| *x.last().unwrap()).collect();
        let sspec = step_spec(spec, &cur_s, &cur_v, &mode);
        let miqp = assemble(&sspec)?;
        let mut bnb = config.bnb.clone();
        if config.warm_start {
            if let Some((pm, ps, _)) = &prev {
                bnb.warm_start = Some(shifted_seed(pm, ps, &miqp));
            }
        }
        let (u_plan, stats, class, objective, fallback) = match solve_miqp(&miqp, &bnb) {
            Ok((sol, stats)) => {
                let u: Vec<f64> = sol.trajectories.iter().map(|t| t.u[0]).collect();
                let class = sol.homotopy.clone();
                let obj = sol.objective;
                if step == 0 && config.freeze_class {
                    if let Some(c) = &class {
                        mode = Mode::fixed(c);
                    }
                }
                prev = Some((miqp, sol, 0));
                fallback_spent = false;
                (u, stats, class, obj, false)
            }
            Err(SolverError::Infeasible) => {
                let Some((pm, ps, age)) = prev.as_mut().filter(|_| !fallback_spent) else {
                    outcome = SimOutcome::Infeasible { step };
                    break;
                };
                *age += 1;
                let k = (*age).min(pm.horizon - 1);
                let u = ps.trajectories.iter().map(|t| t.u[k]).collect();
                fallback_spent = true;
                (u, SolveStats::default(), ps.homotopy.clone(), f64::NAN, true)
            }
            Err(e) => return Err(e),
        };
        let mut applied = Vec::with_capacity(np);
        for p in 0..np {
            let pl = &spec.players[p];
            let (s0, v0) = (cur_s[p], cur_v[p]);
            // Keep the executed velocity inside its bounds despite solver round-off.
            let lo = pl.a_min.max(-v0 / spec.dt);
            let hi = pl.a_max.min((pl.v_max - v0) / spec.dt);
            let u = u_plan[p].clamp(lo.min(hi), hi);
            s[p].push(s0 + spec.dt * v0);
            v[p].push(v0 + spec.dt * u);
            applied.push(u);
        }
        steps.push(SimStep { step, u: applied, stats, class, objective, fallback });
    }
    if outcome == SimOutcome::MaxSteps && done(&s) {
        outcome = SimOutcome::Completed;
    }
    Ok(SimTrace {
        dt: spec.dt,
        s,
        v,
        steps,
        outcome,
        player_ids: spec.players.iter().map(|p| p.id.clone()).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskMetrics {
    /// Time until every player is past its exit marker.
    pub tct: f64,
    /// Sum over players and executed steps of `|u|`.
    pub nce: f64,
    /// Progress of all players up to `tct`.
    pub np: f64,
    pub np_over_tct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlayerMetrics {
    /// Time between the entry and exit markers.
    pub t_r: f64,
    /// `|u|` accumulated while between the markers.
    pub c_r: f64,
    /// Time spent within `wait_radius` before the entry marker.
    pub t_w: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub task: TaskMetrics,
    pub players: Vec<PlayerMetrics>,
}

pub fn compute_task_metrics(trace: &SimTrace, spec: &GameSpec) -> TaskMetrics {
    let n = trace.n_states();
    let exits: Vec<f64> = spec.players.iter().map(|p| p.exit_s()).collect();
    let last_open = (0..n).rev().find(|&i| (0..trace.s.len()).any(|p| trace.s[p][i] < exits[p]));
    let (tct, idx) = match last_open {
        Some(i) => ((i + 1) as f64 * trace.dt, (i + 1).min(n - 1)),
        None => (0.0, 0),
    };
    let np: f64 = trace.s.iter().map(|s| s[idx] - s[0]).sum();
    let nce: f64 = trace.steps.iter().flat_map(|st| st.u.iter()).map(|u| u.abs()).sum();
    TaskMetrics { tct, nce, np, np_over_tct: if tct > 0.0 { np / tct } else { 0.0 } }
}

/// Fraction of the straight segment from `a` to `b` lying in `[lo, hi]`.
fn fraction_in(a: f64, b: f64, lo: f64, hi: f64) -> f64 {
    if (b - a).abs() < 1e-12 {
        return if a >= lo && a <= hi { 1.0 } else { 0.0 };
    }
    let (p, q) = if a < b { (a, b) } else { (b, a) };
    let overlap = (q.min(hi) - p.max(lo)).max(0.0);
    overlap / (q - p)
}

pub fn compute_metrics(trace: &SimTrace, spec: &GameSpec) -> Result<Metrics, ModelError> {
    let task = compute_task_metrics(trace, spec);
    let mut players = Vec::with_capacity(spec.players.len());
    for (p, pl) in spec.players.iter().enumerate() {
        let r = pl
            .region
            .ok_or_else(|| ModelError::InvalidSpec(format!("players[{p}]: region markers required for metrics")))?;
        let (mut t_r, mut c_r, mut t_w) = (0.0, 0.0, 0.0);
        for (i, st) in trace.steps.iter().enumerate() {
            let (a, b) = (trace.s[p][i], trace.s[p][i + 1]);
            let inside = fraction_in(a, b, r.entry_s, r.exit_s);
            t_r += inside * trace.dt;
            c_r += inside * st.u[p].abs();
            t_w += fraction_in(a, b, r.entry_s - r.wait_radius, r.entry_s) * trace.dt;
        }
        players.push(PlayerMetrics { t_r, c_r, t_w });
    }
    Ok(Metrics { task, players })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub pair: usize,
    /// Segment from state `step - 1` to state `step`.
    pub step: usize,
    pub param: f64,
    pub point: (f64, f64),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IntersampleReport {
    pub segments_checked: usize,
    pub violations: Vec<Violation>,
}

impl IntersampleReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

const INSIDE_TOL: f64 = 1e-6;

/// Samples every segment between consecutive progress pairs at `oversample`
/// evenly spaced points, endpoints included, and reports points strictly
/// inside a collision area.
pub fn verify_intersample(s: &[Vec<f64>], spec: &GameSpec, oversample: usize) -> IntersampleReport {
    assert!(oversample >= 2, "oversample must be at least 2");
    let mut report = IntersampleReport::default();
    for (ci, c) in spec.conflicts.iter().enumerate() {
        let (xs, ys) = (&s[c.pair.0], &s[c.pair.1]);
        for k in 1..xs.len().min(ys.len()) {
            report.segments_checked += 1;
            for i in 0..oversample {
                let t = i as f64 / (oversample - 1) as f64;
                let x = xs[k - 1] + t * (xs[k] - xs[k - 1]);
                let y = ys[k - 1] + t * (ys[k] - ys[k - 1]);
                if inside_collision_area(&c.bounds, x, y, INSIDE_TOL) {
                    report.violations.push(Violation { pair: ci, step: k, param: t, point: (x, y) });
                }
            }
        }
    }
    report
}

pub fn verify_solution(sol: &Solution, spec: &GameSpec, oversample: usize) -> IntersampleReport {
    let s: Vec<Vec<f64>> = sol.trajectories.iter().map(|t| t.s.clone()).collect();
    verify_intersample(&s, spec, oversample)
}

pub fn verify_trace(trace: &SimTrace, spec: &GameSpec, oversample: usize) -> IntersampleReport {
    verify_intersample(&trace.s, spec, oversample)
}

/// First index at which `s` reaches `level` (within round-off).
fn crossing(s: &[f64], level: f64) -> Option<usize> {
    s.iter().position(|&x| x >= level - INSIDE_TOL)
}

/// Entry order actually realized per pair: `Some(0)` if the first player
/// reached its upper entry bound no later than the second, `Some(1)` if the
/// second got there strictly first, `None` if neither did.
pub fn realized_class(s: &[Vec<f64>], spec: &GameSpec) -> Vec<Option<u8>> {
    spec.conflicts
        .iter()
        .map(|c| {
            let a = crossing(&s[c.pair.0], c.bounds.first.entry_hi);
            let b = crossing(&s[c.pair.1], c.bounds.second.entry_hi);
            match (a, b) {
                (None, None) => None,
                (Some(_), None) => Some(0),
                (None, Some(_)) => Some(1),
                (Some(a), Some(b)) => Some(u8::from(b < a)),
            }
        })
        .collect()
}
