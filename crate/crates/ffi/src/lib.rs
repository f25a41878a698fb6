//! C interface to the homotopy planner.
//!
//! Scenarios and solutions are opaque heap handles released with their
//! `_free` function. Every fallible call returns an [`HpStatus`]; on failure
//! a message is kept per thread and read with [`hp_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::time::Duration;

use homotopy_planner::homotopy::{deadlock_check, default_n_csp, DeadlockStatus};
use homotopy_planner::model::{assemble, GameSpec, HomotopyAssignment, Mode, Solution};
use homotopy_planner::scenario::{bundled, load_scenario, parse_scenario};
use homotopy_planner::solver::{solve_miqp, BnbConfig, SolveStats};
use homotopy_planner::{HomotopyError, ScenarioError, SolverError};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    Validation = 5,
    Geometry = 6,
    Infeasible = 7,
    Limit = 8,
    Solver = 9,
    OutOfRange = 10,
    Panic = 11,
}

/// Which per-step series of a trajectory to copy out.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HpSeries {
    Progress = 0,
    Velocity = 1,
    Control = 2,
}

/// A validated game specification.
pub struct HpScenario {
    spec: GameSpec,
}

/// A solved plan with its solver statistics.
pub struct HpSolution {
    solution: Solution,
    stats: SolveStats,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn fail(status: HpStatus, msg: impl Into<String>) -> HpStatus {
    set_error(msg);
    status
}

fn scenario_status(e: &ScenarioError) -> HpStatus {
    match e {
        ScenarioError::Io { .. } => HpStatus::Io,
        ScenarioError::Parse(_) => HpStatus::Parse,
        ScenarioError::Invalid { .. } => HpStatus::Validation,
        ScenarioError::Geometry { .. } => HpStatus::Geometry,
    }
}

fn solver_status(e: &SolverError) -> HpStatus {
    match e {
        SolverError::Infeasible => HpStatus::Infeasible,
        SolverError::Limit { .. } => HpStatus::Limit,
        SolverError::Model(_) => HpStatus::Validation,
        _ => HpStatus::Solver,
    }
}

/// Runs `f`, turning panics into [`HpStatus::Panic`].
fn guard(f: impl FnOnce() -> HpStatus) -> HpStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(HpStatus::Panic, "internal panic"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, HpStatus> {
    if p.is_null() {
        return Err(fail(HpStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(HpStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn emit_scenario(out: *mut *mut HpScenario, r: Result<GameSpec, ScenarioError>) -> HpStatus {
    match r {
        Ok(spec) => {
            *out = Box::into_raw(Box::new(HpScenario { spec }));
            HpStatus::Ok
        }
        Err(e) => fail(scenario_status(&e), e.to_string()),
    }
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn hp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map(|s| s.as_ptr()).unwrap_or(ptr::null()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads and validates a scenario JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hp_scenario_load(path: *const c_char, out: *mut *mut HpScenario) -> HpStatus {
    guard(|| {
        if out.is_null() {
            return fail(HpStatus::NullPointer, "out is null");
        }
        let path = match str_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        emit_scenario(out, load_scenario(Path::new(path)))
    })
}

/// Parses scenario JSON text. Geometry conflicts may only use inline paths.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hp_scenario_parse(json: *const c_char, out: *mut *mut HpScenario) -> HpStatus {
    guard(|| {
        if out.is_null() {
            return fail(HpStatus::NullPointer, "out is null");
        }
        let text = match str_arg(json, "json") {
            Ok(p) => p,
            Err(s) => return s,
        };
        emit_scenario(out, parse_scenario(text, None))
    })
}

/// Opens a scenario compiled into the library, e.g. `round_kackertstrasse`.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hp_scenario_bundled(name: *const c_char, out: *mut *mut HpScenario) -> HpStatus {
    guard(|| {
        if out.is_null() {
            return fail(HpStatus::NullPointer, "out is null");
        }
        let name = match str_arg(name, "name") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match bundled(name) {
            Some(spec) => {
                *out = Box::into_raw(Box::new(HpScenario { spec }));
                HpStatus::Ok
            }
            None => fail(HpStatus::Io, format!("no bundled scenario named `{name}`")),
        }
    })
}

/// # Safety
/// `scenario` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hp_scenario_free(scenario: *mut HpScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// # Safety
/// `scenario` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hp_scenario_player_count(scenario: *const HpScenario) -> usize {
    scenario.as_ref().map(|s| s.spec.players.len()).unwrap_or(0)
}

/// # Safety
/// `scenario` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hp_scenario_pair_count(scenario: *const HpScenario) -> usize {
    scenario.as_ref().map(|s| s.spec.conflicts.len()).unwrap_or(0)
}

/// # Safety
/// `scenario` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hp_scenario_horizon(scenario: *const HpScenario) -> usize {
    scenario.as_ref().map(|s| s.spec.horizon).unwrap_or(0)
}

/// Sets the homotopy mode: `free`, `none`, or `fixed:<bits>`.
///
/// # Safety
/// `scenario` must be a live handle; `mode` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn hp_scenario_set_mode(scenario: *mut HpScenario, mode: *const c_char) -> HpStatus {
    guard(|| {
        let Some(sc) = scenario.as_mut() else {
            return fail(HpStatus::NullPointer, "scenario is null");
        };
        let text = match str_arg(mode, "mode") {
            Ok(p) => p,
            Err(s) => return s,
        };
        let mode: Mode = match text.parse() {
            Ok(m) => m,
            Err(e) => return fail(HpStatus::Validation, e),
        };
        let candidate = sc.spec.with_mode(mode);
        if let Err(e) = candidate.validate() {
            return fail(HpStatus::Validation, e.to_string());
        }
        sc.spec = candidate;
        HpStatus::Ok
    })
}

/// Solves the scenario's MIQP. `max_nodes` of 0 and `time_limit_s` ≤ 0 mean
/// no limit. A limit hit with a plan in hand still returns `Ok`.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hp_solve(
    scenario: *const HpScenario,
    max_nodes: usize,
    time_limit_s: f64,
    out: *mut *mut HpSolution,
) -> HpStatus {
    guard(|| {
        let Some(sc) = scenario.as_ref() else {
            return fail(HpStatus::NullPointer, "scenario is null");
        };
        if out.is_null() {
            return fail(HpStatus::NullPointer, "out is null");
        }
        let miqp = match assemble(&sc.spec) {
            Ok(m) => m,
            Err(e) => return fail(HpStatus::Validation, e.to_string()),
        };
        let config = BnbConfig {
            max_nodes: (max_nodes > 0).then_some(max_nodes),
            time_limit: (time_limit_s > 0.0).then(|| Duration::from_secs_f64(time_limit_s)),
            ..BnbConfig::default()
        };
        match solve_miqp(&miqp, &config) {
            Ok((solution, stats)) => {
                *out = Box::into_raw(Box::new(HpSolution { solution, stats }));
                HpStatus::Ok
            }
            Err(e) => fail(solver_status(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `solution` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hp_solution_free(solution: *mut HpSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// Joint objective value; NaN for a null handle.
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hp_solution_objective(solution: *const HpSolution) -> f64 {
    solution.as_ref().map(|s| s.solution.objective).unwrap_or(f64::NAN)
}

/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hp_solution_nodes(solution: *const HpSolution) -> usize {
    solution.as_ref().map(|s| s.stats.nodes_explored).unwrap_or(0)
}

/// Remaining optimality gap; zero when solved to optimality.
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hp_solution_gap(solution: *const HpSolution) -> f64 {
    solution.as_ref().map(|s| s.stats.gap).unwrap_or(f64::NAN)
}

/// Copies the homotopy bits (one byte per pair) into `bits`. `len` must be at
/// least the pair count; `written` receives the count. Solutions without
/// homotopy variables write zero entries.
///
/// # Safety
/// `bits` must hold `len` bytes; `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hp_solution_class(solution: *const HpSolution, bits: *mut u8, len: usize, written: *mut usize) -> HpStatus {
    guard(|| {
        let Some(sol) = solution.as_ref() else {
            return fail(HpStatus::NullPointer, "solution is null");
        };
        if written.is_null() {
            return fail(HpStatus::NullPointer, "written is null");
        }
        let class = sol.solution.homotopy.as_ref().map(|c| c.0.as_slice()).unwrap_or(&[]);
        if class.len() > len {
            return fail(HpStatus::OutOfRange, format!("buffer holds {len} entries, need {}", class.len()));
        }
        if !class.is_empty() {
            if bits.is_null() {
                return fail(HpStatus::NullPointer, "bits is null");
            }
            ptr::copy_nonoverlapping(class.as_ptr(), bits, class.len());
        }
        *written = class.len();
        HpStatus::Ok
    })
}

/// Copies one player's series (`N + 1` values for progress and velocity,
/// `N` for control) into `buf`; `written` receives the count.
///
/// # Safety
/// `buf` must hold `len` doubles; `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hp_solution_series(
    solution: *const HpSolution,
    player: usize,
    series: HpSeries,
    buf: *mut f64,
    len: usize,
    written: *mut usize,
) -> HpStatus {
    guard(|| {
        let Some(sol) = solution.as_ref() else {
            return fail(HpStatus::NullPointer, "solution is null");
        };
        if buf.is_null() || written.is_null() {
            return fail(HpStatus::NullPointer, "buf or written is null");
        }
        let Some(t) = sol.solution.trajectories.get(player) else {
            return fail(HpStatus::OutOfRange, format!("player index {player} out of range"));
        };
        let data = match series {
            HpSeries::Progress => &t.s,
            HpSeries::Velocity => &t.v,
            HpSeries::Control => &t.u,
        };
        if data.len() > len {
            return fail(HpStatus::OutOfRange, format!("buffer holds {len} values, need {}", data.len()));
        }
        ptr::copy_nonoverlapping(data.as_ptr(), buf, data.len());
        *written = data.len();
        HpStatus::Ok
    })
}

/// Checks whether class `bits` (one byte per pair, 0 or 1) is a deadlock.
/// `is_deadlock` receives 1 for a deadlock and 0 otherwise.
///
/// # Safety
/// `bits` must hold `len` bytes; `is_deadlock` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hp_deadlock_check(
    scenario: *const HpScenario,
    bits: *const u8,
    len: usize,
    is_deadlock: *mut i32,
) -> HpStatus {
    guard(|| {
        let Some(sc) = scenario.as_ref() else {
            return fail(HpStatus::NullPointer, "scenario is null");
        };
        if is_deadlock.is_null() || (bits.is_null() && len > 0) {
            return fail(HpStatus::NullPointer, "bits or is_deadlock is null");
        }
        let raw = if len == 0 { &[][..] } else { std::slice::from_raw_parts(bits, len) };
        if raw.iter().any(|&b| b > 1) {
            return fail(HpStatus::Validation, "class bits must be 0 or 1");
        }
        let class = HomotopyAssignment(raw.to_vec());
        match deadlock_check(&sc.spec, &class, default_n_csp(&sc.spec)) {
            Ok(DeadlockStatus::Deadlock) => {
                *is_deadlock = 1;
                HpStatus::Ok
            }
            Ok(DeadlockStatus::Feasible) => {
                *is_deadlock = 0;
                HpStatus::Ok
            }
            Err(HomotopyError::Model(e)) => fail(HpStatus::Validation, e.to_string()),
            Err(HomotopyError::Solver(e)) => fail(solver_status(&e), e.to_string()),
            Err(e) => fail(HpStatus::Solver, e.to_string()),
        }
    })
}
