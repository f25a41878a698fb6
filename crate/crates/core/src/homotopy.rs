//! Scenario homotopy classes: enumeration, deadlock detection and ranking.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::error::{HomotopyError, SolverError};
use crate::model::{assemble, assemble_csp, GameSpec, HomotopyAssignment, Mode, Solution};
use crate::solver::{solve_miqp, BnbConfig, SolveStats};

pub const DEFAULT_PAIR_CAP: usize = 16;

/// All `2^n` classes in lexicographic order over the spec's pair order.
pub fn enumerate_classes(spec: &GameSpec) -> Result<Vec<HomotopyAssignment>, HomotopyError> {
    enumerate_classes_capped(spec.conflicts.len(), DEFAULT_PAIR_CAP)
}

pub fn enumerate_classes_capped(pairs: usize, cap: usize) -> Result<Vec<HomotopyAssignment>, HomotopyError> {
    if pairs > cap {
        return Err(HomotopyError::TooManyPairs { pairs, cap });
    }
    Ok((0..1usize << pairs)
        .map(|code| HomotopyAssignment((0..pairs).map(|i| ((code >> (pairs - 1 - i)) & 1) as u8).collect()))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DeadlockStatus {
    Feasible,
    Deadlock,
}

/// Smallest CSP length: one point per class component.
pub fn default_n_csp(spec: &GameSpec) -> usize {
    spec.conflicts.len().max(1)
}

/// Whether monotone progress through every conflict is possible under `class`.
pub fn deadlock_check(
    spec: &GameSpec,
    class: &HomotopyAssignment,
    n_csp: usize,
) -> Result<DeadlockStatus, HomotopyError> {
    let csp = assemble_csp(spec, class, n_csp)?;
    match solve_miqp(&csp, &BnbConfig::default()) {
        Ok(_) => Ok(DeadlockStatus::Feasible),
        Err(SolverError::Infeasible) => Ok(DeadlockStatus::Deadlock),
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClassStatus {
    Feasible,
    Deadlock,
    /// Not a deadlock, but no plan exists within the horizon.
    Infeasible,
    Error(String),
}

impl ClassStatus {
    pub fn label(&self) -> &'static str {
        match self {
            ClassStatus::Feasible => "feasible",
            ClassStatus::Deadlock => "deadlock",
            ClassStatus::Infeasible => "infeasible",
            ClassStatus::Error(_) => "error",
        }
    }

    fn rank(&self) -> u8 {
        match self {
            ClassStatus::Feasible => 0,
            ClassStatus::Infeasible => 1,
            ClassStatus::Error(_) => 2,
            ClassStatus::Deadlock => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassReport {
    pub class: HomotopyAssignment,
    pub status: ClassStatus,
    pub objective: Option<f64>,
    pub stats: Option<SolveStats>,
    pub solution: Option<Solution>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankConfig {
    pub bnb: BnbConfig,
    /// Defaults to [`default_n_csp`].
    pub n_csp: Option<usize>,
    pub jobs: usize,
    /// Also solve the free-homotopy problem and compare objectives.
    pub check_free: bool,
    pub keep_solutions: bool,
}

impl Default for RankConfig {
    fn default() -> Self {
        RankConfig { bnb: BnbConfig::default(), n_csp: None, jobs: 1, check_free: true, keep_solutions: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FreeCheck {
    pub objective: f64,
    pub class: Option<HomotopyAssignment>,
    pub stats: SolveStats,
    /// Free objective equals the best fixed-class objective within the MIP gap.
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    /// Feasible classes by objective (ties toward the smaller class), then the rest.
    pub reports: Vec<ClassReport>,
    pub free: Option<FreeCheck>,
}

impl Ranking {
    pub fn best(&self) -> Option<&ClassReport> {
        self.reports.first().filter(|r| r.status == ClassStatus::Feasible)
    }

    /// Feasible classes whose objective is within `tol` of the best.
    pub fn optimal_set(&self, tol: f64) -> Vec<&HomotopyAssignment> {
        let Some(best) = self.best().and_then(|b| b.objective) else {
            return Vec::new();
        };
        self.reports
            .iter()
            .filter(|r| r.status == ClassStatus::Feasible && r.objective.is_some_and(|o| o <= best + tol))
            .map(|r| &r.class)
            .collect()
    }
}

fn evaluate(spec: &GameSpec, class: &HomotopyAssignment, config: &RankConfig) -> ClassReport {
    let mut report = ClassReport { class: class.clone(), status: ClassStatus::Feasible, objective: None, stats: None, solution: None };
    let n_csp = config.n_csp.unwrap_or_else(|| default_n_csp(spec));
    match deadlock_check(spec, class, n_csp) {
        Ok(DeadlockStatus::Deadlock) => {
            report.status = ClassStatus::Deadlock;
            return report;
        }
        Ok(DeadlockStatus::Feasible) => {}
        Err(e) => {
            report.status = ClassStatus::Error(e.to_string());
            return report;
        }
    }
    let fixed = spec.with_mode(Mode::fixed(class));
    let result = assemble(&fixed).map_err(SolverError::from).and_then(|m| solve_miqp(&m, &config.bnb));
    match result {
        Ok((sol, stats)) => {
            report.objective = Some(sol.objective);
            report.stats = Some(stats);
            if config.keep_solutions {
                report.solution = Some(sol);
            }
        }
        Err(SolverError::Infeasible) => report.status = ClassStatus::Infeasible,
        Err(e) => report.status = ClassStatus::Error(e.to_string()),
    }
    report
}

/// Runs `f` over `items` on `jobs` threads; results keep the input order.
pub fn par_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let jobs = jobs.clamp(1, items.len().max(1));
    if jobs == 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().unwrap()[i] = Some(r);
            });
        }
    });
    slots.into_inner().unwrap().into_iter().map(|r| r.expect("every item evaluated")).collect()
}

/// Deadlock-checks and solves every class, then sorts the reports.
pub fn rank_classes(spec: &GameSpec, config: &RankConfig) -> Result<Ranking, HomotopyError> {
    let classes = enumerate_classes(spec)?;
    let mut reports = par_map(&classes, config.jobs, |c| evaluate(spec, c, config));
    sort_reports(&mut reports, config.bnb.mip_gap);

    let free = if config.check_free {
        let m = assemble(&spec.with_mode(Mode::FreeHomotopy))?;
        match solve_miqp(&m, &config.bnb) {
            Ok((sol, stats)) => {
                let best = reports.first().filter(|r| r.status == ClassStatus::Feasible).and_then(|r| r.objective);
                let consistent = best.is_some_and(|b| (b - sol.objective).abs() <= config.bnb.mip_gap);
                Some(FreeCheck { objective: sol.objective, class: sol.homotopy, stats, consistent })
            }
            Err(SolverError::Infeasible) => None,
            Err(e) => return Err(e.into()),
        }
    } else {
        None
    };
    Ok(Ranking { reports, free })
}

/// Status order, then objective; objectives within `tol` of the run's
/// cluster leader count as tied and fall back to class order.
pub fn sort_reports(reports: &mut [ClassReport], tol: f64) {
    reports.sort_by(|a, b| {
        a.status
            .rank()
            .cmp(&b.status.rank())
            .then(a.objective.unwrap_or(f64::INFINITY).total_cmp(&b.objective.unwrap_or(f64::INFINITY)))
            .then_with(|| a.class.cmp(&b.class))
    });
    let mut start = 0;
    while start < reports.len() {
        let lead = reports[start].objective;
        let mut end = start + 1;
        while end < reports.len()
            && reports[end].status.rank() == reports[start].status.rank()
            && match (lead, reports[end].objective) {
                (Some(a), Some(b)) => b - a <= tol,
                (None, None) => true,
                _ => false,
            }
        {
            end += 1;
        }
        reports[start..end].sort_by(|a, b| a.class.cmp(&b.class));
        start = end;
    }
}
