//! Global MIQP solver: best-first branch-and-bound over convex QP relaxations.

mod bnb;
mod brute;
mod propagate;
pub mod qp;

use std::time::Duration;

pub use bnb::{solve_miqp, BnBNode};
pub use brute::{brute_force, DEFAULT_MAX_BINARIES};
pub use propagate::{Propagation, Propagator};
pub use qp::{solve_qp, QPResult, QpProblem, QpSettings, QpStatus};

use crate::error::SolverError;
use crate::model::MixedIntegerQP;

#[derive(Debug, Clone, PartialEq)]
pub struct BnbConfig {
    /// Absolute optimality gap.
    pub mip_gap: f64,
    pub qp_tolerance: f64,
    pub max_nodes: Option<usize>,
    pub time_limit: Option<Duration>,
    /// Run the rounding dive at node depths divisible by this (0 disables).
    pub dive_period: usize,
    /// Full column vector whose binaries seed the incumbent.
    pub warm_start: Option<Vec<f64>>,
}

impl Default for BnbConfig {
    fn default() -> Self {
        BnbConfig {
            mip_gap: 1e-6,
            qp_tolerance: qp::DEFAULT_QP_TOLERANCE,
            max_nodes: None,
            time_limit: None,
            dive_period: 4,
            warm_start: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveStats {
    pub nodes_explored: usize,
    pub qp_solves: usize,
    pub wall_time: Duration,
    pub incumbent_updates: usize,
    /// Relaxation bound at the root node.
    pub root_bound: f64,
    /// Relaxations accepted without meeting the KKT tolerance.
    pub uncertified_qps: usize,
    /// Largest KKT residual among relaxations whose result was used.
    pub max_kkt_residual: f64,
    /// Child relaxations that came out below their parent's bound.
    pub bound_regressions: usize,
    pub warm_start_accepted: bool,
    pub limit_reached: bool,
    /// Incumbent minus best open bound; zero when solved to optimality.
    pub gap: f64,
}

/// Per-player improvement available by re-optimizing only that player's
/// continuous columns with everything else, binaries included, frozen.
pub fn best_response_gaps(miqp: &MixedIntegerQP, x: &[f64]) -> Result<Vec<f64>, SolverError> {
    let mut gaps = Vec::with_capacity(miqp.n_players);
    for p in 0..miqp.n_players {
        let owns: Vec<bool> = miqp.columns.iter().map(|k| k.player() == Some(p)).collect();
        let (mut lo, mut hi) = (miqp.lower.clone(), miqp.upper.clone());
        for j in 0..x.len() {
            if !owns[j] {
                lo[j] = x[j];
                hi[j] = x[j];
            }
        }
        let quad: Vec<_> = miqp.quad.iter().copied().filter(|&(i, j, _)| owns[i] && owns[j]).collect();
        let linear: Vec<f64> = miqp.linear.iter().enumerate().map(|(j, &q)| if owns[j] { q } else { 0.0 }).collect();
        let prob = QpProblem {
            quad: &quad,
            linear: &linear,
            eq_rows: &miqp.eq_rows,
            le_rows: &miqp.le_rows,
            lower: &lo,
            upper: &hi,
        };
        let r = solve_qp(&prob, &QpSettings::default())?;
        if r.status == QpStatus::Infeasible {
            return Err(SolverError::Infeasible);
        }
        let constant = miqp.player_constants.get(p).copied().unwrap_or(0.0);
        gaps.push(miqp.player_cost(p, x) - (r.objective + constant));
    }
    Ok(gaps)
}
