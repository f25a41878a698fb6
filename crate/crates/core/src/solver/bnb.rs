use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use super::propagate::{Propagation, Propagator};
use super::qp::{solve_qp, QpProblem, QpSettings, QpStatus};
use super::{BnbConfig, SolveStats};
use crate::error::SolverError;
use crate::model::{decode, MixedIntegerQP, Row, Solution};

const INT_TOL: f64 = 1e-6;
const VERTEX_TOL: f64 = 1e-6;
/// Bounds closer than this count as tied for node selection.
const BOUND_QUANTUM: f64 = 1e-9;

/// Open node: binary fixings as tightened bounds on the binary columns.
#[derive(Debug, Clone)]
pub struct BnBNode {
    /// Per binary column (in `binary_columns` order): 0, 1, or 2 for free.
    pub fixings: Vec<u8>,
    pub parent_bound: f64,
    pub depth: usize,
    id: u64,
}

impl PartialEq for BnBNode {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for BnBNode {}
impl PartialOrd for BnBNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for BnBNode {
    // Reversed so the max-heap pops the lowest bound; among equal bounds the
    // newest node goes first, which turns ties into a depth-first plunge.
    fn cmp(&self, other: &Self) -> Ordering {
        let key = |n: &BnBNode| (n.parent_bound / BOUND_QUANTUM).round();
        key(other).total_cmp(&key(self)).then_with(|| self.id.cmp(&other.id))
    }
}

struct Search<'a> {
    miqp: &'a MixedIntegerQP,
    qp: QpSettings,
    prop: Propagator,
    bins: Vec<usize>,
    stats: SolveStats,
    incumbent: Option<(f64, Vec<f64>)>,
    /// Inequality rows with a little slack, for the vertex LP.
    loose_le: Vec<Row>,
    vertex_cost: Vec<f64>,
}

impl Search<'_> {
    fn relax(&mut self, lower: &[f64], upper: &[f64]) -> Result<Option<(f64, Vec<f64>)>, SolverError> {
        let prob = QpProblem {
            quad: &self.miqp.quad,
            linear: &self.miqp.linear,
            eq_rows: &self.miqp.eq_rows,
            le_rows: &self.miqp.le_rows,
            lower,
            upper,
        };
        self.stats.qp_solves += 1;
        let r = solve_qp(&prob, &self.qp)?;
        match r.status {
            QpStatus::Infeasible => Ok(None),
            QpStatus::Optimal => {
                self.stats.max_kkt_residual = self.stats.max_kkt_residual.max(r.kkt_residual);
                Ok(Some((r.objective + self.miqp.constant, r.point)))
            }
            QpStatus::IterLimit => {
                if self.miqp.max_violation(&r.point) > 1e-5 {
                    Ok(None)
                } else {
                    self.stats.uncertified_qps += 1;
                    self.stats.max_kkt_residual = self.stats.max_kkt_residual.max(r.kkt_residual);
                    Ok(Some((r.objective + self.miqp.constant, r.point)))
                }
            }
        }
    }

    /// Moves the binaries of a relaxation point to a vertex of their feasible
    /// set with the trajectory columns held fixed. The objective does not
    /// involve binaries, so the point stays optimal; an interior solution
    /// would otherwise leave every binary fractional.
    fn vertex(&mut self, x: &mut [f64], lower: &[f64], upper: &[f64]) -> Result<(), SolverError> {
        if self.bins.iter().all(|&j| upper[j] - lower[j] < 0.5) {
            return Ok(());
        }
        let (mut lo, mut hi) = (lower.to_vec(), upper.to_vec());
        for (j, key) in self.miqp.columns.iter().enumerate() {
            if key.player().is_some() {
                lo[j] = x[j];
                hi[j] = x[j];
            }
        }
        let prob = QpProblem {
            quad: &[],
            linear: &self.vertex_cost,
            eq_rows: &self.miqp.eq_rows,
            le_rows: &self.loose_le,
            lower: &lo,
            upper: &hi,
        };
        let settings = QpSettings { tolerance: VERTEX_TOL, check_psd: false, ..self.qp };
        self.stats.qp_solves += 1;
        let r = solve_qp(&prob, &settings)?;
        if r.status == QpStatus::Infeasible {
            return Ok(());
        }
        for (j, key) in self.miqp.columns.iter().enumerate() {
            if key.player().is_none() {
                let v = r.point[j];
                x[j] = if (v - v.round()).abs() <= INT_TOL { v.round() } else { v };
            }
        }
        Ok(())
    }

    fn offer(&mut self, obj: f64, x: Vec<f64>) {
        if self.incumbent.as_ref().is_none_or(|(best, _)| obj < *best - 1e-12) {
            self.stats.incumbent_updates += 1;
            self.incumbent = Some((obj, x));
        }
    }

    /// All binaries fixed at their rounded values, then one QP.
    fn complete(&mut self, x: &[f64], lower: &[f64], upper: &[f64]) -> Result<(), SolverError> {
        let (mut lo, mut hi) = (lower.to_vec(), upper.to_vec());
        let mut changed = false;
        for &j in &self.bins {
            let v = x[j].round().clamp(lo[j], hi[j]);
            changed |= hi[j] - lo[j] > 0.5;
            lo[j] = v;
            hi[j] = v;
        }
        if !changed {
            self.offer(self.miqp.objective(x), x.to_vec());
            return Ok(());
        }
        if let Some((obj, mut p)) = self.relax(&lo, &hi)? {
            for &j in &self.bins {
                p[j] = p[j].round();
            }
            self.offer(obj, p);
        }
        Ok(())
    }

    /// Round-and-repair: fix binaries to their rounded relaxation values, most
    /// decided first, propagating after each and flipping on contradiction.
    fn dive(&mut self, x: &[f64], lower: &[f64], upper: &[f64]) -> Result<(), SolverError> {
        let (mut lo, mut hi) = (lower.to_vec(), upper.to_vec());
        let mut order: Vec<usize> = self.bins.iter().copied().filter(|&j| hi[j] - lo[j] > 0.5).collect();
        order.sort_by(|&a, &b| (x[b] - 0.5).abs().total_cmp(&(x[a] - 0.5).abs()).then(a.cmp(&b)));
        for j in order {
            if hi[j] - lo[j] < 0.5 {
                continue;
            }
            let v = x[j].round();
            let mut ok = false;
            for val in [v, 1.0 - v] {
                let (mut l2, mut h2) = (lo.clone(), hi.clone());
                l2[j] = val;
                h2[j] = val;
                if self.prop.propagate(&mut l2, &mut h2) != Propagation::Prune {
                    lo = l2;
                    hi = h2;
                    ok = true;
                    break;
                }
            }
            if !ok {
                return Ok(());
            }
        }
        if let Some((obj, mut p)) = self.relax(&lo, &hi)? {
            for &j in &self.bins {
                p[j] = p[j].round();
            }
            self.offer(obj, p);
        }
        Ok(())
    }

    fn try_warm_start(&mut self, seed: &[f64]) -> Result<(), SolverError> {
        if seed.len() != self.miqp.n_vars() {
            return Ok(());
        }
        let (mut lo, mut hi) = (self.miqp.lower.clone(), self.miqp.upper.clone());
        for &j in &self.bins {
            let v = seed[j].round();
            if v < lo[j] || v > hi[j] {
                return Ok(());
            }
            lo[j] = v;
            hi[j] = v;
        }
        if self.prop.propagate(&mut lo, &mut hi) == Propagation::Prune {
            return Ok(());
        }
        if let Some((obj, mut p)) = self.relax(&lo, &hi)? {
            for &j in &self.bins {
                p[j] = p[j].round();
            }
            self.stats.warm_start_accepted = true;
            self.offer(obj, p);
        }
        Ok(())
    }
}

fn most_fractional(bins: &[usize], x: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &j in bins {
        let f = (x[j] - x[j].round()).abs();
        if f > INT_TOL && best.is_none_or(|(_, bf)| f > bf) {
            best = Some((j, f));
        }
    }
    best.map(|(j, _)| j)
}

/// Distinct positive weights on the binaries so the vertex LP has a unique
/// optimum.
fn vertex_cost(miqp: &MixedIntegerQP) -> Vec<f64> {
    const PHI: f64 = 0.618_033_988_749_895;
    (0..miqp.n_vars()).map(|j| if miqp.binary[j] { 1.0 + 0.5 * (j as f64 * PHI).fract() } else { 0.0 }).collect()
}

/// Best-first branch-and-bound to a certified global optimum.
pub fn solve_miqp(miqp: &MixedIntegerQP, config: &BnbConfig) -> Result<(Solution, SolveStats), SolverError> {
    let start = Instant::now();
    let bins = miqp.binary_columns();
    let mut search = Search {
        miqp,
        qp: QpSettings { tolerance: config.qp_tolerance, ..QpSettings::default() },
        prop: Propagator::new(miqp),
        bins,
        stats: SolveStats::default(),
        incumbent: None,
        loose_le: miqp.le_rows.iter().map(|r| Row { rhs: r.rhs + VERTEX_TOL, ..r.clone() }).collect(),
        vertex_cost: vertex_cost(miqp),
    };
    super::qp::check_psd(&miqp.quad)?;
    search.qp.check_psd = false;
    if let Some(seed) = &config.warm_start {
        search.try_warm_start(seed)?;
    }

    let mut heap = BinaryHeap::new();
    let mut next_id = 0u64;
    let root: Vec<u8> = search.bins.iter().map(|&j| if miqp.upper[j] - miqp.lower[j] < 0.5 { miqp.lower[j] as u8 } else { 2 }).collect();
    heap.push(BnBNode { fixings: root, parent_bound: f64::NEG_INFINITY, depth: 0, id: next_id });
    next_id += 1;
    let mut limit_hit = false;
    let mut best_open = f64::NEG_INFINITY;

    while let Some(node) = heap.pop() {
        if let Some((inc, _)) = &search.incumbent {
            if node.parent_bound >= *inc - config.mip_gap {
                best_open = *inc;
                heap.clear();
                break;
            }
        }
        let over_nodes = config.max_nodes.is_some_and(|m| search.stats.nodes_explored >= m);
        let over_time = config.time_limit.is_some_and(|t| start.elapsed() >= t);
        if over_nodes || over_time {
            limit_hit = true;
            best_open = node.parent_bound;
            break;
        }
        search.stats.nodes_explored += 1;

        let (mut lo, mut hi) = (miqp.lower.clone(), miqp.upper.clone());
        for (b, &j) in search.bins.iter().enumerate() {
            if node.fixings[b] != 2 {
                lo[j] = node.fixings[b] as f64;
                hi[j] = lo[j];
            }
        }
        if search.prop.propagate(&mut lo, &mut hi) == Propagation::Prune {
            continue;
        }
        let Some((bound, mut x)) = search.relax(&lo, &hi)? else {
            continue;
        };
        // Relative slack: interior-point objectives carry round-off that scales with size.
        if bound < node.parent_bound - 1e-9 * (1.0 + node.parent_bound.abs()) {
            search.stats.bound_regressions += 1;
        }
        if node.depth == 0 {
            search.stats.root_bound = bound;
        }
        let bound = bound.max(node.parent_bound);
        if search.incumbent.as_ref().is_some_and(|(inc, _)| bound >= *inc - config.mip_gap) {
            continue;
        }
        if most_fractional(&search.bins, &x).is_some() {
            search.vertex(&mut x, &lo, &hi)?;
        }
        let Some(branch) = most_fractional(&search.bins, &x) else {
            search.complete(&x, &lo, &hi)?;
            continue;
        };
        if config.dive_period > 0 && node.depth % config.dive_period == 0 {
            search.dive(&x, &lo, &hi)?;
        }
        let bpos = search.bins.iter().position(|&j| j == branch).unwrap();
        let mut base = node.fixings.clone();
        for (b, &j) in search.bins.iter().enumerate() {
            if hi[j] - lo[j] < 0.5 {
                base[b] = lo[j] as u8;
            }
        }
        let near = x[branch].round() as u8;
        for val in [near, 1 - near] {
            let mut f = base.clone();
            f[bpos] = val;
            heap.push(BnBNode { fixings: f, parent_bound: bound, depth: node.depth + 1, id: next_id });
            next_id += 1;
        }
    }

    search.stats.wall_time = start.elapsed();
    let Some((obj, x)) = search.incumbent.take() else {
        return if limit_hit {
            Err(SolverError::Limit { gap: f64::INFINITY, incumbent: None })
        } else {
            Err(SolverError::Infeasible)
        };
    };
    let mut stats = search.stats;
    stats.gap = if limit_hit { (obj - best_open).max(0.0) } else { 0.0 };
    stats.limit_reached = limit_hit;
    Ok((decode(miqp, &x)?, stats))
}
