//! Convex QP relaxations, solved by an interior-point backend and certified by
//! an independent KKT residual.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};

use crate::error::SolverError;
use crate::model::Row;

pub const DEFAULT_QP_TOLERANCE: f64 = 1e-7;
const FIX_TOL: f64 = 1e-12;

/// `min ½xᵀQx + qᵀx` subject to rows and bounds. `quad` holds the upper triangle.
#[derive(Debug, Clone, Copy)]
pub struct QpProblem<'a> {
    pub quad: &'a [(usize, usize, f64)],
    pub linear: &'a [f64],
    pub eq_rows: &'a [Row],
    pub le_rows: &'a [Row],
    pub lower: &'a [f64],
    pub upper: &'a [f64],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpSettings {
    pub tolerance: f64,
    pub max_iter: u32,
    pub check_psd: bool,
}

impl Default for QpSettings {
    fn default() -> Self {
        QpSettings { tolerance: DEFAULT_QP_TOLERANCE, max_iter: 200, check_psd: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    IterLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QPResult {
    pub point: Vec<f64>,
    /// `½xᵀQx + qᵀx` at `point`.
    pub objective: f64,
    pub status: QpStatus,
    /// KKT residual for `Optimal`; certificate residual for `Infeasible`.
    pub kkt_residual: f64,
    pub iterations: u32,
}

impl QpProblem<'_> {
    pub fn n(&self) -> usize {
        self.linear.len()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let mut v: f64 = self.linear.iter().zip(x).map(|(q, x)| q * x).sum();
        for &(i, j, q) in self.quad {
            v += if i == j { 0.5 * q * x[i] * x[i] } else { q * x[i] * x[j] };
        }
        v
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.linear.to_vec();
        for &(i, j, q) in self.quad {
            if i == j {
                g[i] += q * x[i];
            } else {
                g[i] += q * x[j];
                g[j] += q * x[i];
            }
        }
        g
    }

    pub fn primal_residual(&self, x: &[f64]) -> f64 {
        let mut r: f64 = 0.0;
        for row in self.eq_rows {
            r = r.max((row.activity(x) - row.rhs).abs());
        }
        for row in self.le_rows {
            r = r.max(row.activity(x) - row.rhs);
        }
        for j in 0..x.len() {
            r = r.max(self.lower[j] - x[j]).max(x[j] - self.upper[j]);
        }
        r
    }

    /// Max of primal infeasibility, stationarity, dual sign and complementarity.
    ///
    /// Bound multipliers are chosen per column to minimize that column's error,
    /// so only row multipliers need to be supplied.
    pub fn kkt_residual(&self, x: &[f64], y_eq: &[f64], z_le: &[f64]) -> f64 {
        let mut res = self.primal_residual(x);
        let mut r = self.gradient(x);
        for (row, &y) in self.eq_rows.iter().zip(y_eq) {
            for &(j, a) in &row.terms {
                r[j] += a * y;
            }
        }
        for (row, &z) in self.le_rows.iter().zip(z_le) {
            res = res.max(-z);
            let slack = row.rhs - row.activity(x);
            res = res.max((z * slack).abs());
            for &(j, a) in &row.terms {
                r[j] += a * z;
            }
        }
        for j in 0..x.len() {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            if hi - lo <= FIX_TOL {
                continue;
            }
            let err = if r[j] > 0.0 {
                let gap = x[j] - lo;
                if gap.is_finite() { r[j].min(r[j] * gap.abs()) } else { r[j] }
            } else {
                let gap = hi - x[j];
                if gap.is_finite() { (-r[j]).min(-r[j] * gap.abs()) } else { -r[j] }
            };
            res = res.max(err);
        }
        res
    }
}

/// Rejects `Q` with a negative eigenvalue (cyclic Jacobi on the dense support).
pub fn check_psd(quad: &[(usize, usize, f64)]) -> Result<(), SolverError> {
    if quad.iter().all(|&(i, j, _)| i == j) {
        let mut diag = std::collections::HashMap::new();
        for &(i, _, v) in quad {
            *diag.entry(i).or_insert(0.0) += v;
        }
        return if diag.values().all(|&v| v >= -1e-12) { Ok(()) } else { Err(SolverError::IndefiniteQ) };
    }
    let mut support: Vec<usize> = quad.iter().flat_map(|&(i, j, _)| [i, j]).collect();
    support.sort_unstable();
    support.dedup();
    let pos = |c: usize| support.binary_search(&c).unwrap();
    let n = support.len();
    let mut a = vec![vec![0.0; n]; n];
    for &(i, j, v) in quad {
        let (p, q) = (pos(i), pos(j));
        a[p][q] += v;
        if p != q {
            a[q][p] += v;
        }
    }
    let scale = a.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|p| (0..n).filter(move |&q| q != p).map(move |q| (p, q))).map(|(p, q)| a[p][q] * a[p][q]).sum();
        if off.sqrt() < 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    if (0..n).all(|i| a[i][i] >= -1e-9 * scale) {
        Ok(())
    } else {
        Err(SolverError::IndefiniteQ)
    }
}

struct Outcome {
    status: SolverStatus,
    x: Vec<f64>,
    y_eq: Vec<f64>,
    z_le: Vec<f64>,
    iterations: u32,
    certificate: f64,
}

/// One backend call. Rows flagged in `le_as_eq` are imposed as equalities,
/// their multipliers are returned in `z_le` without sign restriction.
fn run_backend(
    prob: &QpProblem,
    lower: &[f64],
    upper: &[f64],
    le_as_eq: Option<&[bool]>,
    settings: &QpSettings,
) -> Result<Outcome, SolverError> {
    let n = prob.n();
    let mut pos = vec![usize::MAX; n];
    let mut free = Vec::new();
    let mut x_full = vec![0.0; n];
    for j in 0..n {
        if upper[j] - lower[j] <= FIX_TOL {
            x_full[j] = if lower[j].is_finite() { lower[j] } else { upper[j] };
        } else {
            pos[j] = free.len();
            free.push(j);
        }
    }
    let nf = free.len();

    let (mut pi, mut pj, mut pv) = (Vec::new(), Vec::new(), Vec::new());
    let mut q: Vec<f64> = free.iter().map(|&j| prob.linear[j]).collect();
    for &(i, j, v) in prob.quad {
        let (a, b) = (pos[i], pos[j]);
        match (a != usize::MAX, b != usize::MAX) {
            (true, true) => {
                pi.push(a.min(b));
                pj.push(a.max(b));
                pv.push(v);
            }
            (true, false) => q[a] += v * x_full[j],
            (false, true) => q[b] += v * x_full[i],
            (false, false) => {}
        }
    }

    let feas_tol = settings.tolerance;
    let (mut ai, mut aj, mut av) = (Vec::new(), Vec::new(), Vec::new());
    let mut bvec = Vec::new();
    let mut eq_map: Vec<Option<usize>> = Vec::new();
    let mut le_map: Vec<Option<usize>> = Vec::new();
    let mut infeasible_const = false;
    let mut push_row = |row: &Row, ai: &mut Vec<usize>, aj: &mut Vec<usize>, av: &mut Vec<f64>, bvec: &mut Vec<f64>, is_eq: bool| -> Option<usize> {
        let mut rhs = row.rhs;
        let mut any = false;
        let r = bvec.len();
        for &(j, a) in &row.terms {
            if pos[j] == usize::MAX {
                rhs -= a * x_full[j];
            } else if a != 0.0 {
                ai.push(r);
                aj.push(pos[j]);
                av.push(a);
                any = true;
            }
        }
        if any {
            bvec.push(rhs);
            Some(r)
        } else {
            let bad = if is_eq { rhs.abs() > feas_tol } else { rhs < -feas_tol };
            if bad {
                infeasible_const = true;
            }
            None
        }
    };
    let as_eq = |i: usize| le_as_eq.map(|f| f[i]).unwrap_or(false);
    for row in prob.eq_rows {
        let r = push_row(row, &mut ai, &mut aj, &mut av, &mut bvec, true);
        eq_map.push(r);
    }
    le_map.resize(prob.le_rows.len(), None);
    for (i, row) in prob.le_rows.iter().enumerate() {
        if as_eq(i) {
            le_map[i] = push_row(row, &mut ai, &mut aj, &mut av, &mut bvec, true);
        }
    }
    let n_zero = bvec.len();
    for (i, row) in prob.le_rows.iter().enumerate() {
        if !as_eq(i) {
            le_map[i] = push_row(row, &mut ai, &mut aj, &mut av, &mut bvec, false);
        }
    }
    for (k, &j) in free.iter().enumerate() {
        if upper[j].is_finite() {
            ai.push(bvec.len());
            aj.push(k);
            av.push(1.0);
            bvec.push(upper[j]);
        }
        if lower[j].is_finite() {
            ai.push(bvec.len());
            aj.push(k);
            av.push(-1.0);
            bvec.push(-lower[j]);
        }
    }
    if infeasible_const {
        return Ok(Outcome {
            status: SolverStatus::PrimalInfeasible,
            x: x_full,
            y_eq: vec![0.0; prob.eq_rows.len()],
            z_le: vec![0.0; prob.le_rows.len()],
            iterations: 0,
            certificate: f64::INFINITY,
        });
    }
    let m = bvec.len();
    if nf == 0 {
        return Ok(Outcome {
            status: SolverStatus::Solved,
            x: x_full,
            y_eq: vec![0.0; prob.eq_rows.len()],
            z_le: vec![0.0; prob.le_rows.len()],
            iterations: 0,
            certificate: 0.0,
        });
    }
    let p_mat = CscMatrix::new_from_triplets(nf, nf, pi, pj, pv);
    let a_mat = CscMatrix::new_from_triplets(m, nf, ai, aj, av);
    let mut cones = Vec::new();
    if n_zero > 0 {
        cones.push(SupportedConeT::ZeroConeT(n_zero));
    }
    if m > n_zero {
        cones.push(SupportedConeT::NonnegativeConeT(m - n_zero));
    }
    let st = DefaultSettings::<f64> {
        verbose: false,
        max_iter: settings.max_iter,
        tol_gap_abs: 1e-10,
        tol_gap_rel: 1e-10,
        tol_feas: 1e-10,
        tol_ktratio: 1e-8,
        presolve_enable: false,
        max_threads: 1,
        ..Default::default()
    };
    let mut solver = DefaultSolver::new(&p_mat, &q, &a_mat, &bvec, &cones, st)
        .map_err(|e| SolverError::Numerical(format!("{e:?}")))?;
    solver.solve();
    let sol = &solver.solution;
    for (k, &j) in free.iter().enumerate() {
        x_full[j] = sol.x[k];
    }
    let y_eq = eq_map.iter().map(|r| r.map(|r| sol.z[r]).unwrap_or(0.0)).collect();
    let z_le = le_map.iter().map(|r| r.map(|r| sol.z[r]).unwrap_or(0.0)).collect();
    Ok(Outcome {
        status: sol.status,
        x: x_full,
        y_eq,
        z_le,
        iterations: sol.iterations,
        certificate: sol.r_prim.max(sol.r_dual),
    })
}

/// Re-solves with the detected active set as equalities to tighten the KKT residual.
fn polish(prob: &QpProblem, first: &Outcome, settings: &QpSettings) -> Option<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let x = &first.x;
    let active: Vec<bool> = prob
        .le_rows
        .iter()
        .zip(&first.z_le)
        .map(|(row, &z)| z > (row.rhs - row.activity(x)).max(0.0))
        .collect();
    let mut lower = prob.lower.to_vec();
    let mut upper = prob.upper.to_vec();
    let g = {
        let mut g = prob.gradient(x);
        for (row, &y) in prob.eq_rows.iter().zip(&first.y_eq) {
            for &(j, a) in &row.terms {
                g[j] += a * y;
            }
        }
        for (row, &z) in prob.le_rows.iter().zip(&first.z_le) {
            for &(j, a) in &row.terms {
                g[j] += a * z;
            }
        }
        g
    };
    for j in 0..x.len() {
        if upper[j] - lower[j] <= FIX_TOL {
            continue;
        }
        if g[j] > 0.0 && g[j] > x[j] - lower[j] {
            upper[j] = lower[j];
        } else if g[j] < 0.0 && -g[j] > upper[j] - x[j] {
            lower[j] = upper[j];
        }
    }
    let out = run_backend(prob, &lower, &upper, Some(&active), settings).ok()?;
    if !matches!(out.status, SolverStatus::Solved | SolverStatus::AlmostSolved) {
        return None;
    }
    Some((out.x, out.y_eq, out.z_le))
}

pub fn solve_qp(prob: &QpProblem, settings: &QpSettings) -> Result<QPResult, SolverError> {
    let n = prob.n();
    assert!(prob.lower.len() == n && prob.upper.len() == n, "bounds length mismatch");
    if settings.check_psd {
        check_psd(prob.quad)?;
    }
    for j in 0..n {
        if prob.lower[j] > prob.upper[j] + FIX_TOL {
            return Ok(QPResult {
                point: prob.lower.to_vec(),
                objective: f64::INFINITY,
                status: QpStatus::Infeasible,
                kkt_residual: prob.lower[j] - prob.upper[j],
                iterations: 0,
            });
        }
    }
    let out = run_backend(prob, prob.lower, prob.upper, None, settings)?;
    match out.status {
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            return Ok(QPResult {
                objective: f64::INFINITY,
                point: out.x,
                status: QpStatus::Infeasible,
                kkt_residual: out.certificate,
                iterations: out.iterations,
            })
        }
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => return Err(SolverError::Unbounded),
        _ => {}
    }
    let mut best_res = prob.kkt_residual(&out.x, &out.y_eq, &out.z_le);
    let mut best_x = out.x.clone();
    if best_res > settings.tolerance {
        if let Some((x, y, z)) = polish(prob, &out, settings) {
            let r = prob.kkt_residual(&x, &y, &z);
            if r < best_res {
                best_res = r;
                best_x = x;
            }
        }
    }
    let status = if best_res <= settings.tolerance { QpStatus::Optimal } else { QpStatus::IterLimit };
    Ok(QPResult {
        objective: prob.objective(&best_x),
        point: best_x,
        status,
        kkt_residual: best_res,
        iterations: out.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RowKind;

    #[test]
    fn active_single_bound() {
        let quad = [(0, 0, 2.0)];
        let linear = [0.0];
        let le = [Row::new(vec![(0, -1.0)], -3.0, RowKind::Dynamics)];
        let prob = QpProblem { quad: &quad, linear: &linear, eq_rows: &[], le_rows: &le, lower: &[-10.0], upper: &[10.0] };
        let r = solve_qp(&prob, &QpSettings::default()).unwrap();
        assert_eq!(r.status, QpStatus::Optimal);
        assert!((r.point[0] - 3.0).abs() < 1e-7);
        assert!((r.objective - 9.0).abs() < 1e-6);
        assert!(r.kkt_residual <= 1e-7);
    }

    #[test]
    fn infeasible_rows() {
        let linear = [0.0];
        let le = [
            Row::new(vec![(0, 1.0)], 1.0, RowKind::Dynamics),
            Row::new(vec![(0, -1.0)], -2.0, RowKind::Dynamics),
        ];
        let prob = QpProblem { quad: &[], linear: &linear, eq_rows: &[], le_rows: &le, lower: &[-10.0], upper: &[10.0] };
        assert_eq!(solve_qp(&prob, &QpSettings::default()).unwrap().status, QpStatus::Infeasible);
    }

    #[test]
    fn crossed_bounds_infeasible() {
        let prob = QpProblem { quad: &[], linear: &[0.0], eq_rows: &[], le_rows: &[], lower: &[1.0], upper: &[0.0] };
        assert_eq!(solve_qp(&prob, &QpSettings::default()).unwrap().status, QpStatus::Infeasible);
    }

    #[test]
    fn indefinite_rejected() {
        let quad = [(0, 0, 1.0), (0, 1, 2.0), (1, 1, 1.0)];
        assert_eq!(check_psd(&quad), Err(SolverError::IndefiniteQ));
        let psd = [(0, 0, 1.0), (0, 1, 1.0), (1, 1, 1.0)];
        assert!(check_psd(&psd).is_ok());
        assert_eq!(check_psd(&[(0, 0, -1.0)]), Err(SolverError::IndefiniteQ));
    }

    #[test]
    fn all_fixed() {
        let prob = QpProblem { quad: &[(0, 0, 2.0)], linear: &[1.0], eq_rows: &[], le_rows: &[], lower: &[2.0], upper: &[2.0] };
        let r = solve_qp(&prob, &QpSettings::default()).unwrap();
        assert_eq!(r.status, QpStatus::Optimal);
        assert_eq!(r.objective, 6.0);
    }
}
