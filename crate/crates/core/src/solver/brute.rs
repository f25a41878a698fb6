use super::qp::{solve_qp, QpProblem, QpSettings, QpStatus};
use crate::error::SolverError;
use crate::model::{decode, MixedIntegerQP, Row, Solution};

pub const DEFAULT_MAX_BINARIES: usize = 24;

/// Enumerates every binary assignment; a test oracle for [`super::solve_miqp`].
///
/// Assignments violating a pure-binary row are discarded without a QP solve.
pub fn brute_force(miqp: &MixedIntegerQP, max_binaries: usize) -> Result<Solution, SolverError> {
    let bins = miqp.binary_columns();
    if bins.len() > max_binaries {
        return Err(SolverError::TooManyBinaries { count: bins.len(), cap: max_binaries });
    }
    let order: Vec<usize> = bins.clone();
    let depth_of = |j: usize| order.iter().position(|&b| b == j).unwrap();
    let (eq, le) = miqp.pure_binary_rows();
    // Each row is checked once its last column (in enumeration order) is set.
    let mut check_at: Vec<Vec<(&Row, bool)>> = vec![Vec::new(); order.len()];
    for (rows, is_eq) in [(eq, true), (le, false)] {
        for r in rows {
            match r.terms.iter().map(|&(j, _)| depth_of(j)).max() {
                Some(d) => check_at[d].push((r, is_eq)),
                None => {
                    let bad = if is_eq { r.rhs.abs() > 1e-9 } else { r.rhs < -1e-9 };
                    if bad {
                        return Err(SolverError::Infeasible);
                    }
                }
            }
        }
    }

    let settings = QpSettings::default();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut x = vec![0.0; miqp.n_vars()];
    let mut stack: Vec<(usize, f64)> = vec![(0, 0.0), (0, 1.0)];
    stack.reverse();
    if order.is_empty() {
        stack.clear();
        leaf(miqp, &x, &settings, &mut best)?;
    }
    while let Some((d, v)) = stack.pop() {
        let j = order[d];
        if v < miqp.lower[j] || v > miqp.upper[j] {
            continue;
        }
        x[j] = v;
        let ok = check_at[d].iter().all(|(r, is_eq)| {
            let a = r.activity(&x);
            if *is_eq { (a - r.rhs).abs() <= 1e-9 } else { a <= r.rhs + 1e-9 }
        });
        if !ok {
            continue;
        }
        if d + 1 == order.len() {
            leaf(miqp, &x, &settings, &mut best)?;
        } else {
            stack.push((d + 1, 1.0));
            stack.push((d + 1, 0.0));
        }
    }
    match best {
        Some((_, x)) => Ok(decode(miqp, &x)?),
        None => Err(SolverError::Infeasible),
    }
}

fn leaf(
    miqp: &MixedIntegerQP,
    assignment: &[f64],
    settings: &QpSettings,
    best: &mut Option<(f64, Vec<f64>)>,
) -> Result<(), SolverError> {
    let (mut lo, mut hi) = (miqp.lower.clone(), miqp.upper.clone());
    for j in 0..miqp.n_vars() {
        if miqp.binary[j] {
            lo[j] = assignment[j];
            hi[j] = assignment[j];
        }
    }
    let prob = QpProblem {
        quad: &miqp.quad,
        linear: &miqp.linear,
        eq_rows: &miqp.eq_rows,
        le_rows: &miqp.le_rows,
        lower: &lo,
        upper: &hi,
    };
    let r = solve_qp(&prob, settings)?;
    if r.status == QpStatus::Infeasible {
        return Ok(());
    }
    if r.status == QpStatus::IterLimit && miqp.max_violation(&r.point) > 1e-5 {
        return Ok(());
    }
    let obj = r.objective + miqp.constant;
    if best.as_ref().is_none_or(|(b, _)| obj < *b) {
        *best = Some((obj, r.point));
    }
    Ok(())
}
