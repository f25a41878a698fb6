//! Bound propagation over rows whose columns are all binary.
//!
//! Logic sums, monotone chains and precedence implications are all such rows,
//! so one activity-based rule covers every structural deduction.

use crate::model::MixedIntegerQP;

const TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Propagation {
    /// Fixed point reached; the count of columns newly fixed.
    Fixed(usize),
    Prune,
}

#[derive(Debug, Clone)]
struct LeRow {
    terms: Vec<(usize, f64)>,
    rhs: f64,
}

/// Pure-binary rows of one MIQP, indexed by column for the worklist.
#[derive(Debug, Clone)]
pub struct Propagator {
    rows: Vec<LeRow>,
    col_rows: Vec<Vec<usize>>,
}

impl Propagator {
    pub fn new(miqp: &MixedIntegerQP) -> Propagator {
        let (eq, le) = miqp.pure_binary_rows();
        let mut rows = Vec::new();
        for r in eq {
            rows.push(LeRow { terms: r.terms.clone(), rhs: r.rhs });
            rows.push(LeRow { terms: r.terms.iter().map(|&(j, a)| (j, -a)).collect(), rhs: -r.rhs });
        }
        for r in le {
            rows.push(LeRow { terms: r.terms.clone(), rhs: r.rhs });
        }
        let mut col_rows = vec![Vec::new(); miqp.n_vars()];
        for (i, r) in rows.iter().enumerate() {
            for &(j, _) in &r.terms {
                if col_rows[j].last() != Some(&i) {
                    col_rows[j].push(i);
                }
            }
        }
        Propagator { rows, col_rows }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Tightens binary bounds in place to a fixed point, or reports a contradiction.
    pub fn propagate(&self, lower: &mut [f64], upper: &mut [f64]) -> Propagation {
        let mut queued = vec![true; self.rows.len()];
        let mut work: Vec<usize> = (0..self.rows.len()).rev().collect();
        let mut fixed = 0;
        while let Some(i) = work.pop() {
            queued[i] = false;
            let row = &self.rows[i];
            let min_act: f64 = row.terms.iter().map(|&(j, a)| if a > 0.0 { a * lower[j] } else { a * upper[j] }).sum();
            if min_act > row.rhs + TOL {
                return Propagation::Prune;
            }
            for &(j, a) in &row.terms {
                if upper[j] - lower[j] < 0.5 {
                    continue;
                }
                // Raising the column's contribution from its minimum by |a| breaks the row.
                if min_act + a.abs() > row.rhs + TOL {
                    if a > 0.0 {
                        upper[j] = lower[j];
                    } else {
                        lower[j] = upper[j];
                    }
                    fixed += 1;
                    for &r in &self.col_rows[j] {
                        if !queued[r] {
                            queued[r] = true;
                            work.push(r);
                        }
                    }
                }
            }
        }
        Propagation::Fixed(fixed)
    }
}
