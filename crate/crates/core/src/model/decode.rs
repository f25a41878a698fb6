use std::collections::BTreeMap;

use super::miqp::{Group, MixedIntegerQP, Region, VarKey};
use super::HomotopyAssignment;
use crate::error::ModelError;

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub s: Vec<f64>,
    pub v: Vec<f64>,
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub trajectories: Vec<Trajectory>,
    /// Homotopy bits per conflict pair; `None` when the encoding has no homotopy columns.
    pub homotopy: Option<HomotopyAssignment>,
    /// Active region per pair and step `k = 1..=N` (`None` if no region binary is set).
    pub regions: BTreeMap<usize, Vec<Option<Region>>>,
    pub objective: f64,
    pub player_costs: Vec<f64>,
    pub raw: Vec<f64>,
}

const INTEGRALITY_TOL: f64 = 1e-6;

pub fn decode(miqp: &MixedIntegerQP, raw: &[f64]) -> Result<Solution, ModelError> {
    if raw.len() != miqp.n_vars() {
        return Err(ModelError::LengthMismatch { got: raw.len(), expected: miqp.n_vars() });
    }
    let mut x = raw.to_vec();
    for j in 0..x.len() {
        if miqp.binary[j] {
            let r = x[j].round();
            if (x[j] - r).abs() > INTEGRALITY_TOL {
                return Err(ModelError::NonIntegral { column: j, value: x[j] });
            }
            x[j] = r;
        }
    }
    let n = miqp.horizon;
    let get = |k: VarKey| miqp.col(k).map(|j| x[j]);
    let mut trajectories = Vec::with_capacity(miqp.n_players);
    for p in 0..miqp.n_players {
        let s: Vec<f64> = (0..=n).filter_map(|k| get(VarKey::S { player: p, k })).collect();
        let v: Vec<f64> = (0..=n).filter_map(|k| get(VarKey::V { player: p, k })).collect();
        let u: Vec<f64> = (0..n).filter_map(|k| get(VarKey::U { player: p, k })).collect();
        trajectories.push(Trajectory { s, v, u });
    }

    let mut h_bits: BTreeMap<usize, u8> = BTreeMap::new();
    let mut pairs: BTreeMap<usize, ()> = BTreeMap::new();
    for key in &miqp.columns {
        match *key {
            VarKey::H { pair } => {
                h_bits.insert(pair, get(*key).unwrap() as u8);
                pairs.insert(pair, ());
            }
            VarKey::Sigma { pair, .. } | VarKey::GroupSigma { pair, .. } => {
                pairs.insert(pair, ());
            }
            _ => {}
        }
    }
    let homotopy = if pairs.is_empty() {
        Some(HomotopyAssignment(Vec::new()))
    } else if h_bits.len() != pairs.len() {
        None
    } else {
        Some(HomotopyAssignment(h_bits.values().copied().collect()))
    };

    let mut regions = BTreeMap::new();
    for &pair in pairs.keys() {
        let mut sched = Vec::with_capacity(n);
        for k in 1..=n {
            let mut active = None;
            for r in Region::ALL {
                if get(VarKey::Sigma { pair, region: r, k }) == Some(1.0) {
                    active = Some(r);
                }
            }
            for g in Group::ALL {
                if get(VarKey::GroupSigma { pair, group: g, k }) == Some(1.0) {
                    active = Some(g.region(h_bits.get(&pair).copied().unwrap_or(0)));
                }
            }
            sched.push(active);
        }
        regions.insert(pair, sched);
    }

    let player_costs = (0..miqp.n_players).map(|p| miqp.player_cost(p, &x)).collect();
    Ok(Solution {
        trajectories,
        homotopy,
        regions,
        objective: miqp.objective(&x),
        player_costs,
        raw: x,
    })
}
