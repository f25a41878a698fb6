//! Plain-text MIQP exchange format, one record per line.
//!
//! ```text
//! # homotopy-planner miqp v1
//! n <n_vars> players <count> horizon <N>
//! const <c>
//! pconst <player> <c>
//! V <col> <name> <lower> <upper> <binary 0|1>
//! Q <i> <j> <value>          upper triangle of Q, objective ½xᵀQx + cᵀx + const
//! c <col> <value>
//! E <row> <col> <value>      equality row entries
//! Erhs <row> <rhs> <kind>
//! L <row> <col> <value>      `<=` row entries
//! Lrhs <row> <rhs> <kind>
//! ```
//!
//! Floats use Rust's shortest round-trip representation, so a dump reads back exactly.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::miqp::{Group, MixedIntegerQP, Region, Row, RowKind, VarKey};
use crate::error::ModelError;

const HEADER: &str = "# homotopy-planner miqp v1";

fn kind_name(k: RowKind) -> &'static str {
    match k {
        RowKind::InitialState => "initial",
        RowKind::Dynamics => "dynamics",
        RowKind::Collision => "collision",
        RowKind::InterSample => "intersample",
        RowKind::Logic => "logic",
        RowKind::Monotone => "monotone",
        RowKind::Precedence => "precedence",
        RowKind::Product => "product",
        RowKind::Slack => "slack",
        RowKind::CspMonotone => "csp_monotone",
    }
}

fn parse_kind(s: &str) -> Option<RowKind> {
    Some(match s {
        "initial" => RowKind::InitialState,
        "dynamics" => RowKind::Dynamics,
        "collision" => RowKind::Collision,
        "intersample" => RowKind::InterSample,
        "logic" => RowKind::Logic,
        "monotone" => RowKind::Monotone,
        "precedence" => RowKind::Precedence,
        "product" => RowKind::Product,
        "slack" => RowKind::Slack,
        "csp_monotone" => RowKind::CspMonotone,
        _ => return None,
    })
}

pub fn write_miqp(m: &MixedIntegerQP) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{HEADER}");
    let _ = writeln!(out, "n {} players {} horizon {}", m.n_vars(), m.n_players, m.horizon);
    let _ = writeln!(out, "const {:?}", m.constant);
    for (p, c) in m.player_constants.iter().enumerate() {
        let _ = writeln!(out, "pconst {p} {c:?}");
    }
    for (j, key) in m.columns.iter().enumerate() {
        let _ = writeln!(
            out,
            "V {j} {} {:?} {:?} {}",
            key.name(),
            m.lower[j],
            m.upper[j],
            u8::from(m.binary[j])
        );
    }
    for &(i, j, v) in &m.quad {
        let _ = writeln!(out, "Q {i} {j} {v:?}");
    }
    for (j, v) in m.linear.iter().enumerate() {
        if *v != 0.0 {
            let _ = writeln!(out, "c {j} {v:?}");
        }
    }
    for (tag, rows) in [("E", &m.eq_rows), ("L", &m.le_rows)] {
        for (r, row) in rows.iter().enumerate() {
            for &(j, v) in &row.terms {
                let _ = writeln!(out, "{tag} {r} {j} {v:?}");
            }
            let _ = writeln!(out, "{tag}rhs {r} {:?} {}", row.rhs, kind_name(row.kind));
        }
    }
    out
}

fn parse_key(name: &str) -> Option<VarKey> {
    let (head, rest) = name.split_once('[')?;
    let idx: Vec<usize> = rest
        .trim_end_matches(']')
        .split("][")
        .map(|t| t.parse().ok())
        .collect::<Option<_>>()?;
    let region = |c: &str| match c {
        "A" => Some(Region::A),
        "B" => Some(Region::B),
        "C" => Some(Region::C),
        "D" => Some(Region::D),
        "E" => Some(Region::E),
        "F" => Some(Region::F),
        _ => None,
    };
    let group = |c: &str| match c {
        "AF" => Some(Group::AF),
        "BE" => Some(Group::BE),
        "CD" => Some(Group::CD),
        _ => None,
    };
    let two = |f: &dyn Fn(usize, usize) -> VarKey| if idx.len() == 2 { Some(f(idx[0], idx[1])) } else { None };
    match head {
        "s" => two(&|player, k| VarKey::S { player, k }),
        "v" => two(&|player, k| VarKey::V { player, k }),
        "u" => two(&|player, k| VarKey::U { player, k }),
        "h" if idx.len() == 1 => Some(VarKey::H { pair: idx[0] }),
        _ => {
            let (kind, tag) = head.split_once('_')?;
            if idx.len() != 2 {
                return None;
            }
            let (pair, k) = (idx[0], idx[1]);
            match kind {
                "sigma" => match region(tag) {
                    Some(region) => Some(VarKey::Sigma { pair, region, k }),
                    None => Some(VarKey::GroupSigma { pair, group: group(tag)?, k }),
                },
                "eps" => Some(VarKey::Eps { pair, group: group(tag)?, k }),
                "xi" => Some(VarKey::Xi { pair, group: group(tag)?, k }),
                _ => None,
            }
        }
    }
}

pub fn read_miqp(text: &str) -> Result<MixedIntegerQP, ModelError> {
    let err = |line: usize, msg: &str| ModelError::Dump(format!("line {}: {msg}", line + 1));
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == HEADER => {}
        _ => return Err(err(0, "missing header")),
    }
    let mut m = MixedIntegerQP {
        columns: Vec::new(),
        index: HashMap::new(),
        quad: Vec::new(),
        linear: Vec::new(),
        constant: 0.0,
        player_constants: Vec::new(),
        eq_rows: Vec::new(),
        le_rows: Vec::new(),
        lower: Vec::new(),
        upper: Vec::new(),
        binary: Vec::new(),
        n_players: 0,
        horizon: 0,
    };
    let mut n_vars = None;
    for (ln, line) in lines {
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.is_empty() || tok[0].starts_with('#') {
            continue;
        }
        let f = |i: usize| -> Result<f64, ModelError> {
            tok.get(i).and_then(|t| t.parse().ok()).ok_or_else(|| err(ln, "bad number"))
        };
        let u = |i: usize| -> Result<usize, ModelError> {
            tok.get(i).and_then(|t| t.parse().ok()).ok_or_else(|| err(ln, "bad index"))
        };
        match tok[0] {
            "n" => {
                let n = u(1)?;
                n_vars = Some(n);
                m.n_players = u(3)?;
                m.horizon = u(5)?;
                m.columns.reserve(n);
                m.linear = vec![0.0; n];
                m.player_constants = vec![0.0; m.n_players];
            }
            "const" => m.constant = f(1)?,
            "pconst" => {
                let p = u(1)?;
                *m.player_constants.get_mut(p).ok_or_else(|| err(ln, "player out of range"))? = f(2)?;
            }
            "V" => {
                let j = u(1)?;
                if j != m.columns.len() {
                    return Err(err(ln, "columns out of order"));
                }
                let key = tok.get(2).and_then(|n| parse_key(n)).ok_or_else(|| err(ln, "bad column name"))?;
                m.index.insert(key, j);
                m.columns.push(key);
                m.lower.push(f(3)?);
                m.upper.push(f(4)?);
                m.binary.push(u(5)? == 1);
            }
            "Q" => m.quad.push((u(1)?, u(2)?, f(3)?)),
            "c" => {
                let j = u(1)?;
                *m.linear.get_mut(j).ok_or_else(|| err(ln, "column out of range"))? = f(2)?;
            }
            "E" | "L" | "Erhs" | "Lrhs" => {
                let rows = if tok[0].starts_with('E') { &mut m.eq_rows } else { &mut m.le_rows };
                let r = u(1)?;
                while rows.len() <= r {
                    rows.push(Row::new(Vec::new(), 0.0, RowKind::Dynamics));
                }
                if tok[0].ends_with("rhs") {
                    rows[r].rhs = f(2)?;
                    rows[r].kind = tok.get(3).and_then(|k| parse_kind(k)).ok_or_else(|| err(ln, "bad row kind"))?;
                } else {
                    rows[r].terms.push((u(2)?, f(3)?));
                }
            }
            other => return Err(err(ln, &format!("unknown record `{other}`"))),
        }
    }
    match n_vars {
        Some(n) if n == m.columns.len() => Ok(m),
        _ => Err(ModelError::Dump("column count mismatch".into())),
    }
}
