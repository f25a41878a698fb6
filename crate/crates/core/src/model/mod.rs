//! Game specification and its mixed-integer QP encoding.

mod assemble;
mod decode;
pub mod dump;
mod miqp;

use std::fmt;
use std::str::FromStr;

use crate::error::ModelError;
use crate::geometry::{CaseTag, ConflictBounds, Footprint};

pub use assemble::{
    assemble, assemble_csp, derive_precedence, encode_collision_pair, encode_cost, encode_dynamics, encode_limits,
    encode_refined, inside_collision_area, precedence_implications, present_regions, region_halfplane, Family, Implication,
    ModelBuilder,
};
pub use decode::{decode, Solution, Trajectory};
pub use miqp::{Group, MixedIntegerQP, Region, Row, RowKind, VarKey};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionMarkers {
    pub entry_s: f64,
    pub exit_s: f64,
    pub wait_radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlayerSpec {
    pub id: String,
    pub s0: f64,
    pub v0: f64,
    pub v_max: f64,
    pub a_min: f64,
    pub a_max: f64,
    /// Effort weight `P`.
    pub effort_weight: f64,
    /// Progress reward `r`.
    pub progress_reward: f64,
    pub footprint: Footprint,
    pub goal_s: f64,
    pub region: Option<RegionMarkers>,
}

impl PlayerSpec {
    /// Arc length at which the player counts as done.
    pub fn exit_s(&self) -> f64 {
        self.region.map(|r| r.exit_s).unwrap_or(self.goal_s)
    }

    fn validate(&self) -> Result<(), (String, String)> {
        let finite = [
            ("s0", self.s0),
            ("v0", self.v0),
            ("v_max", self.v_max),
            ("a_min", self.a_min),
            ("a_max", self.a_max),
            ("P", self.effort_weight),
            ("r", self.progress_reward),
            ("goal_s", self.goal_s),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err((name.into(), "must be finite".into()));
            }
        }
        if self.s0 < 0.0 {
            return Err(("s0".into(), "must be nonnegative".into()));
        }
        if !(self.v_max > 0.0) {
            return Err(("v_max".into(), "must be positive".into()));
        }
        if !(self.v0 >= 0.0 && self.v0 <= self.v_max) {
            return Err(("v0".into(), format!("must lie in [0, v_max={}]", self.v_max)));
        }
        if !(self.a_min < 0.0) {
            return Err(("a_min".into(), "must be negative".into()));
        }
        if !(self.a_max > 0.0) {
            return Err(("a_max".into(), "must be positive".into()));
        }
        if self.effort_weight < 0.0 {
            return Err(("P".into(), "must be nonnegative".into()));
        }
        if self.progress_reward < 0.0 {
            return Err(("r".into(), "must be nonnegative".into()));
        }
        if !(self.goal_s > self.s0) {
            return Err(("goal_s".into(), "must exceed s0".into()));
        }
        if !(self.footprint.length > 0.0 && self.footprint.width > 0.0) {
            return Err(("length".into(), "footprint extents must be positive".into()));
        }
        if let Some(r) = self.region {
            if !(r.entry_s.is_finite() && r.exit_s.is_finite() && r.entry_s <= r.exit_s) {
                return Err(("exit_s".into(), "region markers need entry_s <= exit_s".into()));
            }
            if !(r.wait_radius >= 0.0) {
                return Err(("wait_radius".into(), "must be nonnegative".into()));
            }
        }
        Ok(())
    }
}

/// Ordered conflict pair `(first, second)` with bounds for each.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conflict {
    pub pair: (usize, usize),
    pub bounds: ConflictBounds,
}

/// One homotopy bit per conflict pair; `0` means the pair's first player enters first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HomotopyAssignment(pub Vec<u8>);

impl HomotopyAssignment {
    pub fn bits(&self) -> String {
        self.0.iter().map(|b| if *b == 0 { '0' } else { '1' }).collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for HomotopyAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|b| b.to_string()).collect();
        write!(f, "<{}>", parts.join(","))
    }
}

impl FromStr for HomotopyAssignment {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let pat = parse_pattern(s)?;
        pat.iter()
            .map(|b| b.ok_or_else(|| format!("wildcard not allowed in `{s}`")))
            .collect::<Result<Vec<u8>, _>>()
            .map(HomotopyAssignment)
    }
}

fn parse_pattern(s: &str) -> Result<Vec<Option<u8>>, String> {
    s.chars()
        .filter(|c| !matches!(c, ',' | ' ' | '<' | '>'))
        .map(|c| match c {
            '0' => Ok(Some(0)),
            '1' => Ok(Some(1)),
            'x' | 'X' | '*' | '?' => Ok(None),
            other => Err(format!("invalid homotopy bit `{other}` in `{s}`")),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Mode {
    /// Per-pair fixing; `None` entries are left free.
    FixedHomotopy(Vec<Option<u8>>),
    FreeHomotopy,
    ConstraintFree,
}

impl Mode {
    pub fn fixed(class: &HomotopyAssignment) -> Mode {
        Mode::FixedHomotopy(class.0.iter().map(|b| Some(*b)).collect())
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::FreeHomotopy => write!(f, "free"),
            Mode::ConstraintFree => write!(f, "none"),
            Mode::FixedHomotopy(p) => {
                let bits: String = p
                    .iter()
                    .map(|b| match b {
                        Some(0) => '0',
                        Some(_) => '1',
                        None => 'x',
                    })
                    .collect();
                write!(f, "fixed:{bits}")
            }
        }
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "free" => Ok(Mode::FreeHomotopy),
            "none" => Ok(Mode::ConstraintFree),
            _ => match s.strip_prefix("fixed:") {
                Some(bits) => Ok(Mode::FixedHomotopy(parse_pattern(bits)?)),
                None => Err(format!("unknown mode `{s}` (expected free, none or fixed:<bits>)")),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    SixBinary,
    Refined,
}

impl fmt::Display for Encoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Encoding::SixBinary => "six",
            Encoding::Refined => "refined",
        })
    }
}

impl FromStr for Encoding {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "six" => Ok(Encoding::SixBinary),
            "refined" => Ok(Encoding::Refined),
            _ => Err(format!("unknown encoding `{s}` (expected six or refined)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec {
    pub players: Vec<PlayerSpec>,
    pub conflicts: Vec<Conflict>,
    pub horizon: usize,
    pub dt: f64,
    /// `None` selects [`GameSpec::auto_big_m`].
    pub big_m: Option<f64>,
    pub mode: Mode,
    pub encoding: Encoding,
}

impl GameSpec {
    fn max_reach(&self) -> f64 {
        self.players
            .iter()
            .map(|p| p.s0 + p.v_max * self.horizon as f64 * self.dt)
            .fold(0.0, f64::max)
    }

    fn max_bound(&self) -> f64 {
        self.conflicts.iter().map(|c| c.bounds.max_value()).fold(0.0, f64::max)
    }

    /// Lower limit that any big-M must exceed.
    pub fn big_m_floor(&self) -> f64 {
        self.max_reach() + self.max_bound()
    }

    pub fn auto_big_m(&self) -> f64 {
        2.0 * self.max_reach() + self.max_bound()
    }

    pub fn effective_big_m(&self) -> f64 {
        self.big_m.unwrap_or_else(|| self.auto_big_m())
    }

    /// Conflicts involving `player`, as `(conflict index, player is first)`.
    pub fn conflicts_of(&self, player: usize) -> Vec<(usize, bool)> {
        self.conflicts
            .iter()
            .enumerate()
            .filter_map(|(i, c)| {
                if c.pair.0 == player {
                    Some((i, true))
                } else if c.pair.1 == player {
                    Some((i, false))
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |path: String, msg: String| ModelError::InvalidSpec(format!("{path}: {msg}"));
        if self.horizon < 1 {
            return Err(bad("horizon".into(), "must be at least 1".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(bad("dt".into(), "must be positive".into()));
        }
        for (i, p) in self.players.iter().enumerate() {
            p.validate().map_err(|(f, m)| bad(format!("players[{i}].{f}"), m))?;
        }
        let n = self.players.len();
        let mut seen = std::collections::HashSet::new();
        for (i, c) in self.conflicts.iter().enumerate() {
            let (a, b) = c.pair;
            if a >= n || b >= n {
                return Err(bad(format!("conflicts[{i}].pair"), "references an unknown player".into()));
            }
            if a == b {
                return Err(bad(format!("conflicts[{i}].pair"), "players must differ".into()));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(ModelError::DuplicatePair(a, b));
            }
            c.bounds.validate().map_err(|m| bad(format!("conflicts[{i}].bounds"), m))?;
        }
        if let Mode::FixedHomotopy(p) = &self.mode {
            if p.len() != self.conflicts.len() {
                return Err(ModelError::AssignmentLength { got: p.len(), expected: self.conflicts.len() });
            }
        }
        if let Some(m) = self.big_m {
            let floor = self.big_m_floor();
            if !(m > floor) {
                return Err(ModelError::BigMTooSmall { given: m, required: floor });
            }
        }
        if self.encoding == Encoding::Refined {
            if self.mode == Mode::ConstraintFree {
                return Err(ModelError::RefinedUnsupported("needs homotopy variables (mode none given)".into()));
            }
            if let Some(c) = self.conflicts.iter().find(|c| c.bounds.case != CaseTag::General) {
                return Err(ModelError::RefinedUnsupported(format!(
                    "is defined for general conflicts only, pair ({}, {}) is {}",
                    c.pair.0,
                    c.pair.1,
                    c.bounds.case.as_str()
                )));
            }
        }
        Ok(())
    }

    pub fn with_mode(&self, mode: Mode) -> GameSpec {
        GameSpec { mode, ..self.clone() }
    }
}
