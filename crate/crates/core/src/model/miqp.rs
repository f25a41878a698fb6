use std::collections::HashMap;

/// Collision-avoidance region of the progress plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Region {
    A,
    B,
    C,
    D,
    E,
    F,
}

impl Region {
    pub const ALL: [Region; 6] = [Region::A, Region::B, Region::C, Region::D, Region::E, Region::F];

    /// Regions reachable when the pair's first player enters first.
    pub fn first_enters_first(self) -> bool {
        matches!(self, Region::A | Region::B | Region::C)
    }

    pub fn letter(self) -> char {
        match self {
            Region::A => 'A',
            Region::B => 'B',
            Region::C => 'C',
            Region::D => 'D',
            Region::E => 'E',
            Region::F => 'F',
        }
    }
}

/// Region groups of the three-binary encoding; the homotopy bit picks the member.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Group {
    AF,
    BE,
    CD,
}

impl Group {
    pub const ALL: [Group; 3] = [Group::AF, Group::BE, Group::CD];

    pub fn region(self, h: u8) -> Region {
        match (self, h) {
            (Group::AF, 0) => Region::A,
            (Group::AF, _) => Region::F,
            (Group::BE, 0) => Region::B,
            (Group::BE, _) => Region::E,
            (Group::CD, 0) => Region::C,
            (Group::CD, _) => Region::D,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarKey {
    S { player: usize, k: usize },
    V { player: usize, k: usize },
    U { player: usize, k: usize },
    Sigma { pair: usize, region: Region, k: usize },
    GroupSigma { pair: usize, group: Group, k: usize },
    Eps { pair: usize, group: Group, k: usize },
    Xi { pair: usize, group: Group, k: usize },
    H { pair: usize },
}

impl VarKey {
    pub fn name(&self) -> String {
        match *self {
            VarKey::S { player, k } => format!("s[{player}][{k}]"),
            VarKey::V { player, k } => format!("v[{player}][{k}]"),
            VarKey::U { player, k } => format!("u[{player}][{k}]"),
            VarKey::Sigma { pair, region, k } => format!("sigma_{}[{pair}][{k}]", region.letter()),
            VarKey::GroupSigma { pair, group, k } => format!("sigma_{group:?}[{pair}][{k}]"),
            VarKey::Eps { pair, group, k } => format!("eps_{group:?}[{pair}][{k}]"),
            VarKey::Xi { pair, group, k } => format!("xi_{group:?}[{pair}][{k}]"),
            VarKey::H { pair } => format!("h[{pair}]"),
        }
    }

    pub fn player(&self) -> Option<usize> {
        match *self {
            VarKey::S { player, .. } | VarKey::V { player, .. } | VarKey::U { player, .. } => Some(player),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RowKind {
    InitialState,
    Dynamics,
    Collision,
    InterSample,
    Logic,
    Monotone,
    Precedence,
    Product,
    Slack,
    CspMonotone,
}

/// Sparse linear row `Σ coef·x (= or ≤) rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
    pub kind: RowKind,
}

impl Row {
    pub fn new(terms: Vec<(usize, f64)>, rhs: f64, kind: RowKind) -> Row {
        Row { terms, rhs, kind }
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, a)| a * x[j]).sum()
    }
}

/// `min ½xᵀQx + qᵀx + constant` over equality rows, `≤` rows, bounds and binaries.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedIntegerQP {
    pub columns: Vec<VarKey>,
    pub index: HashMap<VarKey, usize>,
    /// Upper-triangular entries `(i, j, v)` with `i <= j` of the symmetric `Q`.
    pub quad: Vec<(usize, usize, f64)>,
    pub linear: Vec<f64>,
    pub constant: f64,
    /// Per-player share of `constant` (the fixed `-r·s0` terms).
    pub player_constants: Vec<f64>,
    pub eq_rows: Vec<Row>,
    pub le_rows: Vec<Row>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub binary: Vec<bool>,
    pub n_players: usize,
    pub horizon: usize,
}

impl MixedIntegerQP {
    pub fn n_vars(&self) -> usize {
        self.columns.len()
    }

    pub fn col(&self, key: VarKey) -> Option<usize> {
        self.index.get(&key).copied()
    }

    pub fn binary_columns(&self) -> Vec<usize> {
        (0..self.n_vars()).filter(|&j| self.binary[j]).collect()
    }

    pub fn count_rows(&self, kind: RowKind) -> usize {
        self.eq_rows.iter().chain(&self.le_rows).filter(|r| r.kind == kind).count()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let mut v = self.constant;
        for (j, q) in self.linear.iter().enumerate() {
            v += q * x[j];
        }
        for &(i, j, q) in &self.quad {
            if i == j {
                v += 0.5 * q * x[i] * x[i];
            } else {
                v += q * x[i] * x[j];
            }
        }
        v
    }

    /// Largest violation of rows and bounds at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for r in &self.eq_rows {
            worst = worst.max((r.activity(x) - r.rhs).abs());
        }
        for r in &self.le_rows {
            worst = worst.max(r.activity(x) - r.rhs);
        }
        for j in 0..x.len() {
            worst = worst.max(self.lower[j] - x[j]).max(x[j] - self.upper[j]);
        }
        worst
    }

    pub fn max_integrality_gap(&self, x: &[f64]) -> f64 {
        (0..x.len())
            .filter(|&j| self.binary[j])
            .map(|j| (x[j] - x[j].round()).abs())
            .fold(0.0, f64::max)
    }

    /// Rows whose columns are all binary.
    pub fn pure_binary_rows(&self) -> (Vec<&Row>, Vec<&Row>) {
        let pure = |r: &&Row| r.terms.iter().all(|&(j, _)| self.binary[j]);
        (self.eq_rows.iter().filter(pure).collect(), self.le_rows.iter().filter(pure).collect())
    }

    /// Cost `J` of one player: its own columns plus its constant share.
    pub fn player_cost(&self, player: usize, x: &[f64]) -> f64 {
        let owns = |j: usize| self.columns[j].player() == Some(player);
        let mut v = self.player_constants.get(player).copied().unwrap_or(0.0);
        for (j, q) in self.linear.iter().enumerate() {
            if owns(j) {
                v += q * x[j];
            }
        }
        for &(i, j, q) in &self.quad {
            if owns(i) && owns(j) {
                v += if i == j { 0.5 * q * x[i] * x[i] } else { q * x[i] * x[j] };
            }
        }
        v
    }
}
