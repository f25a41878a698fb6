use std::collections::HashMap;

use super::miqp::{Group, MixedIntegerQP, Region, Row, RowKind, VarKey};
use super::{Encoding, GameSpec, HomotopyAssignment, Mode};
use crate::error::ModelError;
use crate::geometry::{CaseTag, ConflictBounds, PlayerBounds};

/// Regions kept by each conflict case.
pub fn present_regions(case: CaseTag) -> &'static [Region] {
    match case {
        CaseTag::General | CaseTag::Opposite => &Region::ALL,
        CaseTag::Merge => &[Region::A, Region::B, Region::D, Region::E],
        CaseTag::Point => &[Region::A, Region::C, Region::D, Region::F],
    }
}

/// Half-plane `cx·x + cy·y <= rhs` of a region, with `x` the first player's
/// progress and `y` the second's. `None` if the region needs absent exit bounds.
pub fn region_halfplane(region: Region, b: &ConflictBounds) -> Option<(f64, f64, f64)> {
    let (fa, fb) = (&b.first, &b.second);
    Some(match region {
        Region::A => (0.0, 1.0, fb.entry_lo),
        Region::B => (-1.0, 1.0, fb.entry_lo - fa.entry_hi),
        Region::C => (-1.0, 0.0, -fa.exit_hi()?),
        Region::D => (1.0, 0.0, fa.entry_lo),
        Region::E => (1.0, -1.0, fa.entry_lo - fb.entry_hi),
        Region::F => (0.0, -1.0, -fb.exit_hi()?),
    })
}

/// True if `(x, y)` violates every region row of the conflict by more than `tol`.
pub fn inside_collision_area(b: &ConflictBounds, x: f64, y: f64, tol: f64) -> bool {
    present_regions(b.case).iter().all(|&r| match region_halfplane(r, b) {
        Some((cx, cy, rhs)) => cx * x + cy * y > rhs + tol,
        None => true,
    })
}

/// Incrementally builds a [`MixedIntegerQP`] for one game.
pub struct ModelBuilder<'a> {
    pub spec: &'a GameSpec,
    pub big_m: f64,
    pub horizon: usize,
    columns: Vec<VarKey>,
    index: HashMap<VarKey, usize>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    binary: Vec<bool>,
    eq_rows: Vec<Row>,
    le_rows: Vec<Row>,
    quad: Vec<(usize, usize, f64)>,
    linear: Vec<f64>,
    constant: f64,
    player_constants: Vec<f64>,
}

impl<'a> ModelBuilder<'a> {
    /// Builder with `s`, `v` (k = 0..=N) and `u` (k = 0..N) columns per player.
    pub fn new(spec: &'a GameSpec) -> Self {
        let mut b = Self::empty(spec, spec.effective_big_m(), spec.horizon);
        for p in 0..spec.players.len() {
            for k in 0..=spec.horizon {
                b.add_col(VarKey::S { player: p, k }, 0.0, b.big_m, false);
            }
            for k in 0..=spec.horizon {
                b.add_col(VarKey::V { player: p, k }, f64::NEG_INFINITY, f64::INFINITY, false);
            }
            for k in 0..spec.horizon {
                b.add_col(VarKey::U { player: p, k }, f64::NEG_INFINITY, f64::INFINITY, false);
            }
        }
        b
    }

    fn empty(spec: &'a GameSpec, big_m: f64, horizon: usize) -> Self {
        ModelBuilder {
            spec,
            big_m,
            horizon,
            columns: Vec::new(),
            index: HashMap::new(),
            lower: Vec::new(),
            upper: Vec::new(),
            binary: Vec::new(),
            eq_rows: Vec::new(),
            le_rows: Vec::new(),
            quad: Vec::new(),
            linear: Vec::new(),
            constant: 0.0,
            player_constants: vec![0.0; spec.players.len()],
        }
    }

    pub fn add_col(&mut self, key: VarKey, lo: f64, hi: f64, binary: bool) -> usize {
        let j = self.columns.len();
        let prev = self.index.insert(key, j);
        assert!(prev.is_none(), "column {} added twice", key.name());
        self.columns.push(key);
        self.lower.push(lo);
        self.upper.push(hi);
        self.binary.push(binary);
        self.linear.push(0.0);
        j
    }

    pub fn col(&self, key: VarKey) -> usize {
        match self.index.get(&key) {
            Some(&j) => j,
            None => panic!("missing column {}", key.name()),
        }
    }

    pub fn try_col(&self, key: VarKey) -> Option<usize> {
        self.index.get(&key).copied()
    }

    pub fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        self.lower[j] = lo;
        self.upper[j] = hi;
    }

    pub fn push_eq(&mut self, rows: impl IntoIterator<Item = Row>) {
        self.eq_rows.extend(rows);
    }

    pub fn push_le(&mut self, rows: impl IntoIterator<Item = Row>) {
        self.le_rows.extend(rows);
    }

    pub fn finish(self) -> MixedIntegerQP {
        MixedIntegerQP {
            columns: self.columns,
            index: self.index,
            quad: self.quad,
            linear: self.linear,
            constant: self.constant,
            player_constants: self.player_constants,
            eq_rows: self.eq_rows,
            le_rows: self.le_rows,
            lower: self.lower,
            upper: self.upper,
            binary: self.binary,
            n_players: self.spec.players.len(),
            horizon: self.horizon,
        }
    }
}

/// Double-integrator rows and initial-state rows.
pub fn encode_dynamics(b: &ModelBuilder) -> Vec<Row> {
    let spec = b.spec;
    let dt = spec.dt;
    let mut rows = Vec::with_capacity(2 * spec.players.len() * (spec.horizon + 1));
    for (p, ps) in spec.players.iter().enumerate() {
        let s = |k| b.col(VarKey::S { player: p, k });
        let v = |k| b.col(VarKey::V { player: p, k });
        rows.push(Row::new(vec![(s(0), 1.0)], ps.s0, RowKind::InitialState));
        rows.push(Row::new(vec![(v(0), 1.0)], ps.v0, RowKind::InitialState));
        for k in 0..spec.horizon {
            let u = b.col(VarKey::U { player: p, k });
            rows.push(Row::new(vec![(s(k + 1), 1.0), (s(k), -1.0), (v(k), -dt)], 0.0, RowKind::Dynamics));
            rows.push(Row::new(vec![(v(k + 1), 1.0), (v(k), -1.0), (u, -dt)], 0.0, RowKind::Dynamics));
        }
    }
    rows
}

/// State and input bounds; `s` is capped at big-M.
pub fn encode_limits(b: &mut ModelBuilder) {
    let spec = b.spec;
    for (p, ps) in spec.players.iter().enumerate() {
        for k in 0..=spec.horizon {
            let s = b.col(VarKey::S { player: p, k });
            b.set_bounds(s, 0.0, b.big_m);
            let v = b.col(VarKey::V { player: p, k });
            b.set_bounds(v, 0.0, ps.v_max);
        }
        for k in 0..spec.horizon {
            let u = b.col(VarKey::U { player: p, k });
            b.set_bounds(u, ps.a_min, ps.a_max);
        }
    }
}

/// Potential `F = Σ_ν [Σ_k P u² − r (s(N) − s(0))]`, written into the builder.
///
/// `Q` holds `2P` on the input diagonal so that `½uᵀQu = P Σ u²`.
pub fn encode_cost(b: &mut ModelBuilder) {
    let spec = b.spec;
    for (p, ps) in spec.players.iter().enumerate() {
        if ps.effort_weight != 0.0 {
            for k in 0..spec.horizon {
                let u = b.col(VarKey::U { player: p, k });
                b.quad.push((u, u, 2.0 * ps.effort_weight));
            }
        }
        let sn = b.col(VarKey::S { player: p, k: spec.horizon });
        b.linear[sn] -= ps.progress_reward;
        let c = ps.progress_reward * ps.s0;
        b.player_constants[p] += c;
        b.constant += c;
    }
}

fn halfplane_terms(b: &ModelBuilder, pair: usize, region: Region, k_state: usize) -> Option<(Vec<(usize, f64)>, f64)> {
    let c = &b.spec.conflicts[pair];
    let (cx, cy, rhs) = region_halfplane(region, &c.bounds)?;
    let mut terms = Vec::with_capacity(3);
    if cx != 0.0 {
        terms.push((b.col(VarKey::S { player: c.pair.0, k: k_state }), cx));
    }
    if cy != 0.0 {
        terms.push((b.col(VarKey::S { player: c.pair.1, k: k_state }), cy));
    }
    Some((terms, rhs))
}

/// Homotopy column of a pair, created on first use.
fn homotopy_col(b: &mut ModelBuilder, pair: usize) -> usize {
    if let Some(j) = b.try_col(VarKey::H { pair }) {
        return j;
    }
    let (lo, hi) = match &b.spec.mode {
        Mode::FixedHomotopy(p) => match p.get(pair).copied().flatten() {
            Some(v) => (v as f64, v as f64),
            None => (0.0, 1.0),
        },
        _ => (0.0, 1.0),
    };
    b.add_col(VarKey::H { pair }, lo, hi, true)
}

/// Six-region big-M encoding of one conflict pair.
pub fn encode_collision_pair(b: &mut ModelBuilder, pair: usize) -> Result<(), ModelError> {
    let case = b.spec.conflicts[pair].bounds.case;
    let regions = present_regions(case);
    for &r in regions {
        if region_halfplane(r, &b.spec.conflicts[pair].bounds).is_none() {
            return Err(ModelError::InvalidSpec(format!(
                "conflicts[{pair}]: {} case needs exit bounds for region {}",
                case.as_str(),
                r.letter()
            )));
        }
    }
    let n = b.horizon;
    let m = b.big_m;
    let constraint_free = b.spec.mode == Mode::ConstraintFree;
    let h = if constraint_free { None } else { Some(homotopy_col(b, pair)) };

    for k in 1..=n {
        for &r in regions {
            b.add_col(VarKey::Sigma { pair, region: r, k }, 0.0, 1.0, true);
        }
    }
    for k in 1..=n {
        let mut rows = Vec::new();
        for &r in regions {
            let sig = b.col(VarKey::Sigma { pair, region: r, k });
            for (ks, kind) in [(k, RowKind::Collision), (k - 1, RowKind::InterSample)] {
                let (mut terms, rhs) = halfplane_terms(b, pair, r, ks).unwrap();
                terms.push((sig, m));
                rows.push(Row::new(terms, rhs + m, kind));
            }
        }
        b.push_le(rows);
        let sig = |r: Region| b.col(VarKey::Sigma { pair, region: r, k });
        match h {
            Some(h) => {
                let mut first: Vec<(usize, f64)> =
                    regions.iter().filter(|r| r.first_enters_first()).map(|&r| (sig(r), 1.0)).collect();
                first.push((h, 1.0));
                let mut second: Vec<(usize, f64)> =
                    regions.iter().filter(|r| !r.first_enters_first()).map(|&r| (sig(r), 1.0)).collect();
                second.push((h, -1.0));
                b.push_eq([Row::new(first, 1.0, RowKind::Logic), Row::new(second, 0.0, RowKind::Logic)]);
            }
            None => {
                let all = regions.iter().map(|&r| (sig(r), 1.0)).collect();
                b.push_eq([Row::new(all, 1.0, RowKind::Logic)]);
            }
        }
    }
    // A and D can only switch off, C and F only on.
    let mut rows = Vec::new();
    for k in 1..n {
        for &r in regions {
            let now = b.col(VarKey::Sigma { pair, region: r, k });
            let next = b.col(VarKey::Sigma { pair, region: r, k: k + 1 });
            match r {
                Region::A | Region::D => rows.push(Row::new(vec![(next, 1.0), (now, -1.0)], 0.0, RowKind::Monotone)),
                Region::C | Region::F => rows.push(Row::new(vec![(now, 1.0), (next, -1.0)], 0.0, RowKind::Monotone)),
                Region::B | Region::E => {}
            }
        }
    }
    b.push_le(rows);
    Ok(())
}

/// Three-binary encoding of a general conflict with product and slack auxiliaries.
pub fn encode_refined(b: &mut ModelBuilder, pair: usize) -> Result<(), ModelError> {
    let case = b.spec.conflicts[pair].bounds.case;
    if case != CaseTag::General {
        return Err(ModelError::RefinedUnsupported(format!(
            "is defined for general conflicts only, conflicts[{pair}] is {}",
            case.as_str()
        )));
    }
    if b.spec.mode == Mode::ConstraintFree {
        return Err(ModelError::RefinedUnsupported("needs homotopy variables (mode none given)".into()));
    }
    let n = b.horizon;
    let m = b.big_m;
    let h = homotopy_col(b, pair);
    for k in 1..=n {
        for g in Group::ALL {
            b.add_col(VarKey::GroupSigma { pair, group: g, k }, 0.0, 1.0, true);
        }
        for g in Group::ALL {
            b.add_col(VarKey::Eps { pair, group: g, k }, 0.0, 1.0, false);
        }
    }
    for k in 2..=n {
        for g in [Group::AF, Group::CD] {
            b.add_col(VarKey::Xi { pair, group: g, k }, -1.0, 1.0, false);
        }
    }
    for k in 1..=n {
        let mut le = Vec::new();
        let mut eq_terms = Vec::new();
        for g in Group::ALL {
            let sig = b.col(VarKey::GroupSigma { pair, group: g, k });
            let eps = b.col(VarKey::Eps { pair, group: g, k });
            eq_terms.push((sig, 1.0));
            for (ks, kind) in [(k, RowKind::Collision), (k - 1, RowKind::InterSample)] {
                // Member for h = 0 is active when σ = 1 and ε = 0.
                let (mut t0, rhs0) = halfplane_terms(b, pair, g.region(0), ks).unwrap();
                t0.push((sig, m));
                t0.push((eps, -m));
                le.push(Row::new(t0, rhs0 + m, kind));
                // Member for h = 1 is active when ε = 1.
                let (mut t1, rhs1) = halfplane_terms(b, pair, g.region(1), ks).unwrap();
                t1.push((eps, m));
                le.push(Row::new(t1, rhs1 + m, kind));
            }
            le.push(Row::new(vec![(eps, 1.0), (h, -1.0)], 0.0, RowKind::Product));
            le.push(Row::new(vec![(eps, 1.0), (sig, -1.0)], 0.0, RowKind::Product));
            le.push(Row::new(vec![(sig, 1.0), (h, 1.0), (eps, -1.0)], 1.0, RowKind::Product));
        }
        b.push_le(le);
        b.push_eq([Row::new(eq_terms, 1.0, RowKind::Logic)]);
    }
    // ξ_AF(k+1) = σ_AF(k) − σ_AF(k+1), ξ_CD(k+1) = σ_CD(k+1) − σ_CD(k); the sign of ξ follows h.
    for k in 1..n {
        let mut eq = Vec::new();
        let mut le = Vec::new();
        for g in [Group::AF, Group::CD] {
            let now = b.col(VarKey::GroupSigma { pair, group: g, k });
            let next = b.col(VarKey::GroupSigma { pair, group: g, k: k + 1 });
            let xi = b.col(VarKey::Xi { pair, group: g, k: k + 1 });
            let sgn = if g == Group::AF { 1.0 } else { -1.0 };
            eq.push(Row::new(vec![(now, sgn), (next, -sgn), (xi, -1.0)], 0.0, RowKind::Slack));
            le.push(Row::new(vec![(xi, 1.0), (h, -1.0)], 1.0, RowKind::Slack));
            le.push(Row::new(vec![(xi, -1.0), (h, -1.0)], 0.0, RowKind::Slack));
            le.push(Row::new(vec![(xi, 1.0), (h, 1.0)], 1.0, RowKind::Slack));
            le.push(Row::new(vec![(xi, -1.0), (h, 1.0)], 2.0, RowKind::Slack));
        }
        b.push_eq(eq);
        b.push_le(le);
    }
    Ok(())
}

/// Precedence implication family, in the order of the four derived conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Before the earlier region and first into the later one: other not entered.
    FirstBeforeEarlier,
    /// Before the earlier region and second into the later one: not on the diagonal.
    SecondBeforeEarlier,
    /// Past the later region and first through the earlier one: not on the diagonal.
    FirstPastLater,
    /// Past the later region and second through the earlier one: other has left.
    SecondPastLater,
}

/// `σ[antecedent] = 1 ∧ h[h_pair] = h_value ⟹ Σ σ[consequent] = 1`, per step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Implication {
    pub player: usize,
    pub family: Family,
    pub antecedent: (usize, Region),
    pub h_pair: usize,
    pub h_value: u8,
    pub consequent: (usize, Vec<Region>),
}

struct Role<'b> {
    own: &'b PlayerBounds,
    other: &'b PlayerBounds,
    is_first: bool,
}

impl Role<'_> {
    fn self_not_entered(&self) -> Region {
        if self.is_first { Region::D } else { Region::A }
    }
    fn self_exited(&self) -> Region {
        if self.is_first { Region::C } else { Region::F }
    }
    fn other_not_entered(&self) -> Region {
        if self.is_first { Region::A } else { Region::D }
    }
    fn other_exited(&self) -> Region {
        if self.is_first { Region::F } else { Region::C }
    }
    fn self_first(&self) -> u8 {
        if self.is_first { 0 } else { 1 }
    }
}

fn role(spec: &GameSpec, pair: usize, player: usize) -> Role<'_> {
    let c = &spec.conflicts[pair];
    if c.pair.0 == player {
        Role { own: &c.bounds.first, other: &c.bounds.second, is_first: true }
    } else {
        Role { own: &c.bounds.second, other: &c.bounds.first, is_first: false }
    }
}

/// Implications implied by the order of two conflict regions on one player's path.
pub fn precedence_implications(spec: &GameSpec) -> Vec<Implication> {
    let mut out = Vec::new();
    for p in 0..spec.players.len() {
        let mine = spec.conflicts_of(p);
        for &(cl, _) in &mine {
            for &(cm, _) in &mine {
                if cl == cm {
                    continue;
                }
                let (l, mu) = (role(spec, cl, p), role(spec, cm, p));
                if l.own.entry_hi > mu.own.entry_lo {
                    continue;
                }
                let present_m = present_regions(spec.conflicts[cm].bounds.case);
                let present_l = present_regions(spec.conflicts[cl].bounds.case);
                let keep = |rs: Vec<Region>, present: &[Region]| -> Vec<Region> {
                    rs.into_iter().filter(|r| present.contains(r)).collect()
                };
                out.push(Implication {
                    player: p,
                    family: Family::FirstBeforeEarlier,
                    antecedent: (cl, l.self_not_entered()),
                    h_pair: cm,
                    h_value: mu.self_first(),
                    consequent: (cm, vec![mu.other_not_entered()]),
                });
                out.push(Implication {
                    player: p,
                    family: Family::SecondBeforeEarlier,
                    antecedent: (cl, l.self_not_entered()),
                    h_pair: cm,
                    h_value: 1 - mu.self_first(),
                    consequent: (cm, keep(vec![mu.other_exited(), mu.self_not_entered()], present_m)),
                });
                let (Some(l_exit), Some(m_exit)) = (l.own.exit_hi(), mu.own.exit_hi()) else {
                    continue;
                };
                if l_exit > m_exit || l.other.exit_hi().is_none() {
                    continue;
                }
                out.push(Implication {
                    player: p,
                    family: Family::FirstPastLater,
                    antecedent: (cm, mu.self_exited()),
                    h_pair: cl,
                    h_value: l.self_first(),
                    consequent: (cl, keep(vec![l.self_exited(), l.other_not_entered()], present_l)),
                });
                let diagonal = present_l.contains(&Region::B);
                let other_exit = l.other.exit_hi().unwrap();
                if !diagonal || m_exit - l.own.entry_lo + l.other.entry_hi >= other_exit {
                    out.push(Implication {
                        player: p,
                        family: Family::SecondPastLater,
                        antecedent: (cm, mu.self_exited()),
                        h_pair: cl,
                        h_value: 1 - l.self_first(),
                        consequent: (cl, vec![l.other_exited()]),
                    });
                }
            }
        }
    }
    out
}

/// Two rows per implication and step, using unit coefficients on the 0/1 terms.
pub fn derive_precedence(b: &ModelBuilder) -> Vec<Row> {
    let mut rows = Vec::new();
    for imp in precedence_implications(b.spec) {
        let Some(h) = b.try_col(VarKey::H { pair: imp.h_pair }) else {
            continue;
        };
        for k in 1..=b.horizon {
            let ante = b.col(VarKey::Sigma { pair: imp.antecedent.0, region: imp.antecedent.1, k });
            let cons: Vec<(usize, f64)> = imp
                .consequent
                .1
                .iter()
                .map(|&r| (b.col(VarKey::Sigma { pair: imp.consequent.0, region: r, k }), 1.0))
                .collect();
            // dev = h when the required value is 0, 1 − h otherwise.
            let (h_coef, h_const) = if imp.h_value == 0 { (1.0, 0.0) } else { (-1.0, 1.0) };
            // Σc ≤ 2 + dev − a
            let mut up = cons.clone();
            up.push((h, -h_coef));
            up.push((ante, 1.0));
            rows.push(Row::new(up, 2.0 + h_const, RowKind::Precedence));
            // Σc ≥ a − dev
            let mut lo: Vec<(usize, f64)> = cons.iter().map(|&(j, c)| (j, -c)).collect();
            lo.push((h, -h_coef));
            lo.push((ante, 1.0));
            rows.push(Row::new(lo, h_const, RowKind::Precedence));
        }
    }
    rows
}

/// The full game as one mixed-integer QP.
pub fn assemble(spec: &GameSpec) -> Result<MixedIntegerQP, ModelError> {
    spec.validate()?;
    let mut b = ModelBuilder::new(spec);
    let dyn_rows = encode_dynamics(&b);
    b.push_eq(dyn_rows);
    encode_limits(&mut b);
    encode_cost(&mut b);
    for pair in 0..spec.conflicts.len() {
        match spec.encoding {
            Encoding::SixBinary => encode_collision_pair(&mut b, pair)?,
            Encoding::Refined => encode_refined(&mut b, pair)?,
        }
    }
    if spec.mode != Mode::ConstraintFree && spec.encoding == Encoding::SixBinary {
        let rows = derive_precedence(&b);
        b.push_le(rows);
    }
    Ok(b.finish())
}

/// Zero-objective monotone-progress feasibility problem for one homotopy class.
pub fn assemble_csp(spec: &GameSpec, class: &HomotopyAssignment, n_csp: usize) -> Result<MixedIntegerQP, ModelError> {
    if class.len() != spec.conflicts.len() {
        return Err(ModelError::AssignmentLength { got: class.len(), expected: spec.conflicts.len() });
    }
    if n_csp < 1 {
        return Err(ModelError::InvalidSpec("n_csp: must be at least 1".into()));
    }
    let fixed = GameSpec {
        mode: Mode::fixed(class),
        encoding: Encoding::SixBinary,
        big_m: None,
        ..spec.clone()
    };
    fixed.validate()?;
    let max_bound = fixed.conflicts.iter().map(|c| c.bounds.max_value()).fold(0.0, f64::max);
    let s_cap = 2.0 * max_bound.max(1.0);
    let mut b = ModelBuilder::empty(&fixed, 2.0 * s_cap + max_bound, n_csp);
    for (p, _) in fixed.players.iter().enumerate() {
        let mine = fixed.conflicts_of(p);
        let start = mine
            .iter()
            .map(|&(c, first)| {
                let cb = &fixed.conflicts[c].bounds;
                if first { cb.first.entry_lo } else { cb.second.entry_lo }
            })
            .fold(s_cap, f64::min);
        let end = mine
            .iter()
            .map(|&(c, first)| {
                let cb = &fixed.conflicts[c].bounds;
                let own = if first { cb.first } else { cb.second };
                own.exit_hi().unwrap_or(own.entry_hi)
            })
            .fold(0.0, f64::max);
        for k in 0..=n_csp {
            let lo = if k == n_csp { end } else { 0.0 };
            let hi = if k == 0 { start.max(0.0) } else { s_cap };
            b.add_col(VarKey::S { player: p, k }, lo, hi, false);
        }
        let rows: Vec<Row> = (0..n_csp)
            .map(|k| {
                let now = b.col(VarKey::S { player: p, k });
                let next = b.col(VarKey::S { player: p, k: k + 1 });
                Row::new(vec![(now, 1.0), (next, -1.0)], 0.0, RowKind::CspMonotone)
            })
            .collect();
        b.push_le(rows);
    }
    for pair in 0..fixed.conflicts.len() {
        encode_collision_pair(&mut b, pair)?;
    }
    let rows = derive_precedence(&b);
    b.push_le(rows);
    Ok(b.finish())
}
