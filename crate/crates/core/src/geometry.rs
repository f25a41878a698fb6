//! Arc-length paths, vehicle footprints and conflict regions between path pairs.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

pub const DEFAULT_SCAN_STEP: f64 = 0.1;
pub const DEFAULT_POINT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSample {
    pub s: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

/// Planar polyline parameterized by arc length.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePath {
    samples: Vec<PathSample>,
    total_length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Footprint {
    pub length: f64,
    pub width: f64,
}

impl Footprint {
    pub fn new(length: f64, width: f64) -> Result<Self, GeometryError> {
        if !(length > 0.0 && length.is_finite() && width > 0.0 && width.is_finite()) {
            return Err(GeometryError::InvalidFootprint { length, width });
        }
        Ok(Footprint { length, width })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox {
    pub center: (f64, f64),
    pub heading: f64,
    pub half_length: f64,
    pub half_width: f64,
}

/// Conflict region of an ordered path pair, as arc-length projections on each path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConflictInterval {
    pub s_enter: f64,
    pub s_exit: f64,
    pub t_enter: f64,
    pub t_exit: f64,
    /// Mean overlapping `t` on the first and last `s` columns of the scan.
    pub t_at_s_enter: f64,
    pub t_at_s_exit: f64,
    pub resolution: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseTag {
    General,
    Merge,
    Point,
    Opposite,
}

impl CaseTag {
    pub fn as_str(self) -> &'static str {
        match self {
            CaseTag::General => "general",
            CaseTag::Merge => "merge",
            CaseTag::Point => "point",
            CaseTag::Opposite => "opposite",
        }
    }
}

impl std::str::FromStr for CaseTag {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "general" => Ok(CaseTag::General),
            "merge" => Ok(CaseTag::Merge),
            "point" => Ok(CaseTag::Point),
            "opposite" => Ok(CaseTag::Opposite),
            other => Err(format!("unknown case tag `{other}`")),
        }
    }
}

/// Collision-area bounds of one player against another.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlayerBounds {
    pub entry_lo: f64,
    pub entry_hi: f64,
    /// `(exit_lo, exit_hi)`; absent for merging paths.
    pub exit: Option<(f64, f64)>,
}

impl PlayerBounds {
    pub fn new(entry_lo: f64, entry_hi: f64, exit: Option<(f64, f64)>) -> Self {
        PlayerBounds { entry_lo, entry_hi, exit }
    }

    pub fn exit_hi(&self) -> Option<f64> {
        self.exit.map(|e| e.1)
    }

    /// Largest bound value, used for big-M sizing.
    pub fn max_value(&self) -> f64 {
        let mut m = self.entry_hi.max(self.entry_lo);
        if let Some((lo, hi)) = self.exit {
            m = m.max(lo).max(hi);
        }
        m
    }

    fn check(&self) -> Result<(), String> {
        let mut vals = vec![self.entry_lo, self.entry_hi];
        if let Some((a, b)) = self.exit {
            vals.push(a);
            vals.push(b);
        }
        if vals.iter().any(|v| !v.is_finite()) {
            return Err("non-finite bound".into());
        }
        if self.entry_lo > self.entry_hi {
            return Err(format!("entry_lo {} > entry_hi {}", self.entry_lo, self.entry_hi));
        }
        if let Some((lo, hi)) = self.exit {
            if lo > hi {
                return Err(format!("exit_lo {lo} > exit_hi {hi}"));
            }
            if hi < self.entry_hi {
                return Err(format!("exit_hi {hi} < entry_hi {}", self.entry_hi));
            }
        }
        Ok(())
    }
}

/// Bounds for an ordered pair `[first, second]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConflictBounds {
    pub first: PlayerBounds,
    pub second: PlayerBounds,
    pub case: CaseTag,
}

impl ConflictBounds {
    pub fn validate(&self) -> Result<(), String> {
        self.first.check().map_err(|e| format!("first: {e}"))?;
        self.second.check().map_err(|e| format!("second: {e}"))?;
        match self.case {
            CaseTag::Merge => {
                if self.first.exit.is_some() || self.second.exit.is_some() {
                    return Err("merge case must not carry exit bounds".into());
                }
            }
            _ => {
                if self.first.exit.is_none() || self.second.exit.is_none() {
                    return Err(format!("{} case requires exit bounds", self.case.as_str()));
                }
            }
        }
        if self.case == CaseTag::Point {
            for b in [&self.first, &self.second] {
                if b.exit != Some((b.entry_lo, b.entry_hi)) {
                    return Err("point case requires entry bounds equal to exit bounds".into());
                }
            }
        }
        Ok(())
    }

    pub fn swapped(&self) -> ConflictBounds {
        ConflictBounds { first: self.second, second: self.first, case: self.case }
    }

    pub fn max_value(&self) -> f64 {
        self.first.max_value().max(self.second.max_value())
    }
}

pub fn build_path(waypoints: &[(f64, f64)], resample_step: f64) -> Result<ReferencePath, GeometryError> {
    if waypoints.len() < 2 {
        return Err(GeometryError::TooFewWaypoints(waypoints.len()));
    }
    if !(resample_step > 0.0 && resample_step.is_finite()) {
        return Err(GeometryError::InvalidStep(resample_step));
    }
    for (i, &(x, y)) in waypoints.iter().enumerate() {
        if !x.is_finite() || !y.is_finite() {
            return Err(GeometryError::NonFinite(i));
        }
    }
    let mut cum = vec![0.0];
    for (i, w) in waypoints.windows(2).enumerate() {
        let d = (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1);
        if d <= 1e-12 {
            return Err(GeometryError::CoincidentWaypoints(i + 1));
        }
        cum.push(cum[i] + d);
    }
    let total = *cum.last().unwrap();

    // Uniform grid plus the polyline vertices, so every sample-to-sample chord
    // lies on a single input segment.
    let mut stations: Vec<f64> = Vec::new();
    let n_grid = (total / resample_step).floor() as usize;
    for i in 0..=n_grid {
        stations.push(i as f64 * resample_step);
    }
    stations.extend_from_slice(&cum);
    stations.sort_by(f64::total_cmp);
    let tol = 1e-9 * total.max(1.0);
    let mut uniq: Vec<f64> = Vec::with_capacity(stations.len());
    for s in stations {
        if s > total + tol {
            continue;
        }
        match uniq.last() {
            Some(&last) if s - last <= tol => {}
            _ => uniq.push(s.min(total)),
        }
    }
    if total - *uniq.last().unwrap() > tol {
        uniq.push(total);
    } else {
        *uniq.last_mut().unwrap() = total;
    }

    let headings: Vec<f64> = waypoints
        .windows(2)
        .map(|w| (w[1].1 - w[0].1).atan2(w[1].0 - w[0].0))
        .collect();
    let mut samples = Vec::with_capacity(uniq.len());
    let mut seg = 0usize;
    for &s in &uniq {
        while seg + 1 < headings.len() && s >= cum[seg + 1] - tol {
            seg += 1;
        }
        let t = ((s - cum[seg]) / (cum[seg + 1] - cum[seg])).clamp(0.0, 1.0);
        let (a, b) = (waypoints[seg], waypoints[seg + 1]);
        samples.push(PathSample {
            s,
            x: a.0 + t * (b.0 - a.0),
            y: a.1 + t * (b.1 - a.1),
            heading: headings[seg],
        });
    }
    // Snap vertex samples exactly onto the input vertices.
    for (k, &c) in cum.iter().enumerate() {
        if let Ok(i) = samples.binary_search_by(|p| p.s.total_cmp(&c)) {
            samples[i].x = waypoints[k].0;
            samples[i].y = waypoints[k].1;
        }
    }
    Ok(ReferencePath { samples, total_length: total })
}

impl ReferencePath {
    pub fn samples(&self) -> &[PathSample] {
        &self.samples
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    /// Index `i` of the segment `[i, i+1]` containing `s`.
    fn segment_index(&self, s: f64) -> usize {
        let n = self.samples.len();
        let idx = self.samples.partition_point(|p| p.s <= s);
        idx.saturating_sub(1).min(n - 2)
    }

    pub fn pose_at(&self, s: f64) -> Result<(f64, f64, f64), GeometryError> {
        let eps = 1e-9 * self.total_length.max(1.0);
        if !(s >= -eps && s <= self.total_length + eps) {
            return Err(GeometryError::OutOfRange { s, length: self.total_length });
        }
        let s = s.clamp(0.0, self.total_length);
        let i = self.segment_index(s);
        let (a, b) = (&self.samples[i], &self.samples[i + 1]);
        let t = ((s - a.s) / (b.s - a.s)).clamp(0.0, 1.0);
        Ok((a.x + t * (b.x - a.x), a.y + t * (b.y - a.y), a.heading))
    }

    pub fn translated(&self, dx: f64, dy: f64) -> ReferencePath {
        let samples = self
            .samples
            .iter()
            .map(|p| PathSample { x: p.x + dx, y: p.y + dy, ..*p })
            .collect();
        ReferencePath { samples, total_length: self.total_length }
    }
}

pub fn pose_at(path: &ReferencePath, s: f64) -> Result<(f64, f64, f64), GeometryError> {
    path.pose_at(s)
}

pub fn footprint_box(path: &ReferencePath, s: f64, fp: Footprint) -> Result<OrientedBox, GeometryError> {
    let (x, y, heading) = path.pose_at(s)?;
    Ok(OrientedBox {
        center: (x, y),
        heading,
        half_length: fp.length / 2.0,
        half_width: fp.width / 2.0,
    })
}

impl OrientedBox {
    /// Rows `(a, b)` of `A x <= b`.
    pub fn halfspaces(&self) -> [([f64; 2], f64); 4] {
        let (sn, cs) = self.heading.sin_cos();
        let (cx, cy) = self.center;
        let rows = [[sn, -cs], [-sn, cs], [cs, sn], [-cs, -sn]];
        let offs = [self.half_width, self.half_width, self.half_length, self.half_length];
        let mut out = [([0.0; 2], 0.0); 4];
        for i in 0..4 {
            out[i] = (rows[i], offs[i] + rows[i][0] * cx + rows[i][1] * cy);
        }
        out
    }

    pub fn corners(&self) -> [(f64, f64); 4] {
        let (sn, cs) = self.heading.sin_cos();
        let (cx, cy) = self.center;
        let mut out = [(0.0, 0.0); 4];
        for (i, (a, b)) in [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)].iter().enumerate() {
            let lx = a * self.half_length;
            let ly = b * self.half_width;
            out[i] = (cx + lx * cs - ly * sn, cy + lx * sn + ly * cs);
        }
        out
    }

    pub fn contains(&self, p: (f64, f64), tol: f64) -> bool {
        self.halfspaces()
            .iter()
            .all(|(a, b)| a[0] * p.0 + a[1] * p.1 <= b + tol)
    }

    fn circumradius(&self) -> f64 {
        self.half_length.hypot(self.half_width)
    }
}

/// Separating-axis test on the closed boxes.
pub fn boxes_overlap(a: &OrientedBox, b: &OrientedBox) -> bool {
    let ca = a.corners();
    let cb = b.corners();
    let axes = {
        let (sa, ka) = a.heading.sin_cos();
        let (sb, kb) = b.heading.sin_cos();
        [(ka, sa), (-sa, ka), (kb, sb), (-sb, kb)]
    };
    for (ux, uy) in axes {
        let proj = |c: &[(f64, f64); 4]| {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for p in c {
                let v = p.0 * ux + p.1 * uy;
                lo = lo.min(v);
                hi = hi.max(v);
            }
            (lo, hi)
        };
        let (alo, ahi) = proj(&ca);
        let (blo, bhi) = proj(&cb);
        let eps = 1e-12 * (1.0 + alo.abs().max(ahi.abs()).max(blo.abs()).max(bhi.abs()));
        if ahi < blo - eps || bhi < alo - eps {
            return false;
        }
    }
    true
}

fn scan_stations(total: f64, step: f64) -> Vec<f64> {
    let n = (total / step).floor() as usize;
    let mut v: Vec<f64> = (0..=n).map(|i| i as f64 * step).collect();
    if total - v[n] > 1e-9 {
        v.push(total);
    }
    v
}

fn contiguous(flags: &[bool]) -> bool {
    let first = flags.iter().position(|&f| f);
    let last = flags.iter().rposition(|&f| f);
    match (first, last) {
        (Some(a), Some(b)) => flags[a..=b].iter().all(|&f| f),
        _ => true,
    }
}

pub fn conflict_interval(
    path_a: &ReferencePath,
    path_b: &ReferencePath,
    fp_a: Footprint,
    fp_b: Footprint,
    scan_step: f64,
) -> Result<Option<ConflictInterval>, GeometryError> {
    if !(scan_step > 0.0 && scan_step.is_finite()) {
        return Err(GeometryError::InvalidStep(scan_step));
    }
    let sa = scan_stations(path_a.total_length, scan_step);
    let sb = scan_stations(path_b.total_length, scan_step);
    let boxes_a: Vec<OrientedBox> = sa
        .iter()
        .map(|&s| footprint_box(path_a, s, fp_a))
        .collect::<Result<_, _>>()?;
    let boxes_b: Vec<OrientedBox> = sb
        .iter()
        .map(|&t| footprint_box(path_b, t, fp_b))
        .collect::<Result<_, _>>()?;

    let mut hit_a = vec![false; sa.len()];
    let mut hit_b = vec![false; sb.len()];
    let mut t_sum = vec![0.0; sa.len()];
    let mut t_cnt = vec![0usize; sa.len()];
    for (i, ba) in boxes_a.iter().enumerate() {
        let ra = ba.circumradius();
        for (j, bb) in boxes_b.iter().enumerate() {
            let d = (ba.center.0 - bb.center.0).hypot(ba.center.1 - bb.center.1);
            if d > ra + bb.circumradius() + 1e-9 {
                continue;
            }
            if boxes_overlap(ba, bb) {
                hit_a[i] = true;
                hit_b[j] = true;
                t_sum[i] += sb[j];
                t_cnt[i] += 1;
            }
        }
    }
    let Some(ia0) = hit_a.iter().position(|&h| h) else {
        return Ok(None);
    };
    let ia1 = hit_a.iter().rposition(|&h| h).unwrap();
    let ib0 = hit_b.iter().position(|&h| h).unwrap();
    let ib1 = hit_b.iter().rposition(|&h| h).unwrap();
    if !contiguous(&hit_a) || !contiguous(&hit_b) {
        return Err(GeometryError::MultipleComponents);
    }
    Ok(Some(ConflictInterval {
        s_enter: sa[ia0],
        s_exit: sa[ia1],
        t_enter: sb[ib0],
        t_exit: sb[ib1],
        t_at_s_enter: t_sum[ia0] / t_cnt[ia0] as f64,
        t_at_s_exit: t_sum[ia1] / t_cnt[ia1] as f64,
        resolution: scan_step,
    }))
}

pub fn classify_case(ci: &ConflictInterval, path_a: &ReferencePath, path_b: &ReferencePath) -> CaseTag {
    classify_case_with(ci, path_a, path_b, DEFAULT_POINT_THRESHOLD)
}

pub fn classify_case_with(
    ci: &ConflictInterval,
    path_a: &ReferencePath,
    path_b: &ReferencePath,
    point_threshold: f64,
) -> CaseTag {
    let tol = ci.resolution * 1.5 + 1e-9;
    if ci.s_exit >= path_a.total_length - tol && ci.t_exit >= path_b.total_length - tol {
        return CaseTag::Merge;
    }
    if (ci.s_exit - ci.s_enter).abs() <= point_threshold && (ci.t_exit - ci.t_enter).abs() <= point_threshold {
        return CaseTag::Point;
    }
    if ci.t_at_s_exit - ci.t_at_s_enter < -ci.resolution {
        return CaseTag::Opposite;
    }
    CaseTag::General
}

pub fn collision_bounds(ci: &ConflictInterval, len_a: f64, len_b: f64, case: CaseTag) -> ConflictBounds {
    let make = |enter: f64, exit: f64, len: f64| {
        let h = len / 2.0;
        match case {
            CaseTag::Merge => PlayerBounds::new(enter - h, enter + h, None),
            CaseTag::Point => {
                let (lo, hi) = (enter - h, exit + h);
                PlayerBounds::new(lo, hi, Some((lo, hi)))
            }
            CaseTag::General | CaseTag::Opposite => {
                PlayerBounds::new(enter - h, enter + h, Some((exit - h, exit + h)))
            }
        }
    };
    ConflictBounds {
        first: make(ci.s_enter, ci.s_exit, len_a),
        second: make(ci.t_enter, ci.t_exit, len_b),
        case,
    }
}

/// Waypoint polylines keyed by player id, in file order.
pub type Waypoints = Vec<(String, Vec<(f64, f64)>)>;

/// Reads `player,x,y` rows, grouped by player, in first-appearance order.
pub fn read_waypoints_csv<R: Read>(reader: R) -> Result<Waypoints, GeometryError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| GeometryError::Csv(e.to_string()))?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    if cols != ["player", "x", "y"] {
        return Err(GeometryError::Csv(format!("expected header `player,x,y`, found `{}`", cols.join(","))));
    }
    let mut out: Waypoints = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| GeometryError::Csv(e.to_string()))?;
        let parse = |i: usize| -> Result<f64, GeometryError> {
            rec[i]
                .parse::<f64>()
                .map_err(|_| GeometryError::Csv(format!("row {}: bad number `{}`", line + 2, &rec[i])))
        };
        let id = rec[0].to_string();
        let p = (parse(1)?, parse(2)?);
        match out.last_mut() {
            Some((last, pts)) if *last == id => pts.push(p),
            _ => {
                if out.iter().any(|(other, _)| *other == id) {
                    return Err(GeometryError::Csv(format!("row {}: rows of player `{id}` are not contiguous", line + 2)));
                }
                out.push((id, vec![p]));
            }
        }
    }
    Ok(out)
}
