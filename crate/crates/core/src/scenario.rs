//! Scenario files: JSON with an explicit `schema_version`.
//!
//! A conflict is given either by its `bounds` (four values per player,
//! `null` for absent merge exits) or by `geometry`, in which case the bounds
//! are computed from the two players' waypoint paths.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::ScenarioError;
use crate::geometry::{
    build_path, classify_case_with, collision_bounds, conflict_interval, read_waypoints_csv, CaseTag, ConflictBounds,
    Footprint, PlayerBounds, ReferencePath, DEFAULT_POINT_THRESHOLD, DEFAULT_SCAN_STEP,
};
use crate::model::{Conflict, Encoding, GameSpec, Mode, PlayerSpec, RegionMarkers};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_WAIT_RADIUS: f64 = 1.5;
pub const DEFAULT_RESAMPLE_STEP: f64 = 0.1;

const ROUND_KACKERTSTRASSE: &str = include_str!("../scenarios/round_kackertstrasse.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub horizon: usize,
    pub dt: f64,
    #[serde(default)]
    pub big_m: Option<f64>,
    #[serde(default = "default_mode")]
    pub mode: String,
    #[serde(default = "default_encoding")]
    pub encoding: String,
    /// `player,x,y` file, relative to the scenario file, for geometry conflicts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waypoints_csv: Option<String>,
    pub players: Vec<PlayerEntry>,
    pub conflicts: Vec<ConflictEntry>,
}

fn default_mode() -> String {
    "free".into()
}

fn default_encoding() -> String {
    "six".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlayerEntry {
    pub id: String,
    pub s0: f64,
    pub v0: f64,
    pub v_max: f64,
    pub a_min: f64,
    pub a_max: f64,
    #[serde(rename = "P")]
    pub p: f64,
    pub r: f64,
    pub length: f64,
    pub width: f64,
    pub goal_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entry_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exit_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wait_radius: Option<f64>,
    /// Inline waypoints `[[x, y], ...]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConflictEntry {
    pub pair: [String; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case: Option<CaseTag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometryEntry>,
}

/// `[entry_lo, entry_hi, exit_lo, exit_hi]` per player.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsEntry {
    pub first: [Option<f64>; 4],
    pub second: [Option<f64>; 4],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryEntry {
    #[serde(default = "default_scan_step")]
    pub scan_step: f64,
    #[serde(default = "default_resample_step")]
    pub resample_step: f64,
    #[serde(default = "default_point_threshold")]
    pub point_threshold: f64,
}

impl Default for GeometryEntry {
    fn default() -> Self {
        GeometryEntry {
            scan_step: DEFAULT_SCAN_STEP,
            resample_step: DEFAULT_RESAMPLE_STEP,
            point_threshold: DEFAULT_POINT_THRESHOLD,
        }
    }
}

fn default_scan_step() -> f64 {
    DEFAULT_SCAN_STEP
}

fn default_resample_step() -> f64 {
    DEFAULT_RESAMPLE_STEP
}

fn default_point_threshold() -> f64 {
    DEFAULT_POINT_THRESHOLD
}

fn invalid(path: impl Into<String>, msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid { path: path.into(), msg: msg.into() }
}

fn player_bounds(vals: &[Option<f64>; 4], path: &str) -> Result<PlayerBounds, ScenarioError> {
    let (Some(lo), Some(hi)) = (vals[0], vals[1]) else {
        return Err(invalid(path, "entry bounds must not be null"));
    };
    let exit = match (vals[2], vals[3]) {
        (Some(a), Some(b)) => Some((a, b)),
        (None, None) => None,
        _ => return Err(invalid(path, "exit bounds must both be null or both be set")),
    };
    Ok(PlayerBounds::new(lo, hi, exit))
}

fn bounds_array(b: &PlayerBounds) -> [Option<f64>; 4] {
    [Some(b.entry_lo), Some(b.entry_hi), b.exit.map(|e| e.0), b.exit.map(|e| e.1)]
}

/// Bounds and case tag of two paths from the occupancy scan.
pub fn bounds_from_paths(
    path_a: &ReferencePath,
    path_b: &ReferencePath,
    fp_a: Footprint,
    fp_b: Footprint,
    geo: &GeometryEntry,
) -> Result<Option<ConflictBounds>, crate::GeometryError> {
    let Some(ci) = conflict_interval(path_a, path_b, fp_a, fp_b, geo.scan_step)? else {
        return Ok(None);
    };
    let case = classify_case_with(&ci, path_a, path_b, geo.point_threshold);
    Ok(Some(collision_bounds(&ci, fp_a.length, fp_b.length, case)))
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<ScenarioFile, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if inner.is_data() {
                invalid(path, inner.to_string())
            } else {
                ScenarioError::Parse(inner.to_string())
            }
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenario serializes");
        s.push('\n');
        s
    }

    /// Resolves the file into a validated [`GameSpec`]. Relative waypoint files
    /// are looked up under `base_dir`.
    pub fn resolve(&self, base_dir: Option<&Path>) -> Result<GameSpec, ScenarioError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        let mode: Mode = self.mode.parse().map_err(|e: String| invalid("mode", e))?;
        let encoding: Encoding = self.encoding.parse().map_err(|e: String| invalid("encoding", e))?;
        let mut ids = HashMap::new();
        let mut players = Vec::with_capacity(self.players.len());
        for (i, p) in self.players.iter().enumerate() {
            if ids.insert(p.id.clone(), i).is_some() {
                return Err(invalid(format!("players[{i}].id"), format!("duplicate id `{}`", p.id)));
            }
            let footprint = Footprint::new(p.length, p.width)
                .map_err(|e| invalid(format!("players[{i}].length"), e.to_string()))?;
            let region = match (p.entry_s, p.exit_s) {
                (Some(entry_s), Some(exit_s)) => Some(RegionMarkers {
                    entry_s,
                    exit_s,
                    wait_radius: p.wait_radius.unwrap_or(DEFAULT_WAIT_RADIUS),
                }),
                (None, None) => None,
                _ => return Err(invalid(format!("players[{i}].exit_s"), "entry_s and exit_s go together")),
            };
            players.push(PlayerSpec {
                id: p.id.clone(),
                s0: p.s0,
                v0: p.v0,
                v_max: p.v_max,
                a_min: p.a_min,
                a_max: p.a_max,
                effort_weight: p.p,
                progress_reward: p.r,
                footprint,
                goal_s: p.goal_s,
                region,
            });
        }

        let csv_paths = match (&self.waypoints_csv, self.conflicts.iter().any(|c| c.geometry.is_some())) {
            (Some(file), true) => {
                let full = base_dir.map(|d| d.join(file)).unwrap_or_else(|| file.into());
                let f = std::fs::File::open(&full)
                    .map_err(|e| invalid("waypoints_csv", format!("{}: {e}", full.display())))?;
                read_waypoints_csv(f).map_err(|e| ScenarioError::Geometry { pair: "waypoints_csv".into(), source: e })?
            }
            _ => Vec::new(),
        };
        let mut paths: HashMap<usize, ReferencePath> = HashMap::new();

        let mut conflicts = Vec::with_capacity(self.conflicts.len());
        for (i, c) in self.conflicts.iter().enumerate() {
            let at = |f: &str| format!("conflicts[{i}].{f}");
            let idx = |k: usize| {
                ids.get(&c.pair[k])
                    .copied()
                    .ok_or_else(|| invalid(format!("conflicts[{i}].pair[{k}]"), format!("unknown player `{}`", c.pair[k])))
            };
            let (a, b) = (idx(0)?, idx(1)?);
            let bounds = match (&c.bounds, &c.geometry) {
                (Some(bounds), None) => {
                    let case = c.case.ok_or_else(|| invalid(at("case"), "required with bounds"))?;
                    let cb = ConflictBounds {
                        first: player_bounds(&bounds.first, &at("bounds.first"))?,
                        second: player_bounds(&bounds.second, &at("bounds.second"))?,
                        case,
                    };
                    cb.validate().map_err(|m| invalid(at("bounds"), m))?;
                    cb
                }
                (None, Some(geo)) => {
                    if c.case.is_some() {
                        return Err(invalid(at("case"), "case is derived for geometry conflicts"));
                    }
                    let pair_name = format!("({}, {})", c.pair[0], c.pair[1]);
                    for &p in &[a, b] {
                        if paths.contains_key(&p) {
                            continue;
                        }
                        let entry = &self.players[p];
                        let pts: Vec<(f64, f64)> = match &entry.path {
                            Some(pts) => pts.iter().map(|q| (q[0], q[1])).collect(),
                            None => csv_paths
                                .iter()
                                .find(|(id, _)| *id == entry.id)
                                .map(|(_, pts)| pts.clone())
                                .ok_or_else(|| invalid(format!("players[{p}].path"), "needed by a geometry conflict"))?,
                        };
                        let path = build_path(&pts, geo.resample_step)
                            .map_err(|e| ScenarioError::Geometry { pair: pair_name.clone(), source: e })?;
                        paths.insert(p, path);
                    }
                    let found = bounds_from_paths(&paths[&a], &paths[&b], players[a].footprint, players[b].footprint, geo)
                        .map_err(|e| ScenarioError::Geometry { pair: pair_name.clone(), source: e })?;
                    found.ok_or_else(|| invalid(at("geometry"), "paths never overlap"))?
                }
                _ => return Err(invalid(format!("conflicts[{i}]"), "exactly one of bounds or geometry is required")),
            };
            conflicts.push(Conflict { pair: (a, b), bounds });
        }

        let spec = GameSpec { players, conflicts, horizon: self.horizon, dt: self.dt, big_m: self.big_m, mode, encoding };
        spec.validate()?;
        Ok(spec)
    }

    /// File form of a spec; every conflict is written with explicit bounds.
    pub fn from_spec(spec: &GameSpec) -> ScenarioFile {
        ScenarioFile {
            schema_version: SCHEMA_VERSION,
            name: None,
            horizon: spec.horizon,
            dt: spec.dt,
            big_m: spec.big_m,
            mode: spec.mode.to_string(),
            encoding: spec.encoding.to_string(),
            waypoints_csv: None,
            players: spec
                .players
                .iter()
                .map(|p| PlayerEntry {
                    id: p.id.clone(),
                    s0: p.s0,
                    v0: p.v0,
                    v_max: p.v_max,
                    a_min: p.a_min,
                    a_max: p.a_max,
                    p: p.effort_weight,
                    r: p.progress_reward,
                    length: p.footprint.length,
                    width: p.footprint.width,
                    goal_s: p.goal_s,
                    entry_s: p.region.map(|r| r.entry_s),
                    exit_s: p.region.map(|r| r.exit_s),
                    wait_radius: p.region.map(|r| r.wait_radius),
                    path: None,
                })
                .collect(),
            conflicts: spec
                .conflicts
                .iter()
                .map(|c| ConflictEntry {
                    pair: [spec.players[c.pair.0].id.clone(), spec.players[c.pair.1].id.clone()],
                    case: Some(c.bounds.case),
                    bounds: Some(BoundsEntry { first: bounds_array(&c.bounds.first), second: bounds_array(&c.bounds.second) }),
                    geometry: None,
                })
                .collect(),
        }
    }
}

pub fn parse_scenario(text: &str, base_dir: Option<&Path>) -> Result<GameSpec, ScenarioError> {
    ScenarioFile::from_json(text)?.resolve(base_dir)
}

pub fn load_scenario(path: &Path) -> Result<GameSpec, ScenarioError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ScenarioError::Io { path: path.display().to_string(), msg: e.to_string() })?;
    parse_scenario(&text, path.parent())
}

pub fn write_scenario(spec: &GameSpec) -> String {
    ScenarioFile::from_spec(spec).to_json()
}

/// Names of scenarios compiled into the library.
pub const BUNDLED: &[&str] = &["round_kackertstrasse"];

pub fn bundled_text(name: &str) -> Option<&'static str> {
    match name {
        "round_kackertstrasse" => Some(ROUND_KACKERTSTRASSE),
        _ => None,
    }
}

pub fn bundled(name: &str) -> Option<GameSpec> {
    bundled_text(name).map(|t| parse_scenario(t, None).expect("bundled scenario is valid"))
}

/// The four-player rounD roundabout scenario.
pub fn round_kackertstrasse() -> GameSpec {
    bundled("round_kackertstrasse").unwrap()
}

/// Loads a file, or a bundled scenario when `arg` names one and no such file exists.
pub fn load_scenario_or_bundled(arg: &str) -> Result<GameSpec, ScenarioError> {
    let p = Path::new(arg);
    if !p.exists() {
        let stem = arg.strip_suffix(".json").unwrap_or(arg);
        if let Some(text) = bundled_text(stem) {
            return parse_scenario(text, None);
        }
    }
    load_scenario(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_round() {
        let spec = round_kackertstrasse();
        assert_eq!(spec.players.len(), 4);
        assert_eq!(spec.conflicts.len(), 4);
        assert_eq!(spec.horizon, 35);
        assert_eq!(spec.dt, 0.1);
        assert_eq!(spec.conflicts[3].bounds.case, CaseTag::Merge);
        assert!(spec.conflicts[3].bounds.first.exit.is_none());
    }

    #[test]
    fn round_trip() {
        let spec = round_kackertstrasse();
        assert_eq!(parse_scenario(&write_scenario(&spec), None).unwrap(), spec);
    }

    #[test]
    fn duplicate_pair_is_validation_error() {
        let mut f = ScenarioFile::from_json(ROUND_KACKERTSTRASSE).unwrap();
        let mut dup = f.conflicts[0].clone();
        dup.pair = [dup.pair[1].clone(), dup.pair[0].clone()];
        f.conflicts.push(dup);
        let e = f.resolve(None).unwrap_err();
        assert_eq!(e.exit_code(), 3, "{e}");
    }

    #[test]
    fn error_classes() {
        assert_eq!(parse_scenario("{ not json", None).unwrap_err().exit_code(), 2);
        let bad = ROUND_KACKERTSTRASSE.replace("\"v_max\": 10.0", "\"v_max\": \"fast\"");
        let e = parse_scenario(&bad, None).unwrap_err();
        assert_eq!(e.exit_code(), 3);
        assert!(e.to_string().contains("players[0].v_max"), "{e}");
        let neg = ROUND_KACKERTSTRASSE.replacen("\"v_max\": 10.0", "\"v_max\": -1.0", 1);
        let e = parse_scenario(&neg, None).unwrap_err();
        assert!(e.to_string().contains("players[0].v_max"), "{e}");
    }
}
