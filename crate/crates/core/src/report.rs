//! CSV reports and SVG plots. Column order is fixed; floats use the shortest
//! round-trip form so identical runs give identical bytes.

use std::fmt::Write as _;

use crate::geometry::ConflictBounds;
use crate::homotopy::{ClassReport, Ranking};
use crate::model::{region_halfplane, present_regions, GameSpec, Solution};
use crate::sim::{Metrics, SimTrace, TaskMetrics};

fn csv_line(out: &mut String, fields: &[String]) {
    out.push_str(&fields.join(","));
    out.push('\n');
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn solution_csv(sol: &Solution, spec: &GameSpec) -> String {
    let mut out = String::from("player,k,time,s,v,u\n");
    for (p, t) in sol.trajectories.iter().enumerate() {
        for k in 0..t.s.len() {
            csv_line(
                &mut out,
                &[
                    spec.players[p].id.clone(),
                    k.to_string(),
                    (k as f64 * spec.dt).to_string(),
                    t.s[k].to_string(),
                    t.v[k].to_string(),
                    opt(t.u.get(k).copied()),
                ],
            );
        }
    }
    out
}

pub fn trace_csv(trace: &SimTrace) -> String {
    let mut out = String::from("step,time,player,s,v,u\n");
    for i in 0..trace.n_states() {
        for (p, id) in trace.player_ids.iter().enumerate() {
            csv_line(
                &mut out,
                &[
                    i.to_string(),
                    (i as f64 * trace.dt).to_string(),
                    id.clone(),
                    trace.s[p][i].to_string(),
                    trace.v[p][i].to_string(),
                    opt(trace.steps.get(i).map(|st| st.u[p])),
                ],
            );
        }
    }
    out
}

/// Per-step solver statistics; wall time only when `timing` is set.
pub fn step_stats_csv(trace: &SimTrace, timing: bool) -> String {
    let mut out = String::from("step,class,objective,nodes,qp_solves,incumbent_updates,warm_start,fallback");
    out.push_str(if timing { ",wall_time_s\n" } else { "\n" });
    for st in &trace.steps {
        let mut f = vec![
            st.step.to_string(),
            st.class.as_ref().map(|c| c.bits()).unwrap_or_default(),
            if st.objective.is_nan() { String::new() } else { st.objective.to_string() },
            st.stats.nodes_explored.to_string(),
            st.stats.qp_solves.to_string(),
            st.stats.incumbent_updates.to_string(),
            u8::from(st.stats.warm_start_accepted).to_string(),
            u8::from(st.fallback).to_string(),
        ];
        if timing {
            f.push(st.stats.wall_time.as_secs_f64().to_string());
        }
        csv_line(&mut out, &f);
    }
    out
}

pub fn metrics_csv(m: &Metrics, spec: &GameSpec) -> String {
    let mut out = String::from("scope,tct,nce,np,np_per_tct,t_r,c_r,t_w\n");
    let t = &m.task;
    csv_line(
        &mut out,
        &["all".into(), t.tct.to_string(), t.nce.to_string(), t.np.to_string(), t.np_over_tct.to_string(), String::new(), String::new(), String::new()],
    );
    for (p, pm) in m.players.iter().enumerate() {
        csv_line(
            &mut out,
            &[
                format!("player:{}", spec.players[p].id),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                pm.t_r.to_string(),
                pm.c_r.to_string(),
                pm.t_w.to_string(),
            ],
        );
    }
    out
}

pub fn task_metrics_csv(t: &TaskMetrics) -> String {
    format!("tct,nce,np,np_per_tct\n{},{},{},{}\n", t.tct, t.nce, t.np, t.np_over_tct)
}

/// One row per class in enumeration order, with its rank among all classes.
///
/// `sim` holds optional simulation metrics per report, aligned with
/// `ranking.reports`.
pub fn enumerate_csv(ranking: &Ranking, sim: Option<&[Option<TaskMetrics>]>, timing: bool) -> String {
    let mut header = String::from("class,status,rank,objective,nodes,qp_solves");
    if timing {
        header.push_str(",nct_s");
    }
    if sim.is_some() {
        header.push_str(",tct,nce,np,np_per_tct");
    }
    header.push('\n');
    let mut out = header;
    let mut order: Vec<(usize, &ClassReport)> = ranking.reports.iter().enumerate().collect();
    order.sort_by(|a, b| a.1.class.cmp(&b.1.class));
    for (rank, r) in order {
        let mut f = vec![
            r.class.bits(),
            r.status.label().to_string(),
            (rank + 1).to_string(),
            opt(r.objective),
            r.stats.as_ref().map(|s| s.nodes_explored.to_string()).unwrap_or_default(),
            r.stats.as_ref().map(|s| s.qp_solves.to_string()).unwrap_or_default(),
        ];
        if timing {
            f.push(r.stats.as_ref().map(|s| s.wall_time.as_secs_f64().to_string()).unwrap_or_default());
        }
        if let Some(sim) = sim {
            match &sim[rank] {
                Some(t) => f.extend([t.tct.to_string(), t.nce.to_string(), t.np.to_string(), t.np_over_tct.to_string()]),
                None => f.extend(std::iter::repeat_n(String::new(), 4)),
            }
        }
        csv_line(&mut out, &f);
    }
    out
}

pub fn deadlock_csv(rows: &[(String, &'static str)]) -> String {
    let mut out = String::from("class,status\n");
    for (c, s) in rows {
        csv_line(&mut out, &[c.replace(',', " "), s.to_string()]);
    }
    out
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    w: f64,
    h: f64,
    pad: f64,
}

impl Frame {
    fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Frame {
        let (x1, y1) = (if x1 > x0 { x1 } else { x0 + 1.0 }, if y1 > y0 { y1 } else { y0 + 1.0 });
        Frame { x0, x1, y0, y1, w: 480.0, h: 480.0, pad: 50.0 }
    }
    fn px(&self, x: f64) -> f64 {
        self.pad + (x - self.x0) / (self.x1 - self.x0) * self.w
    }
    fn py(&self, y: f64) -> f64 {
        self.pad + self.h - (y - self.y0) / (self.y1 - self.y0) * self.h
    }
    fn open(&self, out: &mut String, title: &str, xlabel: &str, ylabel: &str) {
        let (tw, th) = (self.w + 2.0 * self.pad, self.h + 2.0 * self.pad);
        let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{tw}" height="{th}" font-family="sans-serif" font-size="12">"#);
        let _ = writeln!(out, r#"<rect x="0" y="0" width="{tw}" height="{th}" fill="white"/>"#);
        let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#, tw / 2.0, escape(title));
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            self.pad, self.pad, self.w, self.h
        );
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, tw / 2.0, th - 10.0, escape(xlabel));
        let _ = writeln!(
            out,
            r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">{}</text>"#,
            th / 2.0,
            th / 2.0,
            escape(ylabel)
        );
        for i in 0..=4 {
            let fx = self.x0 + (self.x1 - self.x0) * i as f64 / 4.0;
            let fy = self.y0 + (self.y1 - self.y0) * i as f64 / 4.0;
            let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{:.1}</text>"#, self.px(fx), self.pad + self.h + 15.0, fx);
            let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.1}</text>"#, self.pad - 4.0, self.py(fy) + 4.0, fy);
        }
    }
    fn polyline(&self, out: &mut String, xs: &[f64], ys: &[f64], color: &str) {
        let pts: Vec<String> = xs.iter().zip(ys).map(|(&x, &y)| format!("{:.2},{:.2}", self.px(x), self.py(y))).collect();
        let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, pts.join(" "));
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Corners of the collision area, walking its boundary counter-clockwise.
fn collision_polygon(b: &ConflictBounds, far: f64) -> Vec<(f64, f64)> {
    // Intersect the complements of the region half-planes with a large box by
    // clipping a square polygon against each reversed half-plane.
    let mut poly = vec![(-far, -far), (far, -far), (far, far), (-far, far)];
    for &r in present_regions(b.case) {
        let Some((cx, cy, rhs)) = region_halfplane(r, b) else { continue };
        // keep cx·x + cy·y >= rhs
        let f = |p: (f64, f64)| cx * p.0 + cy * p.1 - rhs;
        let mut next = Vec::new();
        for i in 0..poly.len() {
            let (a, c) = (poly[i], poly[(i + 1) % poly.len()]);
            let (fa, fc) = (f(a), f(c));
            if fa >= 0.0 {
                next.push(a);
            }
            if (fa >= 0.0) != (fc >= 0.0) {
                let t = fa / (fa - fc);
                next.push((a.0 + t * (c.0 - a.0), a.1 + t * (c.1 - a.1)));
            }
        }
        poly = next;
    }
    poly
}

/// Progress plane of one pair: the collision area and the joint trajectory.
pub fn progress_plane_svg(x: &[f64], y: &[f64], bounds: &ConflictBounds, labels: (&str, &str)) -> String {
    let far = 1e4;
    let poly = collision_polygon(bounds, far);
    let all_x = x.iter().copied().chain([bounds.first.entry_lo, bounds.first.max_value()]);
    let all_y = y.iter().copied().chain([bounds.second.entry_lo, bounds.second.max_value()]);
    let (x0, x1) = all_x.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (y0, y1) = all_y.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (mx, my) = ((x1 - x0) * 0.1 + 1.0, (y1 - y0) * 0.1 + 1.0);
    let fr = Frame::new(x0 - mx, x1 + mx, y0 - my, y1 + my);
    let mut out = String::new();
    fr.open(&mut out, &format!("progress plane {} / {}", labels.0, labels.1), &format!("s of {}", labels.0), &format!("s of {}", labels.1));
    let _ = writeln!(out, r#"<clipPath id="plot"><rect x="{}" y="{}" width="{}" height="{}"/></clipPath>"#, fr.pad, fr.pad, fr.w, fr.h);
    if poly.len() >= 3 {
        let pts: Vec<String> = poly.iter().map(|&(a, b)| format!("{:.2},{:.2}", fr.px(a), fr.py(b))).collect();
        let _ = writeln!(out, r##"<polygon points="{}" fill="#e66" fill-opacity="0.5" stroke="#a00" clip-path="url(#plot)"/>"##, pts.join(" "));
    }
    fr.polyline(&mut out, x, y, "#036");
    for (&a, &b) in x.iter().zip(y) {
        let _ = writeln!(out, r##"<circle cx="{:.2}" cy="{:.2}" r="1.5" fill="#036"/>"##, fr.px(a), fr.py(b));
    }
    out.push_str("</svg>\n");
    out
}

/// Arc length over time for every player.
pub fn time_plot_svg(s: &[Vec<f64>], dt: f64, ids: &[String]) -> String {
    const COLORS: [&str; 6] = ["#036", "#c40", "#080", "#808", "#088", "#880"];
    let n = s.iter().map(|x| x.len()).max().unwrap_or(1);
    let (y0, y1) = s.iter().flatten().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let fr = Frame::new(0.0, (n.max(2) - 1) as f64 * dt, y0.min(0.0), y1.max(1.0));
    let mut out = String::new();
    fr.open(&mut out, "progress over time", "time (s)", "s (m)");
    for (p, sp) in s.iter().enumerate() {
        let ts: Vec<f64> = (0..sp.len()).map(|i| i as f64 * dt).collect();
        let color = COLORS[p % COLORS.len()];
        fr.polyline(&mut out, &ts, sp, color);
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" fill="{color}">{}</text>"#,
            fr.pad + fr.w - 60.0,
            fr.pad + 15.0 + 15.0 * p as f64,
            escape(ids.get(p).map(|s| s.as_str()).unwrap_or("?"))
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Reads `player` and `s` columns (ordered by the step or k column) from a
/// solution or trace CSV, keyed by player id in first-appearance order.
pub fn read_progress_csv(text: &str) -> Result<Vec<(String, Vec<f64>)>, String> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| e.to_string())?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(pc), Some(sc)) = (col("player"), col("s")) else {
        return Err("csv needs `player` and `s` columns".into());
    };
    let mut out: Vec<(String, Vec<f64>)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let id = rec[pc].to_string();
        let s: f64 = rec[sc].parse().map_err(|_| format!("bad s value `{}`", &rec[sc]))?;
        match out.iter_mut().find(|(p, _)| *p == id) {
            Some((_, v)) => v.push(s),
            None => out.push((id, vec![s])),
        }
    }
    Ok(out)
}
