use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use homotopy_planner::geometry::{
    boxes_overlap, build_path, classify_case, collision_bounds, conflict_interval, footprint_box, pose_at, CaseTag,
    ConflictInterval, Footprint, OrientedBox, ReferencePath,
};
use proptest::prelude::*;

fn quarter_arc() -> Vec<(f64, f64)> {
    (0..=90)
        .map(|i| {
            let a = (i as f64).to_radians();
            (10.0 * a.sin(), 10.0 - 10.0 * a.cos())
        })
        .collect()
}

fn straight(x0: f64, y0: f64, x1: f64, y1: f64) -> ReferencePath {
    build_path(&[(x0, y0), (x1, y1)], 0.1).unwrap()
}

#[test]
fn quarter_arc_length_and_midpoint() {
    let path = build_path(&quarter_arc(), 0.05).unwrap();
    let exact = 10.0 * FRAC_PI_2;
    assert!((path.total_length() - exact).abs() / exact < 1e-3);
    // The chord polygon is shorter than the arc, so evaluate at the polygon's half length.
    let (x, y, psi) = pose_at(&path, path.total_length() / 2.0).unwrap();
    let (ex, ey) = (10.0 * FRAC_PI_4.sin(), 10.0 - 10.0 * FRAC_PI_4.cos());
    assert!((x - ex).hypot(y - ey) < 0.05, "({x}, {y}) vs ({ex}, {ey})");
    assert!((psi - FRAC_PI_4).abs() < 0.02);
}

/// Point-sampling containment oracle at 1 mm over the bounding square of `a`.
fn grid_overlap(a: &OrientedBox, b: &OrientedBox) -> bool {
    let r = a.half_length.hypot(a.half_width);
    let steps = (2.0 * r / 0.001) as i64;
    for i in 0..=steps {
        let x = a.center.0 - r + i as f64 * 0.001;
        for j in 0..=steps {
            let y = a.center.1 - r + j as f64 * 0.001;
            if a.contains((x, y), 1e-9) && b.contains((x, y), 1e-9) {
                return true;
            }
        }
    }
    false
}

#[test]
fn perpendicular_boxes_match_grid_oracle() {
    let horiz = straight(-10.0, 0.0, 10.0, 0.0);
    let fp = Footprint::new(3.6, 1.5).unwrap();
    let a = footprint_box(&horiz, 10.0, fp).unwrap();
    for (dx, dy) in [(2.0, 0.0), (2.6, 0.0), (2.5, 1.9), (2.56, 0.0), (0.0, 2.6)] {
        let vert = straight(dx, -10.0 + dy, dx, 10.0 + dy);
        let b = footprint_box(&vert, 10.0, fp).unwrap();
        assert_eq!(boxes_overlap(&a, &b), grid_overlap(&a, &b), "offset ({dx}, {dy})");
    }
    let vert = straight(2.0, -10.0, 2.0, 10.0);
    assert!(boxes_overlap(&a, &footprint_box(&vert, 10.0, fp).unwrap()));
}

#[test]
fn coincident_paths_overlap_everywhere() {
    let a = straight(0.0, 0.0, 30.0, 0.0);
    let fp = Footprint::new(3.6, 1.5).unwrap();
    let ci = conflict_interval(&a, &a, fp, fp, 0.1).unwrap().unwrap();
    assert_eq!((ci.s_enter, ci.t_enter), (0.0, 0.0));
    assert!((ci.s_exit - 30.0).abs() < 1e-9 && (ci.t_exit - 30.0).abs() < 1e-9);
}

#[test]
fn parallel_paths_do_not_conflict() {
    let a = straight(0.0, 0.0, 30.0, 0.0);
    let b = straight(0.0, 10.0, 30.0, 10.0);
    let fp = Footprint::new(3.6, 1.5).unwrap();
    assert!(conflict_interval(&a, &b, fp, fp, 0.1).unwrap().is_none());
}

#[test]
fn crossing_bounds_compose_with_interval_oracle() {
    let a = straight(0.0, 0.0, 40.0, 0.0);
    let b = straight(20.0, -20.0, 20.0, 20.0);
    let fp = Footprint::new(3.6, 1.5).unwrap();
    let ci = conflict_interval(&a, &b, fp, fp, 0.1).unwrap().unwrap();
    let cb = collision_bounds(&ci, 3.6, 3.6, CaseTag::General);
    let expect_enter = 20.0 - 2.55 - 1.8;
    let expect_exit_hi = 20.0 + 2.55 + 1.8;
    for pb in [cb.first, cb.second] {
        assert!((pb.entry_lo - expect_enter).abs() <= 0.1 + 1e-9, "{pb:?}");
        assert!((pb.exit.unwrap().1 - expect_exit_hi).abs() <= 0.1 + 1e-9, "{pb:?}");
    }
    assert_eq!(classify_case(&ci, &a, &b), CaseTag::General);
}

#[test]
fn merge_point_and_opposite_geometry() {
    let fp = Footprint::new(3.6, 1.5).unwrap();
    // Two approaches joining one shared tail.
    let a = build_path(&[(0.0, -20.0), (0.0, 0.0), (30.0, 0.0)], 0.1).unwrap();
    let b = build_path(&[(-20.0, 0.0), (0.0, 0.0), (30.0, 0.0)], 0.1).unwrap();
    let ci = conflict_interval(&a, &b, fp, fp, 0.1).unwrap().unwrap();
    assert_eq!(classify_case(&ci, &a, &b), CaseTag::Merge);

    // Crossing thin footprints give a near-zero interval.
    let thin = Footprint::new(0.2, 0.2).unwrap();
    let a = straight(0.0, 0.0, 40.0, 0.0);
    let b = straight(20.0, -20.0, 20.0, 20.0);
    let ci = conflict_interval(&a, &b, thin, thin, 0.1).unwrap().unwrap();
    assert_eq!(classify_case(&ci, &a, &b), CaseTag::Point);

    // Head-on in one lane, traversed in opposite directions, neither reaching the other's end.
    let a = straight(0.0, 0.0, 40.0, 0.0);
    let b = straight(35.0, 0.0, -5.0, 0.0);
    let ci = conflict_interval(&a, &b, fp, fp, 0.1).unwrap().unwrap();
    assert_eq!(classify_case(&ci, &a, &b), CaseTag::Opposite);
}

#[test]
fn collision_bounds_examples() {
    let ci = |s1: f64, s2: f64| ConflictInterval {
        s_enter: s1,
        s_exit: s2,
        t_enter: s1,
        t_exit: s2,
        t_at_s_enter: s1,
        t_at_s_exit: s2,
        resolution: 0.1,
    };
    let b = collision_bounds(&ci(50.0, 60.0), 4.0, 4.0, CaseTag::General);
    assert_eq!((b.first.entry_lo, b.first.entry_hi), (48.0, 52.0));
    assert_eq!(b.first.exit, Some((58.0, 62.0)));
    let b = collision_bounds(&ci(30.0, 30.0), 3.6, 3.6, CaseTag::Point);
    assert!((b.first.entry_lo - 28.2).abs() < 1e-12 && (b.first.entry_hi - 31.8).abs() < 1e-12);
    assert_eq!(b.first.exit, Some((b.first.entry_lo, b.first.entry_hi)));
    b.validate().unwrap();
}

fn arb_crossing() -> impl Strategy<Value = (f64, f64, f64, f64, f64)> {
    // Angle between paths, crossing offsets along each, and a rigid shift.
    (0.6f64..2.5, 8.0f64..14.0, 8.0f64..14.0, -50.0f64..50.0, -50.0f64..50.0)
}

fn crossing_paths(angle: f64, ca: f64, cb: f64, dx: f64, dy: f64) -> (ReferencePath, ReferencePath) {
    let a = build_path(&[(dx - ca, dy), (dx + 25.0 - ca, dy)], 0.1).unwrap();
    let (c, s) = (angle.cos(), angle.sin());
    let b = build_path(&[(dx - cb * c, dy - cb * s), (dx + (25.0 - cb) * c, dy + (25.0 - cb) * s)], 0.1).unwrap();
    (a, b)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn footprint_corners_satisfy_halfspaces(x in -100.0f64..100.0, y in -100.0f64..100.0, psi in -3.2f64..3.2, l in 0.5f64..6.0, w in 0.5f64..3.0) {
        let b = OrientedBox { center: (x, y), heading: psi, half_length: l / 2.0, half_width: w / 2.0 };
        for c in b.corners() {
            for (n, rhs) in b.halfspaces() {
                prop_assert!(n[0] * c.0 + n[1] * c.1 - rhs <= 1e-9);
            }
        }
    }

    #[test]
    fn bounds_are_translation_invariant_and_symmetric((angle, ca, cb, dx, dy) in arb_crossing()) {
        let fp = Footprint::new(3.6, 1.5).unwrap();
        let (a, b) = crossing_paths(angle, ca, cb, 0.0, 0.0);
        let (ta, tb) = crossing_paths(angle, ca, cb, dx, dy);
        let ci = conflict_interval(&a, &b, fp, fp, 0.1).unwrap().unwrap();
        let ct = conflict_interval(&ta, &tb, fp, fp, 0.1).unwrap().unwrap();
        for (u, v) in [(ci.s_enter, ct.s_enter), (ci.s_exit, ct.s_exit), (ci.t_enter, ct.t_enter), (ci.t_exit, ct.t_exit)] {
            prop_assert!((u - v).abs() <= 0.1 + 1e-9, "{ci:?} vs {ct:?}");
        }
        let rev = conflict_interval(&b, &a, fp, fp, 0.1).unwrap().unwrap();
        prop_assert_eq!((rev.s_enter, rev.s_exit, rev.t_enter, rev.t_exit), (ci.t_enter, ci.t_exit, ci.s_enter, ci.s_exit));
        let cb = collision_bounds(&ci, 3.6, 3.6, classify_case(&ci, &a, &b));
        prop_assert!((cb.first.entry_hi - cb.first.entry_lo - 3.6).abs() <= 1e-12);
        prop_assert!((cb.second.entry_hi - cb.second.entry_lo - 3.6).abs() <= 1e-12);
    }

    #[test]
    fn interval_is_tight_under_rescan((angle, ca, cb, _dx, _dy) in arb_crossing()) {
        let fp = Footprint::new(3.6, 1.5).unwrap();
        let (a, b) = crossing_paths(angle, ca, cb, 0.0, 0.0);
        let step = 0.1;
        let ci = conflict_interval(&a, &b, fp, fp, step).unwrap().unwrap();
        let fine = step / 2.0;
        let ts: Vec<f64> = (0..=(b.total_length() / fine) as usize).map(|j| j as f64 * fine).collect();
        let hits = |s: f64| {
            let ba = footprint_box(&a, s, fp).unwrap();
            ts.iter().any(|&t| boxes_overlap(&ba, &footprint_box(&b, t, fp).unwrap()))
        };
        let mut s = ci.s_enter;
        while s <= ci.s_exit {
            prop_assert!(hits(s), "no overlap at s = {s} inside {ci:?}");
            s += fine;
        }
        let mut s = 0.0;
        while s <= a.total_length() {
            if s < ci.s_enter - step - 1e-9 || s > ci.s_exit + step + 1e-9 {
                prop_assert!(!hits(s), "overlap at s = {s} outside {ci:?}");
            }
            s += fine;
        }
    }
}
