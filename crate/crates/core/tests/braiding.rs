use stokes_core::braiding::*;
use stokes_core::irregular::{IrregularType, Term};
use stokes_core::lie::UnipotentPattern;
use stokes_core::linalg::{c, dist, eye, unit, Mat, C};
use stokes_core::morphisms::theta_pow;
use stokes_core::wild::*;

fn gl2(a: C) -> IrregularType {
    IrregularType::one_level(1, vec![a, c(0.0, 0.0)]).unwrap()
}

fn local(rep: &StokesRepresentation, i: usize) -> Vec<Mat> {
    let mut p = vec![rep.connectors[i].clone(), rep.formal[i].clone()];
    p.extend(rep.stokes[i].iter().cloned());
    p
}

fn close(a: &[Mat], b: &[Mat]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| dist(x, y)).fold(0.0, f64::max)
}

/// Tame point and a one-level GL_2 point; the winding acts on `point`.
fn winding_setup(point: usize) -> (IrregularCurve, StokesRepresentation) {
    let mut pts = vec![IrregularType::zero(2), gl2(c(0.7, 1.3))];
    if point == 0 {
        pts.swap(0, 1);
    }
    let curve = IrregularCurve::new(0, pts).unwrap();
    let rep = sample_point(&curve, None, 7).unwrap();
    (curve, rep)
}

#[test]
fn clockwise_winding_is_theta_squared() {
    let (curve, rep) = winding_setup(1);
    let path = DeformationPath::wind(1, &curve.points[1], [0, 1], -1.0, 64).unwrap();
    let res = transport(&curve, &rep, &path).unwrap();
    assert_eq!(res.schedule.events.len(), 2);
    let target = theta_pow(&local(&rep, 1), 2).unwrap();
    assert!(close(&local(&res.representation, 1), &target) <= 1e-12);
    // Closed form (S_2 S_1 C, h, h^-1 S_1 h, h^-1 S_2 h).
    let (cc, h, s1, s2) = (&rep.connectors[1], &rep.formal[1], &rep.stokes[1][0], &rep.stokes[1][1]);
    let hi = h.clone().try_inverse().unwrap();
    let closed = vec![s2 * s1 * cc, h.clone(), &hi * s1 * h, &hi * s2 * h];
    assert!(close(&local(&res.representation, 1), &closed) <= 1e-12);
    assert!(close(&local(&res.representation, 0), &local(&rep, 0)) == 0.0);
}

#[test]
fn counterclockwise_winding_is_theta_inverse_squared() {
    let (curve, rep) = winding_setup(1);
    let path = DeformationPath::wind(1, &curve.points[1], [0, 1], 1.0, 64).unwrap();
    let res = transport(&curve, &rep, &path).unwrap();
    let target = theta_pow(&local(&rep, 1), -2).unwrap();
    assert!(close(&local(&res.representation, 1), &target) <= 1e-12);
}

#[test]
fn winding_at_the_framed_point_is_regauged() {
    let (curve, rep) = winding_setup(0);
    let path = DeformationPath::wind(0, &curve.points[0], [0, 1], -1.0, 64).unwrap();
    let res = transport(&curve, &rep, &path).unwrap();
    let mut expect = rep.clone();
    let l = theta_pow(&local(&rep, 0), 2).unwrap();
    expect.connectors[0] = l[0].clone();
    expect.stokes[0] = l[2..].to_vec();
    let expect = regauge(&expect).unwrap();
    assert!(rep_distance(&res.representation, &expect) <= 1e-12);
    assert!(dist(&res.representation.connectors[0], &eye(2)) <= 1e-12);
    validate_representation(&curve, &res.representation, 1e-10).unwrap();
}

#[test]
fn winding_is_independent_of_discretization_and_cut() {
    let (curve, rep) = winding_setup(1);
    let q = &curve.points[1];
    let a = transport(&curve, &rep, &DeformationPath::wind(1, q, [0, 1], -1.0, 40).unwrap()).unwrap();
    let b = transport(&curve, &rep, &DeformationPath::wind(1, q, [0, 1], -1.0, 97).unwrap()).unwrap();
    let d = transport(&curve, &rep, &DeformationPath::wind(1, q, [0, 1], -1.0, 64).unwrap().with_cut(0.7)).unwrap();
    assert!(rep_distance(&a.representation, &b.representation) <= 1e-10);
    assert!(rep_distance(&a.representation, &d.representation) <= 1e-10);
}

#[test]
fn constant_paths_are_trivial() {
    let (curve, rep) = winding_setup(1);
    for cut in [0.0, 1.2, -2.5] {
        let path = DeformationPath::constant(1, &curve.points[1], 5).with_cut(cut);
        let res = transport(&curve, &rep, &path).unwrap();
        assert!(rep_distance(&res.representation, &rep) <= 1e-13);
        let report = verify_transport(&curve, &rep, &path, 1e-9).unwrap();
        assert!(report.passed, "{:?}", report);
    }
}

/// `a = (1, 0, -exp(i phi))` with `phi` from `-0.5` to `0.5`: `arg(a_1 - a_2) = arg(a_2 - a_3)` at `phi = 0`.
fn collision_path(phi0: f64, phi1: f64, steps: usize) -> DeformationPath {
    let samples = (0..=steps)
        .map(|s| {
            let phi = phi0 + (phi1 - phi0) * s as f64 / steps as f64;
            IrregularType::one_level(1, vec![c(1.0, 0.0), c(0.0, 0.0), -C::from_polar(1.0, phi)]).unwrap()
        })
        .collect();
    DeformationPath::new(1, samples).with_cut(1.0)
}

fn collision_setup() -> (IrregularCurve, StokesRepresentation) {
    let q = collision_path(-0.5, 0.5, 1).samples[0].clone();
    let curve = IrregularCurve::new(0, vec![IrregularType::zero(3), q]).unwrap();
    let rep = sample_point(&curve, None, 8).unwrap();
    (curve, rep)
}

#[test]
fn gl3_collision_merges_the_heisenberg_triple() {
    let (curve, rep) = collision_setup();
    let path = collision_path(-0.5, 0.5, 20);
    let sched = detect_events(&path).unwrap();
    let coll: Vec<_> = sched.events.iter().filter(|e| matches!(e.kind, EventKind::Collision { .. })).collect();
    assert_eq!(coll.len(), 2);
    let mut merged: Vec<Vec<(usize, usize)>> = coll
        .iter()
        .map(|e| match &e.kind {
            EventKind::Collision { old, new, .. } => {
                assert_eq!(old.len(), 3);
                assert_eq!(new.len(), 3);
                let mut o = old.clone();
                o.reverse();
                assert_eq!(&o, new);
                let mut u: Vec<_> = old.concat();
                u.sort();
                u
            }
            _ => unreachable!(),
        })
        .collect();
    merged.sort();
    assert_eq!(merged, vec![vec![(0, 1), (0, 2), (1, 2)], vec![(1, 0), (2, 0), (2, 1)]]);
    for e in &coll {
        assert!((e.time - 0.5).abs() < 1e-9);
    }
    let res = transport(&curve, &rep, &path).unwrap();
    assert!(res.relation_residual <= 1e-10);
    // The moment C^{-1} h S_s ... S_1 C is unchanged.
    let mono = |r: &StokesRepresentation| {
        let b = r.stokes[1].iter().rev().fold(r.formal[1].clone(), |acc, s| acc * s);
        r.connectors[1].clone().try_inverse().unwrap() * b * &r.connectors[1]
    };
    assert!(dist(&mono(&rep), &mono(&res.representation)) <= 1e-12);
    validate_representation(&res.curve, &res.representation, 1e-10).unwrap();
}

#[test]
fn collision_round_trip() {
    let (curve, rep) = collision_setup();
    let there = collision_path(-0.5, 0.5, 20);
    let res = transport(&curve, &rep, &there).unwrap();
    let back = transport(&res.curve, &res.representation, &there.reversed()).unwrap();
    assert!(rep_distance(&back.representation, &rep) <= 1e-12);
}

#[test]
fn heisenberg_refactorization() {
    let (x, y) = (c(0.3, -1.1), c(2.0, 0.4));
    let s23 = eye(3) + unit(3, 3, 1, 2) * y;
    let s12 = eye(3) + unit(3, 3, 0, 1) * x;
    let kind = EventKind::Collision {
        start: 0,
        angle: 0.0,
        old: vec![vec![(1, 2)], vec![(0, 1)]],
        new: vec![vec![(0, 1)], vec![(0, 2)], vec![(1, 2)]],
    };
    let p = vec![eye(3), eye(3), s23.clone(), s12.clone()];
    let jets: Vec<_> = p.iter().cloned().map(stokes_core::linalg::Jet::constant).collect();
    let out: Vec<Mat> = apply_event_local(3, &jets, &kind).unwrap().into_iter().map(|j| j.v).collect();
    assert_eq!(out.len(), 5);
    assert!((out[2][(0, 1)] - x).norm() < 1e-15);
    assert!((out[3][(0, 2)] - x * y).norm() < 1e-15);
    assert!((out[4][(1, 2)] - y).norm() < 1e-15);
    assert!(dist(&(&out[4] * &out[3] * &out[2]), &(&s12 * &s23)) < 1e-15);
    for (m, pat) in out[2..].iter().zip([[(0, 1)], [(0, 2)], [(1, 2)]]) {
        assert!(UnipotentPattern::new(3, pat).unwrap().contains_matrix(m, 1e-15));
    }
}

#[test]
fn commuting_factors_swap() {
    let a = eye(3) + unit(3, 3, 0, 1) * c(1.5, 0.0);
    let b = eye(3) + unit(3, 3, 2, 1) * c(-0.5, 0.2);
    let kind = EventKind::Collision { start: 0, angle: 0.0, old: vec![vec![(0, 1)], vec![(2, 1)]], new: vec![vec![(2, 1)], vec![(0, 1)]] };
    let jets: Vec<_> = [eye(3), eye(3), a.clone(), b.clone()].into_iter().map(stokes_core::linalg::Jet::constant).collect();
    let out = apply_event_local(3, &jets, &kind).unwrap();
    assert!(dist(&out[2].v, &b) == 0.0);
    assert!(dist(&out[3].v, &a) == 0.0);
}

#[test]
fn null_homotopic_loops_restore_data() {
    let (curve, rep) = winding_setup(1);
    let q = &curve.points[1];
    let half = DeformationPath::wind(1, q, [0, 1], 0.6, 50).unwrap();
    let loop_ = half.then(&half.reversed()).unwrap();
    let res = transport(&curve, &rep, &loop_).unwrap();
    assert!(!res.schedule.events.is_empty());
    assert!(rep_distance(&res.representation, &rep) <= 1e-10);

    let (curve, rep) = collision_setup();
    let there = collision_path(-0.5, 0.9, 30);
    let res = transport(&curve, &rep, &there.then(&there.reversed()).unwrap()).unwrap();
    assert!(rep_distance(&res.representation, &rep) <= 1e-10);
}

#[test]
fn two_level_loop() {
    let q = IrregularType::new(
        3,
        vec![Term { k: 2, a: vec![c(1.0, 0.0), c(1.0, 0.0), c(-2.0, 0.0)] }, Term { k: 1, a: vec![c(0.0, 0.0), c(1.0, 0.0), c(3.0, 0.0)] }],
    )
    .unwrap();
    let curve = IrregularCurve::new(0, vec![IrregularType::zero(3), q.clone()]).unwrap();
    let rep = sample_point(&curve, None, 9).unwrap();
    let path = DeformationPath::wind(1, &q, [0, 1], -1.0, 200).unwrap().with_cut(0.3);
    let report = verify_transport(&curve, &rep, &path, 1e-9).unwrap();
    assert!(report.passed, "{:?}", report);
    let res = transport(&curve, &rep, &path).unwrap();
    let back = transport(&res.curve, &res.representation, &path.reversed()).unwrap();
    assert!(rep_distance(&back.representation, &rep) <= 1e-10);
}

#[test]
fn transport_commutes_with_h_action() {
    for point in [0, 1] {
        let (curve, rep) = winding_setup(point);
        let path = DeformationPath::wind(point, &curve.points[point], [0, 1], -1.0, 64).unwrap();
        let mut k = vec![eye(2), eye(2)];
        k[point] = stokes_core::linalg::diag(&[c(1.5, 0.2), c(0.7, -0.1)]);
        k[1 - point] = Mat::from_fn(2, 2, |i, j| c(if i == j { 1.0 } else { 0.3 + i as f64 * 0.2 }, 0.1));
        let left = transport(&curve, &rep.act(&k).unwrap(), &path).unwrap().representation;
        let right = transport(&curve, &rep, &path).unwrap().representation.act(&k).unwrap();
        assert!(rep_distance(&left, &right) <= 1e-10, "point {}", point);
    }
}

#[test]
fn invariants_on_tested_paths() {
    let (c1, r1) = winding_setup(1);
    let (c0, r0) = winding_setup(0);
    let (c3, r3) = collision_setup();
    let cases = vec![
        (c1.clone(), r1.clone(), DeformationPath::wind(1, &c1.points[1], [0, 1], -1.0, 64).unwrap()),
        (c1.clone(), r1, DeformationPath::wind(1, &c1.points[1], [1, 0], 1.0, 64).unwrap().with_cut(-1.0)),
        (c0.clone(), r0, DeformationPath::wind(0, &c0.points[0], [0, 1], -1.0, 64).unwrap()),
        (c3, r3, collision_path(-0.5, 0.5, 20)),
    ];
    for (curve, rep, path) in cases {
        let report = verify_transport(&curve, &rep, &path, 1e-9).unwrap();
        assert!(report.passed, "{:?}", report);
        assert!(report.events > 0);
        assert!(report.class_drift <= 1e-12);
    }
}

#[test]
fn naive_reordering_breaks_the_relation() {
    let (_, rep) = collision_setup();
    let sched = detect_events(&collision_path(-0.5, 0.5, 20)).unwrap();
    let mut bad = rep.clone();
    for e in &sched.events {
        match &e.kind {
            EventKind::Collision { start, old, .. } => {
                bad.stokes[1][*start..*start + old.len()].reverse();
            }
            _ => bad = apply_event(&bad, e).unwrap(),
        }
    }
    assert!(check_relation(&bad).unwrap() > 1e-3);
}

#[test]
fn inadmissible_paths_are_refused() {
    let samples = (0..=4).map(|i| gl2(c(1.0 - 0.5 * i as f64, 0.0))).collect();
    let path = DeformationPath::new(0, samples);
    assert!(matches!(detect_events(&path), Err(stokes_core::Error::RefinePath(_))));
    let (curve, rep) = winding_setup(1);
    let wrong_start = DeformationPath::constant(1, &gl2(c(5.0, 0.0)), 3);
    assert!(transport(&curve, &rep, &wrong_start).is_err());
}

#[test]
fn path_input_json() {
    let (curve, _) = winding_setup(1);
    let p: PathInput = serde_json::from_str(r#"{"kind": "wind", "point": 1, "pair": [0, 1], "turns": -1}"#).unwrap();
    let path = p.resolve(&curve).unwrap();
    assert_eq!(detect_events(&path).unwrap().events.len(), 2);
    let s = serde_json::to_string(&path).unwrap();
    let q: PathInput = serde_json::from_str(&s).unwrap();
    assert_eq!(q.resolve(&curve).unwrap(), path);
    let sched = detect_events(&path).unwrap();
    let v: serde_json::Value = serde_json::to_value(&sched.events[0]).unwrap();
    assert_eq!(v["kind"], "CutCrossing");
}

#[test]
fn cut_crossings_are_theta_and_inverse() {
    let (curve, rep) = winding_setup(1);
    let ev = |sense| WallEvent { time: 0.0, point: 1, kind: EventKind::CutCrossing { sense } };
    let fwd = apply_cut_crossing(&rep, &ev(1)).unwrap();
    assert!(close(&local(&fwd, 1), &theta_pow(&local(&rep, 1), 1).unwrap()) == 0.0);
    let back = apply_cut_crossing(&fwd, &ev(-1)).unwrap();
    assert!(rep_distance(&back, &rep) <= 1e-13);
    assert!(check_relation(&fwd).unwrap() <= 1e-10);
    let id = StokesRepresentation::identity(&curve);
    assert!(rep_distance(&apply_cut_crossing(&id, &ev(1)).unwrap(), &id) == 0.0);
    assert!(apply_collision(&rep, &ev(1)).is_err());
}
