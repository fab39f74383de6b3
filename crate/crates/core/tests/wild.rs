use stokes_core::irregular::{IrregularType, Term};
use stokes_core::linalg::{c, diag, dist, eye, Mat, C};
use stokes_core::qh::{verify::verify_all, QhSpaceExt};
use stokes_core::wild::*;

const PAINLEVE: [&[u32]; 5] = [&[0, 0, 0, 0], &[1, 0, 0], &[1, 1], &[2, 0], &[3]];

fn re(v: &[f64]) -> Vec<C> {
    v.iter().map(|&x| c(x, 0.0)).collect()
}

#[test]
fn painleve_expected_dims() {
    for poles in PAINLEVE {
        let curve = painleve_curve(poles).unwrap();
        let classes = generic_classes(&curve, 1).unwrap();
        let m = poles.len() as i64;
        let r: i64 = poles.iter().map(|&r| r as i64).sum();
        assert_eq!(expected_dim(&curve, Some(&classes)).unwrap(), 2 * (m + r) - 6, "{:?}", poles);
        assert_eq!(expected_dim(&curve, Some(&classes)).unwrap(), 2);
    }
}

#[test]
fn painleve_numeric_dims() {
    for poles in PAINLEVE {
        let curve = painleve_curve(poles).unwrap();
        let classes = generic_classes(&curve, 2).unwrap();
        let hom = build_space(&curve).unwrap();
        let rep = sample_point(&curve, Some(&classes), 3).unwrap();
        validate_representation(&curve, &rep, 1e-10).unwrap();
        let chk = numeric_dim_check(&hom, &classes, &rep).unwrap();
        assert!(chk.stable, "{:?}", poles);
        assert_eq!(chk.measured, Some(2), "{:?}: {:?}", poles, chk);
    }
}

#[test]
fn sampled_points_respect_classes() {
    let curve = painleve_curve(&[1, 0, 0]).unwrap();
    let classes = generic_classes(&curve, 4).unwrap();
    let rep = sample_point(&curve, Some(&classes), 5).unwrap();
    for (h, cl) in rep.formal.iter().zip(&classes) {
        let tr: C = cl.eigenvalues.iter().sum();
        let det = cl.determinant();
        assert!((h.trace() - tr).norm() < 1e-10);
        assert!((h.clone().determinant() - det).norm() < 1e-10);
    }
    // The irregular point has H = T, so h is the diagonal class representative itself.
    assert!(dist(&rep.formal[0], &diag(&classes[0].eigenvalues)) < 1e-10);
}

#[test]
fn determinant_obstruction() {
    let curve = IrregularCurve::tame(2, 0, 2);
    let classes = vec![ClassSpec::semisimple(re(&[1.0, 2.0])), ClassSpec::semisimple(re(&[1.0, 1.0]))];
    match sample_point(&curve, Some(&classes), 0) {
        Err(stokes_core::Error::NoSample(msg)) => assert!(msg.contains("determinant")),
        other => panic!("{:?}", other.map(|_| ())),
    }
    assert!(!is_generic(&classes, 1e-9).unwrap().kernel_condition);
}

#[test]
fn genericity_witness() {
    let classes = vec![
        ClassSpec::semisimple(re(&[2.0, 0.5, 3.0])),
        ClassSpec::semisimple(re(&[1.0, 1.0, 1.0 / 3.0])),
    ];
    let r = is_generic(&classes, 1e-9).unwrap();
    assert!(r.kernel_condition);
    assert!(!r.generic);
    let w = r.witness.unwrap();
    assert!((w.product - c(1.0, 0.0)).norm() < 1e-12);
    assert!(r.exhaustive);
}

fn generic_configs() -> Vec<IrregularCurve> {
    let q = IrregularType::one_level(1, re(&[1.0, -1.0])).unwrap();
    vec![
        painleve_curve(&[0, 0, 0, 0]).unwrap(),
        IrregularCurve::tame(3, 0, 3),
        IrregularCurve::new(1, vec![q]).unwrap(),
    ]
}

#[test]
fn generic_classes_give_stable_points() {
    for (k, curve) in generic_configs().iter().enumerate() {
        let classes = generic_classes(curve, 10 + k as u64).unwrap();
        assert!(is_generic(&classes, 1e-9).unwrap().generic);
        for s in 0..50 {
            let rep = sample_point(curve, Some(&classes), 1000 * k as u64 + s).unwrap();
            assert!(check_relation(&rep).unwrap() <= 1e-10);
            let st = is_stable(curve, &rep).unwrap();
            assert!(st.stable, "config {} sample {}: {:?}", k, s, st);
        }
    }
}

fn block_diag(a: &Mat, b: &Mat) -> Mat {
    let n = a.nrows() + b.nrows();
    let mut m = stokes_core::linalg::zeros(n, n);
    m.view_mut((0, 0), a.shape()).copy_from(a);
    m.view_mut(a.shape(), b.shape()).copy_from(b);
    m
}

#[test]
fn reducible_block_construction_is_unstable() {
    let c2 = IrregularCurve::tame(2, 0, 3);
    let c1 = IrregularCurve::tame(1, 0, 3);
    let cl2 = generic_classes(&c2, 20).unwrap();
    let cl1 = generic_classes(&c1, 21).unwrap();
    let r2 = sample_point(&c2, Some(&cl2), 22).unwrap();
    let r1 = sample_point(&c1, Some(&cl1), 23).unwrap();
    let c3 = IrregularCurve::tame(3, 0, 3);
    let mut rep = StokesRepresentation::identity(&c3);
    for i in 0..3 {
        rep.formal[i] = block_diag(&r2.formal[i], &r1.formal[i]);
        rep.connectors[i] = block_diag(&r2.connectors[i], &r1.connectors[i]);
    }
    validate_representation(&c3, &rep, 1e-10).unwrap();
    let st = is_stable(&c3, &rep).unwrap();
    assert!(!st.stable);
    assert_eq!(st.algebra_dim, 5);
    assert_eq!(st.invariant_subspace_found, Some(true));
    let classes: Vec<ClassSpec> = cl2
        .iter()
        .zip(&cl1)
        .map(|(a, b)| ClassSpec::semisimple([a.eigenvalues.clone(), b.eigenvalues.clone()].concat()))
        .collect();
    assert!(!is_generic(&classes, 1e-9).unwrap().generic);
}

#[test]
fn galois_crosscheck_agrees() {
    let q = IrregularType::new(3, vec![Term { k: 2, a: re(&[1.0, 1.0, -2.0]) }, Term { k: 1, a: re(&[0.0, 1.0, 3.0]) }]).unwrap();
    let curves = vec![
        painleve_curve(&[2, 0]).unwrap(),
        painleve_curve(&[1, 1]).unwrap(),
        IrregularCurve::new(0, vec![q, IrregularType::zero(3)]).unwrap(),
    ];
    for (k, curve) in curves.iter().enumerate() {
        for s in 0..20 {
            let rep = sample_point(curve, None, 100 * k as u64 + s).unwrap();
            let g = galois_crosscheck(curve, &rep).unwrap();
            assert!(g.agree, "{:?}", g);
        }
        // Trivial Stokes data and diagonal formal monodromy: reducible either way.
        let rep = StokesRepresentation::identity(curve);
        let g = galois_crosscheck(curve, &rep).unwrap();
        assert!(g.agree);
        assert!(g.center_algebra_dim < curve.n() * curve.n());
    }
}

#[test]
fn hom_space_is_quasi_hamiltonian() {
    let curve = painleve_curve(&[1, 0]).unwrap();
    let hom = build_space(&curve).unwrap();
    for seed in 0..3 {
        let rep = verify_all(&hom.space, seed, &Default::default()).unwrap();
        assert!(rep.passed, "{:?}", rep);
        assert_eq!(rep.dim as i64, hom.dim());
    }
}

#[test]
fn action_preserves_relation_and_slice() {
    let curve = painleve_curve(&[1, 0, 0]).unwrap();
    let rep = sample_point(&curve, None, 30).unwrap();
    let k = vec![diag(&re(&[2.0, 0.5])), eye(2) + Mat::from_fn(2, 2, |i, j| c((i + 2 * j) as f64 * 0.1, 0.0)), eye(2)];
    let moved = rep.act(&k).unwrap();
    validate_representation(&curve, &moved, 1e-10).unwrap();
    let hom = build_space(&curve).unwrap();
    let p = hom.space.act_point(&k, &rep.to_point()).unwrap();
    for (x, y) in p.iter().zip(moved.to_point().iter()) {
        assert!(dist(x, y) < 1e-12);
    }
}

#[test]
fn representation_json_round_trip() {
    let curve = painleve_curve(&[2]).unwrap();
    let rep = sample_point(&curve, None, 31).unwrap();
    let s = serde_json::to_string(&rep).unwrap();
    let back: StokesRepresentation = serde_json::from_str(&s).unwrap();
    assert_eq!(back, rep);
    let input: CurveInput = serde_json::from_str(
        r#"{"genus": 0, "points": [{"n": 2, "terms": [{"k": 1, "A": [[1,0],[-1,0]]}]}],
            "classes": [{"eigenvalues": [[2,0],[0.5,0]], "unipotent": "trivial"}]}"#,
    )
    .unwrap();
    assert_eq!(input.curve().unwrap().m(), 1);
    assert_eq!(input.validated_classes().unwrap().unwrap()[0].unipotent, UnipotentPart::Trivial);
}

#[test]
fn regular_unipotent_classes() {
    let curve = IrregularCurve::tame(2, 0, 3);
    let mut classes = generic_classes(&curve, 40).unwrap();
    // A class with a repeated eigenvalue and a Jordan block.
    let l = c(-1.0, 0.0);
    let det: C = classes[1].determinant() * classes[2].determinant();
    classes[0] = ClassSpec { eigenvalues: vec![l, l], unipotent: UnipotentPart::Regular };
    classes[2].eigenvalues[1] /= det;
    let rep = sample_point(&curve, Some(&classes), 41).unwrap();
    let h = &rep.formal[0];
    let n = h - eye(2) * l;
    assert!(stokes_core::linalg::max_abs(&(&n * &n)) < 1e-9);
    assert!(stokes_core::linalg::max_abs(&n) > 1e-6);
}
