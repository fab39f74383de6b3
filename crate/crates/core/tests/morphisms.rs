use rand::SeedableRng;
use stokes_core::irregular::{singular_directions, IrregularType, Term};
use stokes_core::lie::BlockGrading;
use stokes_core::linalg::{c, dist, eye, max_abs, Mat};
use stokes_core::morphisms::*;
use stokes_core::qh::{verify::verify_all, QhSpace, QhSpaceExt, Rng, UnipotentList};

fn two_level() -> IrregularType {
    IrregularType::new(
        3,
        vec![
            Term { k: 2, a: vec![c(1.0, 0.0), c(1.0, 0.0), c(-2.0, 0.0)] },
            Term { k: 1, a: vec![c(0.0, 0.0), c(1.0, 0.0), c(3.0, 0.0)] },
        ],
    )
    .unwrap()
}

#[test]
fn theta_is_isomorphism() {
    for (sizes, r) in [(vec![1, 1], 1), (vec![2, 1], 2)] {
        let a = UnipotentList::fission(&BlockGrading::new(sizes).unwrap(), r);
        for m in [theta_morphism(&a).unwrap(), theta_inv_morphism(&a).unwrap()] {
            let rep = verify_pullback_sampled(&m, 10, 11, 1e-9).unwrap();
            assert!(rep.passed, "{:?}", rep);
            assert!(rep.moment < 1e-12);
        }
    }
}

#[test]
fn theta_on_stokes_space() {
    let a = UnipotentList::stokes_space(&two_level());
    let rep = verify_pullback_sampled(&theta_morphism(&a).unwrap(), 5, 12, 1e-9).unwrap();
    assert!(rep.passed, "{:?}", rep);
}

#[test]
fn inversion_is_anti_isomorphism() {
    let a = UnipotentList::fission(&BlockGrading::new(vec![2, 1]).unwrap(), 1);
    let rep = verify_pullback_sampled(&inversion_morphism(&a).unwrap(), 10, 13, 1e-9).unwrap();
    assert!(rep.passed, "{:?}", rep);
}

#[test]
fn inversion_is_not_an_isomorphism() {
    let a = UnipotentList::fission(&BlockGrading::new(vec![1, 1]).unwrap(), 1);
    let mut m = inversion_morphism(&a).unwrap();
    m.behaviour = Behaviour::Isomorphism;
    let rep = verify_pullback_sampled(&m, 5, 14, 1e-9).unwrap();
    assert!(!rep.passed);
}

#[test]
fn twists_are_automorphisms() {
    let a = UnipotentList::fission(&BlockGrading::new(vec![1, 2]).unwrap(), 2);
    for m in [twist_inner_morphism(&a), twist_outer_morphism(&a)] {
        let rep = verify_pullback_sampled(&m, 10, 15, 1e-9).unwrap();
        assert!(rep.passed, "{:?}", rep);
        assert!(rep.moment < 1e-12);
    }
}

#[test]
fn nesting_gl3_chain() {
    for r in [1, 2] {
        let nest = Nesting::gl3_chain(r).unwrap();
        let glued = nest.glued().unwrap();
        let target = nest.target().unwrap();
        let mut rng = Rng::seed_from_u64(16);
        let p = glued.sample(&mut rng).unwrap();
        assert_eq!(glued.dim_at(&p).unwrap(), target.dim_at(&target.sample(&mut rng).unwrap()).unwrap());
        let rep = verify_pullback_sampled(&nest.morphism().unwrap(), 10, 17, 1e-9).unwrap();
        assert!(rep.passed, "{:?}", rep);
    }
}

#[test]
fn nesting_glued_space_is_quasi_hamiltonian() {
    let nest = Nesting::gl3_chain(1).unwrap();
    let rep = verify_all(&nest.glued().unwrap(), 18, &Default::default()).unwrap();
    assert!(rep.passed, "{:?}", rep);
}

#[test]
fn nest_glue_of_trivial_outer_factors() {
    let nest = Nesting::gl3_chain(1).unwrap();
    let mut rng = Rng::seed_from_u64(19);
    let inner = nest.inner.sample(&mut rng).unwrap();
    let b = inner[1].clone() * &inner[3] * &inner[2];
    let k = inv_conj(&inner[0], &b);
    let outer = vec![nest.outer.sample(&mut rng).unwrap()[0].clone(), k, eye(3), eye(3)];
    let glued = nest_glue(&nest, &inner, &outer).unwrap();
    for i in 0..2 {
        assert!(dist(&glued[2 + i], &inner[2 + i]) < 1e-12);
    }
    nest.target().unwrap().check_point(&glued).unwrap();
}

fn inv_conj(d: &Mat, b: &Mat) -> Mat {
    let di = d.clone().try_inverse().unwrap();
    // k with D^{-1} b D k^{-1} = 1.
    &di * b * d
}

#[test]
fn nest_glue_rejects_mismatched_moments() {
    let nest = Nesting::gl3_chain(1).unwrap();
    let mut rng = Rng::seed_from_u64(20);
    let inner = nest.inner.sample(&mut rng).unwrap();
    let outer = nest.outer.sample(&mut rng).unwrap();
    assert!(nest_glue(&nest, &inner, &outer).is_err());
}

#[test]
fn vdb_relations_on_random_slice_points() {
    let mut rng = Rng::seed_from_u64(21);
    for (dv, dw) in [(1, 1), (2, 1), (2, 2)] {
        let slice = vdb_slice_space(dv, dw).unwrap();
        for _ in 0..100 {
            let p = slice.sample(&mut rng).unwrap();
            let (a, b, rep) = vdb_reduce(dv, dw, &p, 1e-12).unwrap();
            assert!(rep.max() <= 1e-12);
            let back = vdb_lift(dv, dw, &a, &b).unwrap();
            assert!(back.iter().zip(&p).all(|(x, y)| dist(x, y) == 0.0));
        }
    }
}

#[test]
fn vdb_two_forms_match() {
    for (dv, dw) in [(1, 1), (2, 1), (2, 2)] {
        let rep = verify_pullback_sampled(&vdb_morphism(dv, dw).unwrap(), 20, 22, 1e-9).unwrap();
        assert!(rep.passed, "{:?}", rep);
    }
}

#[test]
fn edge_reversal_matches_closed_form() {
    let mut rng = Rng::seed_from_u64(23);
    for (dv, dw) in [(1, 1), (2, 1), (1, 3)] {
        for _ in 0..20 {
            let (a, b) = random_vdb_pair(&mut rng, dv, dw, 0.8);
            let (a1, b1) = edge_reversal(dv, dw, &a, &b).unwrap();
            let (a2, b2) = edge_reversal_closed_form(&a, &b).unwrap();
            assert!(max_abs(&(&a1 - &a2)) <= 1e-13);
            assert!(max_abs(&(&b1 - &b2)) <= 1e-13);
        }
        let rep = verify_pullback_sampled(&edge_reversal_morphism(dv, dw), 10, 24, 1e-9).unwrap();
        assert!(rep.passed, "{:?}", rep);
    }
}

#[test]
fn level_decomposition_two_level_gl3() {
    let q = two_level();
    let st = singular_directions(&q);
    let a = UnipotentList::stokes_space(&q);
    let mut rng = Rng::seed_from_u64(25);
    for _ in 0..100 {
        let p = a.sample(&mut rng).unwrap();
        let dec = level_decompose(&q, &st, &p).unwrap();
        assert_eq!(dec.levels, vec![1, 2]);
        let back = level_recompose(3, &p[0], &p[1], &dec.twisted).unwrap();
        for (x, y) in back.iter().zip(&p) {
            assert!(dist(x, y) <= 1e-12);
        }
        assert!(dist(&stokes_monodromy(&p), &level_monodromy(&p[1], &dec.twisted)) <= 1e-12);
        // Adjacent level spaces glue: the outer moment of level j cancels the
        // inner moment of level j+1.
        let m0 = dec.spaces[0].moment_map(&dec.points[0]).unwrap();
        let m1 = dec.spaces[1].moment_map(&dec.points[1]).unwrap();
        assert!(dist(&(&m0[0] * &m1[1]), &eye(3)) <= 1e-12);
        assert!(dist(&m1[0], &a.moment_map(&p).unwrap()[0]) <= 1e-12);
    }
}

#[test]
fn level_spaces_are_quasi_hamiltonian() {
    let q = two_level();
    let st = singular_directions(&q);
    let a = UnipotentList::stokes_space(&q);
    let p = a.sample(&mut Rng::seed_from_u64(26)).unwrap();
    let dec = level_decompose(&q, &st, &p).unwrap();
    for sp in &dec.spaces {
        let rep = verify_all(sp, 27, &Default::default()).unwrap();
        assert!(rep.passed, "{:?}", rep);
    }
}
