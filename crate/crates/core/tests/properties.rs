use proptest::prelude::*;
use rand::SeedableRng;
use stokes_core::braiding::{apply_event_local, detect_events, transport, DeformationPath, EventKind};
use stokes_core::irregular::{degree, q_alpha, singular_directions, IrregularType, Term};
use stokes_core::lie::{direct_span_factorize, RootDatum, UnipotentPattern};
use stokes_core::linalg::{c, dist, eye, unit, Jet, Mat, C};
use stokes_core::morphisms::{edge_reversal, edge_reversal_closed_form, random_vdb_pair, theta, theta_full_turn, theta_inv, theta_pow};
use stokes_core::qh::spaces::rand_unipotent;
use stokes_core::qh::{QhSpace, QhSpaceExt, Rng, UnipotentList};
use stokes_core::wild::{check_relation, sample_point, IrregularCurve};

fn coef() -> impl Strategy<Value = C> {
    (-3i32..=3, -3i32..=3).prop_map(|(a, b)| c(a as f64, b as f64))
}

/// One- or two-level diagonal types with small integer entries (ties allowed).
fn irregular_type() -> impl Strategy<Value = IrregularType> {
    (2usize..=4).prop_flat_map(|n| {
        (prop::collection::vec(coef(), n), prop::collection::vec(coef(), n), 1u32..=3, any::<bool>()).prop_map(move |(a, b, k, two)| {
            let mut terms = vec![Term { k, a }];
            if two {
                terms.push(Term { k: k + 1, a: b });
            }
            IrregularType::new(n, terms).unwrap()
        })
    })
}

fn point_close(a: &[Mat], b: &[Mat], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| dist(x, y) <= tol)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn q_alpha_is_antisymmetric(q in irregular_type()) {
        for a in RootDatum::gl(q.n).roots {
            let (p, m) = (q_alpha(&q, a), q_alpha(&q, (a.1, a.0)));
            prop_assert_eq!(p.degree(), m.degree());
            for k in 1..=p.degree() {
                prop_assert!((p.coeff(k) + m.coeff(k)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn direction_count_identity(q in irregular_type()) {
        let st = singular_directions(&q);
        let supports: usize = st.directions.iter().map(|d| d.labels.len()).sum();
        let degs: u32 = RootDatum::gl(q.n).roots.into_iter().map(|a| degree(&q, a)).sum();
        prop_assert_eq!(supports as u32, degs);
        for d in &st.directions {
            prop_assert!(d.pattern(q.n).is_closed());
            for k in d.levels.keys() {
                prop_assert!(d.level_pattern(q.n, *k).is_closed());
            }
        }
    }

    #[test]
    fn irregular_type_json_round_trip(q in irregular_type()) {
        let back: IrregularType = serde_json::from_str(&serde_json::to_string(&q).unwrap()).unwrap();
        prop_assert_eq!(back, q);
    }

    #[test]
    fn stokes_group_factorizes_into_root_groups(q in irregular_type(), seed in any::<u64>()) {
        let mut rng = Rng::seed_from_u64(seed);
        for d in &singular_directions(&q).directions {
            let p = d.pattern(q.n);
            let u = rand_unipotent(&mut rng, &p, 1.0);
            let order: Vec<UnipotentPattern> = p.positions.iter().map(|&r| UnipotentPattern::new(q.n, [r]).unwrap()).collect();
            let f = direct_span_factorize(&u, &order).unwrap();
            let prod = f.iter().fold(eye(q.n), |acc, m| acc * m);
            prop_assert!(dist(&prod, &u) < 1e-10);
        }
    }

    #[test]
    fn theta_identities(q in irregular_type(), seed in any::<u64>()) {
        let a = UnipotentList::stokes_space(&q);
        let p = a.sample(&mut Rng::seed_from_u64(seed)).unwrap();
        let back = theta_inv(&theta(&p).unwrap()).unwrap();
        prop_assert!(point_close(&back, &p, 1e-10));
        let m = (p.len() - 2) as i64;
        if m > 0 {
            let full = theta_pow(&p, m).unwrap();
            prop_assert!(point_close(&full, &theta_full_turn(&p).unwrap(), 1e-9));
        }
        let mu = |x: &[Mat]| a.moment_map(&x.to_vec()).unwrap();
        let (m0, m1) = (mu(&p), mu(&theta(&p).unwrap()));
        prop_assert!(point_close(&m0, &m1, 1e-9));
    }

    #[test]
    fn heisenberg_refactorization(x in coef(), y in coef()) {
        let s23 = eye(3) + unit(3, 3, 1, 2) * y;
        let s12 = eye(3) + unit(3, 3, 0, 1) * x;
        let kind = EventKind::Collision {
            start: 0,
            angle: 0.0,
            old: vec![vec![(1, 2)], vec![(0, 1)]],
            new: vec![vec![(0, 1)], vec![(0, 2)], vec![(1, 2)]],
        };
        let jets: Vec<Jet> = [eye(3), eye(3), s23, s12].into_iter().map(Jet::constant).collect();
        let out = apply_event_local(3, &jets, &kind).unwrap();
        prop_assert!((out[2].v[(0, 1)] - x).norm() < 1e-14);
        prop_assert!((out[3].v[(0, 2)] - x * y).norm() < 1e-14);
        prop_assert!((out[4].v[(1, 2)] - y).norm() < 1e-14);
    }

    #[test]
    fn edge_reversal_closed_form_agrees(seed in any::<u64>(), dv in 1usize..=3, dw in 1usize..=3) {
        let mut rng = Rng::seed_from_u64(seed);
        let (a, b) = random_vdb_pair(&mut rng, dv, dw, 0.8);
        let (a1, b1) = edge_reversal(dv, dw, &a, &b).unwrap();
        let (a2, b2) = edge_reversal_closed_form(&a, &b).unwrap();
        prop_assert!(dist(&a1, &a2) <= 1e-12 && dist(&b1, &b2) <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    /// Windings of a GL_2 point: going and returning restores the data, and
    /// `w` clockwise turns give `Theta^{2w}`.
    #[test]
    fn winding_transport(re in -2.0f64..2.0, im in 0.3f64..2.0, turns in -2i32..=2, seed in 0u64..1000) {
        let q = IrregularType::one_level(1, vec![c(re, im), c(0.0, 0.0)]).unwrap();
        let curve = IrregularCurve::new(0, vec![IrregularType::zero(2), q.clone()]).unwrap();
        let rep = sample_point(&curve, None, seed).unwrap();
        let path = DeformationPath::wind(1, &q, [0, 1], turns as f64, 48 * (turns.unsigned_abs() as usize).max(1)).unwrap();
        let there = transport(&curve, &rep, &path).unwrap();
        prop_assert!(check_relation(&there.representation).unwrap() <= 1e-10);
        prop_assert_eq!(detect_events(&path).unwrap().events.len(), 2 * turns.unsigned_abs() as usize);
        let mut local = vec![rep.connectors[1].clone(), rep.formal[1].clone()];
        local.extend(rep.stokes[1].iter().cloned());
        let target = theta_pow(&local, -2 * turns as i64).unwrap();
        let mut got = vec![there.representation.connectors[1].clone(), there.representation.formal[1].clone()];
        got.extend(there.representation.stokes[1].iter().cloned());
        prop_assert!(point_close(&got, &target, 1e-10));
        let back = transport(&there.curve, &there.representation, &path.reversed()).unwrap();
        prop_assert!(stokes_core::braiding::rep_distance(&back.representation, &rep) <= 1e-10);
    }
}
