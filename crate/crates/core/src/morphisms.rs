//! Explicit maps between spaces: the isomonodromy map `Theta`, inversion,
//! twists, Weyl conjugation, nesting of fission spaces, the Van den Bergh
//! correspondence and the level decomposition of `A(Q)`.
//!
//! Point maps are written once on jets, so the same code gives the map on
//! points and its pushforward on tangent vectors.

use crate::irregular::{levi_chain, IrregularType, StokesStructure};
use crate::lie::{direct_span_factorize, BlockGrading, Partition, UnipotentPattern};
use crate::linalg::{eye, inv, max_abs, rand_mat, zeros, Jet, Mat, C};
use crate::qh::spaces::{rand_levi, rand_unipotent};
use crate::qh::verify::{random_group_element, random_tangent};
use crate::qh::{
    constant_jets, from_raw, jets, Fused, Point, Product, QhSpace, QhSpaceExt, ReducedSlice, Rng, Slice,
    Tangent, UnipotentList, VanDenBergh,
};
use crate::{Error, Result};
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

pub type PointMap = Box<dyn Fn(&[Jet]) -> Result<Vec<Jet>> + Send + Sync>;
pub type MatMap = Box<dyn Fn(&[Mat]) -> Result<Vec<Mat>> + Send + Sync>;

fn on_point(f: impl Fn(&[Jet]) -> Result<Vec<Jet>>, p: &[Mat]) -> Result<Point> {
    Ok(f(&constant_jets(p))?.into_iter().map(|j| j.v).collect())
}

fn conj(g: &Jet, x: &Jet) -> Result<Jet> {
    Ok(&(g * x) * &g.inv()?)
}

fn conj_inv(g: &Jet, x: &Jet) -> Result<Jet> {
    Ok(&(&g.inv()? * x) * g)
}

/// `b = h S_m ... S_1` on a jet point `(C, h, S_1, ..., S_m)`.
fn monodromy_jet(p: &[Jet]) -> Jet {
    let mut b = p[1].clone();
    for s in p[2..].iter().rev() {
        b = &b * s;
    }
    b
}

fn need_list(p: &[Jet], min: usize) -> Result<()> {
    if p.len() < min {
        return Err(Error::Dimension(format!("expected at least {} factors, got {}", min, p.len())));
    }
    Ok(())
}

/// Expected effect of a map on the quasi-Hamiltonian structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Behaviour {
    /// `F^* omega' = omega`, `mu' F = mu`.
    Isomorphism,
    /// `F^* omega' = -omega`, `mu' F = mu^{-1}`.
    AntiIsomorphism,
    /// Only the two-form is compared.
    TwoFormOnly,
}

/// A point map between two spaces with its declared behaviour.
pub struct SpaceMorphism {
    pub name: String,
    pub source: Box<dyn QhSpace>,
    pub target: Box<dyn QhSpace>,
    pub map: PointMap,
    pub behaviour: Behaviour,
    /// Source moment values rewritten for the target groups (identity if absent).
    pub moment: Option<MatMap>,
    /// Source group elements rewritten for the target groups; enables the
    /// equivariance check.
    pub groups: Option<MatMap>,
}

impl SpaceMorphism {
    pub fn new(
        name: impl Into<String>,
        source: Box<dyn QhSpace>,
        target: Box<dyn QhSpace>,
        map: PointMap,
        behaviour: Behaviour,
    ) -> Self {
        SpaceMorphism { name: name.into(), source, target, map, behaviour, moment: None, groups: None }
    }

    pub fn with_moment(mut self, m: MatMap) -> Self {
        self.moment = Some(m);
        self
    }

    pub fn with_groups(mut self, g: MatMap) -> Self {
        self.groups = Some(g);
        self
    }

    /// Groups act identically on source and target.
    pub fn same_groups(self) -> Self {
        self.with_groups(Box::new(|g| Ok(g.to_vec())))
    }

    pub fn apply(&self, p: &Point) -> Result<Point> {
        on_point(&self.map, p)
    }

    pub fn pushforward(&self, p: &Point, u: &Tangent) -> Result<(Point, Tangent)> {
        let out = (self.map)(&jets(&self.source.factors(), p, u))?;
        let q: Point = out.iter().map(|j| j.v.clone()).collect();
        let d: Vec<Mat> = out.into_iter().map(|j| j.d).collect();
        let t = from_raw(&self.target.factors(), &q, &d)?;
        Ok((q, t))
    }

    /// The identity of a space.
    pub fn identity(space: Box<dyn QhSpace>, copy: Box<dyn QhSpace>) -> Self {
        SpaceMorphism::new("identity", space, copy, Box::new(|p| Ok(p.to_vec())), Behaviour::Isomorphism).same_groups()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PullbackReport {
    pub morphism: String,
    pub behaviour: Behaviour,
    pub samples: usize,
    /// Largest violation of the target constraints at image points.
    pub membership: f64,
    /// Largest `|omega'(F u, F v) -/+ omega(u, v)|`.
    pub form: f64,
    /// Largest moment map discrepancy (zero when not compared).
    pub moment: f64,
    /// Largest `|F(g p) - g' F(p)|`, when group correspondences are declared.
    pub equivariance: Option<f64>,
    pub passed: bool,
}

/// Compares pulled-back structures at the given source points.
pub fn verify_pullback(m: &SpaceMorphism, points: &[Point], seed: u64, tol: f64) -> Result<PullbackReport> {
    let mut rng = Rng::seed_from_u64(seed);
    let (mut membership, mut form, mut moment) = (0.0f64, 0.0f64, 0.0f64);
    let mut equiv: Option<f64> = None;
    let sign = if m.behaviour == Behaviour::AntiIsomorphism { -1.0 } else { 1.0 };
    for p in points {
        m.source.check_point(p)?;
        let q = m.apply(p)?;
        membership = membership.max(match m.target.check_point(&q) {
            Ok(()) => 0.0,
            Err(_) => f64::INFINITY,
        });
        let u = random_tangent(m.source.as_ref(), p, &mut rng)?;
        let v = random_tangent(m.source.as_ref(), p, &mut rng)?;
        let before = m.source.eval_two_form(p, &u, &v)?;
        let (_, fu) = m.pushforward(p, &u)?;
        let (_, fv) = m.pushforward(p, &v)?;
        let after = m.target.eval_two_form(&q, &fu, &fv)?;
        form = form.max((after - before * sign).norm());
        if m.behaviour != Behaviour::TwoFormOnly {
            let mut mu = m.source.moment_map(p)?;
            if let Some(f) = &m.moment {
                mu = f(&mu)?;
            }
            let mu_t = m.target.moment_map(&q)?;
            if mu.len() != mu_t.len() {
                return Err(Error::Dimension("moment maps have different numbers of components".into()));
            }
            for (a, b) in mu.iter().zip(&mu_t) {
                let expect = if sign < 0.0 { inv(a)? } else { a.clone() };
                moment = moment.max(max_abs(&(expect - b)));
            }
        }
        if let Some(gm) = &m.groups {
            let g = random_group_element(m.source.as_ref(), &mut rng);
            let gp = m.source.act_point(&g, p)?;
            let lhs = m.apply(&gp)?;
            let rhs = m.target.act_point(&gm(&g)?, &q)?;
            let e = lhs.iter().zip(&rhs).map(|(a, b)| max_abs(&(a - b))).fold(0.0, f64::max);
            equiv = Some(equiv.unwrap_or(0.0).max(e));
        }
    }
    let passed = membership == 0.0 && form <= tol && moment <= tol && equiv.is_none_or(|e| e <= tol);
    Ok(PullbackReport {
        morphism: m.name.clone(),
        behaviour: m.behaviour,
        samples: points.len(),
        membership,
        form,
        moment,
        equivariance: equiv,
        passed,
    })
}

/// `verify_pullback` at `n` points sampled from the source.
pub fn verify_pullback_sampled(m: &SpaceMorphism, n: usize, seed: u64, tol: f64) -> Result<PullbackReport> {
    let mut rng = Rng::seed_from_u64(seed);
    let pts = (0..n).map(|_| m.source.sample(&mut rng)).collect::<Result<Vec<_>>>()?;
    verify_pullback(m, &pts, seed ^ 0x9e37_79b9, tol)
}

// ---------------------------------------------------------------------------
// Theta, inversion, twists, Weyl conjugation

/// `(C, h, S_1, ..., S_m) -> (S_1 C, h, S_2, ..., S_m, h^{-1} S_1 h)`.
pub fn theta_jet(p: &[Jet]) -> Result<Vec<Jet>> {
    need_list(p, 3)?;
    let (c, h, s) = (&p[0], &p[1], &p[2..]);
    let mut out = vec![&s[0] * c, h.clone()];
    out.extend(s[1..].iter().cloned());
    out.push(conj_inv(h, &s[0])?);
    Ok(out)
}

/// `(D, g, T_1, ..., T_m) -> (S_1^{-1} D, g, S_1, T_1, ..., T_{m-1})` with `S_1 = g T_m g^{-1}`.
pub fn theta_inv_jet(p: &[Jet]) -> Result<Vec<Jet>> {
    need_list(p, 3)?;
    let (d, g, t) = (&p[0], &p[1], &p[2..]);
    let s1 = conj(g, &t[t.len() - 1])?;
    let mut out = vec![&s1.inv()? * d, g.clone(), s1];
    out.extend(t[..t.len() - 1].iter().cloned());
    Ok(out)
}

pub fn theta(p: &Point) -> Result<Point> {
    on_point(theta_jet, p)
}

pub fn theta_inv(p: &Point) -> Result<Point> {
    on_point(theta_inv_jet, p)
}

/// `Theta^k` for `k` of either sign.
pub fn theta_pow(p: &Point, k: i64) -> Result<Point> {
    let mut q = p.clone();
    for _ in 0..k.unsigned_abs() {
        q = if k > 0 { theta(&q)? } else { theta_inv(&q)? };
    }
    Ok(q)
}

/// Target of `Theta`: the patterns rotated to `(U_2, ..., U_m, U_1)`.
pub fn theta_space(a: &UnipotentList) -> Result<UnipotentList> {
    if a.patterns.is_empty() {
        return Err(Error::Invalid("Theta needs at least one unipotent factor".into()));
    }
    let mut pats = a.patterns.clone();
    pats.rotate_left(1);
    UnipotentList::nested(a.g.clone(), a.h.clone(), pats, format!("theta({})", a.name))
}

pub fn theta_inv_space(a: &UnipotentList) -> Result<UnipotentList> {
    if a.patterns.is_empty() {
        return Err(Error::Invalid("Theta needs at least one unipotent factor".into()));
    }
    let mut pats = a.patterns.clone();
    pats.rotate_right(1);
    UnipotentList::nested(a.g.clone(), a.h.clone(), pats, format!("theta^-1({})", a.name))
}

pub fn theta_morphism(a: &UnipotentList) -> Result<SpaceMorphism> {
    let t = theta_space(a)?;
    Ok(SpaceMorphism::new("theta", Box::new(a.clone()), Box::new(t), Box::new(theta_jet), Behaviour::Isomorphism)
        .same_groups())
}

pub fn theta_inv_morphism(a: &UnipotentList) -> Result<SpaceMorphism> {
    let t = theta_inv_space(a)?;
    Ok(SpaceMorphism::new("theta^-1", Box::new(a.clone()), Box::new(t), Box::new(theta_inv_jet), Behaviour::Isomorphism)
        .same_groups())
}

/// `(C, h, S) -> (C, h^{-1}, T)` with `T_i = h S_{m+1-i}^{-1} h^{-1}`.
pub fn inversion_jet(p: &[Jet]) -> Result<Vec<Jet>> {
    need_list(p, 2)?;
    let h = &p[1];
    let mut out = vec![p[0].clone(), h.inv()?];
    for s in p[2..].iter().rev() {
        out.push(conj(h, &s.inv()?)?);
    }
    Ok(out)
}

pub fn inversion(p: &Point) -> Result<Point> {
    on_point(inversion_jet, p)
}

pub fn inversion_space(a: &UnipotentList) -> Result<UnipotentList> {
    let pats = a.patterns.iter().rev().cloned().collect();
    UnipotentList::nested(a.g.clone(), a.h.clone(), pats, format!("inv({})", a.name))
}

pub fn inversion_morphism(a: &UnipotentList) -> Result<SpaceMorphism> {
    let t = inversion_space(a)?;
    Ok(SpaceMorphism::new("inversion", Box::new(a.clone()), Box::new(t), Box::new(inversion_jet), Behaviour::AntiIsomorphism)
        .same_groups())
}

/// `(C, h, S) -> (h C, h, h S h^{-1})`.
pub fn twist_inner_jet(p: &[Jet]) -> Result<Vec<Jet>> {
    need_list(p, 2)?;
    let h = &p[1];
    let mut out = vec![h * &p[0], h.clone()];
    for s in &p[2..] {
        out.push(conj(h, s)?);
    }
    Ok(out)
}

/// `(C, h, S) -> (b^{-1} C, h, S)`.
pub fn twist_outer_jet(p: &[Jet]) -> Result<Vec<Jet>> {
    need_list(p, 2)?;
    let b = monodromy_jet(p);
    let mut out = vec![&b.inv()? * &p[0]];
    out.extend(p[1..].iter().cloned());
    Ok(out)
}

pub fn twist_inner(p: &Point) -> Result<Point> {
    on_point(twist_inner_jet, p)
}

pub fn twist_outer(p: &Point) -> Result<Point> {
    on_point(twist_outer_jet, p)
}

pub fn twist_inner_morphism(a: &UnipotentList) -> SpaceMorphism {
    SpaceMorphism::new("inner twist", Box::new(a.clone()), Box::new(a.clone()), Box::new(twist_inner_jet), Behaviour::Isomorphism)
        .same_groups()
}

pub fn twist_outer_morphism(a: &UnipotentList) -> SpaceMorphism {
    SpaceMorphism::new("outer twist", Box::new(a.clone()), Box::new(a.clone()), Box::new(twist_outer_jet), Behaviour::Isomorphism)
        .same_groups()
}

/// Closed form of `Theta^m`: `(h^{-1} b C, h, h^{-1} S h)`.
pub fn theta_full_turn(p: &Point) -> Result<Point> {
    on_point(
        |j| {
            need_list(j, 2)?;
            let h = &j[1];
            let b = monodromy_jet(j);
            let mut out = vec![&(&h.inv()? * &b) * &j[0], h.clone()];
            for s in &j[2..] {
                out.push(conj_inv(h, s)?);
            }
            Ok(out)
        },
        p,
    )
}

/// Permutation matrix with `P e_i = e_{sigma(i)}`.
pub fn permutation_matrix(sigma: &[usize]) -> Result<Mat> {
    let n = sigma.len();
    let mut seen = vec![false; n];
    let mut p = zeros(n, n);
    for (i, &s) in sigma.iter().enumerate() {
        if s >= n || seen[s] {
            return Err(Error::Invalid(format!("{:?} is not a permutation", sigma)));
        }
        seen[s] = true;
        p[(s, i)] = C::new(1.0, 0.0);
    }
    Ok(p)
}

fn permute_partition(h: &Partition, sigma: &[usize]) -> Partition {
    let l = h.label();
    let mut nl = vec![0; h.n];
    for i in 0..h.n {
        nl[sigma[i]] = l[i];
    }
    Partition::from_labels(&nl)
}

fn permute_pattern(p: &UnipotentPattern, sigma: &[usize]) -> UnipotentPattern {
    UnipotentPattern { n: p.n, positions: p.positions.iter().map(|&(i, j)| (sigma[i], sigma[j])).collect() }
}

/// `A(G, H) -> A(G, P H P^{-1})`, conjugating every factor by a permutation matrix.
pub fn weyl_space(a: &UnipotentList, sigma: &[usize]) -> Result<UnipotentList> {
    if sigma.len() != a.n {
        return Err(Error::Dimension("permutation size".into()));
    }
    permutation_matrix(sigma)?;
    UnipotentList::nested(
        permute_partition(&a.g, sigma),
        permute_partition(&a.h, sigma),
        a.patterns.iter().map(|p| permute_pattern(p, sigma)).collect(),
        format!("weyl({})", a.name),
    )
}

pub fn weyl_jet(sigma: &[usize]) -> Result<PointMap> {
    let p = Jet::constant(permutation_matrix(sigma)?);
    Ok(Box::new(move |x: &[Jet]| x.iter().map(|f| conj(&p, f)).collect()))
}

pub fn weyl_morphism(a: &UnipotentList, sigma: &[usize]) -> Result<SpaceMorphism> {
    let t = weyl_space(a, sigma)?;
    let p = permutation_matrix(sigma)?;
    let pi = p.transpose();
    let conj_all: MatMap = Box::new(move |m: &[Mat]| Ok(m.iter().map(|x| &p * x * &pi).collect()));
    let q = permutation_matrix(sigma)?;
    let qi = q.transpose();
    let conj_groups: MatMap = Box::new(move |m: &[Mat]| Ok(m.iter().map(|x| &q * x * &qi).collect()));
    Ok(SpaceMorphism::new("weyl", Box::new(a.clone()), Box::new(t), weyl_jet(sigma)?, Behaviour::TwoFormOnly)
        .with_moment(conj_all)
        .with_groups(conj_groups))
}

// ---------------------------------------------------------------------------
// Nesting

/// Gluing of `A'(K, H)` (points `(D, h, A)`) and `A''(G, K)` (points
/// `(C, k, B)`) along `K`, presented on the slice `D = 1`, so `k = h A_m ... A_1`.
#[derive(Debug, Clone)]
pub struct Nesting {
    pub inner: UnipotentList,
    pub outer: UnipotentList,
}

impl Nesting {
    pub fn new(inner: UnipotentList, outer: UnipotentList) -> Result<Self> {
        if inner.g != outer.h {
            return Err(Error::Invalid("inner outer group must equal the outer small group".into()));
        }
        if inner.m() != outer.m() {
            return Err(Error::Invalid("both spaces need the same number of unipotent factors".into()));
        }
        for (a, b) in inner.patterns.iter().zip(&outer.patterns) {
            if a.positions.intersection(&b.positions).next().is_some() {
                return Err(Error::Pattern("inner and outer patterns overlap".into()));
            }
        }
        Ok(Nesting { inner, outer })
    }

    /// The two fission spaces of the chain `T in GL_2 x GL_1 in GL_3` with `r` pairs.
    pub fn gl3_chain(r: usize) -> Result<Self> {
        let k = Partition { n: 3, parts: vec![vec![0, 1], vec![2]] };
        let t = Partition::discrete(3);
        let up = UnipotentPattern::new(3, [(0, 1)])?;
        let lo = UnipotentPattern::new(3, [(1, 0)])?;
        let pats = (0..2 * r).map(|i| if i % 2 == 0 { up.clone() } else { lo.clone() }).collect();
        let inner = UnipotentList::nested(k, t, pats, format!("fission(T,GL2xGL1,r={})", r))?;
        let outer = UnipotentList::fission(&BlockGrading::new(vec![2, 1])?, r);
        Nesting::new(inner, outer)
    }

    pub fn m(&self) -> usize {
        self.inner.m()
    }

    /// `A(G, H)` with patterns `U'_i U''_i`.
    pub fn target(&self) -> Result<UnipotentList> {
        let pats = self
            .inner
            .patterns
            .iter()
            .zip(&self.outer.patterns)
            .map(|(a, b)| UnipotentPattern::new(self.inner.n, a.union(b)))
            .collect::<Result<Vec<_>>>()?;
        UnipotentList::nested(self.outer.g.clone(), self.inner.h.clone(), pats, "nested".to_string())
    }

    /// Reduction of `A' (x)_K A''` at the identity, on the slice `D = 1`.
    pub fn glued(&self) -> Result<ReducedSlice> {
        let prod = Product::new(vec![Box::new(self.inner.clone()), Box::new(self.outer.clone())]);
        let fused = Fused::new(Box::new(prod), 0, 3)?;
        let me = self.clone();
        let sampler = Box::new(move |rng: &mut Rng| -> Result<Point> {
            let n = me.inner.n;
            let h = rand_levi(rng, &me.inner.h, 0.5);
            let a: Vec<Mat> = me.inner.patterns.iter().map(|p| rand_unipotent(rng, p, 0.5)).collect();
            let mut k = h.clone();
            for x in a.iter().rev() {
                k *= x;
            }
            let c = rand_levi(rng, &me.outer.g, 0.5);
            let b: Vec<Mat> = me.outer.patterns.iter().map(|p| rand_unipotent(rng, p, 0.5)).collect();
            let mut pt = vec![eye(n), h];
            pt.extend(a);
            pt.push(c);
            pt.push(k);
            pt.extend(b);
            Ok(pt)
        });
        Ok(ReducedSlice::new(Box::new(fused), 0, Slice::FactorIdentity { factor: 0, compensator: Some(1) })?
            .with_sampler(sampler))
    }

    /// Glued slice point `(1, h, A, C, k, B)` to `(C, h, S)` with `S_i = D_i B_i D_{i-1}^{-1}`.
    pub fn glue_jet(&self, p: &[Jet]) -> Result<Vec<Jet>> {
        let m = self.m();
        if p.len() != 2 * m + 4 {
            return Err(Error::Dimension("glued point length".into()));
        }
        let n = self.inner.n;
        let (h, a) = (&p[1], &p[2..2 + m]);
        let (c, b) = (&p[2 + m], &p[4 + m..]);
        let mut out = vec![c.clone(), h.clone()];
        let mut dprev = Jet::identity(n);
        for i in 0..m {
            let di = &a[i] * &dprev;
            out.push(&(&di * &b[i]) * &dprev.inv()?);
            dprev = di;
        }
        Ok(out)
    }

    pub fn morphism(&self) -> Result<SpaceMorphism> {
        let me = self.clone();
        let swap: fn(&[Mat]) -> Result<Vec<Mat>> = |m| Ok(vec![m[1].clone(), m[0].clone()]);
        Ok(SpaceMorphism::new(
            "nesting",
            Box::new(self.glued()?),
            Box::new(self.target()?),
            Box::new(move |p| me.glue_jet(p)),
            Behaviour::Isomorphism,
        )
        .with_moment(Box::new(swap))
        .with_groups(Box::new(swap)))
    }
}

/// Glue a point of `A'(K, H)` and a point of `A''(G, K)` whose `K` moments
/// multiply to one. A general `D` is first gauged to the identity by `K`.
pub fn nest_glue(nesting: &Nesting, inner: &Point, outer: &Point) -> Result<Point> {
    nesting.inner.check_point(inner)?;
    nesting.outer.check_point(outer)?;
    let d = &inner[0];
    let di = inv(d)?;
    let mut pt = vec![eye(nesting.inner.n)];
    pt.extend(inner[1..].iter().cloned());
    pt.push(d * &outer[0]);
    for x in &outer[1..] {
        pt.push(d * x * &di);
    }
    let glued = nesting.glued()?;
    let r = glued.residual(&pt)?;
    let scale = pt.iter().map(max_abs).fold(1.0, f64::max);
    if r > 1e-10 * scale {
        return Err(Error::Invalid(format!("K moment maps do not cancel (residual {:.3e})", r)));
    }
    on_point(|j| nesting.glue_jet(j), &pt)
}

// ---------------------------------------------------------------------------
// Van den Bergh spaces

fn block_jet(j: &Jet, r0: usize, c0: usize, nr: usize, nc: usize) -> Jet {
    Jet::new(j.v.view((r0, c0), (nr, nc)).into_owned(), j.d.view((r0, c0), (nr, nc)).into_owned())
}

fn assemble(dv: usize, dw: usize, tl: &Jet, tr: &Jet, bl: &Jet, br: &Jet) -> Jet {
    let n = dv + dw;
    let mut v = zeros(n, n);
    let mut d = zeros(n, n);
    for (blk, r0, c0) in [(tl, 0, 0), (tr, 0, dv), (bl, dv, 0), (br, dv, dv)] {
        v.view_mut((r0, c0), blk.v.shape()).copy_from(&blk.v);
        d.view_mut((r0, c0), blk.d.shape()).copy_from(&blk.d);
    }
    Jet::new(v, d)
}

/// `A^2(V + W)` reduced at `G = GL(V + W)` on the slice `C = 1`.
pub fn vdb_slice_space(dv: usize, dw: usize) -> Result<ReducedSlice> {
    let grading = BlockGrading::new(vec![dv, dw])?;
    let a = UnipotentList::fission(&grading, 2);
    let src = VanDenBergh { dv, dw };
    let sampler = Box::new(move |rng: &mut Rng| -> Result<Point> {
        let ab = src.sample(rng)?;
        vdb_lift(dv, dw, &ab[0], &ab[1])
    });
    Ok(ReducedSlice::new(Box::new(a), 0, Slice::FactorIdentity { factor: 0, compensator: Some(1) })?.with_sampler(sampler))
}

/// `(a, b) -> (1, diag(x, y), S_1, ..., S_4)` with `x = 1 + ab`, `y = (1 + ba)^{-1}`,
/// `c = -x^{-1} a`, `f = -(b + bab)`.
pub fn vdb_lift_jet(dv: usize, dw: usize, p: &[Jet]) -> Result<Vec<Jet>> {
    if p.len() != 2 {
        return Err(Error::Dimension("expected (a, b)".into()));
    }
    let (a, b) = (&p[0], &p[1]);
    let (iv, iw) = (Jet::identity(dv), Jet::identity(dw));
    let (zvw, zwv) = (Jet::constant(zeros(dv, dw)), Jet::constant(zeros(dw, dv)));
    let x = &iv + &(a * b);
    let y = (&iw + &(b * a)).inv()?;
    let c = -&(&x.inv()? * a);
    let f = -&(b + &(&(b * a) * b));
    Ok(vec![
        Jet::identity(dv + dw),
        assemble(dv, dw, &x, &zvw, &zwv, &y),
        assemble(dv, dw, &iv, a, &zwv, &iw),
        assemble(dv, dw, &iv, &zvw, b, &iw),
        assemble(dv, dw, &iv, &c, &zwv, &iw),
        assemble(dv, dw, &iv, &zvw, &f, &iw),
    ])
}

pub fn vdb_lift(dv: usize, dw: usize, a: &Mat, b: &Mat) -> Result<Point> {
    if a.shape() != (dv, dw) || b.shape() != (dw, dv) {
        return Err(Error::Dimension("a must be dv x dw and b dw x dv".into()));
    }
    on_point(|j| vdb_lift_jet(dv, dw, j), &[a.clone(), b.clone()])
}

/// Reads `(a, b)` off a slice point: top-right of `S_1`, bottom-left of `S_2`.
pub fn vdb_reduce_jet(dv: usize, dw: usize, p: &[Jet]) -> Result<Vec<Jet>> {
    if p.len() != 6 {
        return Err(Error::Dimension("expected (C, h, S_1, ..., S_4)".into()));
    }
    Ok(vec![block_jet(&p[2], 0, dv, dv, dw), block_jet(&p[3], dv, 0, dw, dv)])
}

/// Residuals of the reduced equations at a slice point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VdbConsistency {
    pub relation: f64,
    pub x: f64,
    pub y: f64,
    pub c: f64,
    pub f: f64,
    pub off_blocks: f64,
}

impl VdbConsistency {
    pub fn max(&self) -> f64 {
        [self.relation, self.x, self.y, self.c, self.f, self.off_blocks].into_iter().fold(0.0, f64::max)
    }
}

/// `(a, b)` of a slice point together with the residuals of every reduced equation.
pub fn vdb_reduce(dv: usize, dw: usize, p: &Point, tol: f64) -> Result<(Mat, Mat, VdbConsistency)> {
    let n = dv + dw;
    if p.len() != 6 || p.iter().any(|m| m.shape() != (n, n)) {
        return Err(Error::Dimension("expected six (dv+dw)-square factors".into()));
    }
    let ab = on_point(|j| vdb_reduce_jet(dv, dw, j), p)?;
    let (a, b) = (ab[0].clone(), ab[1].clone());
    let x = eye(dv) + &a * &b;
    let y = inv(&(eye(dw) + &b * &a))?;
    let c = -(inv(&x)? * &a);
    let f = -(&b + &b * &a * &b);
    let mut prod = p[1].clone();
    for s in p[2..].iter().rev() {
        prod *= s;
    }
    let hv = p[1].view((0, 0), (dv, dv)).into_owned();
    let hw = p[1].view((dv, dv), (dw, dw)).into_owned();
    let off = [
        max_abs(&(&p[0] - eye(n))),
        max_abs(&p[1].view((0, dv), (dv, dw)).into_owned()),
        max_abs(&p[1].view((dv, 0), (dw, dv)).into_owned()),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let rep = VdbConsistency {
        relation: max_abs(&(prod - eye(n))),
        x: max_abs(&(hv - x)),
        y: max_abs(&(hw - y)),
        c: max_abs(&(p[4].view((0, dv), (dv, dw)).into_owned() - c)),
        f: max_abs(&(p[5].view((dv, 0), (dw, dv)).into_owned() - f)),
        off_blocks: off,
    };
    if rep.max() > tol {
        return Err(Error::Invalid(format!("slice point violates the reduced equations by {:.3e}", rep.max())));
    }
    Ok((a, b, rep))
}

/// `B(V, W) -> A^2 slice`, an isomorphism of quasi-Hamiltonian `H`-spaces.
pub fn vdb_morphism(dv: usize, dw: usize) -> Result<SpaceMorphism> {
    let block = move |m: &[Mat]| -> Result<Vec<Mat>> {
        let n = dv + dw;
        let mut out = zeros(n, n);
        out.view_mut((0, 0), (dv, dv)).copy_from(&m[0]);
        out.view_mut((dv, dv), (dw, dw)).copy_from(&m[1]);
        Ok(vec![out])
    };
    Ok(SpaceMorphism::new(
        format!("vdb({},{})", dv, dw),
        Box::new(VanDenBergh { dv, dw }),
        Box::new(vdb_slice_space(dv, dw)?),
        Box::new(move |p| vdb_lift_jet(dv, dw, p)),
        Behaviour::Isomorphism,
    )
    .with_moment(Box::new(block))
    .with_groups(Box::new(block)))
}

/// Edge reversal `B(V, W) -> B(W, V)` as the composite: lift to the slice,
/// apply `Theta`, gauge `C` back to one, swap the blocks and read off.
pub fn edge_reversal_jet(dv: usize, dw: usize, p: &[Jet]) -> Result<Vec<Jet>> {
    let lifted = vdb_lift_jet(dv, dw, p)?;
    let mut q = theta_jet(&lifted)?;
    q[0] = Jet::identity(dv + dw);
    let sigma: Vec<usize> = (0..dv).map(|i| i + dw).chain(0..dw).collect();
    let swapped = weyl_jet(&sigma)?(&q)?;
    vdb_reduce_jet(dw, dv, &swapped)
}

pub fn edge_reversal(dv: usize, dw: usize, a: &Mat, b: &Mat) -> Result<(Mat, Mat)> {
    let out = on_point(|j| edge_reversal_jet(dv, dw, j), &[a.clone(), b.clone()])?;
    Ok((out[0].clone(), out[1].clone()))
}

/// `(a, b) -> (b, -(1 + ab)^{-1} a)`.
pub fn edge_reversal_closed_form(a: &Mat, b: &Mat) -> Result<(Mat, Mat)> {
    let x = eye(a.nrows()) + a * b;
    Ok((b.clone(), -(inv(&x)? * a)))
}

pub fn edge_reversal_morphism(dv: usize, dw: usize) -> SpaceMorphism {
    let swap = |m: &[Mat]| -> Result<Vec<Mat>> { Ok(vec![m[1].clone(), m[0].clone()]) };
    SpaceMorphism::new(
        "edge reversal",
        Box::new(VanDenBergh { dv, dw }),
        Box::new(VanDenBergh { dv: dw, dw: dv }),
        Box::new(move |p| edge_reversal_jet(dv, dw, p)),
        Behaviour::Isomorphism,
    )
    .with_moment(Box::new(swap))
    .with_groups(Box::new(swap))
}

/// Random `(a, b)` with `1 + ab` invertible.
pub fn random_vdb_pair(rng: &mut Rng, dv: usize, dw: usize, radius: f64) -> (Mat, Mat) {
    loop {
        let a = rand_mat(rng, dv, dw, radius);
        let b = rand_mat(rng, dw, dv, radius);
        if (eye(dv) + &a * &b).lu().determinant().norm() > 0.05 {
            return (a, b);
        }
    }
}

// ---------------------------------------------------------------------------
// Level decomposition

/// Level data of a point `(C, h, S_1, ..., S_s)` of `A(Q)`.
#[derive(Debug, Clone)]
pub struct LevelDecomposition {
    /// Pole orders `k_1 < ... < k_r`.
    pub levels: Vec<u32>,
    /// `H = H_1 in ... in H_r in H_{r+1} = G`.
    pub chain: Vec<Partition>,
    /// `factors[j][i] = S_i^j`, so that `S_i = S_i^1 ... S_i^r`.
    pub factors: Vec<Vec<Mat>>,
    /// `twisted[j][i] = B_i^j`.
    pub twisted: Vec<Vec<Mat>>,
    /// Points `(C_j, h_j, B^j_1, ..., B^j_s)` of the spaces `A(j)`.
    pub points: Vec<Point>,
    pub spaces: Vec<UnipotentList>,
}

fn level_patterns(q: &IrregularType, st: &StokesStructure) -> (Vec<u32>, Vec<Vec<UnipotentPattern>>) {
    let levels: Vec<u32> = levi_chain(q).levels;
    let pats = levels
        .iter()
        .map(|&k| st.directions.iter().map(|d| d.level_pattern(q.n, k)).collect())
        .collect();
    (levels, pats)
}

/// `X = Shat_{i-1} ... Shat_1` with `Shat_k = S_k^1 ... S_k^{j-1}`.
fn conjugator(n: usize, factors: &[Vec<Mat>], j: usize, i: usize) -> Mat {
    let mut x = eye(n);
    for k in (0..i).rev() {
        let mut hat = eye(n);
        for f in factors.iter().take(j) {
            hat *= &f[k];
        }
        x *= hat;
    }
    x
}

/// Levi chain `H_1, ..., H_{r+1}` of `Q`.
fn full_chain(q: &IrregularType) -> Vec<Partition> {
    let mut chain = levi_chain(q).chain;
    chain.push(Partition::full(q.n));
    chain
}

pub fn level_decompose(q: &IrregularType, st: &StokesStructure, p: &Point) -> Result<LevelDecomposition> {
    let n = q.n;
    let s = st.directions.len();
    if p.len() != s + 2 {
        return Err(Error::Dimension(format!("A(Q) point needs {} factors, got {}", s + 2, p.len())));
    }
    let (levels, pats) = level_patterns(q, st);
    let r = levels.len();
    let chain = full_chain(q);
    let mut factors = vec![Vec::with_capacity(s); r];
    for i in 0..s {
        let order: Vec<UnipotentPattern> = pats.iter().map(|lp| lp[i].clone()).collect();
        let f = direct_span_factorize(&p[2 + i], &order)?;
        for (j, m) in f.into_iter().enumerate() {
            factors[j].push(m);
        }
    }
    let mut twisted = vec![Vec::with_capacity(s); r];
    for j in 0..r {
        for i in 0..s {
            let x = conjugator(n, &factors, j, i);
            let b = inv(&x)? * &factors[j][i] * &x;
            let scale = b.iter().map(|z| z.norm()).fold(1.0, f64::max);
            if !pats[j][i].contains_matrix(&b, 1e-9 * scale) {
                return Err(Error::Pattern(format!("twisted factor B_{}^{} leaves its Stokes group", i + 1, j + 1)));
            }
            twisted[j].push(b);
        }
    }
    let mut points = Vec::with_capacity(r);
    let mut spaces = Vec::with_capacity(r);
    let mut hj = p[1].clone();
    for j in 0..r {
        let cj = if j + 1 == r { p[0].clone() } else { eye(n) };
        let mut pt = vec![cj, hj.clone()];
        pt.extend(twisted[j].iter().cloned());
        spaces.push(UnipotentList::nested(
            chain[j + 1].clone(),
            chain[j].clone(),
            pats[j].clone(),
            format!("level(k={})", levels[j]),
        )?);
        points.push(pt);
        for b in twisted[j].iter().rev() {
            hj *= b;
        }
    }
    Ok(LevelDecomposition { levels, chain, factors, twisted, points, spaces })
}

/// Rebuilds `(C, h, S_1, ..., S_s)` from the twisted multipliers.
pub fn level_recompose(n: usize, c: &Mat, h: &Mat, twisted: &[Vec<Mat>]) -> Result<Point> {
    let r = twisted.len();
    let s = twisted.first().map_or(0, |t| t.len());
    let mut factors: Vec<Vec<Mat>> = Vec::with_capacity(r);
    for j in 0..r {
        let mut row = Vec::with_capacity(s);
        for i in 0..s {
            let x = conjugator(n, &factors, j, i);
            row.push(&x * &twisted[j][i] * inv(&x)?);
        }
        factors.push(row);
    }
    let mut p = vec![c.clone(), h.clone()];
    for i in 0..s {
        let mut si = eye(n);
        for row in &factors {
            si *= &row[i];
        }
        p.push(si);
    }
    Ok(p)
}

/// `h (B^1_s ... B^1_1) ... (B^r_s ... B^r_1)`.
pub fn level_monodromy(h: &Mat, twisted: &[Vec<Mat>]) -> Mat {
    let mut b = h.clone();
    for row in twisted {
        for m in row.iter().rev() {
            b *= m;
        }
    }
    b
}

/// `h S_s ... S_1`.
pub fn stokes_monodromy(p: &Point) -> Mat {
    let mut b = p[1].clone();
    for s in p[2..].iter().rev() {
        b *= s;
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::irregular::{singular_directions, Term};
    use crate::linalg::{c, dist, unit};

    fn rng(seed: u64) -> Rng {
        Rng::seed_from_u64(seed)
    }

    fn gl2_fission() -> UnipotentList {
        UnipotentList::fission(&BlockGrading::new(vec![1, 1]).unwrap(), 1)
    }

    fn identity_point(a: &UnipotentList) -> Point {
        (0..a.m() + 2).map(|_| eye(a.n)).collect()
    }

    #[test]
    fn theta_identity_point() {
        let a = gl2_fission();
        let p = identity_point(&a);
        assert_eq!(theta(&p).unwrap(), p);
        assert_eq!(inversion(&p).unwrap(), p);
    }

    #[test]
    fn theta_gl2_formula_and_moment() {
        let a = gl2_fission();
        let p = a.sample(&mut rng(1)).unwrap();
        let q = theta(&p).unwrap();
        assert!(dist(&q[0], &(&p[2] * &p[0])) < 1e-15);
        assert_eq!(q[2], p[3]);
        assert!(dist(&q[3], &(inv(&p[1]).unwrap() * &p[2] * &p[1])) < 1e-14);
        let t = theta_space(&a).unwrap();
        t.check_point(&q).unwrap();
        let (m0, m1) = (a.moment_map(&p).unwrap(), t.moment_map(&q).unwrap());
        assert!(dist(&m0[0], &m1[0]) < 1e-12);
        assert!(dist(&m0[1], &m1[1]) < 1e-15);
    }

    #[test]
    fn theta_round_trip_and_full_turn() {
        let a = UnipotentList::fission(&BlockGrading::new(vec![2, 1]).unwrap(), 2);
        let p = a.sample(&mut rng(2)).unwrap();
        let back = theta_inv(&theta(&p).unwrap()).unwrap();
        for (x, y) in back.iter().zip(&p) {
            assert!(dist(x, y) < 1e-13);
        }
        let full = theta_pow(&p, a.m() as i64).unwrap();
        let closed = theta_full_turn(&p).unwrap();
        for (x, y) in full.iter().zip(&closed) {
            assert!(dist(x, y) < 1e-12);
        }
        let via_twists = twist_inner(&twist_outer(&closed).unwrap()).unwrap();
        for (x, y) in via_twists.iter().zip(&p) {
            assert!(dist(x, y) < 1e-12);
        }
    }

    #[test]
    fn inversion_is_involutive() {
        let a = UnipotentList::fission(&BlockGrading::new(vec![1, 2]).unwrap(), 1);
        let p = a.sample(&mut rng(3)).unwrap();
        let pp = inversion(&inversion(&p).unwrap()).unwrap();
        for (x, y) in pp.iter().zip(&p) {
            assert!(dist(x, y) < 1e-13);
        }
    }

    #[test]
    fn twists_trivial_for_identity_h() {
        let a = gl2_fission();
        let mut p = a.sample(&mut rng(4)).unwrap();
        p[1] = eye(2);
        assert_eq!(twist_inner(&p).unwrap(), p);
    }

    #[test]
    fn identity_morphism_has_zero_discrepancy() {
        let a = gl2_fission();
        let m = SpaceMorphism::identity(Box::new(a.clone()), Box::new(a));
        let r = verify_pullback_sampled(&m, 3, 5, 1e-12).unwrap();
        assert!(r.form < 1e-13);
        assert_eq!(r.moment, 0.0);
        assert!(r.passed);
    }

    #[test]
    fn weyl_preserves_two_form() {
        let a = UnipotentList::fission(&BlockGrading::new(vec![2, 1]).unwrap(), 1);
        let m = weyl_morphism(&a, &[2, 0, 1]).unwrap();
        let r = verify_pullback_sampled(&m, 3, 6, 1e-9).unwrap();
        assert!(r.passed, "{:?}", r);
    }

    #[test]
    fn vdb_example_point() {
        let a = Mat::from_row_slice(2, 1, &[c(1.0, 0.0), c(0.0, 0.0)]);
        let b = Mat::from_row_slice(1, 2, &[c(0.0, 0.0), c(1.0, 0.0)]);
        let p = vdb_lift(2, 1, &a, &b).unwrap();
        let x = p[1].view((0, 0), (2, 2)).into_owned();
        assert!(dist(&x, &(eye(2) + unit(2, 2, 0, 1))) < 1e-15);
        assert!(dist(&p[1].view((2, 2), (1, 1)).into_owned(), &eye(1)) < 1e-15);
        let (ra, rb, rep) = vdb_reduce(2, 1, &p, 1e-12).unwrap();
        assert_eq!((ra, rb), (a, b));
        assert!(rep.max() < 1e-15);
    }

    #[test]
    fn vdb_zero_point() {
        let p = vdb_lift(1, 1, &zeros(1, 1), &zeros(1, 1)).unwrap();
        assert_eq!(p[1], eye(2));
        assert_eq!(p[4], eye(2));
        assert_eq!(p[5], eye(2));
    }

    #[test]
    fn vdb_reduce_rejects_bad_point() {
        let (a, b) = random_vdb_pair(&mut rng(7), 1, 1, 0.5);
        let mut p = vdb_lift(1, 1, &a, &b).unwrap();
        p[4][(0, 1)] += c(1e-3, 0.0);
        assert!(vdb_reduce(1, 1, &p, 1e-12).is_err());
    }

    #[test]
    fn one_level_decomposition_is_trivial() {
        let q = IrregularType::one_level(1, vec![c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 2.0)]).unwrap();
        let st = singular_directions(&q);
        let a = UnipotentList::stokes_space(&q);
        let p = a.sample(&mut rng(8)).unwrap();
        let dec = level_decompose(&q, &st, &p).unwrap();
        assert_eq!(dec.twisted.len(), 1);
        for (b, s) in dec.twisted[0].iter().zip(&p[2..]) {
            assert!(dist(b, s) < 1e-15);
        }
    }

    #[test]
    fn two_level_round_trip() {
        let q = IrregularType::new(
            3,
            vec![
                Term { k: 2, a: vec![c(1.0, 0.0), c(1.0, 0.0), c(-2.0, 0.0)] },
                Term { k: 1, a: vec![c(0.0, 0.0), c(1.0, 0.0), c(3.0, 0.0)] },
            ],
        )
        .unwrap();
        let st = singular_directions(&q);
        let a = UnipotentList::stokes_space(&q);
        let p = a.sample(&mut rng(9)).unwrap();
        let dec = level_decompose(&q, &st, &p).unwrap();
        let back = level_recompose(3, &p[0], &p[1], &dec.twisted).unwrap();
        for (x, y) in back.iter().zip(&p) {
            assert!(dist(x, y) < 1e-12);
        }
        assert!(dist(&stokes_monodromy(&p), &level_monodromy(&p[1], &dec.twisted)) < 1e-12);
        for (sp, pt) in dec.spaces.iter().zip(&dec.points) {
            sp.check_point(pt).unwrap();
        }
    }
}
