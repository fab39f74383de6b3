//! The basic spaces: conjugacy classes, the double, the internally fused
//! double, fission and Stokes spaces (as unipotent lists) and Van den Bergh
//! spaces.

use super::{FactorKind, FormTerm, GroupSpec, LocalData, Point, QhSpace, Rng};
use crate::irregular::{centralizer, singular_directions, singular_directions_with_cut, IrregularType};
use crate::lie::{BlockGrading, Partition, UnipotentPattern};
use crate::linalg::{diag, eye, inv, rand_disk, rand_group, rand_mat, Jet, Mat, C};
use crate::{Error, Result};

fn need(p: &[Jet], k: usize) -> Result<()> {
    if p.len() != k {
        return Err(Error::Dimension(format!("expected {} factors, got {}", k, p.len())));
    }
    Ok(())
}

fn conj(g: &Jet, x: &Jet) -> Result<Jet> {
    Ok(&(g * x) * &g.inv()?)
}

/// Random element of the block-diagonal group of `h`, near the identity.
pub fn rand_levi(rng: &mut Rng, h: &Partition, radius: f64) -> Mat {
    loop {
        let mut m = eye(h.n);
        for (i, j) in h.mask() {
            m[(i, j)] += rand_disk(rng, radius);
        }
        if m.clone().lu().determinant().norm() > 0.05 {
            return m;
        }
    }
}

pub fn rand_unipotent(rng: &mut Rng, p: &UnipotentPattern, radius: f64) -> Mat {
    let coords: Vec<C> = p.positions.iter().map(|_| rand_disk(rng, radius)).collect();
    p.element(&coords)
}

/// The conjugacy class of `diag(eigenvalues)`, parametrized as `k D k^{-1}`.
///
/// Chart directions are `delta k = k E_ij` for pairs with distinct eigenvalues,
/// and the two-form is `1/2 ((X, gYg^{-1}) - (Y, gXg^{-1}))` with
/// `X = -delta k k^{-1}`.
#[derive(Debug, Clone)]
pub struct ConjugacyClass {
    pub eigenvalues: Vec<C>,
}

impl ConjugacyClass {
    pub fn new(eigenvalues: Vec<C>) -> Self {
        ConjugacyClass { eigenvalues }
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    fn mask(&self) -> Vec<(usize, usize)> {
        let n = self.n();
        let l = &self.eigenvalues;
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| (l[i] - l[j]).norm() > 1e-12)
            .collect()
    }

    /// The class element represented by the point.
    pub fn element(&self, p: &Point) -> Result<Mat> {
        Ok(&p[0] * diag(&self.eigenvalues) * inv(&p[0])?)
    }
}

impl QhSpace for ConjugacyClass {
    fn label(&self) -> String {
        format!("class(GL{})", self.n())
    }

    fn factors(&self) -> Vec<FactorKind> {
        vec![FactorKind::Group { n: self.n(), mask: self.mask() }]
    }

    fn groups(&self) -> Vec<GroupSpec> {
        vec![GroupSpec::full(self.n())]
    }

    fn local(&self, p: &[Jet]) -> Result<LocalData> {
        need(p, 1)?;
        let k = &p[0];
        let g = conj(k, &Jet::constant(diag(&self.eigenvalues)))?;
        let x = -(&k.d * inv(&k.v)?);
        let gi = inv(&g.v)?;
        let right = &g.v * &x * gi;
        Ok(LocalData { moment: vec![g], terms: vec![FormTerm::new(0.5, x, right)] })
    }

    fn act(&self, g: &[Jet], p: &[Jet]) -> Result<Vec<Jet>> {
        need(p, 1)?;
        Ok(vec![&g[0] * &p[0]])
    }

    fn sample(&self, rng: &mut Rng) -> Result<Point> {
        Ok(vec![rand_group(rng, self.n(), 0.5)])
    }
}

/// `G x H x U_1 x ... x U_m` with points `(C, h, S_1, ..., S_m)`.
///
/// The action is `(g,k).(C,h,S) = (kCg^{-1}, khk^{-1}, kSk^{-1})`, the moment
/// map `(C^{-1} b C, h^{-1})` with `b = h S_m ... S_1`, and
/// `2 omega = (gbar, Ad_b gbar) + (gbar, bbar) + (gbar_m, eta) - sum_i (gamma_i, gamma_{i-1})`
/// where `C_i = S_i ... S_1 C`, `gamma_i = C_i^* theta`, `gbar_i = C_i^* thetabar`,
/// `bbar = b^* thetabar`, `eta = h^* theta`.
#[derive(Debug, Clone)]
pub struct UnipotentList {
    pub n: usize,
    /// The outer group (all of `GL_n` except in nested constructions).
    pub g: Partition,
    pub h: Partition,
    pub patterns: Vec<UnipotentPattern>,
    pub name: String,
}

impl UnipotentList {
    pub fn new(h: Partition, patterns: Vec<UnipotentPattern>, name: impl Into<String>) -> Result<Self> {
        Self::nested(Partition::full(h.n), h, patterns, name)
    }

    /// `K x H x U_1 x ... x U_m` for Levis `H in K in GL_n`.
    pub fn nested(g: Partition, h: Partition, patterns: Vec<UnipotentPattern>, name: impl Into<String>) -> Result<Self> {
        let n = h.n;
        if g.n != n || !h.refines(&g) {
            return Err(Error::Invalid("H must be a block subgroup of the outer group".into()));
        }
        for p in &patterns {
            if p.positions.iter().any(|&(i, j)| !g.same_part(i, j)) {
                return Err(Error::Pattern("pattern leaves the outer group".into()));
            }
            if p.n != n {
                return Err(Error::Dimension("pattern size differs from the group".into()));
            }
            if !p.normalized_by(&h) {
                return Err(Error::Pattern(format!("{:?} is not normalized by H", p.positions)));
            }
        }
        Ok(UnipotentList { n, g, h, patterns, name: name.into() })
    }

    /// `D = G x G` (no unipotent factors, `H = G`).
    pub fn double(n: usize) -> Self {
        UnipotentList { n, g: Partition::full(n), h: Partition::full(n), patterns: vec![], name: format!("double(GL{})", n) }
    }

    /// `A^r(G, H)` for a block grading: `2r` factors alternating `U_+`, `U_-`.
    pub fn fission(grading: &BlockGrading, r: usize) -> Self {
        let (up, lo) = (grading.upper(), grading.lower());
        let patterns = (0..2 * r).map(|i| if i % 2 == 0 { up.clone() } else { lo.clone() }).collect();
        UnipotentList {
            n: grading.n(),
            g: Partition::full(grading.n()),
            h: grading.partition(),
            patterns,
            name: format!("fission({:?},r={})", grading.block_sizes, r),
        }
    }

    /// `A(Q)`: one Stokes group per singular direction, ordered from the cut.
    pub fn stokes_space(q: &IrregularType) -> Self {
        Self::from_structure(q, &singular_directions(q))
    }

    pub fn stokes_space_with_cut(q: &IrregularType, cut: f64) -> Self {
        Self::from_structure(q, &singular_directions_with_cut(q, cut))
    }

    fn from_structure(q: &IrregularType, st: &crate::irregular::StokesStructure) -> Self {
        UnipotentList {
            n: q.n,
            g: Partition::full(q.n),
            h: centralizer(q),
            patterns: st.patterns(),
            name: format!("stokes(GL{},s={})", q.n, st.directions.len()),
        }
    }

    pub fn m(&self) -> usize {
        self.patterns.len()
    }

    /// `b = h S_m ... S_1`.
    pub fn monodromy(&self, p: &Point) -> Mat {
        let mut b = p[1].clone();
        for s in p[2..].iter().rev() {
            b = b * s;
        }
        b
    }
}

/// `C_i = S_i ... S_1 C` and `b = h S_m ... S_1` as jets.
pub(crate) fn fission_words(p: &[Jet]) -> (Vec<Jet>, Jet) {
    let (c, h, s) = (&p[0], &p[1], &p[2..]);
    let mut cs = vec![c.clone()];
    for si in s {
        let next = si * cs.last().unwrap();
        cs.push(next);
    }
    let mut b = h.clone();
    for si in s.iter().rev() {
        b = &b * si;
    }
    (cs, b)
}

impl QhSpace for UnipotentList {
    fn label(&self) -> String {
        self.name.clone()
    }

    fn factors(&self) -> Vec<FactorKind> {
        let mut f = vec![FactorKind::group_levi(&self.g), FactorKind::group_levi(&self.h)];
        f.extend(self.patterns.iter().cloned().map(FactorKind::Unipotent));
        f
    }

    fn groups(&self) -> Vec<GroupSpec> {
        vec![GroupSpec { levi: self.g.clone() }, GroupSpec { levi: self.h.clone() }]
    }

    fn local(&self, p: &[Jet]) -> Result<LocalData> {
        need(p, 2 + self.m())?;
        let (cs, b) = fission_words(p);
        let m = self.m();
        let c = &p[0];
        let gbar = c.theta_bar()?;
        let bi = inv(&b.v)?;
        let mut terms = vec![
            FormTerm::new(0.5, gbar.clone(), &b.v * &gbar * &bi),
            FormTerm::new(0.5, gbar, b.theta_bar()?),
            FormTerm::new(0.5, cs[m].theta_bar()?, p[1].theta()?),
        ];
        for i in 1..=m {
            terms.push(FormTerm::new(-0.5, cs[i].theta()?, cs[i - 1].theta()?));
        }
        let mu_g = &(&c.inv()? * &b) * c;
        let mu_h = p[1].inv()?;
        Ok(LocalData { moment: vec![mu_g, mu_h], terms })
    }

    fn act(&self, g: &[Jet], p: &[Jet]) -> Result<Vec<Jet>> {
        need(p, 2 + self.m())?;
        let (gg, k) = (&g[0], &g[1]);
        let ki = k.inv()?;
        let mut out = vec![&(k * &p[0]) * &gg.inv()?];
        for x in &p[1..] {
            out.push(&(k * x) * &ki);
        }
        Ok(out)
    }

    fn sample(&self, rng: &mut Rng) -> Result<Point> {
        let mut p = vec![rand_levi(rng, &self.g, 0.5), rand_levi(rng, &self.h, 0.5)];
        for pat in &self.patterns {
            p.push(rand_unipotent(rng, pat, 0.5));
        }
        Ok(p)
    }
}

/// `G x G` with diagonal conjugation, moment map the commutator `aba^{-1}b^{-1}`.
#[derive(Debug, Clone)]
pub struct InternallyFusedDouble {
    pub n: usize,
}

impl QhSpace for InternallyFusedDouble {
    fn label(&self) -> String {
        format!("fused-double(GL{})", self.n)
    }

    fn factors(&self) -> Vec<FactorKind> {
        vec![FactorKind::group_full(self.n), FactorKind::group_full(self.n)]
    }

    fn groups(&self) -> Vec<GroupSpec> {
        vec![GroupSpec::full(self.n)]
    }

    fn local(&self, p: &[Jet]) -> Result<LocalData> {
        need(p, 2)?;
        let (a, b) = (&p[0], &p[1]);
        let (ai, bi) = (a.inv()?, b.inv()?);
        let ab = a * b;
        let aibi = &ai * &bi;
        let terms = vec![
            FormTerm::new(-0.5, a.theta()?, b.theta_bar()?),
            FormTerm::new(-0.5, a.theta_bar()?, b.theta()?),
            FormTerm::new(-0.5, ab.theta()?, aibi.theta_bar()?),
        ];
        Ok(LocalData { moment: vec![&ab * &aibi], terms })
    }

    fn act(&self, g: &[Jet], p: &[Jet]) -> Result<Vec<Jet>> {
        need(p, 2)?;
        Ok(vec![conj(&g[0], &p[0])?, conj(&g[0], &p[1])?])
    }

    fn sample(&self, rng: &mut Rng) -> Result<Point> {
        Ok(vec![rand_group(rng, self.n, 0.5), rand_group(rng, self.n, 0.5)])
    }
}

/// `B(V, W) = {(a, b) : det(1 + ab) != 0}` with `a: W -> V`, `b: V -> W`,
/// acted on by `GL(V) x GL(W)` as `(g a k^{-1}, k b g^{-1})`.
#[derive(Debug, Clone)]
pub struct VanDenBergh {
    pub dv: usize,
    pub dw: usize,
}

impl QhSpace for VanDenBergh {
    fn label(&self) -> String {
        format!("vdb({},{})", self.dv, self.dw)
    }

    fn factors(&self) -> Vec<FactorKind> {
        vec![
            FactorKind::Linear { rows: self.dv, cols: self.dw },
            FactorKind::Linear { rows: self.dw, cols: self.dv },
        ]
    }

    fn groups(&self) -> Vec<GroupSpec> {
        vec![GroupSpec::full(self.dv), GroupSpec::full(self.dw)]
    }

    fn local(&self, p: &[Jet]) -> Result<LocalData> {
        need(p, 2)?;
        let (a, b) = (&p[0], &p[1]);
        let x = &Jet::identity(self.dv) + &(a * b);
        let y = &Jet::identity(self.dw) + &(b * a);
        let xi = x.inv()?;
        let yi = inv(&y.v)?;
        let terms = vec![
            FormTerm::new(0.5, &xi.v * &a.d, b.d.clone()),
            FormTerm::new(-0.5, yi * &b.d, a.d.clone()),
        ];
        Ok(LocalData { moment: vec![xi, y], terms })
    }

    fn act(&self, g: &[Jet], p: &[Jet]) -> Result<Vec<Jet>> {
        need(p, 2)?;
        let (gv, kw) = (&g[0], &g[1]);
        Ok(vec![&(gv * &p[0]) * &kw.inv()?, &(kw * &p[1]) * &gv.inv()?])
    }

    fn sample(&self, rng: &mut Rng) -> Result<Point> {
        loop {
            let a = rand_mat(rng, self.dv, self.dw, 0.5);
            let b = rand_mat(rng, self.dw, self.dv, 0.5);
            let x = eye(self.dv) + &a * &b;
            if x.lu().determinant().norm() > 0.05 {
                return Ok(vec![a, b]);
            }
        }
    }
}
