//! Stokes representations of irregular curves.
//!
//! `Hom_S(Pi, G)` is presented as the reduction at the identity of
//! `D^g (x) A(Q_1) (x) ... (x) A(Q_m)` on the slice `C_1 = 1`; a point is
//! `(a_1, b_1, ..., a_g, b_g, C_1, h_1, S^1, ..., C_m, h_m, S^m)` subject to
//! `[a_1, b_1] ... [a_g, b_g] mu_1 ... mu_m = 1` with
//! `mu_i = C_i^{-1} h_i S^i_s ... S^i_1 C_i`.
//!
//! Stability is tested with the Burnside criterion, genericity of class data
//! by enumerating eigenvalue selections.

use crate::io::{cmats, cmatss, cvec};
use crate::irregular::{centralizer, singular_directions, stokes_space_dim, IrregularType, StokesStructure};
use crate::lie::Partition;
use crate::linalg::{eye, inv, lstsq, max_abs, rand_group, range_space, rank, zeros, Jet, Mat, C};
use crate::qh::chart::{AffineChart, Chart};
use crate::qh::spaces::{rand_levi, rand_unipotent};
use crate::qh::{
    constant_jets, jets, FactorKind, Fused, Point, Product, QhSpace, QhSpaceExt, ReducedSlice, Rng, Slice,
    UnipotentList,
};
use crate::qh::spaces::InternallyFusedDouble;
use crate::{Error, Result};
use rand::{Rng as _, SeedableRng};
use serde::{Deserialize, Serialize};

/// Relative rank tolerance of the Burnside span closure.
pub const BURNSIDE_TOL: f64 = 1e-9;
/// Tolerance for eigenvalue products in the genericity test.
pub const GENERIC_TOL: f64 = 1e-9;
const MAX_SELECTIONS: usize = 2_000_000;
const RANDOM_SELECTIONS: usize = 200_000;

/// A compact curve of genus `g` with one irregular type per marked point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrregularCurve {
    pub genus: usize,
    pub points: Vec<IrregularType>,
}

impl IrregularCurve {
    pub fn new(genus: usize, points: Vec<IrregularType>) -> Result<Self> {
        let c = IrregularCurve { genus, points };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let first = self.points.first().ok_or_else(|| Error::Invalid("points: at least one marked point is required".into()))?;
        for q in &self.points {
            q.validate()?;
            if q.n != first.n {
                return Err(Error::Dimension("points: all irregular types must have the same size".into()));
            }
        }
        if first.n == 0 {
            return Err(Error::Invalid("points: empty group".into()));
        }
        Ok(())
    }

    /// Tame curve: `m` marked points with `Q = 0`.
    pub fn tame(n: usize, genus: usize, m: usize) -> Self {
        IrregularCurve { genus, points: vec![IrregularType::zero(n); m] }
    }

    pub fn n(&self) -> usize {
        self.points[0].n
    }

    pub fn m(&self) -> usize {
        self.points.len()
    }

    pub fn structures(&self) -> Vec<StokesStructure> {
        self.points.iter().map(singular_directions).collect()
    }

    pub fn local_spaces(&self) -> Vec<UnipotentList> {
        self.points.iter().map(UnipotentList::stokes_space).collect()
    }

    pub fn centralizers(&self) -> Vec<Partition> {
        self.points.iter().map(centralizer).collect()
    }

    /// Genus zero, one marked point and at most a simple pole in `Q`: the
    /// stabilizer of a point can exceed the center, so stability claims are
    /// not made.
    pub fn is_exceptional(&self) -> bool {
        self.genus == 0 && self.m() == 1 && self.points[0].max_k() <= 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnipotentPart {
    #[default]
    Trivial,
    /// Regular unipotent in every block of the centralizer of `t` in `H`.
    Regular,
}

/// The class `C_i in H_i` of `t u` with `t = diag(eigenvalues)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    #[serde(with = "cvec")]
    pub eigenvalues: Vec<C>,
    #[serde(default)]
    pub unipotent: UnipotentPart,
}

impl ClassSpec {
    pub fn semisimple(eigenvalues: Vec<C>) -> Self {
        ClassSpec { eigenvalues, unipotent: UnipotentPart::Trivial }
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Blocks of `C_H(t)`: same block of `H` and equal eigenvalue.
    pub fn centralizer_in(&self, h: &Partition) -> Partition {
        let l = h.label();
        let mut parts: Vec<Vec<usize>> = Vec::new();
        for i in 0..self.n() {
            match parts.iter_mut().find(|p| l[p[0]] == l[i] && (self.eigenvalues[p[0]] - self.eigenvalues[i]).norm() <= GENERIC_TOL) {
                Some(p) => p.push(i),
                None => parts.push(vec![i]),
            }
        }
        Partition { n: self.n(), parts }
    }

    /// The representative `t u`.
    pub fn representative(&self, h: &Partition) -> Mat {
        let mut m = crate::linalg::diag(&self.eigenvalues);
        if self.unipotent == UnipotentPart::Regular {
            for p in self.centralizer_in(h).parts {
                for w in p.windows(2) {
                    m[(w[0], w[1])] = self.eigenvalues[w[0]];
                }
            }
        }
        m
    }

    /// `dim C = dim H - dim C_H(t u)`.
    pub fn dim(&self, h: &Partition) -> usize {
        let z = self.centralizer_in(h);
        let stab = match self.unipotent {
            UnipotentPart::Trivial => z.dim(),
            UnipotentPart::Regular => z.sizes().iter().sum(),
        };
        h.dim() - stab
    }

    pub fn determinant(&self) -> C {
        self.eigenvalues.iter().product()
    }
}

/// `GL_2`, genus zero, one point per entry with `Q = diag(1, -1) / z^r`
/// (`r = 0` is a tame point).
pub fn painleve_curve(poles: &[u32]) -> Result<IrregularCurve> {
    let points = poles
        .iter()
        .map(|&r| {
            if r == 0 {
                Ok(IrregularType::zero(2))
            } else {
                IrregularType::one_level(r, vec![C::new(1.0, 0.0), C::new(-1.0, 0.0)])
            }
        })
        .collect::<Result<_>>()?;
    IrregularCurve::new(0, points)
}

/// Input file: a curve and optional class data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveInput {
    pub genus: usize,
    pub points: Vec<IrregularType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<ClassSpec>>,
}

impl CurveInput {
    pub fn curve(&self) -> Result<IrregularCurve> {
        IrregularCurve::new(self.genus, self.points.clone())
    }

    pub fn validated_classes(&self) -> Result<Option<Vec<ClassSpec>>> {
        if let Some(cl) = &self.classes {
            check_classes(&self.curve()?, cl)?;
        }
        Ok(self.classes.clone())
    }
}

pub fn check_classes(curve: &IrregularCurve, classes: &[ClassSpec]) -> Result<()> {
    if classes.len() != curve.m() {
        return Err(Error::Invalid(format!("classes: expected {} entries, got {}", curve.m(), classes.len())));
    }
    for (i, c) in classes.iter().enumerate() {
        if c.n() != curve.n() {
            return Err(Error::Dimension(format!("classes[{}].eigenvalues: expected {} values", i, curve.n())));
        }
        if c.eigenvalues.iter().any(|z| z.norm() < 1e-12 || !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Invalid(format!("classes[{}].eigenvalues: must be finite and nonzero", i)));
        }
    }
    Ok(())
}

/// A framed point of the wild character variety.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StokesRepresentation {
    pub n: usize,
    #[serde(with = "cmats")]
    pub a: Vec<Mat>,
    #[serde(with = "cmats")]
    pub b: Vec<Mat>,
    #[serde(with = "cmats")]
    pub connectors: Vec<Mat>,
    #[serde(with = "cmats")]
    pub formal: Vec<Mat>,
    #[serde(with = "cmatss")]
    pub stokes: Vec<Vec<Mat>>,
}

impl StokesRepresentation {
    pub fn identity(curve: &IrregularCurve) -> Self {
        let n = curve.n();
        StokesRepresentation {
            n,
            a: vec![eye(n); curve.genus],
            b: vec![eye(n); curve.genus],
            connectors: vec![eye(n); curve.m()],
            formal: vec![eye(n); curve.m()],
            stokes: curve.structures().iter().map(|s| vec![eye(n); s.directions.len()]).collect(),
        }
    }

    /// `mu_i = C_i^{-1} h_i S^i_s ... S^i_1 C_i`.
    pub fn local_monodromy(&self, i: usize) -> Result<Mat> {
        let c = &self.connectors[i];
        let mut b = self.formal[i].clone();
        for s in self.stokes[i].iter().rev() {
            b *= s;
        }
        Ok(inv(c)? * b * c)
    }

    /// `[a_1, b_1] ... [a_g, b_g] mu_1 ... mu_m`.
    pub fn relation_product(&self) -> Result<Mat> {
        let mut p = eye(self.n);
        for (a, b) in self.a.iter().zip(&self.b) {
            p = p * a * b * inv(a)? * inv(b)?;
        }
        for i in 0..self.connectors.len() {
            p *= self.local_monodromy(i)?;
        }
        Ok(p)
    }

    pub fn to_point(&self) -> Point {
        let mut p = Vec::new();
        for (a, b) in self.a.iter().zip(&self.b) {
            p.push(a.clone());
            p.push(b.clone());
        }
        for i in 0..self.connectors.len() {
            p.push(self.connectors[i].clone());
            p.push(self.formal[i].clone());
            p.extend(self.stokes[i].iter().cloned());
        }
        p
    }

    pub fn from_point(curve: &IrregularCurve, p: &Point) -> Result<Self> {
        let counts: Vec<usize> = curve.structures().iter().map(|s| s.directions.len()).collect();
        let expect = 2 * curve.genus + counts.iter().map(|s| s + 2).sum::<usize>();
        if p.len() != expect {
            return Err(Error::Dimension(format!("point has {} factors, expected {}", p.len(), expect)));
        }
        let mut rep = StokesRepresentation {
            n: curve.n(),
            a: vec![],
            b: vec![],
            connectors: vec![],
            formal: vec![],
            stokes: vec![],
        };
        let mut at = 0;
        for _ in 0..curve.genus {
            rep.a.push(p[at].clone());
            rep.b.push(p[at + 1].clone());
            at += 2;
        }
        for s in counts {
            rep.connectors.push(p[at].clone());
            rep.formal.push(p[at + 1].clone());
            rep.stokes.push(p[at + 2..at + 2 + s].to_vec());
            at += s + 2;
        }
        Ok(rep)
    }

    /// The `H`-action `(k_i)`: `C_i -> k_i C_i k_1^{-1}`, `h_i -> k_i h_i k_i^{-1}`,
    /// `S^i -> k_i S^i k_i^{-1}`, handles conjugated by `k_1`.
    pub fn act(&self, k: &[Mat]) -> Result<Self> {
        let k1i = inv(&k[0])?;
        let mut out = self.clone();
        for (a, b) in out.a.iter_mut().zip(out.b.iter_mut()) {
            *a = &k[0] * &*a * &k1i;
            *b = &k[0] * &*b * &k1i;
        }
        for i in 0..out.connectors.len() {
            let ki = inv(&k[i])?;
            out.connectors[i] = &k[i] * &out.connectors[i] * &k1i;
            out.formal[i] = &k[i] * &out.formal[i] * &ki;
            for s in out.stokes[i].iter_mut() {
                *s = &k[i] * &*s * &ki;
            }
        }
        Ok(out)
    }
}

/// `|[a_1, b_1] ... mu_m - 1|_max`.
pub fn check_relation(rep: &StokesRepresentation) -> Result<f64> {
    Ok(max_abs(&(rep.relation_product()? - eye(rep.n))))
}

/// SR1 (Stokes factors in their groups), SR2 (`h_i in H_i`) and `C_1 = 1`.
pub fn validate_structure(curve: &IrregularCurve, rep: &StokesRepresentation, tol: f64) -> Result<()> {
    let n = curve.n();
    if rep.n != n || rep.a.len() != curve.genus || rep.b.len() != curve.genus || rep.connectors.len() != curve.m() {
        return Err(Error::Dimension("representation does not match the curve".into()));
    }
    if rep.formal.len() != curve.m() || rep.stokes.len() != curve.m() {
        return Err(Error::Dimension("representation does not match the curve".into()));
    }
    if max_abs(&(&rep.connectors[0] - eye(n))) > tol {
        return Err(Error::Invalid("C_1 must be the identity".into()));
    }
    for (i, (st, h)) in curve.structures().iter().zip(curve.centralizers()).enumerate() {
        if !h.contains(&rep.formal[i], tol) {
            return Err(Error::Pattern(format!("h_{} is not in H_{}", i + 1, i + 1)));
        }
        if rep.stokes[i].len() != st.directions.len() {
            return Err(Error::Dimension(format!("point {} needs {} Stokes factors", i + 1, st.directions.len())));
        }
        for (j, (s, d)) in rep.stokes[i].iter().zip(&st.directions).enumerate() {
            if !d.pattern(n).contains_matrix(s, tol) {
                return Err(Error::Pattern(format!("S^{}_{} is not in its Stokes group", i + 1, j + 1)));
            }
        }
    }
    Ok(())
}

/// The structural conditions and the monodromy relation.
pub fn validate_representation(curve: &IrregularCurve, rep: &StokesRepresentation, tol: f64) -> Result<()> {
    validate_structure(curve, rep, tol)?;
    let r = check_relation(rep)?;
    if r > tol {
        return Err(Error::Invalid(format!("monodromy relation violated by {:.3e}", r)));
    }
    Ok(())
}

/// `Hom_S(Pi, G)` as a quasi-Hamiltonian `H_1 x ... x H_m`-space.
pub struct HomSpace {
    pub curve: IrregularCurve,
    pub space: ReducedSlice,
}

impl HomSpace {
    pub fn dim(&self) -> i64 {
        let n2 = (self.curve.n() * self.curve.n()) as i64;
        (2 * self.curve.genus as i64 - 2) * n2 + self.curve.points.iter().map(|q| stokes_space_dim(q) as i64).sum::<i64>()
    }
}

pub fn build_space(curve: &IrregularCurve) -> Result<HomSpace> {
    curve.validate()?;
    let n = curve.n();
    let mut children: Vec<Box<dyn QhSpace>> = Vec::new();
    let mut is_g: Vec<bool> = Vec::new();
    for _ in 0..curve.genus {
        children.push(Box::new(InternallyFusedDouble { n }));
        is_g.push(true);
    }
    for a in curve.local_spaces() {
        children.push(Box::new(a));
        is_g.extend([true, false]);
    }
    let mut space: Box<dyn QhSpace> = Box::new(Product::new(children));
    while let Some(j) = is_g.iter().skip(1).position(|&x| x).map(|j| j + 1) {
        space = Box::new(Fused::new(space, 0, j)?);
        is_g.remove(j);
    }
    let c1 = 2 * curve.genus;
    let cv = curve.clone();
    let sampler = Box::new(move |rng: &mut Rng| -> Result<Point> {
        let seed: u64 = rng.random();
        Ok(sample_point(&cv, None, seed)?.to_point())
    });
    let reduced = ReducedSlice::new(space, 0, Slice::FactorIdentity { factor: c1, compensator: Some(1) })?.with_sampler(sampler);
    Ok(HomSpace { curve: curve.clone(), space: reduced })
}

// ---------------------------------------------------------------------------
// Sampling

/// Unknowns for the sampler: handles, connectors `C_2..C_m`, either `h_i` or a
/// conjugator `P_i` with `h_i = P_i (t_i u_i) P_i^{-1}`, and Stokes factors.
struct Unknowns<'a> {
    curve: &'a IrregularCurve,
    reps: Option<Vec<Mat>>,
    kinds: Vec<FactorKind>,
}

impl<'a> Unknowns<'a> {
    fn new(curve: &'a IrregularCurve, classes: Option<&[ClassSpec]>) -> Self {
        let n = curve.n();
        let hs = curve.centralizers();
        let reps = classes.map(|cl| cl.iter().zip(&hs).map(|(c, h)| c.representative(h)).collect());
        let mut kinds = Vec::new();
        for _ in 0..2 * curve.genus {
            kinds.push(FactorKind::group_full(n));
        }
        for (i, (a, h)) in curve.local_spaces().iter().zip(&hs).enumerate() {
            if i > 0 {
                kinds.push(FactorKind::group_full(n));
            }
            kinds.push(FactorKind::group_levi(h));
            kinds.extend(a.patterns.iter().cloned().map(FactorKind::Unipotent));
        }
        Unknowns { curve, reps, kinds }
    }

    fn random(&self, rng: &mut Rng) -> Point {
        let hs = self.curve.centralizers();
        let slots = self.h_slots();
        let n = self.curve.n();
        self.kinds
            .iter()
            .enumerate()
            .map(|(f, k)| match k {
                _ if slots.contains(&f) => rand_levi(rng, &hs[slots.iter().position(|&s| s == f).unwrap()], 0.5),
                FactorKind::Group { .. } => rand_group(rng, n, 0.5),
                FactorKind::Unipotent(p) => rand_unipotent(rng, p, 0.5),
                FactorKind::Linear { rows, cols } => zeros(*rows, *cols),
            })
            .collect()
    }

    fn h_slots(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut at = 2 * self.curve.genus;
        for (i, a) in self.curve.local_spaces().iter().enumerate() {
            if i > 0 {
                at += 1;
            }
            out.push(at);
            at += 1 + a.m();
        }
        out
    }

    /// Representation jets from unknown jets.
    fn rep_jets(&self, x: &[Jet]) -> Result<Vec<Jet>> {
        let n = self.curve.n();
        let mut out = Vec::with_capacity(x.len() + 1);
        let mut at = 0;
        for _ in 0..2 * self.curve.genus {
            out.push(x[at].clone());
            at += 1;
        }
        for (i, a) in self.curve.local_spaces().iter().enumerate() {
            if i == 0 {
                out.push(Jet::identity(n));
            } else {
                out.push(x[at].clone());
                at += 1;
            }
            let h = match &self.reps {
                Some(r) => {
                    let p = &x[at];
                    &(p * &Jet::constant(r[i].clone())) * &p.inv()?
                }
                None => x[at].clone(),
            };
            out.push(h);
            at += 1;
            for _ in 0..a.m() {
                out.push(x[at].clone());
                at += 1;
            }
        }
        Ok(out)
    }

    fn relation(&self, x: &[Jet]) -> Result<Jet> {
        let r = self.rep_jets(x)?;
        let n = self.curve.n();
        let mut p = Jet::identity(n);
        let mut at = 0;
        for _ in 0..self.curve.genus {
            let (a, b) = (&r[at], &r[at + 1]);
            p = &(&(&(&p * a) * b) * &a.inv()?) * &b.inv()?;
            at += 2;
        }
        for a in self.curve.local_spaces() {
            let c = &r[at];
            let mut mu = r[at + 1].clone();
            for s in r[at + 2..at + 2 + a.m()].iter().rev() {
                mu = &mu * s;
            }
            p = &p * &(&(&c.inv()? * &mu) * c);
            at += 2 + a.m();
        }
        Ok(&p - &Jet::identity(n))
    }
}

/// Random Stokes representation, optionally with `h_i` in prescribed classes.
///
/// All unknowns start at random values and Gauss-Newton (minimum-norm steps)
/// drives the monodromy relation to zero; up to 100 restarts.
pub fn sample_point(curve: &IrregularCurve, classes: Option<&[ClassSpec]>, seed: u64) -> Result<StokesRepresentation> {
    curve.validate()?;
    if let Some(cl) = classes {
        check_classes(curve, cl)?;
        let det: C = cl.iter().map(|c| c.determinant()).product();
        if (det - C::new(1.0, 0.0)).norm() > GENERIC_TOL {
            return Err(Error::NoSample(format!(
                "determinant obstruction: the product of all class determinants is {:.6}{:+.6}i, not 1",
                det.re, det.im
            )));
        }
    }
    let unk = Unknowns::new(curve, classes);
    let mut rng = Rng::seed_from_u64(seed);
    for _ in 0..100 {
        let x0 = unk.random(&mut rng);
        if let Ok(x) = newton(&unk, x0) {
            let r = on_point(|j| unk.rep_jets(j), &x)?;
            let rep = StokesRepresentation::from_point(curve, &r)?;
            if check_relation(&rep)? <= 1e-10 {
                return Ok(rep);
            }
        }
    }
    Err(Error::NoSample("Gauss-Newton did not reach the relation in 100 attempts".into()))
}

fn on_point(f: impl Fn(&[Jet]) -> Result<Vec<Jet>>, p: &[Mat]) -> Result<Point> {
    Ok(f(&constant_jets(p))?.into_iter().map(|j| j.v).collect())
}

fn newton(unk: &Unknowns, mut x: Point) -> Result<Point> {
    for _ in 0..60 {
        let f = unk.relation(&constant_jets(&x))?.v;
        let res = max_abs(&f);
        if !res.is_finite() {
            break;
        }
        if res < 1e-13 {
            return Ok(x);
        }
        let chart = AffineChart::new(unk.kinds.clone(), x.clone());
        let basis = chart.basis(&vec![C::new(0.0, 0.0); chart.dim()])?;
        let nn = f.len();
        let mut jac = zeros(nn, basis.len());
        for (b, t) in basis.iter().enumerate() {
            let d = unk.relation(&jets(&unk.kinds, &x, t))?.d;
            for (r, v) in d.iter().enumerate() {
                jac[(r, b)] = *v;
            }
        }
        let fv = Mat::from_column_slice(nn, 1, f.as_slice());
        let mut dx = lstsq(&jac, &(-fv), 1e-10)?;
        let norm = dx.norm();
        if norm > 0.5 {
            dx *= C::new(0.5 / norm, 0.0);
        }
        let step: Vec<C> = dx.iter().copied().collect();
        x = chart.point(&step)?;
        for m in &x {
            if m.nrows() == m.ncols() && m.clone().lu().determinant().norm() < 1e-8 {
                return Err(Error::Numerical("iterate left the group".into()));
            }
        }
    }
    Err(Error::Numerical("Gauss-Newton did not converge".into()))
}

// ---------------------------------------------------------------------------
// Stability

/// Dimension of the unital associative algebra generated by `gens`.
pub fn algebra_dimension(n: usize, gens: &[Mat], tol: f64) -> usize {
    algebra_basis(n, gens, tol).len()
}

fn algebra_basis(n: usize, gens: &[Mat], tol: f64) -> Vec<Mat> {
    let gens: Vec<Mat> = gens
        .iter()
        .filter(|g| g.norm() > 0.0)
        .map(|g| g / C::new(g.norm(), 0.0))
        .collect();
    let mut basis: Vec<Mat> = Vec::new();
    let mut queue: Vec<Mat> = Vec::new();
    let push = |y: Mat, basis: &mut Vec<Mat>, queue: &mut Vec<Mat>| {
        let scale = y.norm();
        if scale == 0.0 {
            return;
        }
        let mut r = y / C::new(scale, 0.0);
        for _ in 0..2 {
            for b in basis.iter() {
                let c = b.dotc(&r);
                r -= b * c;
            }
        }
        let rn = r.norm();
        if rn > tol {
            let v = r / C::new(rn, 0.0);
            basis.push(v.clone());
            queue.push(v);
        }
    };
    push(eye(n), &mut basis, &mut queue);
    while let Some(x) = queue.pop() {
        if basis.len() == n * n {
            break;
        }
        for g in &gens {
            push(g * &x, &mut basis, &mut queue);
        }
    }
    basis
}

/// Which generators stand for the centers `Z_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CenterGenerators {
    /// One block-scalar diagonal matrix per `H_i` (distinct values on distinct blocks).
    Center,
    /// The coefficients `A_k` of `Q_i`, spanning the exponential torus.
    ExponentialTorus,
}

/// Generators at the base point: `a_k, b_k`, and `C_i^{-1} x C_i` for
/// `x = h_i, S^i_j` and the center generators.
pub fn stability_generators(curve: &IrregularCurve, rep: &StokesRepresentation, which: CenterGenerators) -> Result<Vec<Mat>> {
    let mut gens: Vec<Mat> = rep.a.iter().chain(&rep.b).cloned().collect();
    for i in 0..curve.m() {
        let c = &rep.connectors[i];
        let ci = inv(c)?;
        let mut local = vec![rep.formal[i].clone()];
        local.extend(rep.stokes[i].iter().cloned());
        match which {
            CenterGenerators::Center => local.push(block_scalar(&centralizer(&curve.points[i]))),
            CenterGenerators::ExponentialTorus => {
                local.extend(curve.points[i].terms.iter().map(|t| crate::linalg::diag(&t.a)))
            }
        }
        gens.extend(local.into_iter().map(|x| &ci * x * c));
    }
    Ok(gens)
}

fn block_scalar(h: &Partition) -> Mat {
    let l = h.label();
    let d: Vec<C> = l.iter().map(|&k| C::new(k as f64 + 1.0, 0.0)).collect();
    crate::linalg::diag(&d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub n: usize,
    pub algebra_dim: usize,
    pub stable: bool,
    /// Case excluded from the stability theorem (the stabilizer may exceed the center).
    pub exceptional: bool,
    /// Result of the cyclic-subspace cross-check (`n <= 4`): whether a proper
    /// invariant subspace was found.
    pub invariant_subspace_found: Option<bool>,
}

pub fn is_stable(curve: &IrregularCurve, rep: &StokesRepresentation) -> Result<StabilityReport> {
    let n = curve.n();
    let gens = stability_generators(curve, rep, CenterGenerators::Center)?;
    let basis = algebra_basis(n, &gens, BURNSIDE_TOL);
    let cross = if n <= 4 { Some(invariant_subspace_search(n, &basis, 0)) } else { None };
    Ok(StabilityReport {
        n,
        algebra_dim: basis.len(),
        stable: basis.len() == n * n,
        exceptional: curve.is_exceptional(),
        invariant_subspace_found: cross,
    })
}

/// Eigenvectors `v` of a random element of the algebra; `Alg v` is a proper
/// invariant subspace for some `v` whenever the algebra is reducible.
pub fn invariant_subspace_search(n: usize, basis: &[Mat], seed: u64) -> bool {
    let mut rng = Rng::seed_from_u64(seed);
    let mut x = zeros(n, n);
    for b in basis {
        x += b * crate::linalg::rand_disk(&mut rng, 1.0);
    }
    let schur = nalgebra::Schur::new(x.clone());
    let (q, t) = schur.unpack();
    for k in 0..n {
        // Eigenvector for the k-th Schur eigenvalue: solve the upper triangular block.
        let lam = t[(k, k)];
        let mut y = vec![C::new(0.0, 0.0); n];
        y[k] = C::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut s = C::new(0.0, 0.0);
            for j in i + 1..=k {
                s += t[(i, j)] * y[j];
            }
            let den = t[(i, i)] - lam;
            y[i] = if den.norm() > 1e-12 { -s / den } else { C::new(0.0, 0.0) };
        }
        let v = &q * Mat::from_column_slice(n, 1, &y);
        let mut span = zeros(n, basis.len());
        for (c, b) in basis.iter().enumerate() {
            span.set_column(c, &(b * &v).column(0));
        }
        if rank(&span, 1e-8) < n {
            return true;
        }
    }
    false
}

// ---------------------------------------------------------------------------
// Genericity

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub k: usize,
    /// Chosen eigenvalue indices at each marked point.
    pub indices: Vec<Vec<usize>>,
    #[serde(with = "crate::io::cnum")]
    pub product: C,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenericityReport {
    pub generic: bool,
    pub kernel_condition: bool,
    #[serde(with = "crate::io::cnum")]
    pub determinant_product: C,
    /// False when the selection space was sampled instead of enumerated.
    pub exhaustive: bool,
    pub witness: Option<Selection>,
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < n - k + i {
                cur[i] += 1;
                for j in i + 1..k {
                    cur[j] = cur[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Kernel condition plus no `k`-element selection (`0 < k < n`) with product one.
pub fn is_generic(classes: &[ClassSpec], tol: f64) -> Result<GenericityReport> {
    let n = classes.first().map_or(0, |c| c.n());
    if classes.iter().any(|c| c.n() != n) || n == 0 {
        return Err(Error::Dimension("classes must share a nonzero size".into()));
    }
    let det: C = classes.iter().map(|c| c.determinant()).product();
    let kernel = (det - C::new(1.0, 0.0)).norm() <= tol;
    let m = classes.len();
    let mut exhaustive = true;
    let mut witness = None;
    let one = C::new(1.0, 0.0);
    let product = |sel: &[&Vec<usize>]| -> C {
        sel.iter().zip(classes).map(|(ix, c)| ix.iter().map(|&i| c.eigenvalues[i]).product::<C>()).product()
    };
    'outer: for k in 1..n {
        let combos = combinations(n, k);
        let total = (combos.len() as f64).powi(m as i32);
        if total <= MAX_SELECTIONS as f64 {
            let mut idx = vec![0usize; m];
            loop {
                let sel: Vec<&Vec<usize>> = idx.iter().map(|&i| &combos[i]).collect();
                let p = product(&sel);
                if (p - one).norm() <= tol {
                    witness = Some(Selection { k, indices: sel.into_iter().cloned().collect(), product: p });
                    break 'outer;
                }
                let mut j = 0;
                while j < m {
                    idx[j] += 1;
                    if idx[j] < combos.len() {
                        break;
                    }
                    idx[j] = 0;
                    j += 1;
                }
                if j == m {
                    break;
                }
            }
        } else {
            exhaustive = false;
            let mut rng = Rng::seed_from_u64(k as u64);
            for _ in 0..RANDOM_SELECTIONS {
                let sel: Vec<&Vec<usize>> = (0..m).map(|_| &combos[rng.random_range(0..combos.len())]).collect();
                let p = product(&sel);
                if (p - one).norm() <= tol {
                    witness = Some(Selection { k, indices: sel.into_iter().cloned().collect(), product: p });
                    break 'outer;
                }
            }
        }
    }
    Ok(GenericityReport { generic: kernel && witness.is_none(), kernel_condition: kernel, determinant_product: det, exhaustive, witness })
}

/// Regular semisimple classes with random eigenvalues, the last one adjusted
/// so that the product of all determinants is one; redrawn until generic.
pub fn generic_classes(curve: &IrregularCurve, seed: u64) -> Result<Vec<ClassSpec>> {
    let (n, m) = (curve.n(), curve.m());
    let mut rng = Rng::seed_from_u64(seed);
    for _ in 0..100 {
        let mut classes: Vec<ClassSpec> = (0..m)
            .map(|_| {
                ClassSpec::semisimple(
                    (0..n)
                        .map(|_| C::from_polar(rng.random_range(0.7..1.4), rng.random_range(0.0..std::f64::consts::TAU)))
                        .collect(),
                )
            })
            .collect();
        let det: C = classes.iter().map(|c| c.determinant()).product();
        classes[m - 1].eigenvalues[n - 1] /= det;
        if is_generic(&classes, 1e-6)?.generic {
            return Ok(classes);
        }
    }
    Err(Error::NoSample("no generic class data found".into()))
}

// ---------------------------------------------------------------------------
// Dimensions

/// `dim Hom_S = (2g - 2) dim G + sum dim A(Q_i)`, and with classes
/// `+ sum dim C_i - 2 (dim H - dim Z(G))`.
pub fn expected_dim(curve: &IrregularCurve, classes: Option<&[ClassSpec]>) -> Result<i64> {
    let n2 = (curve.n() * curve.n()) as i64;
    let mut d = (2 * curve.genus as i64 - 2) * n2 + curve.points.iter().map(|q| stokes_space_dim(q) as i64).sum::<i64>();
    if let Some(cl) = classes {
        check_classes(curve, cl)?;
        let hs = curve.centralizers();
        let cdim: i64 = cl.iter().zip(&hs).map(|(c, h)| c.dim(h) as i64).sum();
        let hdim: i64 = hs.iter().map(|h| h.dim() as i64).sum();
        d += cdim - 2 * (hdim - 1);
    }
    Ok(d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimCheck {
    pub expected: i64,
    pub measured: Option<i64>,
    pub chart_dim: usize,
    pub class_tangent_rank: usize,
    pub stacked_rank: usize,
    pub orbit_dim: usize,
    pub stable: bool,
    pub note: Option<String>,
}

/// `dim mu^{-1}(C) / H` at a point, from numerical ranks:
/// `D + rank B - rank [A B] - dim(orbit)` with `A = dmu` and `B` spanning `T C`.
pub fn numeric_dim_check(hom: &HomSpace, classes: &[ClassSpec], rep: &StokesRepresentation) -> Result<DimCheck> {
    let curve = &hom.curve;
    let expected = expected_dim(curve, Some(classes))?;
    let stab = is_stable(curve, rep)?;
    let p = rep.to_point();
    hom.space.check_point(&p)?;
    let chart = hom.space.chart(&p)?;
    let basis = chart.basis(&vec![C::new(0.0, 0.0); chart.dim()])?;
    let hs = curve.centralizers();
    let mu = hom.space.moment_map(&p)?;
    // Coordinates of left-trivialized tangents to H = prod H_i.
    let coords = |x: &[Mat]| -> Vec<C> {
        x.iter().zip(&hs).flat_map(|(m, h)| h.mask().into_iter().map(move |ij| m[ij])).collect()
    };
    let mut a_cols = Vec::new();
    for t in &basis {
        let d = hom.space.local_at(&p, t)?;
        let x: Vec<Mat> = d.moment.iter().map(|j| j.theta()).collect::<Result<_>>()?;
        a_cols.push(coords(&x));
    }
    let mut b_cols = Vec::new();
    for (i, h) in hs.iter().enumerate() {
        let mi = inv(&mu[i])?;
        for ij in h.mask() {
            let e = crate::linalg::unit(curve.n(), curve.n(), ij.0, ij.1);
            let mut x: Vec<Mat> = hs.iter().map(|h| zeros(h.n, h.n)).collect();
            x[i] = &mi * &e * &mu[i] - &e;
            b_cols.push(coords(&x));
        }
    }
    let rows = hs.iter().map(|h| h.dim()).sum::<usize>();
    let to_mat = |cols: &[Vec<C>]| {
        let mut m = zeros(rows, cols.len());
        for (c, v) in cols.iter().enumerate() {
            for (r, z) in v.iter().enumerate() {
                m[(r, c)] = *z;
            }
        }
        m
    };
    let bm = to_mat(&b_cols);
    let mut all = a_cols.clone();
    all.extend(b_cols.iter().cloned());
    let stacked = rank(&to_mat(&all), 1e-9);
    let rb = rank(&bm, 1e-9);
    // Orbit: fundamental fields of H.
    let kinds = hom.space.factors();
    let mut orbit_cols: Vec<Vec<C>> = Vec::new();
    for (i, h) in hs.iter().enumerate() {
        for ij in h.mask() {
            let mut x: Vec<Mat> = hs.iter().map(|h| zeros(h.n, h.n)).collect();
            x[i] = crate::linalg::unit(curve.n(), curve.n(), ij.0, ij.1);
            let v = hom.space.fundamental_vector_field(&x, &p)?;
            let raw = crate::qh::to_raw(&kinds, &p, &v);
            orbit_cols.push(raw.iter().flat_map(|m| m.iter().copied().collect::<Vec<_>>()).collect());
        }
    }
    let orbit_rows = orbit_cols.first().map_or(0, |c| c.len());
    let mut om = zeros(orbit_rows, orbit_cols.len());
    for (c, v) in orbit_cols.iter().enumerate() {
        for (r, z) in v.iter().enumerate() {
            om[(r, c)] = *z;
        }
    }
    let orbit = rank(&om, 1e-9);
    let hdim: usize = hs.iter().map(|h| h.dim()).sum();
    let (measured, note) = if !stab.stable {
        (None, Some("point is not stable: dimension check skipped".to_string()))
    } else if orbit + 1 != hdim {
        (None, Some(format!("orbit dimension {} differs from dim H - 1 = {}: rank deficiency", orbit, hdim - 1)))
    } else {
        (Some(basis.len() as i64 + rb as i64 - stacked as i64 - orbit as i64), None)
    };
    Ok(DimCheck {
        expected,
        measured,
        chart_dim: basis.len(),
        class_tangent_rank: rb,
        stacked_rank: stacked,
        orbit_dim: orbit,
        stable: stab.stable,
        note,
    })
}

// ---------------------------------------------------------------------------
// Exponential torus

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentialTorus {
    pub n: usize,
    /// Orthonormal basis (diagonal entries) of the span of the coefficients.
    pub lie_algebra: Vec<Vec<[f64; 2]>>,
    pub dim: usize,
    /// `C_G(T)`.
    pub centralizer: Partition,
    /// `C_G(T) = H`.
    pub centralizer_is_h: bool,
    /// `T in Z(H)`: every basis element is scalar on the blocks of `H`.
    pub inside_center: bool,
}

pub fn exponential_torus(q: &IrregularType) -> ExponentialTorus {
    let n = q.n;
    let mut a = zeros(n, q.terms.len());
    for (k, t) in q.terms.iter().enumerate() {
        for i in 0..n {
            a[(i, k)] = t.a[i];
        }
    }
    let basis = if q.terms.is_empty() { zeros(n, 0) } else { range_space(&a, 1e-10) };
    let dim = basis.ncols();
    let mut parts: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let same = |p: &Vec<usize>| (0..dim).all(|c| (basis[(p[0], c)] - basis[(i, c)]).norm() <= 1e-9);
        match parts.iter_mut().find(|p| same(p)) {
            Some(p) => p.push(i),
            None => parts.push(vec![i]),
        }
    }
    let cent = Partition { n, parts };
    let h = centralizer(q);
    let centralizer_is_h = cent.refines(&h) && h.refines(&cent);
    let hl = h.label();
    let inside_center = (0..dim).all(|c| {
        (0..n).all(|i| (0..n).all(|j| hl[i] != hl[j] || (basis[(i, c)] - basis[(j, c)]).norm() <= 1e-9))
    });
    ExponentialTorus {
        n,
        lie_algebra: (0..dim).map(|c| (0..n).map(|i| [basis[(i, c)].re, basis[(i, c)].im]).collect()).collect(),
        dim,
        centralizer: cent,
        centralizer_is_h,
        inside_center,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaloisReport {
    pub center_algebra_dim: usize,
    pub torus_algebra_dim: usize,
    pub agree: bool,
}

/// Burnside with the exponential tori in place of the centers.
pub fn galois_crosscheck(curve: &IrregularCurve, rep: &StokesRepresentation) -> Result<GaloisReport> {
    let n = curve.n();
    let z = algebra_dimension(n, &stability_generators(curve, rep, CenterGenerators::Center)?, BURNSIDE_TOL);
    let t = algebra_dimension(n, &stability_generators(curve, rep, CenterGenerators::ExponentialTorus)?, BURNSIDE_TOL);
    Ok(GaloisReport { center_algebra_dim: z, torus_algebra_dim: t, agree: (z == n * n) == (t == n * n) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::irregular::Term;
    use crate::linalg::{c, unit};

    fn re(v: &[f64]) -> Vec<C> {
        v.iter().map(|&x| c(x, 0.0)).collect()
    }

    #[test]
    fn combinations_count() {
        assert_eq!(combinations(4, 2).len(), 6);
        assert_eq!(combinations(3, 3), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn identity_relation() {
        let curve = IrregularCurve::new(1, vec![IrregularType::one_level(1, re(&[1.0, -1.0])).unwrap()]).unwrap();
        let rep = StokesRepresentation::identity(&curve);
        assert_eq!(check_relation(&rep).unwrap(), 0.0);
        validate_representation(&curve, &rep, 1e-12).unwrap();
    }

    #[test]
    fn scalar_generators_are_unstable() {
        let curve = IrregularCurve::tame(2, 0, 2);
        let mut rep = StokesRepresentation::identity(&curve);
        rep.formal[0] = eye(2) * c(2.0, 0.0);
        rep.formal[1] = eye(2) * c(0.5, 0.0);
        let r = is_stable(&curve, &rep).unwrap();
        assert!(!r.stable);
        assert_eq!(r.algebra_dim, 1);
        assert_eq!(r.invariant_subspace_found, Some(true));
    }

    #[test]
    fn gl2_stokes_example_is_stable() {
        let curve = IrregularCurve::new(0, vec![IrregularType::one_level(1, re(&[1.0, -1.0])).unwrap()]).unwrap();
        let mut rep = StokesRepresentation::identity(&curve);
        rep.stokes[0][0] = eye(2) + unit(2, 2, 0, 1);
        rep.stokes[0][1] = eye(2) + unit(2, 2, 1, 0);
        rep.formal[0] = crate::linalg::diag(&re(&[2.0, 3.0]));
        let r = is_stable(&curve, &rep).unwrap();
        assert_eq!(r.algebra_dim, 4);
        assert!(r.stable);
        assert!(r.exceptional);
        assert_eq!(r.invariant_subspace_found, Some(false));
    }

    #[test]
    fn class_dimensions() {
        let full = Partition::full(3);
        let reg = ClassSpec::semisimple(re(&[1.0, 2.0, 3.0]));
        assert_eq!(reg.dim(&full), 6);
        let sub = ClassSpec::semisimple(re(&[1.0, 1.0, 3.0]));
        assert_eq!(sub.dim(&full), 4);
        let uni = ClassSpec { eigenvalues: re(&[1.0, 1.0, 3.0]), unipotent: UnipotentPart::Regular };
        assert_eq!(uni.dim(&full), 6);
        assert_eq!(reg.dim(&Partition::discrete(3)), 0);
    }

    #[test]
    fn two_level_dimension() {
        let q = IrregularType::new(
            3,
            vec![Term { k: 2, a: re(&[1.0, 1.0, -2.0]) }, Term { k: 1, a: re(&[0.0, 1.0, 3.0]) }],
        )
        .unwrap();
        assert_eq!(stokes_space_dim(&q), 22);
    }

    #[test]
    fn exponential_torus_examples() {
        let t = exponential_torus(&IrregularType::zero(2));
        assert_eq!(t.dim, 0);
        let q = IrregularType::one_level(1, re(&[0.0, 0.0, 1.0])).unwrap();
        let t = exponential_torus(&q);
        assert_eq!(t.dim, 1);
        assert!(t.centralizer_is_h);
        assert!(t.inside_center);
        assert_eq!(t.centralizer.sizes(), vec![2, 1]);
    }
}
