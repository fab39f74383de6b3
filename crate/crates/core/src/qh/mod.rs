//! Charted quasi-Hamiltonian spaces.
//!
//! A space is a product of matrix factors. Tangent vectors are stored per
//! factor: left-trivialized (`dg = g xi`) for group and unipotent factors, as
//! raw derivatives for linear factors. All evaluation goes through jets, so a
//! single formula yields moment maps, their differentials and the one-forms
//! that build the two-form
//!
//! `omega(u, v) = sum_t coef_t (tr(L_t(u) R_t(v)) - tr(L_t(v) R_t(u)))`.

pub mod chart;
pub mod combinators;
pub mod spaces;
pub mod verify;

use crate::lie::{Partition, Root, UnipotentPattern};
use crate::linalg::{eye, inv, tr_prod, zeros, Jet, Mat, C};
use crate::{Error, Result};
use rand_chacha::ChaCha8Rng;

pub use chart::{AffineChart, Chart, ImplicitChart};
pub use combinators::{Fused, Product, ReducedSlice, ScaledForm, Slice};
pub use spaces::{ConjugacyClass, InternallyFusedDouble, UnipotentList, VanDenBergh};

pub type Rng = ChaCha8Rng;
pub type Point = Vec<Mat>;

/// The kind of one matrix factor of a space.
#[derive(Debug, Clone, PartialEq)]
pub enum FactorKind {
    /// Element of `GL_n`; chart and tangent directions supported on `mask`.
    Group { n: usize, mask: Vec<Root> },
    /// Element of a unipotent pattern group.
    Unipotent(UnipotentPattern),
    /// Arbitrary `rows x cols` matrix.
    Linear { rows: usize, cols: usize },
}

impl FactorKind {
    pub fn group_full(n: usize) -> Self {
        FactorKind::Group { n, mask: Partition::full(n).mask() }
    }

    pub fn group_levi(h: &Partition) -> Self {
        FactorKind::Group { n: h.n, mask: h.mask() }
    }

    /// Positions of the chart coordinates.
    pub fn coords(&self) -> Vec<Root> {
        match self {
            FactorKind::Group { mask, .. } => mask.clone(),
            FactorKind::Unipotent(p) => p.positions.iter().copied().collect(),
            FactorKind::Linear { rows, cols } => {
                (0..*rows).flat_map(|i| (0..*cols).map(move |j| (i, j))).collect()
            }
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            FactorKind::Group { n, .. } => (*n, *n),
            FactorKind::Unipotent(p) => (p.n, p.n),
            FactorKind::Linear { rows, cols } => (*rows, *cols),
        }
    }

    fn is_group(&self) -> bool {
        !matches!(self, FactorKind::Linear { .. })
    }

    /// Membership check for a point value.
    pub fn check(&self, m: &Mat) -> Result<()> {
        if m.shape() != self.shape() {
            return Err(Error::Dimension(format!("factor {:?} given {:?}", self.shape(), m.shape())));
        }
        match self {
            FactorKind::Group { .. } => inv(m).map(|_| ()),
            FactorKind::Unipotent(p) => {
                let scale = m.iter().map(|z| z.norm()).fold(1.0, f64::max);
                if p.contains_matrix(m, 1e-10 * scale) {
                    Ok(())
                } else {
                    Err(Error::Pattern("unipotent factor off its pattern".into()))
                }
            }
            FactorKind::Linear { .. } => Ok(()),
        }
    }
}

/// A block-diagonal acting group inside `GL_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSpec {
    pub levi: Partition,
}

impl GroupSpec {
    pub fn full(n: usize) -> Self {
        GroupSpec { levi: Partition::full(n) }
    }

    pub fn n(&self) -> usize {
        self.levi.n
    }

    pub fn dim(&self) -> usize {
        self.levi.dim()
    }

    /// Lie algebra basis `E_ij` over the block mask.
    pub fn basis(&self) -> Vec<Mat> {
        let n = self.n();
        self.levi.mask().into_iter().map(|(i, j)| crate::linalg::unit(n, n, i, j)).collect()
    }
}

/// A tangent vector: one matrix per factor, see the module docs.
#[derive(Debug, Clone, PartialEq)]
pub struct Tangent(pub Vec<Mat>);

impl Tangent {
    pub fn zero(kinds: &[FactorKind]) -> Self {
        Tangent(kinds.iter().map(|k| { let (r, c) = k.shape(); zeros(r, c) }).collect())
    }

    pub fn add(&self, o: &Tangent) -> Tangent {
        Tangent(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }

    pub fn scale(&self, s: C) -> Tangent {
        Tangent(self.0.iter().map(|a| a * s).collect())
    }

    /// Linear combination `sum_k w_k t_k`.
    pub fn combine(kinds: &[FactorKind], ts: &[Tangent], w: &[C]) -> Tangent {
        let mut out = Tangent::zero(kinds);
        for (t, &x) in ts.iter().zip(w) {
            if x != C::new(0.0, 0.0) {
                out = out.add(&t.scale(x));
            }
        }
        out
    }
}

/// Raw derivatives `dg` from stored tangent components.
pub fn to_raw(kinds: &[FactorKind], p: &[Mat], u: &Tangent) -> Vec<Mat> {
    kinds
        .iter()
        .zip(p.iter().zip(&u.0))
        .map(|(k, (g, x))| if k.is_group() { g * x } else { x.clone() })
        .collect()
}

/// Stored tangent components from raw derivatives.
pub fn from_raw(kinds: &[FactorKind], p: &[Mat], d: &[Mat]) -> Result<Tangent> {
    let mut out = Vec::with_capacity(d.len());
    for (k, (g, x)) in kinds.iter().zip(p.iter().zip(d)) {
        out.push(if k.is_group() { inv(g)? * x } else { x.clone() });
    }
    Ok(Tangent(out))
}

pub fn jets(kinds: &[FactorKind], p: &[Mat], u: &Tangent) -> Vec<Jet> {
    p.iter().cloned().zip(to_raw(kinds, p, u)).map(|(v, d)| Jet::new(v, d)).collect()
}

pub fn constant_jets(p: &[Mat]) -> Vec<Jet> {
    p.iter().cloned().map(Jet::constant).collect()
}

/// One summand `coef (L wedge R)` of the two-form, evaluated on a direction.
#[derive(Debug, Clone)]
pub struct FormTerm {
    pub coef: f64,
    pub left: Mat,
    pub right: Mat,
}

impl FormTerm {
    pub fn new(coef: f64, left: Mat, right: Mat) -> Self {
        FormTerm { coef, left, right }
    }
}

/// Moment map jets and two-form summands along one direction.
#[derive(Debug, Clone)]
pub struct LocalData {
    pub moment: Vec<Jet>,
    pub terms: Vec<FormTerm>,
}

/// `omega(u, v)` from the data of `u` and `v` at the same point.
pub fn pair(a: &LocalData, b: &LocalData) -> C {
    let mut s = C::new(0.0, 0.0);
    for (x, y) in a.terms.iter().zip(&b.terms) {
        s += (tr_prod(&x.left, &y.right) - tr_prod(&y.left, &x.right)) * x.coef;
    }
    s
}

/// A quasi-Hamiltonian space with a chart, moment map and two-form.
pub trait QhSpace: Send + Sync {
    fn label(&self) -> String;
    fn factors(&self) -> Vec<FactorKind>;
    fn groups(&self) -> Vec<GroupSpec>;

    /// Moment map and two-form summands along the direction carried by the jets.
    fn local(&self, p: &[Jet]) -> Result<LocalData>;

    /// Action of group elements (one per group) on a point; jets on both sides
    /// so that pushforwards and fundamental fields come from the same formula.
    fn act(&self, g: &[Jet], p: &[Jet]) -> Result<Vec<Jet>>;

    fn sample(&self, rng: &mut Rng) -> Result<Point>;

    fn chart(&self, base: &Point) -> Result<Box<dyn Chart + '_>> {
        Ok(Box::new(AffineChart::new(self.factors(), base.clone())))
    }

    fn check_point(&self, p: &Point) -> Result<()> {
        let kinds = self.factors();
        if kinds.len() != p.len() {
            return Err(Error::Dimension(format!("{} factors, {} given", kinds.len(), p.len())));
        }
        for (k, m) in kinds.iter().zip(p) {
            k.check(m)?;
        }
        self.local(&constant_jets(p)).map(|_| ())
    }
}

/// Convenience evaluations shared by every space.
pub trait QhSpaceExt: QhSpace {
    fn moment_map(&self, p: &Point) -> Result<Vec<Mat>> {
        Ok(self.local(&constant_jets(p))?.moment.into_iter().map(|j| j.v).collect())
    }

    fn local_at(&self, p: &Point, u: &Tangent) -> Result<LocalData> {
        self.local(&jets(&self.factors(), p, u))
    }

    fn eval_two_form(&self, p: &Point, u: &Tangent, v: &Tangent) -> Result<C> {
        let kinds = self.factors();
        if u.0.len() != kinds.len() || v.0.len() != kinds.len() {
            return Err(Error::Dimension("tangent does not match the point".into()));
        }
        Ok(pair(&self.local_at(p, u)?, &self.local_at(p, v)?))
    }

    /// `v_X = -d/dt (exp(tX) . p)` at `t = 0`.
    fn fundamental_vector_field(&self, x: &[Mat], p: &Point) -> Result<Tangent> {
        let groups = self.groups();
        if x.len() != groups.len() {
            return Err(Error::Dimension("one Lie algebra element per group".into()));
        }
        let g: Vec<Jet> = groups.iter().zip(x).map(|(s, xi)| Jet::new(eye(s.n()), -xi)).collect();
        let out = self.act(&g, &constant_jets(p))?;
        let d: Vec<Mat> = out.into_iter().map(|j| j.d).collect();
        from_raw(&self.factors(), p, &d)
    }

    fn act_point(&self, g: &[Mat], p: &Point) -> Result<Point> {
        let gj: Vec<Jet> = g.iter().cloned().map(Jet::constant).collect();
        Ok(self.act(&gj, &constant_jets(p))?.into_iter().map(|j| j.v).collect())
    }

    /// Pushforward of a tangent vector under the action of `g`.
    fn act_tangent(&self, g: &[Mat], p: &Point, u: &Tangent) -> Result<(Point, Tangent)> {
        let kinds = self.factors();
        let gj: Vec<Jet> = g.iter().cloned().map(Jet::constant).collect();
        let out = self.act(&gj, &jets(&kinds, p, u))?;
        let q: Point = out.iter().map(|j| j.v.clone()).collect();
        let d: Vec<Mat> = out.into_iter().map(|j| j.d).collect();
        let t = from_raw(&kinds, &q, &d)?;
        Ok((q, t))
    }

    fn dim_at(&self, p: &Point) -> Result<usize> {
        Ok(self.chart(p)?.dim())
    }
}

impl<T: QhSpace + ?Sized> QhSpaceExt for T {}

impl QhSpace for Box<dyn QhSpace> {
    fn label(&self) -> String {
        (**self).label()
    }
    fn factors(&self) -> Vec<FactorKind> {
        (**self).factors()
    }
    fn groups(&self) -> Vec<GroupSpec> {
        (**self).groups()
    }
    fn local(&self, p: &[Jet]) -> Result<LocalData> {
        (**self).local(p)
    }
    fn act(&self, g: &[Jet], p: &[Jet]) -> Result<Vec<Jet>> {
        (**self).act(g, p)
    }
    fn sample(&self, rng: &mut Rng) -> Result<Point> {
        (**self).sample(rng)
    }
    fn chart(&self, base: &Point) -> Result<Box<dyn Chart + '_>> {
        (**self).chart(base)
    }
    fn check_point(&self, p: &Point) -> Result<()> {
        (**self).check_point(p)
    }
}
