//! Products, fusion, reduction at the identity and a rescaled two-form used
//! as a negative control.

use super::{
    chart::{AffineChart, Chart, ImplicitChart},
    constant_jets, FactorKind, FormTerm, GroupSpec, LocalData, Point, QhSpace, Rng,
};
use crate::linalg::{lstsq, zeros, Jet, Mat, C};
use crate::{Error, Result};

/// Plain product `M_1 x ... x M_k`, each acted on by its own groups.
pub struct Product {
    pub children: Vec<Box<dyn QhSpace>>,
}

impl Product {
    pub fn new(children: Vec<Box<dyn QhSpace>>) -> Self {
        Product { children }
    }
}

impl QhSpace for Product {
    fn label(&self) -> String {
        self.children.iter().map(|c| c.label()).collect::<Vec<_>>().join(" x ")
    }

    fn factors(&self) -> Vec<FactorKind> {
        self.children.iter().flat_map(|c| c.factors()).collect()
    }

    fn groups(&self) -> Vec<GroupSpec> {
        self.children.iter().flat_map(|c| c.groups()).collect()
    }

    fn local(&self, p: &[Jet]) -> Result<LocalData> {
        let mut out = LocalData { moment: vec![], terms: vec![] };
        let mut at = 0;
        for c in &self.children {
            let k = c.factors().len();
            let part = p.get(at..at + k).ok_or_else(|| Error::Dimension("product point too short".into()))?;
            let d = c.local(part)?;
            out.moment.extend(d.moment);
            out.terms.extend(d.terms);
            at += k;
        }
        Ok(out)
    }

    fn act(&self, g: &[Jet], p: &[Jet]) -> Result<Vec<Jet>> {
        let mut out = Vec::with_capacity(p.len());
        let (mut at, mut gat) = (0, 0);
        for c in &self.children {
            let (k, kg) = (c.factors().len(), c.groups().len());
            out.extend(c.act(&g[gat..gat + kg], &p[at..at + k])?);
            at += k;
            gat += kg;
        }
        Ok(out)
    }

    fn sample(&self, rng: &mut Rng) -> Result<Point> {
        let mut p = Vec::new();
        for c in &self.children {
            p.extend(c.sample(rng)?);
        }
        Ok(p)
    }
}

/// Fusion of group factors `i < j`: the diagonal acts, the moment map becomes
/// `mu_i mu_j` and the two-form gains `-1/2 (mu_i^* theta, mu_j^* thetabar)`.
pub struct Fused {
    pub inner: Box<dyn QhSpace>,
    pub i: usize,
    pub j: usize,
}

impl Fused {
    pub fn new(inner: Box<dyn QhSpace>, i: usize, j: usize) -> Result<Self> {
        let gs = inner.groups();
        if i >= j || j >= gs.len() {
            return Err(Error::Invalid(format!("cannot fuse groups {} and {} of {}", i, j, gs.len())));
        }
        if gs[i] != gs[j] {
            return Err(Error::Invalid("fused groups differ".into()));
        }
        Ok(Fused { inner, i, j })
    }

    fn expand(&self, g: &[Jet]) -> Vec<Jet> {
        let mut out = g.to_vec();
        out.insert(self.j, g[self.i].clone());
        out
    }
}

pub fn fuse(space: Box<dyn QhSpace>, i: usize, j: usize) -> Result<Fused> {
    Fused::new(space, i, j)
}

impl QhSpace for Fused {
    fn label(&self) -> String {
        format!("fuse({}; {},{})", self.inner.label(), self.i, self.j)
    }

    fn factors(&self) -> Vec<FactorKind> {
        self.inner.factors()
    }

    fn groups(&self) -> Vec<GroupSpec> {
        let mut g = self.inner.groups();
        g.remove(self.j);
        g
    }

    fn local(&self, p: &[Jet]) -> Result<LocalData> {
        let mut d = self.inner.local(p)?;
        let mj = d.moment.remove(self.j);
        let mi = &d.moment[self.i];
        d.terms.push(FormTerm::new(-0.5, mi.theta()?, mj.theta_bar()?));
        d.moment[self.i] = mi * &mj;
        Ok(d)
    }

    fn act(&self, g: &[Jet], p: &[Jet]) -> Result<Vec<Jet>> {
        self.inner.act(&self.expand(g), p)
    }

    fn sample(&self, rng: &mut Rng) -> Result<Point> {
        self.inner.sample(rng)
    }

    fn chart(&self, base: &Point) -> Result<Box<dyn Chart + '_>> {
        self.inner.chart(base)
    }
}

/// A global slice for the free action on `mu_k^{-1}(1)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Slice {
    /// The reduced group acts trivially: only the moment constraint is imposed.
    None,
    /// The factor is fixed to the identity; acting by the remaining groups is
    /// followed by the element of group `compensator` (parent numbering) in the
    /// reduced group, which restores the slice.
    FactorIdentity { factor: usize, compensator: Option<usize> },
}

pub type Sampler = Box<dyn Fn(&mut Rng) -> Result<Point> + Send + Sync>;

/// Reduction at the identity of one group factor, realized on a slice.
pub struct ReducedSlice {
    pub parent: Box<dyn QhSpace>,
    pub group: usize,
    pub slice: Slice,
    sampler: Option<Sampler>,
}

impl ReducedSlice {
    pub fn new(parent: Box<dyn QhSpace>, group: usize, slice: Slice) -> Result<Self> {
        let gs = parent.groups();
        if group >= gs.len() {
            return Err(Error::Invalid(format!("no group {}", group)));
        }
        if let Slice::FactorIdentity { factor, compensator } = &slice {
            let fk = parent.factors();
            match fk.get(*factor) {
                Some(FactorKind::Group { n, .. }) if *n == gs[group].n() => {}
                _ => return Err(Error::Invalid("slice factor must be a group factor of the reduced group".into())),
            }
            if let Some(c) = compensator {
                if *c == group || *c >= gs.len() || gs[*c].n() != gs[group].n() {
                    return Err(Error::Invalid("bad compensator group".into()));
                }
            }
        }
        Ok(ReducedSlice { parent, group, slice, sampler: None })
    }

    pub fn with_sampler(mut self, s: Sampler) -> Self {
        self.sampler = Some(s);
        self
    }

    /// `mu_group - I` and, for factor slices, `factor - I`.
    pub fn constraints(&self, p: &[Jet]) -> Result<Vec<Jet>> {
        let d = self.parent.local(p)?;
        let n = d.moment[self.group].v.nrows();
        let mut out = vec![&d.moment[self.group] - &Jet::identity(n)];
        if let Slice::FactorIdentity { factor, .. } = self.slice {
            out.push(&p[factor] - &Jet::identity(n));
        }
        Ok(out)
    }

    pub fn residual(&self, p: &Point) -> Result<f64> {
        Ok(self
            .constraints(&constant_jets(p))?
            .iter()
            .map(|j| crate::linalg::max_abs(&j.v))
            .fold(0.0, f64::max))
    }

    fn expand(&self, g: &[Jet]) -> Vec<Jet> {
        let n = self.parent.groups()[self.group].n();
        let comp = match self.slice {
            Slice::FactorIdentity { compensator: Some(c), .. } => {
                let k = if c < self.group { c } else { c - 1 };
                g[k].clone()
            }
            _ => Jet::identity(n),
        };
        let mut out = g.to_vec();
        out.insert(self.group, comp);
        out
    }

    /// Gauss-Newton projection of a parent point onto the constraints.
    pub fn project(&self, mut p: Point) -> Result<Point> {
        if let Slice::FactorIdentity { factor, .. } = self.slice {
            let n = p[factor].nrows();
            p[factor] = crate::linalg::eye(n);
        }
        for _ in 0..60 {
            let chart = AffineChart::new(self.parent.factors(), p.clone());
            let basis = chart.basis(&vec![C::new(0.0, 0.0); chart.dim()])?;
            let f: Vec<C> = self.constraints(&constant_jets(&p))?.iter().flat_map(|j| j.v.iter().copied().collect::<Vec<_>>()).collect();
            let res = f.iter().map(|z| z.norm()).fold(0.0, f64::max);
            if res < 1e-13 {
                return Ok(p);
            }
            let kinds = self.parent.factors();
            let mut jac = zeros(f.len(), basis.len());
            for (b, t) in basis.iter().enumerate() {
                let col: Vec<C> = self
                    .constraints(&super::jets(&kinds, &p, t))?
                    .iter()
                    .flat_map(|j| j.d.iter().copied().collect::<Vec<_>>())
                    .collect();
                for (r, v) in col.into_iter().enumerate() {
                    jac[(r, b)] = v;
                }
            }
            let fv = Mat::from_column_slice(f.len(), 1, &f);
            let dx = lstsq(&jac, &(-fv), 1e-12)?;
            let x: Vec<C> = dx.iter().copied().collect();
            p = chart.point(&x)?;
        }
        Err(Error::NoSample("projection onto the reduced space did not converge".into()))
    }
}

pub fn reduce_at_identity(parent: Box<dyn QhSpace>, group: usize, slice: Slice) -> Result<ReducedSlice> {
    ReducedSlice::new(parent, group, slice)
}

impl QhSpace for ReducedSlice {
    fn label(&self) -> String {
        format!("reduce({}; {})", self.parent.label(), self.group)
    }

    fn factors(&self) -> Vec<FactorKind> {
        self.parent.factors()
    }

    fn groups(&self) -> Vec<GroupSpec> {
        let mut g = self.parent.groups();
        g.remove(self.group);
        g
    }

    fn local(&self, p: &[Jet]) -> Result<LocalData> {
        let mut d = self.parent.local(p)?;
        d.moment.remove(self.group);
        Ok(d)
    }

    fn act(&self, g: &[Jet], p: &[Jet]) -> Result<Vec<Jet>> {
        self.parent.act(&self.expand(g), p)
    }

    fn sample(&self, rng: &mut Rng) -> Result<Point> {
        match &self.sampler {
            Some(s) => s(rng),
            None => {
                for _ in 0..20 {
                    if let Ok(p) = self.project(self.parent.sample(rng)?) {
                        return Ok(p);
                    }
                }
                Err(Error::NoSample("no point found on the reduced space".into()))
            }
        }
    }

    fn chart(&self, base: &Point) -> Result<Box<dyn Chart + '_>> {
        let ambient = AffineChart::new(self.parent.factors(), base.clone());
        Ok(Box::new(ImplicitChart::new(ambient, Box::new(move |j| self.constraints(j)))?))
    }

    fn check_point(&self, p: &Point) -> Result<()> {
        self.parent.check_point(p)?;
        let r = self.residual(p)?;
        if r > 1e-8 {
            return Err(Error::Invalid(format!("point violates the reduction constraints by {:.3e}", r)));
        }
        Ok(())
    }
}

/// The same space with the two-form multiplied by a constant.
pub struct ScaledForm {
    pub inner: Box<dyn QhSpace>,
    pub scale: f64,
}

impl QhSpace for ScaledForm {
    fn label(&self) -> String {
        format!("{}*{}", self.scale, self.inner.label())
    }

    fn factors(&self) -> Vec<FactorKind> {
        self.inner.factors()
    }

    fn groups(&self) -> Vec<GroupSpec> {
        self.inner.groups()
    }

    fn local(&self, p: &[Jet]) -> Result<LocalData> {
        let mut d = self.inner.local(p)?;
        for t in d.terms.iter_mut() {
            t.coef *= self.scale;
        }
        Ok(d)
    }

    fn act(&self, g: &[Jet], p: &[Jet]) -> Result<Vec<Jet>> {
        self.inner.act(g, p)
    }

    fn sample(&self, rng: &mut Rng) -> Result<Point> {
        self.inner.sample(rng)
    }

    fn chart(&self, base: &Point) -> Result<Box<dyn Chart + '_>> {
        self.inner.chart(base)
    }
}
