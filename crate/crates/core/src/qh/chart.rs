//! Charts: affine coordinates on products of factors, and implicit-function
//! charts on constraint subvarieties (reduced spaces).

use super::{from_raw, jets, FactorKind, Point, QhSpace, Tangent};
use crate::linalg::{lstsq, null_space, range_space, unit, zeros, Jet, Mat, C};
use crate::{Error, Result};

pub trait Chart {
    fn dim(&self) -> usize;
    /// Point with coordinates `x` (the base point is `x = 0`).
    fn point(&self, x: &[C]) -> Result<Point>;
    /// Coordinate vector fields at `point(x)`.
    fn basis(&self, x: &[C]) -> Result<Vec<Tangent>>;
}

/// `g0 (I + xi)` on group factors, `S0 + xi` on unipotent and linear factors.
pub struct AffineChart {
    kinds: Vec<FactorKind>,
    base: Point,
    coords: Vec<(usize, (usize, usize))>,
}

impl AffineChart {
    pub fn new(kinds: Vec<FactorKind>, base: Point) -> Self {
        let coords = kinds
            .iter()
            .enumerate()
            .flat_map(|(f, k)| k.coords().into_iter().map(move |ij| (f, ij)))
            .collect();
        AffineChart { kinds, base, coords }
    }

    /// Raw displacement of each factor for a coordinate vector.
    fn raw_direction(&self, f: usize, ij: (usize, usize)) -> Mat {
        let (r, c) = self.kinds[f].shape();
        let e = unit(r, c, ij.0, ij.1);
        match self.kinds[f] {
            FactorKind::Group { .. } => &self.base[f] * e,
            _ => e,
        }
    }

    pub fn kinds(&self) -> &[FactorKind] {
        &self.kinds
    }
}

impl Chart for AffineChart {
    fn dim(&self) -> usize {
        self.coords.len()
    }

    fn point(&self, x: &[C]) -> Result<Point> {
        if x.len() != self.dim() {
            return Err(Error::Dimension(format!("chart of dim {} given {} coords", self.dim(), x.len())));
        }
        let mut p = self.base.clone();
        for (&(f, ij), &v) in self.coords.iter().zip(x) {
            if v != C::new(0.0, 0.0) {
                p[f] += self.raw_direction(f, ij) * v;
            }
        }
        Ok(p)
    }

    fn basis(&self, x: &[C]) -> Result<Vec<Tangent>> {
        let p = self.point(x)?;
        self.coords
            .iter()
            .map(|&(f, ij)| {
                let mut d: Vec<Mat> = self.kinds.iter().map(|k| { let (r, c) = k.shape(); zeros(r, c) }).collect();
                d[f] = self.raw_direction(f, ij);
                from_raw(&self.kinds, &p, &d)
            })
            .collect()
    }
}

pub type Constraint<'a> = Box<dyn Fn(&[Jet]) -> Result<Vec<Jet>> + Send + Sync + 'a>;

fn flatten_v(f: &[Jet]) -> Vec<C> {
    f.iter().flat_map(|j| j.v.iter().copied().collect::<Vec<_>>()).collect()
}

fn flatten_d(f: &[Jet]) -> Vec<C> {
    f.iter().flat_map(|j| j.d.iter().copied().collect::<Vec<_>>()).collect()
}

/// Chart on `{F = 0}` inside an affine chart: `y(x) = T x + N z(x)` with `T`
/// spanning `ker dF` at the base and `z` found by Gauss-Newton.
pub struct ImplicitChart<'a> {
    ambient: AffineChart,
    constraint: Constraint<'a>,
    t: Mat,
    nrm: Mat,
}

impl<'a> ImplicitChart<'a> {
    pub fn new(ambient: AffineChart, constraint: Constraint<'a>) -> Result<Self> {
        let m = ambient.dim();
        let (f, j) = Self::eval(&ambient, &constraint, &vec![C::new(0.0, 0.0); m])?;
        let res = f.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if res > 1e-8 {
            return Err(Error::Invalid(format!("base point violates the constraints by {:.3e}", res)));
        }
        let t = null_space(&j, 1e-9);
        let nrm = range_space(&j.adjoint(), 1e-9);
        Ok(ImplicitChart { ambient, constraint, t, nrm })
    }

    /// Constraint values and Jacobian in ambient coordinates at `y`.
    fn eval(ambient: &AffineChart, constraint: &Constraint<'a>, y: &[C]) -> Result<(Vec<C>, Mat)> {
        let p = ambient.point(y)?;
        let basis = ambient.basis(y)?;
        let kinds = ambient.kinds();
        let f0 = flatten_v(&constraint(&crate::qh::constant_jets(&p))?);
        let mut j = zeros(f0.len(), basis.len());
        for (b, t) in basis.iter().enumerate() {
            let col = flatten_d(&constraint(&jets(kinds, &p, t))?);
            for (r, v) in col.into_iter().enumerate() {
                j[(r, b)] = v;
            }
        }
        Ok((f0, j))
    }

    fn solve(&self, x: &[C]) -> Result<(Vec<C>, Mat)> {
        if x.len() != self.dim() {
            return Err(Error::Dimension("implicit chart coordinates".into()));
        }
        let xv = Mat::from_column_slice(x.len(), 1, x);
        let base = &self.t * &xv;
        let mut z = zeros(self.nrm.ncols(), 1);
        for _ in 0..40 {
            let y = &base + &self.nrm * &z;
            let ys: Vec<C> = y.iter().copied().collect();
            let (f, j) = Self::eval(&self.ambient, &self.constraint, &ys)?;
            let res = f.iter().map(|v| v.norm()).fold(0.0, f64::max);
            if res < 1e-13 {
                return Ok((ys, j));
            }
            let fv = Mat::from_column_slice(f.len(), 1, &f);
            let dz = lstsq(&(&j * &self.nrm), &(-fv), 1e-12)?;
            z += dz;
        }
        Err(Error::Numerical("implicit chart: Newton did not converge".into()))
    }
}

impl Chart for ImplicitChart<'_> {
    fn dim(&self) -> usize {
        self.t.ncols()
    }

    fn point(&self, x: &[C]) -> Result<Point> {
        let (y, _) = self.solve(x)?;
        self.ambient.point(&y)
    }

    fn basis(&self, x: &[C]) -> Result<Vec<Tangent>> {
        let (y, j) = self.solve(x)?;
        let amb = self.ambient.basis(&y)?;
        let jn = &j * &self.nrm;
        let jt = &j * &self.t;
        let corr = lstsq(&jn, &jt, 1e-12)?;
        let dy = &self.t - &self.nrm * corr;
        let kinds = self.ambient.kinds();
        Ok((0..self.dim())
            .map(|a| {
                let w: Vec<C> = dy.column(a).iter().copied().collect();
                Tangent::combine(kinds, &amb, &w)
            })
            .collect())
    }
}

/// Chart dimension of a space at a point.
pub fn chart_dim(space: &dyn QhSpace, p: &Point) -> Result<usize> {
    Ok(space.chart(p)?.dim())
}
