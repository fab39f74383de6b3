//! Complex matrix helpers and first-order jets.
//!
//! A [`Jet`] carries a matrix value together with its derivative along one
//! tangent direction. Products and inverses follow the Leibniz rule, so any
//! formula written with jets yields exact differentials of moment maps and of
//! the one-forms entering the two-forms.

use crate::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use std::ops::{Add, Mul, Neg, Sub};

pub type C = Complex64;
pub type Mat = DMatrix<C>;

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

pub fn eye(n: usize) -> Mat {
    Mat::identity(n, n)
}

pub fn zeros(r: usize, cols: usize) -> Mat {
    Mat::zeros(r, cols)
}

/// Matrix unit `E_ij` of size `r x cols`.
pub fn unit(r: usize, cols: usize, i: usize, j: usize) -> Mat {
    let mut m = zeros(r, cols);
    m[(i, j)] = C::new(1.0, 0.0);
    m
}

pub fn diag(entries: &[C]) -> Mat {
    Mat::from_diagonal(&nalgebra::DVector::from_column_slice(entries))
}

pub fn inv(m: &Mat) -> Result<Mat> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!("inverse of {}x{}", m.nrows(), m.ncols())));
    }
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let lu = m.clone().lu();
    let det = lu.determinant();
    if det.norm() <= 1e-13 * scale.powi(m.nrows() as i32) {
        return Err(Error::Singular(format!("determinant {:.3e}", det.norm())));
    }
    lu.try_inverse()
        .ok_or_else(|| Error::Singular("LU inverse failed".into()))
}

/// `tr(AB)` without forming the product.
pub fn tr_prod(a: &Mat, b: &Mat) -> C {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut s = C::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            s += a[(i, k)] * b[(k, i)];
        }
    }
    s
}

pub fn commutator(a: &Mat, b: &Mat) -> Mat {
    a * b - b * a
}

/// Largest entry modulus.
pub fn max_abs(m: &Mat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn dist(a: &Mat, b: &Mat) -> f64 {
    max_abs(&(a - b))
}

pub fn singular_values(m: &Mat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

/// Numerical rank with a threshold relative to the largest singular value.
pub fn rank(m: &Mat, rel_tol: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        None => 0,
        Some(&top) if top == 0.0 => 0,
        Some(&top) => s.iter().filter(|&&x| x > rel_tol * top.max(1.0)).count(),
    }
}

/// Orthonormal basis (as columns) of the right null space.
pub fn null_space(m: &Mat, rel_tol: f64) -> Mat {
    let n = m.ncols();
    if m.nrows() == 0 {
        return eye(n);
    }
    // Pad to a square matrix so the SVD returns a full V.
    let rows = m.nrows().max(n);
    let mut a = zeros(rows, n);
    a.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
    let svd = a.svd(false, true);
    let vt = svd.v_t.expect("v_t requested");
    let top = svd.singular_values.iter().copied().fold(0.0, f64::max).max(1.0);
    let cols: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] <= rel_tol * top)
        .collect();
    let mut out = zeros(n, cols.len());
    for (k, &i) in cols.iter().enumerate() {
        for j in 0..n {
            out[(j, k)] = vt[(i, j)].conj();
        }
    }
    out
}

/// Orthonormal basis (as columns) of the column space.
pub fn range_space(m: &Mat, rel_tol: f64) -> Mat {
    let (r, n) = (m.nrows(), m.ncols());
    if r == 0 || n == 0 {
        return zeros(r, 0);
    }
    let cols = r.max(n);
    let mut a = zeros(r, cols);
    a.view_mut((0, 0), (r, n)).copy_from(m);
    let svd = a.svd(true, false);
    let u = svd.u.expect("u requested");
    let top = svd.singular_values.iter().copied().fold(0.0, f64::max).max(1.0);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > rel_tol * top)
        .collect();
    let mut out = zeros(r, keep.len());
    for (k, &i) in keep.iter().enumerate() {
        out.set_column(k, &u.column(i));
    }
    out
}

/// Minimum-norm least-squares solution of `a x = b`.
pub fn lstsq(a: &Mat, b: &Mat, rel_tol: f64) -> Result<Mat> {
    let svd = a.clone().svd(true, true);
    let top = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let eps = (rel_tol * top).max(1e-300);
    svd.solve(b, eps).map_err(|e| Error::Numerical(e.to_string()))
}

/// Uniform sample from the complex disk of the given radius.
pub fn rand_disk<R: Rng + ?Sized>(rng: &mut R, radius: f64) -> C {
    let r = radius * rng.random::<f64>().sqrt();
    let t = std::f64::consts::TAU * rng.random::<f64>();
    C::from_polar(r, t)
}

pub fn rand_mat<R: Rng + ?Sized>(rng: &mut R, r: usize, cols: usize, radius: f64) -> Mat {
    Mat::from_fn(r, cols, |_, _| rand_disk(rng, radius))
}

/// Identity plus a random perturbation; invertible for radius below `1/n`.
pub fn rand_near_identity<R: Rng + ?Sized>(rng: &mut R, n: usize, radius: f64) -> Mat {
    eye(n) + rand_mat(rng, n, n, radius)
}

/// Random element of `GL_n`, retrying until comfortably invertible.
pub fn rand_group<R: Rng + ?Sized>(rng: &mut R, n: usize, radius: f64) -> Mat {
    loop {
        let g = rand_near_identity(rng, n, radius);
        if g.clone().lu().determinant().norm() > 0.05 {
            return g;
        }
    }
}

/// A matrix value with its derivative along one direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub v: Mat,
    pub d: Mat,
}

impl Jet {
    pub fn new(v: Mat, d: Mat) -> Self {
        debug_assert_eq!(v.shape(), d.shape());
        Jet { v, d }
    }

    pub fn constant(v: Mat) -> Self {
        let d = zeros(v.nrows(), v.ncols());
        Jet { v, d }
    }

    pub fn identity(n: usize) -> Self {
        Jet::constant(eye(n))
    }

    pub fn inv(&self) -> Result<Jet> {
        let vi = inv(&self.v)?;
        let d = -(&vi * &self.d * &vi);
        Ok(Jet { v: vi, d })
    }

    pub fn scale(&self, s: C) -> Jet {
        Jet { v: &self.v * s, d: &self.d * s }
    }

    /// Left Maurer-Cartan form `g^{-1} dg` evaluated on the direction.
    pub fn theta(&self) -> Result<Mat> {
        Ok(inv(&self.v)? * &self.d)
    }

    /// Right Maurer-Cartan form `dg g^{-1}` evaluated on the direction.
    pub fn theta_bar(&self) -> Result<Mat> {
        Ok(&self.d * inv(&self.v)?)
    }

    pub fn transpose(&self) -> Jet {
        Jet { v: self.v.transpose(), d: self.d.transpose() }
    }

    /// Product of a list, left to right.
    pub fn product<'a, I: IntoIterator<Item = &'a Jet>>(n: usize, it: I) -> Jet {
        let mut acc = Jet::identity(n);
        for j in it {
            acc = &acc * j;
        }
        acc
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, o: &Jet) -> Jet {
        Jet { v: &self.v * &o.v, d: &self.d * &o.v + &self.v * &o.d }
    }
}

impl Mul<&Mat> for &Jet {
    type Output = Jet;
    fn mul(self, o: &Mat) -> Jet {
        Jet { v: &self.v * o, d: &self.d * o }
    }
}

impl Mul<&Jet> for &Mat {
    type Output = Jet;
    fn mul(self, o: &Jet) -> Jet {
        Jet { v: self * &o.v, d: self * &o.d }
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, o: &Jet) -> Jet {
        Jet { v: &self.v + &o.v, d: &self.d + &o.d }
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, o: &Jet) -> Jet {
        Jet { v: &self.v - &o.v, d: &self.d - &o.d }
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet { v: -&self.v, d: -&self.d }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn jet_inverse_matches_difference_quotient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = rand_group(&mut rng, 3, 0.4);
        let dg = rand_mat(&mut rng, 3, 3, 1.0);
        let j = Jet::new(g.clone(), dg.clone()).inv().unwrap();
        let h = 1e-6;
        let fd = (inv(&(&g + &dg * c(h, 0.0))).unwrap() - inv(&(&g - &dg * c(h, 0.0))).unwrap())
            / c(2.0 * h, 0.0);
        assert!(dist(&fd, &j.d) < 1e-7);
    }

    #[test]
    fn null_space_of_rank_one() {
        let m = Mat::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(4.0, 0.0)]);
        let ns = null_space(&m, 1e-10);
        assert_eq!(ns.ncols(), 1);
        assert!(max_abs(&(&m * &ns)) < 1e-12);
        assert_eq!(rank(&m, 1e-10), 1);
    }

    #[test]
    fn singular_inverse_is_an_error() {
        assert!(inv(&zeros(2, 2)).is_err());
    }
}
