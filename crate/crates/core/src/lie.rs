//! Type-A root data, unipotent patterns and parabolics.
//!
//! A root `e_i - e_j` of `gl_n` is the ordered pair `(i, j)` (0-based), and a
//! unipotent pattern is a set of such pairs: the group `I + span{E_ij}`.

use crate::linalg::{eye, tr_prod, Jet, Mat, C};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

pub type Root = (usize, usize);

/// The roots of `gl_n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootDatum {
    pub n: usize,
    pub roots: Vec<Root>,
}

impl RootDatum {
    pub fn gl(n: usize) -> Self {
        let roots = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .collect();
        RootDatum { n, roots }
    }

    pub fn is_root(&self, a: Root) -> bool {
        a.0 != a.1 && a.0 < self.n && a.1 < self.n
    }

    /// `alpha + beta` if it is a root.
    pub fn sum(&self, a: Root, b: Root) -> Option<Root> {
        if a.1 == b.0 && a.0 != b.1 {
            Some((a.0, b.1))
        } else if b.1 == a.0 && b.0 != a.1 {
            Some((b.0, a.1))
        } else {
            None
        }
    }
}

pub fn negate(a: Root) -> Root {
    (a.1, a.0)
}

/// Ordered block sizes, giving the Levi `prod GL(V_i)` and the block-upper
/// and block-lower unipotent radicals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockGrading {
    pub block_sizes: Vec<usize>,
}

impl BlockGrading {
    pub fn new(block_sizes: Vec<usize>) -> Result<Self> {
        if block_sizes.iter().any(|&b| b == 0) {
            return Err(Error::Invalid("block sizes must be positive".into()));
        }
        Ok(BlockGrading { block_sizes })
    }

    pub fn n(&self) -> usize {
        self.block_sizes.iter().sum()
    }

    fn block_of(&self) -> Vec<usize> {
        self.block_sizes
            .iter()
            .enumerate()
            .flat_map(|(b, &s)| std::iter::repeat_n(b, s))
            .collect()
    }

    pub fn partition(&self) -> Partition {
        Partition::from_labels(&self.block_of())
    }

    /// Block strictly upper triangular positions.
    pub fn upper(&self) -> UnipotentPattern {
        let b = self.block_of();
        let n = self.n();
        let pos = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| b[i] < b[j])
            .collect();
        UnipotentPattern { n, positions: pos }
    }

    pub fn lower(&self) -> UnipotentPattern {
        self.upper().opposite()
    }
}

/// A partition of `{0..n}` describing a block-diagonal subgroup of `GL_n`
/// (blocks need not be contiguous).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    pub n: usize,
    pub parts: Vec<Vec<usize>>,
}

impl Partition {
    /// Parts are the level sets of `labels`, ordered by first occurrence.
    pub fn from_labels<T: PartialEq>(labels: &[T]) -> Self {
        let mut parts: Vec<Vec<usize>> = Vec::new();
        let mut reps: Vec<usize> = Vec::new();
        for i in 0..labels.len() {
            match reps.iter().position(|&r| labels[r] == labels[i]) {
                Some(k) => parts[k].push(i),
                None => {
                    reps.push(i);
                    parts.push(vec![i]);
                }
            }
        }
        Partition { n: labels.len(), parts }
    }

    pub fn full(n: usize) -> Self {
        Partition { n, parts: if n == 0 { vec![] } else { vec![(0..n).collect()] } }
    }

    pub fn discrete(n: usize) -> Self {
        Partition { n, parts: (0..n).map(|i| vec![i]).collect() }
    }

    pub fn label(&self) -> Vec<usize> {
        let mut l = vec![0; self.n];
        for (k, p) in self.parts.iter().enumerate() {
            for &i in p {
                l[i] = k;
            }
        }
        l
    }

    pub fn same_part(&self, i: usize, j: usize) -> bool {
        let l = self.label();
        l[i] == l[j]
    }

    /// Positions `(i,j)` with `i,j` in the same part: the Lie algebra support.
    pub fn mask(&self) -> Vec<Root> {
        let l = self.label();
        (0..self.n)
            .flat_map(|i| (0..self.n).map(move |j| (i, j)))
            .filter(|&(i, j)| l[i] == l[j])
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.parts.iter().map(|p| p.len() * p.len()).sum()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.parts.iter().map(|p| p.len()).collect()
    }

    /// Concatenation of the parts: a permutation bringing the blocks together.
    pub fn permutation(&self) -> Vec<usize> {
        self.parts.iter().flatten().copied().collect()
    }

    /// True when `self` refines `other` (every part inside a part of `other`).
    pub fn refines(&self, other: &Partition) -> bool {
        let lo = other.label();
        self.parts.iter().all(|p| p.iter().all(|&i| lo[i] == lo[p[0]]))
    }

    /// Whether a matrix is block diagonal for this partition.
    pub fn contains(&self, m: &Mat, tol: f64) -> bool {
        let l = self.label();
        (0..self.n).all(|i| (0..self.n).all(|j| l[i] == l[j] || m[(i, j)].norm() <= tol))
    }
}

/// The support of a unipotent subgroup `I + span{E_ij : (i,j) in positions}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UnipotentPattern {
    pub n: usize,
    pub positions: BTreeSet<Root>,
}

impl UnipotentPattern {
    /// Validates closedness and nilpotence.
    pub fn new(n: usize, positions: impl IntoIterator<Item = Root>) -> Result<Self> {
        let p = UnipotentPattern { n, positions: positions.into_iter().collect() };
        if p.positions.iter().any(|&(i, j)| i == j || i >= n || j >= n) {
            return Err(Error::Pattern("positions must be off-diagonal roots".into()));
        }
        if !p.is_closed() {
            return Err(Error::Pattern(format!("{:?} is not closed", p.positions)));
        }
        if p.has_cycle() {
            return Err(Error::Pattern(format!("{:?} is not nilpotent", p.positions)));
        }
        Ok(p)
    }

    pub fn empty(n: usize) -> Self {
        UnipotentPattern { n, positions: BTreeSet::new() }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn contains(&self, a: Root) -> bool {
        self.positions.contains(&a)
    }

    pub fn is_closed(&self) -> bool {
        is_closed(&self.positions)
    }

    fn has_cycle(&self) -> bool {
        heights(&self.positions).is_none()
    }

    pub fn opposite(&self) -> Self {
        UnipotentPattern { n: self.n, positions: self.positions.iter().map(|&a| negate(a)).collect() }
    }

    pub fn union(&self, other: &Self) -> BTreeSet<Root> {
        self.positions.union(&other.positions).copied().collect()
    }

    /// Whether `m` lies in the group: unit diagonal and support on the pattern.
    pub fn contains_matrix(&self, m: &Mat, tol: f64) -> bool {
        (0..self.n).all(|i| {
            (0..self.n).all(|j| {
                let target = if i == j { C::new(1.0, 0.0) } else { C::new(0.0, 0.0) };
                self.positions.contains(&(i, j)) || (m[(i, j)] - target).norm() <= tol
            })
        })
    }

    /// `I + sum x_k E_{p_k}` with positions in sorted order.
    pub fn element(&self, coords: &[C]) -> Mat {
        let mut m = eye(self.n);
        for (&(i, j), &x) in self.positions.iter().zip(coords) {
            m[(i, j)] = x;
        }
        m
    }

    /// Whether conjugation by the block-diagonal group of `h` preserves the pattern.
    pub fn normalized_by(&self, h: &Partition) -> bool {
        let l = h.label();
        self.positions.iter().all(|&(i, j)| {
            (0..self.n).all(|a| {
                (0..self.n).all(|b| l[a] != l[i] || l[b] != l[j] || self.positions.contains(&(a, b)))
            })
        })
    }
}

/// `alpha, beta in S` and `alpha + beta` a root implies `alpha + beta in S`.
pub fn is_closed(s: &BTreeSet<Root>) -> bool {
    s.iter().all(|&(i, j)| {
        s.iter().filter(|&&(k, _)| k == j).all(|&(_, l)| l == i || s.contains(&(i, l)))
    })
}

/// Longest-chain height of each position in a nilpotent support, or `None`
/// when the support contains a cycle.
pub fn heights(s: &BTreeSet<Root>) -> Option<BTreeMap<Root, usize>> {
    let n = s.iter().map(|&(i, j)| i.max(j) + 1).max().unwrap_or(0);
    let mut indeg = vec![0usize; n];
    for &(_, j) in s {
        indeg[j] += 1;
    }
    let mut topo: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut k = 0;
    while k < topo.len() {
        let v = topo[k];
        k += 1;
        for &(_, j) in s.range((v, 0)..(v + 1, 0)) {
            indeg[j] -= 1;
            if indeg[j] == 0 {
                topo.push(j);
            }
        }
    }
    if topo.len() < n {
        return None;
    }
    let mut out = BTreeMap::new();
    for src in 0..n {
        let mut longest: Vec<Option<usize>> = vec![None; n];
        longest[src] = Some(0);
        for &v in &topo {
            if let Some(lv) = longest[v] {
                for &(_, j) in s.range((v, 0)..(v + 1, 0)) {
                    longest[j] = Some(longest[j].map_or(lv + 1, |x| x.max(lv + 1)));
                }
            }
        }
        for &(i, j) in s.range((src, 0)..(src + 1, 0)) {
            out.insert((i, j), longest[j].unwrap_or(1));
        }
    }
    Some(out)
}

/// A real weight vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cocharacter {
    pub weights: Vec<f64>,
}

impl Cocharacter {
    pub fn pair(&self, a: Root) -> f64 {
        self.weights[a.0] - self.weights[a.1]
    }
}

/// The invariant form `(X, Y) = tr(XY)`.
pub fn trace_form(x: &Mat, y: &Mat) -> Result<C> {
    if x.shape() != y.shape() || x.nrows() != x.ncols() {
        return Err(Error::Dimension(format!("{:?} vs {:?}", x.shape(), y.shape())));
    }
    Ok(tr_prod(x, y))
}

/// Unipotent radical and Levi of the parabolic attached to a cocharacter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parabolic {
    pub pattern: UnipotentPattern,
    /// Level sets of the weights, ordered by decreasing weight.
    pub levi: Partition,
    pub permutation: Vec<usize>,
}

/// `(i,j)` is in the radical iff `lambda_i - lambda_j > tol`; weights closer
/// than `tol` are treated as equal.
pub fn parabolic_from_cocharacter(l: &Cocharacter, tol: f64) -> Parabolic {
    let n = l.weights.len();
    let positions = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| l.weights[i] - l.weights[j] > tol)
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| l.weights[b].partial_cmp(&l.weights[a]).unwrap().then(a.cmp(&b)));
    let mut parts: Vec<Vec<usize>> = Vec::new();
    for &i in &order {
        match parts.last_mut() {
            Some(p) if (l.weights[p[0]] - l.weights[i]).abs() <= tol => p.push(i),
            _ => parts.push(vec![i]),
        }
    }
    for p in parts.iter_mut() {
        p.sort();
    }
    let levi = Partition { n, parts };
    let permutation = levi.permutation();
    Parabolic { pattern: UnipotentPattern { n, positions }, levi, permutation }
}

pub fn opposite(p: &UnipotentPattern) -> UnipotentPattern {
    p.opposite()
}

/// Factor `u` as an ordered product `F_0 F_1 ... F_k` with `F_j` in `order[j]`.
pub fn direct_span_factorize(u: &Mat, order: &[UnipotentPattern]) -> Result<Vec<Mat>> {
    Ok(direct_span_factorize_jet(&Jet::constant(u.clone()), order)?.into_iter().map(|j| j.v).collect())
}

/// Jet version: the derivative of the factors along the direction of `u`.
pub fn direct_span_factorize_jet(u: &Jet, order: &[UnipotentPattern]) -> Result<Vec<Jet>> {
    let n = u.v.nrows();
    let mut owner: BTreeMap<Root, usize> = BTreeMap::new();
    for (k, p) in order.iter().enumerate() {
        if p.n != n {
            return Err(Error::Dimension("pattern size differs from matrix size".into()));
        }
        for &a in &p.positions {
            if owner.insert(a, k).is_some() {
                return Err(Error::Pattern(format!("patterns overlap at {:?}", a)));
            }
        }
    }
    let union: BTreeSet<Root> = owner.keys().copied().collect();
    if !is_closed(&union) {
        return Err(Error::Pattern(format!("union {:?} is not closed", union)));
    }
    let support = UnipotentPattern { n, positions: union.clone() };
    let scale = u.v.iter().map(|z| z.norm()).fold(1.0, f64::max);
    if !support.contains_matrix(&u.v, 1e-10 * scale) {
        return Err(Error::Pattern("matrix has support outside the union of the patterns".into()));
    }
    let hts = heights(&union).ok_or_else(|| Error::Pattern("union is not nilpotent".into()))?;
    let max_h = hts.values().copied().max().unwrap_or(0);
    let mut factors: Vec<Jet> = order.iter().map(|_| Jet::identity(n)).collect();
    for h in 1..=max_h {
        let prod = Jet::product(n, factors.iter());
        for (&a, _) in hts.iter().filter(|(_, &v)| v == h) {
            let k = owner[&a];
            factors[k].v[a] = u.v[a] - prod.v[a];
            factors[k].d[a] = u.d[a] - prod.d[a];
        }
    }
    Ok(factors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, dist, unit};

    fn pat(n: usize, p: &[Root]) -> UnipotentPattern {
        UnipotentPattern::new(n, p.iter().copied()).unwrap()
    }

    #[test]
    fn root_datum_counts_and_sums() {
        let r = RootDatum::gl(4);
        assert_eq!(r.roots.len(), 12);
        assert_eq!(r.sum((0, 1), (1, 2)), Some((0, 2)));
        assert_eq!(r.sum((0, 1), (1, 0)), None);
        assert_eq!(r.sum((0, 1), (2, 3)), None);
    }

    #[test]
    fn trace_form_examples() {
        let e12 = unit(2, 2, 0, 1);
        let e21 = unit(2, 2, 1, 0);
        assert_eq!(trace_form(&e12, &e21).unwrap(), c(1.0, 0.0));
        assert_eq!(trace_form(&eye(2), &eye(2)).unwrap(), c(2.0, 0.0));
        assert!(trace_form(&eye(2), &eye(3)).is_err());
    }

    #[test]
    fn parabolic_examples() {
        let p = parabolic_from_cocharacter(&Cocharacter { weights: vec![1.0, 0.0] }, 1e-12);
        assert_eq!(p.pattern, pat(2, &[(0, 1)]));
        assert_eq!(p.levi.sizes(), vec![1, 1]);
        let p = parabolic_from_cocharacter(&Cocharacter { weights: vec![0.0; 3] }, 1e-12);
        assert!(p.pattern.is_empty());
        assert_eq!(p.levi, Partition::full(3));
        let p = parabolic_from_cocharacter(&Cocharacter { weights: vec![2.0, 2.0, -1.0] }, 1e-12);
        assert_eq!(p.pattern, pat(3, &[(0, 2), (1, 2)]));
        assert_eq!(p.levi.sizes(), vec![2, 1]);
        assert_eq!(p.permutation, vec![0, 1, 2]);
    }

    #[test]
    fn levi_with_noncontiguous_blocks_carries_permutation() {
        let p = parabolic_from_cocharacter(&Cocharacter { weights: vec![0.0, 3.0, 0.0] }, 1e-12);
        assert_eq!(p.levi.parts, vec![vec![1], vec![0, 2]]);
        assert_eq!(p.permutation, vec![1, 0, 2]);
    }

    #[test]
    fn pattern_validation() {
        assert!(UnipotentPattern::new(3, [(0, 1), (1, 2)]).is_err());
        assert!(UnipotentPattern::new(2, [(0, 1), (1, 0)]).is_err());
        assert!(UnipotentPattern::new(3, [(0, 1), (1, 2), (0, 2)]).is_ok());
    }

    #[test]
    fn opposite_examples() {
        assert_eq!(pat(2, &[(0, 1)]).opposite(), pat(2, &[(1, 0)]));
        assert_eq!(UnipotentPattern::empty(3).opposite(), UnipotentPattern::empty(3));
        assert_eq!(pat(3, &[(0, 2), (1, 2)]).opposite(), pat(3, &[(2, 0), (2, 1)]));
    }

    #[test]
    fn heisenberg_factorization() {
        let (x, y) = (c(0.7, -0.2), c(-0.3, 0.5));
        let mut u = eye(3);
        u[(0, 1)] = x;
        u[(1, 2)] = y;
        u[(0, 2)] = x * y;
        let order = [pat(3, &[(1, 2)]), pat(3, &[(0, 1)]), pat(3, &[(0, 2)])];
        let f = direct_span_factorize(&u, &order).unwrap();
        assert!(dist(&f[0], &(eye(3) + unit(3, 3, 1, 2) * y)) < 1e-14);
        assert!(dist(&f[1], &(eye(3) + unit(3, 3, 0, 1) * x)) < 1e-14);
        assert!(dist(&f[2], &(eye(3) + unit(3, 3, 0, 2) * (x * y))) < 1e-14);
    }

    #[test]
    fn abelian_order_irrelevant() {
        let mut u = eye(3);
        u[(0, 2)] = c(1.5, 0.0);
        u[(1, 2)] = c(0.0, -2.0);
        let a = [pat(3, &[(0, 2)]), pat(3, &[(1, 2)])];
        let b = [a[1].clone(), a[0].clone()];
        let fa = direct_span_factorize(&u, &a).unwrap();
        let fb = direct_span_factorize(&u, &b).unwrap();
        assert!(dist(&fa[0], &fb[1]) < 1e-14 && dist(&fa[1], &fb[0]) < 1e-14);
    }

    #[test]
    fn factorize_identity_and_errors() {
        let order = [pat(3, &[(0, 1)]), pat(3, &[(1, 2)]), pat(3, &[(0, 2)])];
        for f in direct_span_factorize(&eye(3), &order).unwrap() {
            assert!(dist(&f, &eye(3)) < 1e-15);
        }
        let mut bad = eye(3);
        bad[(2, 0)] = c(1.0, 0.0);
        assert!(direct_span_factorize(&bad, &order).is_err());
        let overlapping = [pat(3, &[(0, 1)]), pat(3, &[(0, 1)])];
        assert!(direct_span_factorize(&eye(3), &overlapping).is_err());
    }
}
