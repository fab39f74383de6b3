//! Irregular types and the combinatorics they determine: singular directions,
//! Stokes group patterns by level, centralizers and Levi chains.

use crate::lie::{
    is_closed, parabolic_from_cocharacter, Cocharacter, Partition, Root, RootDatum, UnipotentPattern,
};
use crate::linalg::C;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{PI, TAU};

/// Coefficients closer than this are considered equal.
pub const COEF_TOL: f64 = 1e-12;
/// Singular directions closer than this (radians) are merged.
pub const ANGLE_TOL: f64 = 1e-9;

/// One term `A / z^k` with `A` diagonal, stored as its diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub k: u32,
    #[serde(rename = "A", with = "crate::io::cvec")]
    pub a: Vec<C>,
}

/// `Q = sum_i A_i / z^{k_i}` with strictly increasing pole orders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrregularType {
    pub n: usize,
    pub terms: Vec<Term>,
}

impl IrregularType {
    /// Sorts terms, merges equal pole orders and drops zero coefficients.
    pub fn new(n: usize, terms: Vec<Term>) -> Result<Self> {
        let mut by_k: BTreeMap<u32, Vec<C>> = BTreeMap::new();
        for t in terms {
            if t.k == 0 {
                return Err(Error::Invalid("pole orders must be positive".into()));
            }
            if t.a.len() != n {
                return Err(Error::Dimension(format!("coefficient of length {} for n = {}", t.a.len(), n)));
            }
            if t.a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Invalid("non-finite coefficient".into()));
            }
            let e = by_k.entry(t.k).or_insert_with(|| vec![C::new(0.0, 0.0); n]);
            for (x, y) in e.iter_mut().zip(&t.a) {
                *x += y;
            }
        }
        let terms = by_k
            .into_iter()
            .filter(|(_, a)| a.iter().any(|z| z.norm() > COEF_TOL))
            .map(|(k, a)| Term { k, a })
            .collect();
        Ok(IrregularType { n, terms })
    }

    pub fn zero(n: usize) -> Self {
        IrregularType { n, terms: vec![] }
    }

    /// Single term `diag(a) / z^k`.
    pub fn one_level(k: u32, a: Vec<C>) -> Result<Self> {
        let n = a.len();
        IrregularType::new(n, vec![Term { k, a }])
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_k(&self) -> u32 {
        self.terms.last().map_or(0, |t| t.k)
    }

    /// Diagonal of `Q(z)`.
    pub fn eval(&self, z: C) -> Vec<C> {
        let mut out = vec![C::new(0.0, 0.0); self.n];
        for t in &self.terms {
            let w = z.powi(-(t.k as i32));
            for (o, a) in out.iter_mut().zip(&t.a) {
                *o += a * w;
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let again = IrregularType::new(self.n, self.terms.clone())?;
        if again.terms.len() != self.terms.len() || self.terms.windows(2).any(|w| w[0].k >= w[1].k) {
            return Err(Error::Invalid("terms must have strictly increasing k and nonzero A".into()));
        }
        Ok(())
    }
}

/// A principal part `sum_k c_k z^{-k}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaurentPoly {
    pub coeffs: BTreeMap<u32, C>,
}

impl LaurentPoly {
    pub fn degree(&self) -> u32 {
        self.coeffs.keys().next_back().copied().unwrap_or(0)
    }

    pub fn leading(&self) -> Option<C> {
        self.coeffs.values().next_back().copied()
    }

    pub fn coeff(&self, k: u32) -> C {
        self.coeffs.get(&k).copied().unwrap_or_default()
    }
}

/// `q_alpha = alpha o Q`: coefficient `A_k[i] - A_k[j]` at `z^{-k}`.
pub fn q_alpha(q: &IrregularType, a: Root) -> LaurentPoly {
    let coeffs = q
        .terms
        .iter()
        .map(|t| (t.k, t.a[a.0] - t.a[a.1]))
        .filter(|(_, c)| c.norm() > COEF_TOL)
        .collect();
    LaurentPoly { coeffs }
}

pub fn degree(q: &IrregularType, a: Root) -> u32 {
    q_alpha(q, a).degree()
}

/// Wrap an angle into `[0, 2pi)`, snapping values within tolerance of `2pi` to 0.
pub fn wrap_angle(t: f64) -> f64 {
    let w = t.rem_euclid(TAU);
    if TAU - w < ANGLE_TOL {
        0.0
    } else {
        w
    }
}

/// A root together with the branch index of one of its `deg` directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DirectionLabel {
    pub root: Root,
    pub branch: u32,
}

/// Angle of one labelled direction: `(arg c - pi + 2 pi j) / k`, not wrapped.
pub fn label_angle(q: &IrregularType, l: DirectionLabel) -> Option<f64> {
    let p = q_alpha(q, l.root);
    let c = p.leading()?;
    let k = p.degree() as f64;
    Some((c.arg() - PI + TAU * l.branch as f64) / k)
}

/// All labelled directions of `Q` with their wrapped angles.
pub fn direction_labels(q: &IrregularType) -> Vec<(DirectionLabel, f64)> {
    let mut out = Vec::new();
    for a in RootDatum::gl(q.n).roots {
        let k = degree(q, a);
        for j in 0..k {
            let l = DirectionLabel { root: a, branch: j };
            out.push((l, wrap_angle(label_angle(q, l).unwrap())));
        }
    }
    out
}

/// One merged singular direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    /// Angle in `[0, 2pi)`.
    pub angle: f64,
    pub labels: Vec<DirectionLabel>,
    /// `R(d)`.
    pub support: BTreeSet<Root>,
    /// `R(d, k)` for each level `k` present.
    pub levels: BTreeMap<u32, BTreeSet<Root>>,
}

impl Direction {
    pub fn multi_level(&self) -> bool {
        self.levels.len() > 1
    }

    pub fn pattern(&self, n: usize) -> UnipotentPattern {
        UnipotentPattern { n, positions: self.support.clone() }
    }

    pub fn level_pattern(&self, n: usize, k: u32) -> UnipotentPattern {
        UnipotentPattern { n, positions: self.levels.get(&k).cloned().unwrap_or_default() }
    }
}

/// Singular directions ordered in the positive sense starting at the cut.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StokesStructure {
    pub n: usize,
    pub cut: f64,
    pub directions: Vec<Direction>,
}

impl StokesStructure {
    pub fn angles(&self) -> Vec<f64> {
        self.directions.iter().map(|d| d.angle).collect()
    }

    pub fn patterns(&self) -> Vec<UnipotentPattern> {
        self.directions.iter().map(|d| d.pattern(self.n)).collect()
    }

    pub fn levels(&self) -> BTreeSet<u32> {
        self.directions.iter().flat_map(|d| d.levels.keys().copied()).collect()
    }

    pub fn multi_level_directions(&self) -> Vec<usize> {
        (0..self.directions.len()).filter(|&i| self.directions[i].multi_level()).collect()
    }

    /// Index of the direction closest to `angle`, if within tolerance.
    pub fn find(&self, angle: f64) -> Option<usize> {
        let a = wrap_angle(angle);
        self.directions.iter().position(|d| angle_gap(d.angle, a) <= ANGLE_TOL)
    }
}

/// Unsigned distance on the circle.
pub fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Directions ordered from the smallest angle in `[0, 2pi)`.
pub fn singular_directions(q: &IrregularType) -> StokesStructure {
    let mut s = singular_directions_with_cut(q, 0.0);
    s.cut = s.directions.first().map_or(0.0, |d| d.angle);
    s
}

/// Directions ordered by `(d - cut) mod 2pi`; a direction at the cut comes first.
pub fn singular_directions_with_cut(q: &IrregularType, cut: f64) -> StokesStructure {
    let cut = wrap_angle(cut);
    let mut labels = direction_labels(q);
    let rel = |t: f64| {
        let r = (t - cut).rem_euclid(TAU);
        if TAU - r < ANGLE_TOL {
            0.0
        } else {
            r
        }
    };
    labels.sort_by(|a, b| rel(a.1).partial_cmp(&rel(b.1)).unwrap().then(a.0.cmp(&b.0)));
    let mut dirs: Vec<Direction> = Vec::new();
    for (l, t) in labels {
        let k = degree(q, l.root);
        match dirs.last_mut() {
            Some(d) if angle_gap(d.angle, t) <= ANGLE_TOL => {
                d.labels.push(l);
                d.support.insert(l.root);
                d.levels.entry(k).or_default().insert(l.root);
            }
            _ => dirs.push(Direction {
                angle: t,
                labels: vec![l],
                support: BTreeSet::from([l.root]),
                levels: BTreeMap::from([(k, BTreeSet::from([l.root]))]),
            }),
        }
    }
    // A cluster straddling the cut (just below 2pi and just above 0) is one direction.
    if dirs.len() > 1 && angle_gap(dirs[0].angle, dirs.last().unwrap().angle) <= ANGLE_TOL {
        let last = dirs.pop().unwrap();
        let first = &mut dirs[0];
        for l in last.labels {
            first.labels.push(l);
            first.support.insert(l.root);
            first.levels.entry(degree(q, l.root)).or_default().insert(l.root);
        }
    }
    StokesStructure { n: q.n, cut, directions: dirs }
}

/// `H = C_G(Q)`: indices with equal coefficients in every term.
pub fn centralizer(q: &IrregularType) -> Partition {
    let labels: Vec<Vec<C>> = (0..q.n).map(|i| q.terms.iter().map(|t| t.a[i]).collect()).collect();
    stabilizer(q.n, &labels)
}

fn stabilizer(n: usize, labels: &[Vec<C>]) -> Partition {
    let mut parts: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let same = |p: &Vec<usize>| {
            labels[p[0]].iter().zip(&labels[i]).all(|(a, b)| (a - b).norm() <= COEF_TOL)
        };
        match parts.iter_mut().find(|p| same(p)) {
            Some(p) => p.push(i),
            None => parts.push(vec![i]),
        }
    }
    Partition { n, parts }
}

/// `H = H_1 in H_2 in ... in H_r in G` with complements `h'_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeviChain {
    pub levels: Vec<u32>,
    /// `H_i = Stab(A_r, ..., A_i)`.
    pub chain: Vec<Partition>,
    /// Roots `alpha` with `deg q_alpha = k_i`.
    pub complements: Vec<BTreeSet<Root>>,
}

pub fn levi_chain(q: &IrregularType) -> LeviChain {
    let r = q.terms.len();
    let mut chain = Vec::with_capacity(r);
    let mut complements = Vec::with_capacity(r);
    for i in 0..r {
        let labels: Vec<Vec<C>> =
            (0..q.n).map(|x| q.terms[i..].iter().map(|t| t.a[x]).collect()).collect();
        chain.push(stabilizer(q.n, &labels));
        let k = q.terms[i].k;
        complements.push(RootDatum::gl(q.n).roots.into_iter().filter(|&a| degree(q, a) == k).collect());
    }
    LeviChain { levels: q.terms.iter().map(|t| t.k).collect(), chain, complements }
}

/// `dim A(Q) = dim G + dim H + sum_alpha deg q_alpha`.
pub fn stokes_space_dim(q: &IrregularType) -> usize {
    let n = q.n;
    let degs: u32 = RootDatum::gl(n).roots.into_iter().map(|a| degree(q, a)).sum();
    n * n + centralizer(q).dim() + degs as usize
}

/// Union of the supports over a half-period and the parabolic it should span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfPeriod {
    pub directions: Vec<usize>,
    pub bisector: f64,
    pub lambda: Cocharacter,
    pub union: BTreeSet<Root>,
    pub radical: UnipotentPattern,
    pub matches: bool,
}

/// The half-period of `l = s / 2k` directions starting at `start`.
pub fn half_period_parabolic(q: &IrregularType, st: &StokesStructure, start: usize) -> Result<HalfPeriod> {
    if q.terms.len() != 1 {
        return Err(Error::Invalid("half periods need a one-level irregular type".into()));
    }
    let k = q.terms[0].k as usize;
    let s = st.directions.len();
    if s == 0 || s % (2 * k) != 0 {
        return Err(Error::Invalid(format!("{} directions not divisible by 2k = {}", s, 2 * k)));
    }
    let l = s / (2 * k);
    let idx: Vec<usize> = (0..l).map(|i| (start + i) % s).collect();
    // Unwrapped angles of the neighbours and of the arc.
    let ang = |i: isize| {
        let wraps = i.div_euclid(s as isize) as f64;
        let j = i.rem_euclid(s as isize) as usize;
        let base = (st.directions[j].angle - st.cut).rem_euclid(TAU);
        base + TAU * wraps
    };
    let a = start as isize;
    let left = 0.5 * (ang(a - 1) + ang(a));
    let right = 0.5 * (ang(a + l as isize - 1) + ang(a + l as isize));
    let bisector = wrap_angle(st.cut + 0.5 * (left + right));
    let z = C::from_polar(1.0, bisector);
    let weights = q.eval(z).iter().map(|w| -w.re).collect();
    let lambda = Cocharacter { weights };
    let radical = parabolic_from_cocharacter(&lambda, 1e-9).pattern;
    let union: BTreeSet<Root> = idx.iter().flat_map(|&i| st.directions[i].support.iter().copied()).collect();
    let matches = union == radical.positions;
    Ok(HalfPeriod { directions: idx, bisector, lambda, union, radical, matches })
}

/// A cocharacter positive on `R(d)`, built level by level with a doubling weight.
pub fn positivity_cocharacter(q: &IrregularType, st: &StokesStructure, d: usize) -> Result<Cocharacter> {
    let dir = st.directions.get(d).ok_or_else(|| Error::Invalid(format!("no direction {}", d)))?;
    let theta = dir.angle;
    let r: Vec<Vec<f64>> = q
        .terms
        .iter()
        .map(|t| {
            let w = C::from_polar(1.0, -(t.k as f64) * theta);
            t.a.iter().map(|a| -(a * w).re).collect()
        })
        .collect();
    let positive = |l: &[f64]| dir.support.iter().all(|&(i, j)| l[i] - l[j] > 1e-12);
    let mut big_n = 1.0;
    for _ in 0..64 {
        let mut lam = r.last().cloned().unwrap_or_else(|| vec![0.0; q.n]);
        for ri in r.iter().rev().skip(1) {
            lam = lam.iter().zip(ri).map(|(x, y)| big_n * x + y).collect();
        }
        if positive(&lam) {
            return Ok(Cocharacter { weights: lam });
        }
        big_n *= 2.0;
    }
    Err(Error::Numerical("no positive cocharacter found".into()))
}

/// Whether every `q_alpha` has the same pole order for both types.
pub fn same_pole_degrees(a: &IrregularType, b: &IrregularType) -> bool {
    a.n == b.n && RootDatum::gl(a.n).roots.into_iter().all(|r| degree(a, r) == degree(b, r))
}

/// Closedness of a root set (used for `R(d)` and `R(d,k)` checks).
pub fn root_set_closed(s: &BTreeSet<Root>) -> bool {
    is_closed(s)
}
