//! Admissible deformations of irregular types and the transport of Stokes
//! representations along them.
//!
//! Each singular direction is tracked as a labelled angle (root, branch) by
//! continuity; between refined samples the angles move linearly. Transport is
//! the ordered composite of wall events at one marked point:
//!
//! * a cluster of directions crossing the cut clockwise applies `Theta`, and
//!   counterclockwise `Theta^{-1}`;
//! * when clusters collide, the product of their Stokes factors (later factors
//!   on the left) is refactorized in the new order.
//!
//! Afterwards the frame is regauged so that `C_1 = 1`.

use std::collections::BTreeSet;
use std::f64::consts::{PI, TAU};

use crate::irregular::{degree, label_angle, same_pole_degrees, DirectionLabel, IrregularType, Term, ANGLE_TOL};
use crate::lie::{direct_span_factorize_jet, heights, is_closed, Root, RootDatum, UnipotentPattern};
use crate::linalg::{max_abs, Jet, Mat, C};
use crate::morphisms::{theta_inv_jet, theta_jet, verify_pullback, Behaviour, SpaceMorphism};
use crate::qh::{constant_jets, Point};
use crate::wild::{build_space, check_relation, is_stable, IrregularCurve, StokesRepresentation};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Per-step direction motion is kept below `pi / (MOTION_DIVISOR k_max)`.
pub const MOTION_DIVISOR: f64 = 8.0;
const MAX_DEPTH: usize = 30;
const EVENT_TOL: f64 = 1e-9;

/// A path of irregular types at one marked point; the rest of the curve is fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeformationPath {
    pub point: usize,
    pub samples: Vec<IrregularType>,
    /// Sample times; `0, 1/N, ..., 1` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    /// Cut direction in `(-pi, pi]`.
    #[serde(default)]
    pub cut: f64,
}

impl DeformationPath {
    pub fn new(point: usize, samples: Vec<IrregularType>) -> Self {
        DeformationPath { point, samples, times: None, cut: 0.0 }
    }

    pub fn constant(point: usize, q: &IrregularType, steps: usize) -> Self {
        Self::new(point, vec![q.clone(); steps.max(1) + 1])
    }

    pub fn with_cut(mut self, cut: f64) -> Self {
        self.cut = cut;
        self
    }

    pub fn sample_times(&self) -> Vec<f64> {
        match &self.times {
            Some(t) => t.clone(),
            None => {
                let n = self.samples.len().saturating_sub(1).max(1) as f64;
                (0..self.samples.len()).map(|i| i as f64 / n).collect()
            }
        }
    }

    pub fn reversed(&self) -> Self {
        let mut samples = self.samples.clone();
        samples.reverse();
        let times = self.times.as_ref().map(|t| {
            let end = t.last().copied().unwrap_or(0.0);
            t.iter().rev().map(|x| end - x).collect()
        });
        DeformationPath { point: self.point, samples, times, cut: self.cut }
    }

    /// `self` followed by `other` (which must start where `self` ends).
    pub fn then(&self, other: &DeformationPath) -> Result<Self> {
        if other.point != self.point || other.cut != self.cut {
            return Err(Error::Invalid("paths act on different points or cuts".into()));
        }
        let (a, b) = (self.samples.last(), other.samples.first());
        if a.is_none() || b.is_none() || !close_types(a.unwrap(), b.unwrap()) {
            return Err(Error::Invalid("paths do not connect".into()));
        }
        let mut samples = self.samples.clone();
        samples.extend(other.samples[1..].iter().cloned());
        Ok(DeformationPath::new(self.point, samples).with_cut(self.cut))
    }

    /// `a_i - a_j` of every coefficient is rotated by `exp(2 pi i turns s)`, `s in [0, 1]`.
    pub fn wind(point: usize, q: &IrregularType, pair: [usize; 2], turns: f64, steps: usize) -> Result<Self> {
        let [i, j] = pair;
        if i >= q.n || j >= q.n || i == j {
            return Err(Error::Invalid(format!("pair: indices {:?} out of range for n = {}", pair, q.n)));
        }
        let steps = steps.max(1);
        let samples = (0..=steps)
            .map(|s| {
                let rot = C::from_polar(1.0, TAU * turns * s as f64 / steps as f64);
                let terms = q
                    .terms
                    .iter()
                    .map(|t| {
                        let mut a = t.a.clone();
                        a[i] = t.a[j] + (t.a[i] - t.a[j]) * rot;
                        Term { k: t.k, a }
                    })
                    .collect();
                IrregularType::new(q.n, terms)
            })
            .collect::<Result<_>>()?;
        Ok(DeformationPath::new(point, samples))
    }
}

fn close_types(a: &IrregularType, b: &IrregularType) -> bool {
    let d = lerp(a, b, 0.0).and_then(|x| {
        let diff = IrregularType::new(
            a.n,
            x.terms
                .iter()
                .map(|t| Term { k: t.k, a: t.a.clone() })
                .chain(b.terms.iter().map(|t| Term { k: t.k, a: t.a.iter().map(|z| -z).collect() }))
                .collect(),
        )?;
        Ok(diff.is_zero())
    });
    a.n == b.n && d.unwrap_or(false)
}

/// Path input: explicit samples or a parametric winding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PathInput {
    Wind(WindInput),
    Samples(DeformationPath),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindInput {
    pub kind: String,
    #[serde(default)]
    pub point: usize,
    pub pair: [usize; 2],
    pub turns: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default)]
    pub cut: f64,
}

impl PathInput {
    pub fn resolve(&self, curve: &IrregularCurve) -> Result<DeformationPath> {
        match self {
            PathInput::Samples(p) => Ok(p.clone()),
            PathInput::Wind(w) => {
                if w.kind != "wind" {
                    return Err(Error::Invalid(format!("kind: unknown path kind {:?}", w.kind)));
                }
                let q = curve
                    .points
                    .get(w.point)
                    .ok_or_else(|| Error::Invalid(format!("point: no marked point {}", w.point)))?;
                let steps = w.steps.unwrap_or((64.0 * w.turns.abs().max(0.25) * q.max_k().max(1) as f64).ceil() as usize);
                Ok(DeformationPath::wind(w.point, q, w.pair, w.turns, steps)?.with_cut(w.cut))
            }
        }
    }
}

/// `(1 - s) a + s b`, coefficientwise.
pub fn lerp(a: &IrregularType, b: &IrregularType, s: f64) -> Result<IrregularType> {
    let scale = |q: &IrregularType, w: f64| -> Vec<Term> {
        q.terms.iter().map(|t| Term { k: t.k, a: t.a.iter().map(|z| z * w).collect() }).collect()
    };
    let mut terms = scale(a, 1.0 - s);
    terms.extend(scale(b, s));
    IrregularType::new(a.n, terms)
}

// ---------------------------------------------------------------------------
// Direction tracking

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Label {
    pub root: Root,
    pub k: u32,
}

fn wrap_pm(x: f64) -> f64 {
    let w = (x + PI).rem_euclid(TAU) - PI;
    if w <= -PI {
        w + TAU
    } else {
        w
    }
}

fn initial_labels(q: &IrregularType) -> (Vec<Label>, Vec<f64>) {
    let mut labels = Vec::new();
    let mut theta = Vec::new();
    for root in RootDatum::gl(q.n).roots {
        let k = degree(q, root);
        for branch in 0..k {
            labels.push(Label { root, k });
            theta.push(crate::irregular::wrap_angle(label_angle(q, DirectionLabel { root, branch }).unwrap()));
        }
    }
    (labels, theta)
}

/// New unwrapped angles: each label moves to the nearest direction of its root.
fn track(labels: &[Label], theta: &[f64], q: &IrregularType) -> Option<Vec<f64>> {
    let mut out = Vec::with_capacity(theta.len());
    let mut used: Vec<(Root, u32)> = Vec::new();
    for (l, &t) in labels.iter().zip(theta) {
        let (best, delta) = (0..l.k)
            .map(|b| (b, wrap_pm(label_angle(q, DirectionLabel { root: l.root, branch: b }).unwrap_or(f64::NAN) - t)))
            .min_by(|x, y| x.1.abs().partial_cmp(&y.1.abs()).unwrap())?;
        if used.contains(&(l.root, best)) {
            return None;
        }
        used.push((l.root, best));
        out.push(t + delta);
    }
    Some(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathViolation {
    pub index: usize,
    pub time: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathValidation {
    pub valid: bool,
    pub violation: Option<PathViolation>,
    pub fine_steps: usize,
}

struct Fine {
    n: usize,
    labels: Vec<Label>,
    times: Vec<f64>,
    theta: Vec<Vec<f64>>,
}

fn violation(index: usize, time: f64, reason: impl Into<String>) -> PathViolation {
    PathViolation { index, time, reason: reason.into() }
}

fn refine(path: &DeformationPath) -> std::result::Result<Fine, PathViolation> {
    let samples = &path.samples;
    let first = samples.first().ok_or_else(|| violation(0, 0.0, "samples: empty path"))?;
    let times = path.sample_times();
    if times.len() != samples.len() {
        return Err(violation(0, 0.0, "times: length differs from samples"));
    }
    if !(path.cut > -PI && path.cut <= PI) {
        return Err(violation(0, times[0], "cut: must lie in (-pi, pi]"));
    }
    for (i, q) in samples.iter().enumerate() {
        if q.n != first.n || q.validate().is_err() {
            return Err(violation(i, times[i], "samples: invalid irregular type or size mismatch"));
        }
        if i > 0 && times[i] <= times[i - 1] {
            return Err(violation(i, times[i], "times: must be strictly increasing"));
        }
        if i > 0 && !same_pole_degrees(&samples[i - 1], q) {
            return Err(violation(i, times[i], "pole order of some q_alpha changes"));
        }
    }
    let (labels, theta0) = initial_labels(first);
    let bound = PI / (MOTION_DIVISOR * first.max_k().max(1) as f64);
    let mut fine = Fine { n: first.n, labels, times: vec![times[0]], theta: vec![theta0] };
    for i in 1..samples.len() {
        let mut stack = vec![(times[i], samples[i].clone(), 0usize)];
        let mut qa = samples[i - 1].clone();
        while let Some((tb, qb, depth)) = stack.pop() {
            let ta = *fine.times.last().unwrap();
            let th = fine.theta.last().unwrap();
            let next = track(&fine.labels, th, &qb);
            let motion = next.as_ref().map(|n| n.iter().zip(th).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
            if matches!(motion, Some(m) if m <= bound) {
                fine.times.push(tb);
                fine.theta.push(next.unwrap());
                qa = qb;
                continue;
            }
            if depth >= MAX_DEPTH {
                return Err(violation(i, tb, "direction motion does not shrink under refinement (pole order drops between samples)"));
            }
            let tm = 0.5 * (ta + tb);
            let qm = lerp(&qa, &qb, 0.5).map_err(|e| violation(i, tm, e.to_string()))?;
            if !same_pole_degrees(&qa, &qm) {
                return Err(violation(i, tm, "pole order of some q_alpha changes between samples"));
            }
            stack.push((tb, qb, depth + 1));
            stack.push((tm, qm, depth + 1));
        }
    }
    Ok(fine)
}

/// Admissibility of a path: sizes, increasing times, constant pole orders of
/// every `q_alpha`, and continuity of the directions under refinement.
pub fn validate_path(path: &DeformationPath) -> PathValidation {
    match refine(path) {
        Ok(f) => PathValidation { valid: true, violation: None, fine_steps: f.times.len() - 1 },
        Err(v) => PathValidation { valid: false, violation: Some(v), fine_steps: 0 },
    }
}

/// Unwrapped angles of every labelled direction at the refined times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionTracks {
    pub labels: Vec<Label>,
    pub times: Vec<f64>,
    /// `angles[t][l]` for time `t` and label `l`.
    pub angles: Vec<Vec<f64>>,
}

pub fn direction_tracks(path: &DeformationPath) -> Result<DirectionTracks> {
    let f = refine(path).map_err(|v| Error::RefinePath(format!("sample {} (t = {}): {}", v.index, v.time, v.reason)))?;
    Ok(DirectionTracks { labels: f.labels, times: f.times, angles: f.theta })
}

// ---------------------------------------------------------------------------
// Events

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum EventKind {
    /// `sense = +1`: the first cluster crosses the cut clockwise (`Theta`);
    /// `sense = -1`: the last cluster crosses counterclockwise (`Theta^{-1}`).
    CutCrossing { sense: i8 },
    /// Consecutive factors `start..start + old.len()` are refactorized from the
    /// old to the new cluster order.
    Collision { start: usize, angle: f64, old: Vec<Vec<Root>>, new: Vec<Vec<Root>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallEvent {
    pub time: f64,
    pub point: usize,
    #[serde(flatten)]
    pub kind: EventKind,
}

/// The event list of a path, with the direction supports at both ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub n: usize,
    pub point: usize,
    pub cut: f64,
    pub fine_steps: usize,
    pub events: Vec<WallEvent>,
    pub start: Vec<Vec<Root>>,
    pub end: Vec<Vec<Root>>,
}

#[derive(Debug, Clone)]
struct State {
    clusters: Vec<Vec<usize>>,
    rel: Vec<f64>,
    floor: Vec<i64>,
}

fn state(theta: &[f64], cut: f64) -> State {
    let mut floor = vec![0i64; theta.len()];
    let mut rel = vec![0.0; theta.len()];
    for (i, &t) in theta.iter().enumerate() {
        let x = t - cut;
        let mut f = (x / TAU).floor();
        let mut r = x - f * TAU;
        if r > TAU - ANGLE_TOL {
            r = 0.0;
            f += 1.0;
        } else if r < ANGLE_TOL {
            r = 0.0;
        }
        floor[i] = f as i64;
        rel[i] = r;
    }
    let mut order: Vec<usize> = (0..theta.len()).collect();
    order.sort_by(|&a, &b| rel[a].partial_cmp(&rel[b]).unwrap().then(a.cmp(&b)));
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut crel: Vec<f64> = Vec::new();
    for i in order {
        match crel.last() {
            Some(&r) if rel[i] - r <= ANGLE_TOL => clusters.last_mut().unwrap().push(i),
            _ => {
                clusters.push(vec![i]);
                crel.push(rel[i]);
            }
        }
    }
    State { clusters, rel: crel, floor }
}

fn interp(a: &[f64], b: &[f64], s: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * (y - x)).collect()
}

struct Detector<'a> {
    labels: &'a [Label],
    point: usize,
    cut: f64,
    events: Vec<WallEvent>,
}

impl Detector<'_> {
    fn roots(&self, c: &[usize]) -> Vec<Root> {
        let mut r: Vec<Root> = c.iter().map(|&i| self.labels[i].root).collect();
        r.sort();
        r
    }

    fn crossing(&mut self, time: f64, sense: i8) {
        self.events.push(WallEvent { time, point: self.point, kind: EventKind::CutCrossing { sense } });
    }

    fn transition(&mut self, from: &State, to: &State, time: f64) -> Result<()> {
        let mut list = from.clusters.clone();
        let mut sense = Vec::with_capacity(list.len());
        for c in &list {
            let d: BTreeSet<i64> = c.iter().map(|&l| to.floor[l] - from.floor[l]).collect();
            if d.len() != 1 || d.iter().any(|x| x.abs() > 1) {
                return Err(Error::RefinePath(format!("directions collide on the cut at t = {:.6}", time)));
            }
            sense.push(*d.iter().next().unwrap());
        }
        let cw = sense.iter().take_while(|&&s| s == -1).count();
        let ccw = sense.iter().rev().take_while(|&&s| s == 1).count();
        if sense.iter().filter(|&&s| s != 0).count() != cw + ccw || (cw > 0 && ccw > 0) {
            return Err(Error::RefinePath(format!("inconsistent cut crossings at t = {:.6}", time)));
        }
        for _ in 0..cw {
            self.crossing(time, 1);
            list.rotate_left(1);
        }
        for _ in 0..ccw {
            self.crossing(time, -1);
            list.rotate_right(1);
        }
        let (mut i, mut j) = (0, 0);
        while i < list.len() {
            let (i0, j0) = (i, j);
            let mut ua: BTreeSet<usize> = list[i].iter().copied().collect();
            let mut ub: BTreeSet<usize> = BTreeSet::new();
            i += 1;
            while ua != ub {
                if !ua.is_subset(&ub) {
                    let c = to.clusters.get(j).ok_or_else(|| Error::RefinePath(format!("direction order lost at t = {:.6}", time)))?;
                    ub.extend(c.iter().copied());
                    j += 1;
                } else {
                    let c = list.get(i).ok_or_else(|| Error::RefinePath(format!("direction order lost at t = {:.6}", time)))?;
                    ua.extend(c.iter().copied());
                    i += 1;
                }
            }
            if i - i0 == 1 && j - j0 == 1 {
                continue;
            }
            let union: BTreeSet<Root> = ua.iter().map(|&l| self.labels[l].root).collect();
            if !is_closed(&union) || heights(&union).is_none() {
                return Err(Error::RefinePath(format!("merged support {:?} is not closed at t = {:.6}", union, time)));
            }
            self.events.push(WallEvent {
                time,
                point: self.point,
                kind: EventKind::Collision {
                    start: j0,
                    angle: crate::irregular::wrap_angle(to.rel[j0] + self.cut),
                    old: list[i0..i].iter().map(|c| self.roots(c)).collect(),
                    new: to.clusters[j0..j].iter().map(|c| self.roots(c)).collect(),
                },
            });
        }
        if j != to.clusters.len() {
            return Err(Error::RefinePath(format!("direction order lost at t = {:.6}", time)));
        }
        Ok(())
    }

    /// Cut change between two orderings of the same clusters, along the short arc.
    fn change_cut(&mut self, from: &State, to: &State, ccw_cut: bool, time: f64) -> Result<()> {
        let s = from.clusters.len();
        if s == 0 {
            return Ok(());
        }
        let key = |c: &Vec<usize>| c.iter().copied().collect::<BTreeSet<_>>();
        let q = from
            .clusters
            .iter()
            .position(|c| key(c) == key(&to.clusters[0]))
            .ok_or_else(|| Error::Numerical("cluster structure differs between cuts".into()))?;
        if ccw_cut {
            for _ in 0..q {
                self.crossing(time, 1);
            }
        } else {
            for _ in 0..(s - q) % s {
                self.crossing(time, -1);
            }
        }
        Ok(())
    }
}

/// Event schedule of an admissible path.
pub fn detect_events(path: &DeformationPath) -> Result<Schedule> {
    let fine = refine(path).map_err(|v| Error::RefinePath(format!("sample {} (t = {}): {}", v.index, v.time, v.reason)))?;
    let cut = path.cut;
    let mut det = Detector { labels: &fine.labels, point: path.point, cut, events: Vec::new() };
    let t0 = fine.times[0];
    let th0 = &fine.theta[0];
    let base0 = state(th0, 0.0);
    let mut cur = state(th0, cut);
    if cut != 0.0 {
        det.change_cut(&base0, &cur, cut > 0.0, t0)?;
    }
    for w in 0..fine.times.len() - 1 {
        let (ta, tb) = (fine.times[w], fine.times[w + 1]);
        let (a, b) = (&fine.theta[w], &fine.theta[w + 1]);
        let mut cand = vec![0.0];
        for (x, y) in a.iter().zip(b) {
            let (x0, x1) = (x - cut, y - cut);
            if (x1 - x0).abs() > 1e-15 {
                let (lo, hi) = (x0.min(x1) / TAU, x0.max(x1) / TAU);
                for m in lo.ceil() as i64..=hi.floor() as i64 {
                    cand.push((TAU * m as f64 - x0) / (x1 - x0));
                }
            }
        }
        for l in 0..a.len() {
            for m in l + 1..a.len() {
                let (d0, d1) = (a[l] - a[m], b[l] - b[m]);
                if (d1 - d0).abs() <= 1e-15 {
                    continue;
                }
                let (lo, hi) = (d0.min(d1) / TAU, d0.max(d1) / TAU);
                for j in lo.ceil() as i64..=hi.floor() as i64 {
                    cand.push((TAU * j as f64 - d0) / (d1 - d0));
                }
            }
        }
        cand.push(1.0);
        cand.retain(|s| (0.0..=1.0).contains(s));
        cand.sort_by(|x, y| x.partial_cmp(y).unwrap());
        cand.dedup_by(|x, y| (*x - *y).abs() < EVENT_TOL);
        // Interior states are read strictly between candidate times, so each event is a single transition.
        for k in 0..cand.len() - 1 {
            let mid = state(&interp(a, b, 0.5 * (cand[k] + cand[k + 1])), cut);
            det.transition(&cur, &mid, ta + cand[k] * (tb - ta))?;
            cur = mid;
        }
    }
    let end = state(fine.theta.last().unwrap(), cut);
    det.transition(&cur, &end, *fine.times.last().unwrap())?;
    cur = end;
    let th_n = fine.theta.last().unwrap();
    let base_n = state(th_n, 0.0);
    if cut != 0.0 {
        det.change_cut(&cur, &base_n, cut < 0.0, *fine.times.last().unwrap())?;
    }
    let supports = |s: &State| -> Vec<Vec<Root>> { s.clusters.iter().map(|c| det.roots(c)).collect() };
    let start = supports(&base0);
    let end = supports(&base_n);
    let events = det.events;
    let expect = |q: &IrregularType| -> Vec<Vec<Root>> {
        crate::irregular::singular_directions(q).directions.iter().map(|d| d.support.iter().copied().collect()).collect()
    };
    if start != expect(&path.samples[0]) || end != expect(path.samples.last().unwrap()) {
        return Err(Error::Numerical("tracked directions disagree with the singular directions".into()));
    }
    Ok(Schedule { n: fine.n, point: path.point, cut, fine_steps: fine.times.len() - 1, events, start, end })
}

// ---------------------------------------------------------------------------
// Applying events

fn pattern(n: usize, roots: &[Root]) -> Result<UnipotentPattern> {
    UnipotentPattern::new(n, roots.iter().copied())
}

/// One event on a local point `(C, h, S_1, ..., S_s)` (jets).
pub fn apply_event_local(n: usize, local: &[Jet], kind: &EventKind) -> Result<Vec<Jet>> {
    match kind {
        EventKind::CutCrossing { sense: 1 } => theta_jet(local),
        EventKind::CutCrossing { sense: -1 } => theta_inv_jet(local),
        EventKind::CutCrossing { sense } => Err(Error::Invalid(format!("cut crossing sense {}", sense))),
        EventKind::Collision { start, old, new, .. } => {
            let s = local.len().saturating_sub(2);
            if start + old.len() > s {
                return Err(Error::Dimension("collision block exceeds the Stokes factors".into()));
            }
            let block = &local[2 + start..2 + start + old.len()];
            let prod = Jet::product(n, block.iter().rev());
            let order: Vec<UnipotentPattern> = new.iter().rev().map(|r| pattern(n, r)).collect::<Result<_>>()?;
            let mut fac = direct_span_factorize_jet(&prod, &order)?;
            fac.reverse();
            let mut out = local[..2 + start].to_vec();
            out.extend(fac);
            out.extend(local[2 + start + old.len()..].iter().cloned());
            Ok(out)
        }
    }
}

fn offsets(curve: &IrregularCurve) -> Vec<(usize, usize)> {
    let mut at = 2 * curve.genus;
    curve
        .structures()
        .iter()
        .map(|s| {
            let r = (at, s.directions.len() + 2);
            at += r.1;
            r
        })
        .collect()
}

/// `C_i -> C_i C_1^{-1}`, handles conjugated by `C_1`.
pub fn regauge_jet(curve: &IrregularCurve, p: &[Jet]) -> Result<Vec<Jet>> {
    let off = offsets(curve);
    let g = p[off[0].0].clone();
    let gi = g.inv()?;
    let mut out = p.to_vec();
    for x in out.iter_mut().take(2 * curve.genus) {
        *x = &(&g * &*x) * &gi;
    }
    for &(at, _) in &off {
        out[at] = &out[at] * &gi;
    }
    Ok(out)
}

/// Apply the events of a schedule to a full point (jets) of `Hom_S`.
pub fn apply_schedule_jet(curve: &IrregularCurve, schedule: &Schedule, p: &[Jet]) -> Result<Vec<Jet>> {
    let off = offsets(curve);
    let (at, len) = *off.get(schedule.point).ok_or_else(|| Error::Invalid("no such marked point".into()))?;
    let mut local = p[at..at + len].to_vec();
    for e in &schedule.events {
        local = apply_event_local(schedule.n, &local, &e.kind)?;
    }
    let mut out = p[..at].to_vec();
    out.extend(local);
    out.extend(p[at + len..].iter().cloned());
    if schedule.point == 0 {
        out = regauge_jet(curve, &out)?;
    }
    Ok(out)
}

fn on_point(f: impl Fn(&[Jet]) -> Result<Vec<Jet>>, p: &[Mat]) -> Result<Point> {
    Ok(f(&constant_jets(p))?.into_iter().map(|j| j.v).collect())
}

/// `C_i -> C_i C_1^{-1}` and handles conjugated by `C_1`, on a representation.
pub fn regauge(rep: &StokesRepresentation) -> Result<StokesRepresentation> {
    let g = rep.connectors[0].clone();
    let gi = crate::linalg::inv(&g)?;
    let mut out = rep.clone();
    for x in out.a.iter_mut().chain(out.b.iter_mut()) {
        *x = &g * &*x * &gi;
    }
    for x in out.connectors.iter_mut() {
        *x = &*x * &gi;
    }
    Ok(out)
}

/// A single event applied to a representation, followed by the regauge `C_1 = 1`.
pub fn apply_event(rep: &StokesRepresentation, event: &WallEvent) -> Result<StokesRepresentation> {
    let i = event.point;
    if i >= rep.connectors.len() {
        return Err(Error::Invalid("no such marked point".into()));
    }
    let mut local = vec![rep.connectors[i].clone(), rep.formal[i].clone()];
    local.extend(rep.stokes[i].iter().cloned());
    let local = on_point(|j| apply_event_local(rep.n, j, &event.kind), &local)?;
    let mut out = rep.clone();
    out.connectors[i] = local[0].clone();
    out.formal[i] = local[1].clone();
    out.stokes[i] = local[2..].to_vec();
    if i == 0 {
        out = regauge(&out)?;
    }
    Ok(out)
}

pub fn apply_cut_crossing(rep: &StokesRepresentation, event: &WallEvent) -> Result<StokesRepresentation> {
    match event.kind {
        EventKind::CutCrossing { .. } => apply_event(rep, event),
        _ => Err(Error::Invalid("not a cut crossing".into())),
    }
}

pub fn apply_collision(rep: &StokesRepresentation, event: &WallEvent) -> Result<StokesRepresentation> {
    match event.kind {
        EventKind::Collision { .. } => apply_event(rep, event),
        _ => Err(Error::Invalid("not a collision".into())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportResult {
    pub representation: StokesRepresentation,
    pub curve: IrregularCurve,
    pub schedule: Schedule,
    pub relation_residual: f64,
}

fn check_start(curve: &IrregularCurve, path: &DeformationPath) -> Result<IrregularCurve> {
    let q = curve.points.get(path.point).ok_or_else(|| Error::Invalid(format!("point: no marked point {}", path.point)))?;
    let first = path.samples.first().ok_or_else(|| Error::Invalid("samples: empty path".into()))?;
    if !close_types(q, first) {
        return Err(Error::Invalid("samples[0] differs from the irregular type of the marked point".into()));
    }
    let mut end = curve.clone();
    end.points[path.point] = path.samples.last().unwrap().clone();
    Ok(end)
}

/// Transport of a Stokes representation along an admissible path.
pub fn transport(curve: &IrregularCurve, rep: &StokesRepresentation, path: &DeformationPath) -> Result<TransportResult> {
    let end = check_start(curve, path)?;
    let schedule = detect_events(path)?;
    transport_with(curve, &end, rep, schedule)
}

/// Transport along a precomputed schedule.
pub fn transport_with(curve: &IrregularCurve, end: &IrregularCurve, rep: &StokesRepresentation, schedule: Schedule) -> Result<TransportResult> {
    let p = on_point(|j| apply_schedule_jet(curve, &schedule, j), &rep.to_point())?;
    let out = StokesRepresentation::from_point(end, &p)?;
    let relation_residual = check_relation(&out)?;
    Ok(TransportResult { representation: out, curve: end.clone(), schedule, relation_residual })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportReport {
    pub events: usize,
    pub relation_residual: f64,
    /// Largest change of an eigenvalue of a formal monodromy.
    pub class_drift: f64,
    pub stable_before: bool,
    pub stable_after: bool,
    /// Largest `|omega(u, v) - omega(T_* u, T_* v)|` at the point and target membership.
    pub two_form: f64,
    pub membership: f64,
    pub passed: bool,
}

/// Eigenvalues via the complex Schur form.
pub fn eigenvalues(m: &Mat) -> Vec<C> {
    let (_, t) = nalgebra::Schur::new(m.clone()).unpack();
    (0..m.nrows()).map(|i| t[(i, i)]).collect()
}

/// Greedy matching distance between two eigenvalue multisets.
pub fn spectrum_distance(a: &[C], b: &[C]) -> f64 {
    let mut rest = b.to_vec();
    let mut worst: f64 = 0.0;
    for x in a {
        let (k, d) = rest
            .iter()
            .enumerate()
            .map(|(k, y)| (k, (x - y).norm()))
            .min_by(|p, q| p.1.partial_cmp(&q.1).unwrap())
            .unwrap_or((0, f64::INFINITY));
        worst = worst.max(d);
        if !rest.is_empty() {
            rest.remove(k);
        }
    }
    worst
}

/// Invariance checks for a transport: relation, formal monodromy classes,
/// stability and the pullback of the two-form at the representation.
pub fn verify_transport(curve: &IrregularCurve, rep: &StokesRepresentation, path: &DeformationPath, tol: f64) -> Result<TransportReport> {
    let end = check_start(curve, path)?;
    let schedule = detect_events(path)?;
    let res = transport_with(curve, &end, rep, schedule.clone())?;
    let after = &res.representation;
    let class_drift = rep
        .formal
        .iter()
        .zip(&after.formal)
        .map(|(x, y)| spectrum_distance(&eigenvalues(x), &eigenvalues(y)))
        .fold(0.0, f64::max);
    let stable_before = is_stable(curve, rep)?.stable;
    let stable_after = is_stable(&end, after)?.stable;
    let (c0, s) = (curve.clone(), schedule.clone());
    let m = SpaceMorphism::new(
        "transport",
        Box::new(build_space(curve)?.space),
        Box::new(build_space(&end)?.space),
        Box::new(move |j: &[Jet]| apply_schedule_jet(&c0, &s, j)),
        Behaviour::Isomorphism,
    )
    .same_groups();
    let pb = verify_pullback(&m, &[rep.to_point()], 0, tol)?;
    let passed = res.relation_residual <= tol
        && class_drift <= tol.max(1e-10)
        && stable_before == stable_after
        && pb.form <= tol
        && pb.membership <= tol.max(1e-10);
    Ok(TransportReport {
        events: schedule.events.len(),
        relation_residual: res.relation_residual,
        class_drift,
        stable_before,
        stable_after,
        two_form: pb.form,
        membership: pb.membership,
        passed,
    })
}

/// Distance between two representations (largest entry difference).
pub fn rep_distance(a: &StokesRepresentation, b: &StokesRepresentation) -> f64 {
    let (p, q) = (a.to_point(), b.to_point());
    if p.len() != q.len() {
        return f64::INFINITY;
    }
    p.iter().zip(&q).map(|(x, y)| if x.shape() == y.shape() { max_abs(&(x - y)) } else { f64::INFINITY }).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn gl2(a: C) -> IrregularType {
        IrregularType::one_level(1, vec![a, c(0.0, 0.0)]).unwrap()
    }

    #[test]
    fn wrap_pm_range() {
        assert!((wrap_pm(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_pm(-0.5) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn constant_path_has_no_events() {
        let q = gl2(c(1.0, 1.0));
        let s = detect_events(&DeformationPath::constant(0, &q, 5)).unwrap();
        assert!(s.events.is_empty());
        assert!(validate_path(&DeformationPath::constant(0, &q, 5)).valid);
    }

    #[test]
    fn rotating_path_is_admissible() {
        let q = IrregularType::one_level(1, vec![c(1.0, 0.0), c(-1.0, 0.0)]).unwrap();
        let p = DeformationPath::wind(0, &q, [0, 1], 0.5, 40).unwrap();
        assert!(validate_path(&p).valid);
    }

    #[test]
    fn crossing_entries_are_rejected() {
        let samples = (0..=4).map(|i| gl2(c(1.0 - 0.5 * i as f64, 0.0))).collect();
        let v = validate_path(&DeformationPath::new(0, samples));
        assert!(!v.valid);
        let bad = v.violation.unwrap();
        assert_eq!(bad.index, 2);
        assert!((bad.time - 0.5).abs() < 1e-12);
    }

    #[test]
    fn half_turn_crosses_once() {
        // The directions of a root and its negative sweep complementary half circles.
        let q = gl2(c(0.3, 1.0));
        let s = detect_events(&DeformationPath::wind(0, &q, [0, 1], 0.5, 64).unwrap()).unwrap();
        assert_eq!(s.events.len(), 1);
        let s = detect_events(&DeformationPath::wind(0, &q, [0, 1], 1.0, 64).unwrap()).unwrap();
        assert_eq!(s.events.len(), 2);
        assert!(s.events.iter().all(|e| e.kind == EventKind::CutCrossing { sense: -1 }));
    }
}
