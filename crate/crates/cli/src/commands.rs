//! One function per subcommand. Each returns the report text and whether the
//! checks it performed passed.

use std::collections::BTreeMap;

use rand::SeedableRng;
use serde::Serialize;
use stokes_core::braiding::{detect_events, direction_tracks, transport, verify_transport, DeformationPath, Label, Schedule, TransportReport};
use stokes_core::irregular::{
    centralizer, degree, levi_chain, singular_directions_with_cut, stokes_space_dim, IrregularType, LeviChain,
};
use stokes_core::lie::{Partition, Root, RootDatum};
use stokes_core::linalg::Mat;
use stokes_core::morphisms::{edge_reversal, edge_reversal_closed_form, random_vdb_pair, vdb_lift, vdb_morphism, vdb_reduce, verify_pullback_sampled, PullbackReport, VdbConsistency};
use stokes_core::qh::verify::{verify_all, Tolerances, VerifyReport};
use stokes_core::qh::Rng;
use stokes_core::wild::{
    build_space, check_relation, expected_dim, galois_crosscheck, generic_classes, is_generic, is_stable, numeric_dim_check, sample_point,
    validate_structure, ClassSpec, CurveInput, DimCheck, GaloisReport, GenericityReport, IrregularCurve, StabilityReport,
    StokesRepresentation, GENERIC_TOL,
};

use crate::config::{parse, BraidInput, CliError, RunConfig, StokesInput, VdbInput, WildInput};
use crate::spaces;

pub struct Output {
    pub text: String,
    pub passed: bool,
}

fn json<T: Serialize>(v: &T, passed: bool) -> Result<Output, CliError> {
    let mut text = serde_json::to_string_pretty(v).map_err(|e| CliError::Failed(e.to_string()))?;
    text.push('\n');
    Ok(Output { text, passed })
}

fn max_abs_diff(a: &Mat, b: &Mat) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// stokes

#[derive(Serialize)]
struct DirectionReport {
    angle: f64,
    /// Number of labelled directions that coincide here.
    multiplicity: usize,
    support: Vec<Root>,
    levels: BTreeMap<u32, Vec<Root>>,
}

#[derive(Serialize)]
struct StokesReport {
    n: usize,
    levels: Vec<u32>,
    cut: f64,
    directions: Vec<DirectionReport>,
    direction_count: usize,
    /// `sum over roots of deg q_alpha`, equal to the total support size.
    degree_sum: u32,
    centralizer: Partition,
    levi_chain: LeviChain,
    stokes_group_dim: usize,
    stokes_space_dim: usize,
}

pub fn stokes(cfg: &RunConfig) -> Result<Output, CliError> {
    let input = StokesInput::load(cfg)?;
    let (q, cut) = (&input.q, input.cut);
    q.validate()?;
    if !(cut > -std::f64::consts::PI && cut <= std::f64::consts::PI) {
        return Err(CliError::Input("cut: must lie in (-pi, pi]".into()));
    }
    let st = singular_directions_with_cut(q, cut);
    let directions: Vec<DirectionReport> = st
        .directions
        .iter()
        .map(|d| DirectionReport {
            angle: d.angle,
            multiplicity: d.labels.len(),
            support: d.support.iter().copied().collect(),
            levels: d.levels.iter().map(|(k, s)| (*k, s.iter().copied().collect())).collect(),
        })
        .collect();
    let degree_sum = RootDatum::gl(q.n).roots.into_iter().map(|a| degree(q, a)).sum();
    let report = StokesReport {
        n: q.n,
        levels: q.terms.iter().map(|t| t.k).collect(),
        cut,
        direction_count: directions.len(),
        stokes_group_dim: directions.iter().map(|d| d.support.len()).sum(),
        directions,
        degree_sum,
        centralizer: centralizer(q),
        levi_chain: levi_chain(q),
        stokes_space_dim: stokes_space_dim(q),
    };
    json(&report, true)
}

// ---------------------------------------------------------------------------
// verify

#[derive(Serialize)]
struct VerifySummary {
    tolerances: Tolerances,
    reports: Vec<VerifyReport>,
    failed: Vec<String>,
    passed: bool,
}

pub fn verify(cfg: &RunConfig) -> Result<Output, CliError> {
    let names = if cfg.space.is_empty() { spaces::default_menu() } else { cfg.space.clone() };
    let q: Option<IrregularType> = match &cfg.input {
        Some(_) => Some(StokesInput::load(cfg)?.q),
        None => None,
    };
    if let Some(q) = &q {
        q.validate()?;
    }
    let built = names.iter().map(|n| spaces::build(n, q.as_ref())).collect::<Result<Vec<_>, _>>()?;
    let mut tol = Tolerances::default();
    if let Some(t) = cfg.tol {
        tol.qh1 = t;
    }
    let seeds = cfg.samples.unwrap_or(3) as u64;
    let mut reports = Vec::new();
    let mut failed = Vec::new();
    for (name, space) in names.iter().zip(&built) {
        for s in cfg.seed..cfg.seed + seeds {
            let r = verify_all(space.as_ref(), s, &tol)?;
            if !r.passed {
                failed.push(format!("{} (seed {})", name, s));
            }
            reports.push(r);
        }
    }
    let passed = failed.is_empty();
    json(&VerifySummary { tolerances: tol, reports, failed, passed }, passed)
}

// ---------------------------------------------------------------------------
// stability, genericity, dims

fn wild_input(cfg: &RunConfig) -> Result<(IrregularCurve, Option<Vec<ClassSpec>>, Option<StokesRepresentation>), CliError> {
    let input = WildInput::load(cfg)?;
    let curve = input.curve.curve()?;
    let classes = input.curve.validated_classes()?;
    Ok((curve, classes, input.representation))
}

/// The given representation, or `--samples` points sampled from `--seed` on.
fn representations(
    cfg: &RunConfig,
    curve: &IrregularCurve,
    classes: Option<&[ClassSpec]>,
    given: Option<StokesRepresentation>,
) -> Result<Vec<(Option<u64>, StokesRepresentation)>, CliError> {
    if let Some(rep) = given {
        let tol = cfg.tol.unwrap_or(1e-10);
        validate_structure(curve, &rep, tol).map_err(|e| CliError::Input(format!("representation: {}", e)))?;
        let r = check_relation(&rep)?;
        if r > tol {
            return Err(CliError::Failed(format!("representation: monodromy relation violated by {:.3e}", r)));
        }
        return Ok(vec![(None, rep)]);
    }
    let n = cfg.samples.unwrap_or(1) as u64;
    (cfg.seed..cfg.seed + n).map(|s| Ok((Some(s), sample_point(curve, classes, s)?))).collect()
}

#[derive(Serialize)]
struct StabilityEntry {
    seed: Option<u64>,
    relation_residual: f64,
    stability: StabilityReport,
    galois: GaloisReport,
    representation: StokesRepresentation,
}

#[derive(Serialize)]
struct StabilitySummary {
    entries: Vec<StabilityEntry>,
    all_stable: bool,
}

pub fn stability(cfg: &RunConfig) -> Result<Output, CliError> {
    let (curve, classes, rep) = wild_input(cfg)?;
    let reps = representations(cfg, &curve, classes.as_deref(), rep)?;
    let mut entries = Vec::new();
    for (seed, rep) in reps {
        entries.push(StabilityEntry {
            seed,
            relation_residual: check_relation(&rep)?,
            stability: is_stable(&curve, &rep)?,
            galois: galois_crosscheck(&curve, &rep)?,
            representation: rep,
        });
    }
    let all_stable = entries.iter().all(|e| e.stability.stable);
    json(&StabilitySummary { entries, all_stable }, true)
}

#[derive(Serialize)]
struct GenericitySummary {
    generated: bool,
    classes: Vec<ClassSpec>,
    report: GenericityReport,
    expected_dim: i64,
}

fn classes_or_generic(cfg: &RunConfig, curve: &IrregularCurve, classes: Option<Vec<ClassSpec>>) -> Result<(bool, Vec<ClassSpec>), CliError> {
    Ok(match classes {
        Some(c) => (false, c),
        None => (true, generic_classes(curve, cfg.seed)?),
    })
}

pub fn genericity(cfg: &RunConfig) -> Result<Output, CliError> {
    let (curve, classes, _) = wild_input(cfg)?;
    let (generated, classes) = classes_or_generic(cfg, &curve, classes)?;
    let report = is_generic(&classes, cfg.tol.unwrap_or(GENERIC_TOL))?;
    let expected_dim = expected_dim(&curve, Some(&classes))?;
    json(&GenericitySummary { generated, classes, report, expected_dim }, true)
}

#[derive(Serialize)]
struct DimsSummary {
    generated_classes: bool,
    classes: Vec<ClassSpec>,
    expected: i64,
    hom_dim: i64,
    checks: Vec<(Option<u64>, DimCheck)>,
    passed: bool,
}

pub fn dims(cfg: &RunConfig) -> Result<Output, CliError> {
    let (curve, classes, rep) = wild_input(cfg)?;
    let (generated, classes) = classes_or_generic(cfg, &curve, classes)?;
    let expected = expected_dim(&curve, Some(&classes))?;
    let hom = build_space(&curve)?;
    let reps = representations(cfg, &curve, Some(&classes), rep)?;
    let mut checks = Vec::new();
    for (seed, rep) in reps {
        checks.push((seed, numeric_dim_check(&hom, &classes, &rep)?));
    }
    let passed = checks.iter().all(|(_, c)| c.measured.map_or(true, |m| m == c.expected));
    json(&DimsSummary { generated_classes: generated, classes, expected, hom_dim: hom.dim(), checks, passed }, passed)
}

// ---------------------------------------------------------------------------
// braid

#[derive(Serialize)]
struct BraidSummary {
    schedule: Schedule,
    start: StokesRepresentation,
    end: StokesRepresentation,
    end_curve: IrregularCurve,
    report: TransportReport,
}

fn braid_input(cfg: &RunConfig, text: Option<&str>) -> Result<(IrregularCurve, CurveInput, DeformationPath, Option<StokesRepresentation>), CliError> {
    let input: BraidInput = match text {
        Some(t) => parse(t)?,
        None => cfg.load()?,
    };
    let curve = input.curve.curve()?;
    let path = input.path.resolve(&curve)?;
    Ok((curve, input.curve, path, input.representation))
}

pub fn braid(cfg: &RunConfig) -> Result<Output, CliError> {
    let (curve, ci, path, rep) = braid_input(cfg, None)?;
    let classes = ci.validated_classes()?;
    let rep = representations(cfg, &curve, classes.as_deref(), rep)?.remove(0).1;
    let res = transport(&curve, &rep, &path)?;
    let report = verify_transport(&curve, &rep, &path, cfg.tol.unwrap_or(1e-9))?;
    let passed = report.passed;
    json(&BraidSummary { schedule: res.schedule, start: rep, end: res.representation, end_curve: res.curve, report }, passed)
}

// ---------------------------------------------------------------------------
// vdb

#[derive(Serialize)]
struct VdbEntry {
    #[serde(with = "stokes_core::io::cmat")]
    a: Mat,
    #[serde(with = "stokes_core::io::cmat")]
    b: Mat,
    relations: VdbConsistency,
    #[serde(with = "stokes_core::io::cmat")]
    reversed_a: Mat,
    #[serde(with = "stokes_core::io::cmat")]
    reversed_b: Mat,
    /// Distance between the composed edge reversal and its closed form.
    closed_form_gap: f64,
}

#[derive(Serialize)]
struct VdbSummary {
    dv: usize,
    dw: usize,
    entries: Vec<VdbEntry>,
    pullback: PullbackReport,
    passed: bool,
}

pub fn vdb(cfg: &RunConfig) -> Result<Output, CliError> {
    let (dv, dw, given) = match &cfg.input {
        Some(_) => {
            let v: VdbInput = cfg.load()?;
            let pair = match (v.a, v.b) {
                (Some(a), Some(b)) => Some((a, b)),
                (None, None) => None,
                _ => return Err(CliError::Input("a, b: give both or neither".into())),
            };
            (v.dv, v.dw, pair)
        }
        None => {
            let sizes = cfg.space.first().map(String::as_str).unwrap_or("1,1");
            let d: Vec<usize> = sizes
                .split(',')
                .map(|x| x.trim().parse().map_err(|_| CliError::Input(format!("--space {:?}: expected dv,dw", sizes))))
                .collect::<Result<_, _>>()?;
            if d.len() != 2 {
                return Err(CliError::Input(format!("--space {:?}: expected dv,dw", sizes)));
            }
            (d[0], d[1], None)
        }
    };
    if dv == 0 || dw == 0 {
        return Err(CliError::Input("dv, dw: must be positive".into()));
    }
    let pairs = match given {
        Some((a, b)) => {
            if a.shape() != (dw, dv) || b.shape() != (dv, dw) {
                return Err(CliError::Input(format!("a, b: expected shapes {}x{} and {}x{}", dw, dv, dv, dw)));
            }
            vec![(a, b)]
        }
        None => {
            let mut rng = Rng::seed_from_u64(cfg.seed);
            (0..cfg.samples.unwrap_or(10)).map(|_| random_vdb_pair(&mut rng, dv, dw, 0.8)).collect()
        }
    };
    let tol = cfg.tol.unwrap_or(1e-12);
    let mut entries = Vec::new();
    for (a, b) in pairs {
        let p = vdb_lift(dv, dw, &a, &b)?;
        let (_, _, relations) = vdb_reduce(dv, dw, &p, tol)?;
        let (ra, rb) = edge_reversal(dv, dw, &a, &b)?;
        let (ca, cb) = edge_reversal_closed_form(&a, &b)?;
        let closed_form_gap = max_abs_diff(&ra, &ca).max(max_abs_diff(&rb, &cb));
        entries.push(VdbEntry { a, b, relations, reversed_a: ra, reversed_b: rb, closed_form_gap });
    }
    let pullback = verify_pullback_sampled(&vdb_morphism(dv, dw)?, cfg.samples.unwrap_or(10).min(20), cfg.seed, 1e-9)?;
    let passed = pullback.passed && entries.iter().all(|e| e.relations.max() <= tol && e.closed_form_gap <= tol);
    json(&VdbSummary { dv, dw, entries, pullback, passed }, passed)
}

// ---------------------------------------------------------------------------
// plot-data

fn csv_text(header: &[&str], rows: Vec<Vec<String>>) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Failed(e.to_string());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Failed(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Failed(e.to_string()))
}

fn root_name(r: Root) -> String {
    format!("{}-{}", r.0, r.1)
}

fn fmt(x: f64) -> String {
    format!("{:.12}", x)
}

fn path_rows(path: &DeformationPath) -> Result<String, CliError> {
    detect_events(path)?;
    let tr = direction_tracks(path)?;
    let mut branch = Vec::with_capacity(tr.labels.len());
    let mut seen: BTreeMap<Root, usize> = BTreeMap::new();
    for l in &tr.labels {
        let b = seen.entry(l.root).or_insert(0);
        branch.push(*b);
        *b += 1;
    }
    let mut rows = Vec::new();
    for (t, angles) in tr.times.iter().zip(&tr.angles) {
        for (i, (Label { root, k }, a)) in tr.labels.iter().zip(angles).enumerate() {
            rows.push(vec![fmt(*t), root_name(*root), branch[i].to_string(), k.to_string(), fmt(*a)]);
        }
    }
    csv_text(&["time", "root", "branch", "level", "angle"], rows)
}

pub fn plot_data(cfg: &RunConfig) -> Result<Output, CliError> {
    let text = cfg.read_input()?;
    let value: serde_json::Value = parse(&text)?;
    let csv = if value.get("curve").is_some() {
        let (_, _, path, _) = braid_input(cfg, Some(&text))?;
        path_rows(&path)?
    } else if value.get("samples").is_some() {
        path_rows(&parse::<DeformationPath>(&text)?)?
    } else {
        let input = StokesInput::from_text(&text)?;
        input.q.validate()?;
        let st = singular_directions_with_cut(&input.q, input.cut);
        let rows = st
            .directions
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let roots: Vec<String> = d.support.iter().map(|&r| root_name(r)).collect();
                let levels: Vec<String> = d.levels.keys().map(|k| k.to_string()).collect();
                vec![i.to_string(), fmt(d.angle), roots.join(" "), levels.join(" ")]
            })
            .collect();
        csv_text(&["index", "angle", "roots", "levels"], rows)?
    };
    Ok(Output { text: csv, passed: true })
}
