//! The open cone of trace-positive diagonal derivations lying in a positive
//! multiple of the diagonal moment image plus positive diagonals: membership,
//! cross-sections at fixed trace, Weyl invariance and the metric audit.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::bracket::{Bracket, Triple};
use crate::certify::{
    certify_srn_nice, certify_srn_sampled, exact_diagonal, NiceOutcome, Refutation, SampledOutcome,
    SrnCertificate, MARGIN_THRESHOLD, TRACE_TOL,
};
use crate::derivations::{diagonal_torus, Derivation, Torus};
use crate::error::{Error, Result};
use crate::field::{int, rational_from_f64, Field, Rational};
use crate::linalg::{self, Mat};
use crate::lp::{LinearProgram, LpStatus, Relation};
use crate::moment::{nice_basis_check, weight_polytope};
use crate::orbit::{orbit_sample, GroupTag, OrbitSample};
use crate::polytope::Polytope;
use crate::rng;
use crate::search::{search_rn_metric, witness_from_certificate, SearchConfig, SearchOutcome};
use crate::weyl::WeylGroup;

/// Torus dimension bound for exact sections.
pub const MAX_EXACT_TORUS_DIM: usize = 4;
/// Orbit points drawn for sampled membership and sections.
pub const SAMPLE_COUNT: usize = 48;
const MAX_ACTIVE_SETS: usize = 2_000_000;
const CHART_GRID: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    In,
    Out,
    Unknown,
}

#[derive(Clone, Debug)]
pub struct Membership {
    pub verdict: Verdict,
    pub certificate: Option<SrnCertificate>,
    pub refutation: Option<Refutation>,
    pub reason: &'static str,
}

fn torus_of(d: &[f64], b: &Bracket) -> Result<Torus> {
    if d.len() != b.dim() {
        return Err(Error::Dimension {
            expected: b.dim(),
            got: d.len(),
        });
    }
    let torus = diagonal_torus(b);
    if !torus.contains(d, 1e-9) {
        return Err(Error::Precondition("D is not in the diagonal torus".into()));
    }
    Ok(torus)
}

/// `In` with a certificate, `Out` when the trace is not positive or the exact
/// LP is infeasible for a nice multiplicity-free torus, `Unknown` otherwise.
pub fn cone_membership(d: &[f64], b: &Bracket, seed: u64) -> Result<Membership> {
    torus_of(d, b)?;
    if d.iter().sum::<f64>() <= TRACE_TOL {
        return Ok(Membership {
            verdict: Verdict::Out,
            certificate: None,
            refutation: None,
            reason: "trace is not positive",
        });
    }
    if nice_basis_check(b).nice {
        match certify_srn_nice(d, b)? {
            NiceOutcome::Certified(c) => {
                return Ok(Membership {
                    verdict: Verdict::In,
                    certificate: Some(c),
                    refutation: None,
                    reason: "weight LP certificate",
                })
            }
            NiceOutcome::Infeasible(r) => {
                let nonpositive = match &r.exact_value {
                    Some(v) => *v <= int(0),
                    None => r.value <= 0.0,
                };
                if r.complete && nonpositive {
                    return Ok(Membership {
                        verdict: Verdict::Out,
                        certificate: None,
                        refutation: Some(r),
                        reason: "weight LP infeasible, multiplicity-free torus",
                    });
                }
            }
        }
    }
    let sample = orbit_sample(GroupTag::TorusCentralizer, b, SAMPLE_COUNT, seed)?;
    match certify_srn_sampled(d, b, &sample)? {
        SampledOutcome::Certified(c) => Ok(Membership {
            verdict: Verdict::In,
            certificate: Some(c),
            refutation: None,
            reason: "sampled orbit LP certificate",
        }),
        SampledOutcome::Unknown { .. } => Ok(Membership {
            verdict: Verdict::Unknown,
            certificate: None,
            refutation: None,
            reason: "no certificate from sampled orbit",
        }),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Exactness {
    Exact,
    SampledInner,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SectionMode {
    /// Exact when the basis is nice and the torus multiplicity-free.
    Auto,
    Exact,
    Sampled,
}

/// Closure of `{D in torus : tr D = t}` intersected with the cone, in torus
/// coordinates.
#[derive(Clone, Debug)]
pub struct ConeSection {
    pub torus_basis: Vec<Vec<Rational>>,
    pub trace_level: f64,
    pub vertices: Vec<Vec<f64>>,
    pub exact_vertices: Option<Vec<Vec<Rational>>>,
    pub exactness: Exactness,
    pub dim: usize,
    pub f_vector: Vec<usize>,
    pub is_cube: bool,
}

impl ConeSection {
    pub fn barycenter(&self) -> Vec<f64> {
        let k = self.torus_basis.len();
        let mut c = vec![0.0; k];
        for v in &self.vertices {
            for (ci, vi) in c.iter_mut().zip(v) {
                *ci += vi / self.vertices.len() as f64;
            }
        }
        c
    }

    pub fn diagonal_of(&self, coords: &[f64]) -> Vec<f64> {
        let n = self.torus_basis.first().map_or(0, |v| v.len());
        let mut d = vec![0.0; n];
        for (v, c) in self.torus_basis.iter().zip(coords) {
            for (di, vi) in d.iter_mut().zip(v) {
                *di += c * Field::to_f64(vi);
            }
        }
        d
    }
}

/// Chart on the trace hyperplane: drop the coordinate `pivot` of the trace
/// functional and recover it from the others.
struct Chart {
    functional: Vec<f64>,
    pivot: usize,
    level: f64,
}

impl Chart {
    fn new(functional: Vec<f64>, level: f64) -> Result<Self> {
        let pivot = (0..functional.len())
            .max_by(|&a, &c| functional[a].abs().total_cmp(&functional[c].abs()))
            .filter(|&p| functional[p] != 0.0)
            .ok_or_else(|| Error::Precondition("the torus is traceless".into()))?;
        Ok(Chart {
            functional,
            pivot,
            level,
        })
    }

    fn down(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .filter(|(i, _)| *i != self.pivot)
            .map(|(_, v)| *v)
            .collect()
    }

    fn up(&self, y: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(y.len() + 1);
        let mut it = y.iter();
        let mut rest = self.level;
        for i in 0..self.functional.len() {
            if i == self.pivot {
                x.push(0.0);
            } else {
                let v = *it.next().expect("chart dimension");
                rest -= self.functional[i] * v;
                x.push(v);
            }
        }
        x[self.pivot] = rest / self.functional[self.pivot];
        x
    }
}

fn trace_functional_f64(torus: &Torus) -> Vec<f64> {
    torus.trace_functional().iter().map(Field::to_f64).collect()
}

/// Cross-section of the cone at trace level `t`.
pub fn cone_section(b: &Bracket, t: f64, mode: SectionMode, resolution: usize, seed: u64) -> Result<ConeSection> {
    if t.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) || !t.is_finite() {
        return Err(Error::Precondition("trace level must be positive".into()));
    }
    let torus = diagonal_torus(b);
    let exact_regime = nice_basis_check(b).nice && torus.is_multiplicity_free();
    let exact = match mode {
        SectionMode::Auto => exact_regime && torus.dim() <= MAX_EXACT_TORUS_DIM,
        SectionMode::Exact => {
            if !exact_regime {
                return Err(Error::Precondition(
                    "exact sections need a nice basis and a multiplicity-free torus".into(),
                ));
            }
            true
        }
        SectionMode::Sampled => false,
    };
    if exact {
        exact_section(b, &torus, t)
    } else {
        sampled_section(b, &torus, t, resolution, seed)
    }
}

fn exact_section(b: &Bracket, torus: &Torus, t: f64) -> Result<ConeSection> {
    let k = torus.dim();
    if k > MAX_EXACT_TORUS_DIM {
        return Err(Error::Precondition(format!(
            "torus dimension {k} exceeds {MAX_EXACT_TORUS_DIM} for exact sections"
        )));
    }
    let tq = exact_diagonal(&[t])
        .ok_or_else(|| Error::Precondition("trace level is not a short rational".into()))?
        .remove(0);
    let n = b.dim();
    let weights: Vec<Vec<Rational>> = b
        .support()
        .iter()
        .map(|tr: &Triple| tr.weight(n).into_iter().map(int).collect())
        .collect();
    let m = weights.len();
    let basis = torus.basis();
    let vars = k + m;
    // inequality rows g . z >= 0 over z = (a, beta)
    let mut rows: Vec<Vec<Rational>> = Vec::new();
    for r in 0..n {
        let mut row: Vec<Rational> = basis.iter().map(|v| v[r].clone()).collect();
        row.extend(weights.iter().map(|w| -w[r].clone()));
        rows.push(row);
    }
    for j in 0..m {
        let mut row = vec![int(0); vars];
        row[k + j] = int(1);
        rows.push(row);
    }
    let mut trace_row = torus.trace_functional();
    trace_row.extend(std::iter::repeat_n(int(0), m));

    // boundedness: maximize sum beta and +-a over the lifted set
    let lifted_lp = |obj: Vec<Rational>| {
        let mut lp = LinearProgram::<Rational>::new(vars);
        lp.maximize(obj);
        for i in 0..k {
            lp.set_free(i);
        }
        for row in &rows[..n] {
            lp.constrain(row.clone(), Relation::Ge, int(0));
        }
        lp.constrain(trace_row.clone(), Relation::Eq, tq.clone());
        lp.solve()
    };
    let mut probe = vec![int(0); vars];
    for p in probe.iter_mut().skip(k) {
        *p = int(1);
    }
    match lifted_lp(probe) {
        LpStatus::Optimal { .. } => {}
        LpStatus::Infeasible => return Err(Error::Precondition("the section is empty".into())),
        LpStatus::Unbounded => {
            return Err(Error::Precondition("the lifted section is unbounded".into()))
        }
        LpStatus::Failed(e) => return Err(Error::Numerical(e)),
    }

    let need = vars - 1;
    let count = binomial(rows.len(), need);
    if count > MAX_ACTIVE_SETS {
        return Err(Error::Precondition(format!(
            "{count} active sets exceed the enumeration bound"
        )));
    }
    let candidates: Vec<Vec<Rational>> = combinations(rows.len(), need)
        .into_par_iter()
        .filter_map(|active| {
            let mut system: Vec<Vec<Rational>> = active.iter().map(|&i| rows[i].clone()).collect();
            system.push(trace_row.clone());
            let mut rhs = vec![int(0); need];
            rhs.push(tq.clone());
            if linalg::rank(&system, vars, 0.0) < vars {
                return None;
            }
            let z = linalg::solve(&system, &rhs, vars, 0.0)?;
            let feasible = rows.iter().all(|row| {
                row.iter().zip(&z).fold(int(0), |acc, (g, x)| acc + g * x) >= int(0)
            });
            feasible.then(|| z[..k].to_vec())
        })
        .collect();
    let mut points: Vec<Vec<Rational>> = Vec::new();
    for c in candidates {
        if !points.contains(&c) {
            points.push(c);
        }
    }
    if points.is_empty() {
        return Err(Error::Precondition("the section is empty".into()));
    }
    points.sort();
    let poly = Polytope::hull(points)?;
    let exact_vertices = poly.vertices();
    let vertices = crate::polytope::to_f64_points(&exact_vertices);
    let section = ConeSection {
        torus_basis: basis.to_vec(),
        trace_level: t,
        vertices,
        exact_vertices: Some(exact_vertices),
        exactness: Exactness::Exact,
        dim: poly.dim(),
        f_vector: poly.f_vector(),
        is_cube: poly.is_combinatorial_cube(),
    };
    require_open_interior(b, &section)?;
    Ok(section)
}

/// The barycenter of the closed section must be strictly in the cone.
fn require_open_interior(b: &Bracket, section: &ConeSection) -> Result<()> {
    let d = section.diagonal_of(&section.barycenter());
    match cone_membership(&d, b, rng::DEFAULT_SEED)?.verdict {
        Verdict::In => Ok(()),
        _ => Err(Error::Precondition(
            "the section has empty relative interior".into(),
        )),
    }
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return out;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Probe directions in torus coordinates: cube vertices and face normals,
/// then `resolution` seeded random unit vectors.
fn probe_directions(k: usize, resolution: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut dirs = Vec::new();
    for i in 0..k {
        for s in [1.0, -1.0] {
            let mut v = vec![0.0; k];
            v[i] = s;
            dirs.push(v);
        }
    }
    if k <= 6 {
        for mask in 0..(1usize << k) {
            dirs.push((0..k).map(|i| if mask >> i & 1 == 1 { -1.0 } else { 1.0 }).collect());
        }
    }
    let mut g = rng::stream(seed, u64::MAX);
    for _ in 0..resolution {
        let v: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut g)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
        dirs.push(v.into_iter().map(|x| x / norm).collect());
    }
    dirs
}

/// Inner approximation from the chamber points of a torus-centralizer sample
/// and the weights of `CH_mu` vertices, both moment values of the orbit
/// closure.
fn sampled_points(b: &Bracket, torus: &Torus, seed: u64) -> Result<Vec<Vec<f64>>> {
    let n = b.dim();
    let mut points: Vec<Vec<f64>> = Vec::new();
    if b.support().is_empty() {
        return Ok(points);
    }
    let blocks = crate::derivations::torus_blocks(torus);
    let sample: OrbitSample = orbit_sample(GroupTag::TorusCentralizer, b, SAMPLE_COUNT, seed)?;
    for p in sample.points.iter().filter(|p| p.diagonalized) {
        let mut d = p.moment.diagonal();
        for block in &blocks {
            let mut vals: Vec<f64> = block.iter().map(|&i| d[i]).collect();
            vals.sort_by(|a, c| c.total_cmp(a));
            for (&i, v) in block.iter().zip(vals) {
                d[i] = v;
            }
        }
        points.push(d);
    }
    let wp = weight_polytope(b)?;
    for v in wp.vertices() {
        points.push(v.weight.iter().map(|&x| x as f64).collect());
    }
    debug_assert!(points.iter().all(|p| p.len() == n));
    Ok(points)
}

fn sampled_section(b: &Bracket, torus: &Torus, t: f64, resolution: usize, seed: u64) -> Result<ConeSection> {
    let k = torus.dim();
    if k == 0 {
        return Err(Error::Precondition("the diagonal torus is trivial".into()));
    }
    let basis_f = torus.basis_f64();
    let n = b.dim();
    let points = sampled_points(b, torus, seed)?;
    let m = points.len();
    let trace = trace_functional_f64(torus);
    let chart = Chart::new(trace.clone(), t)?;
    let dirs = probe_directions(k, resolution, seed);
    let optima: Vec<Option<Vec<f64>>> = dirs
        .par_iter()
        .map(|w| {
            let mut lp = LinearProgram::<f64>::new(k + m);
            let mut obj = w.clone();
            obj.extend(std::iter::repeat_n(0.0, m));
            lp.maximize(obj);
            for i in 0..k {
                lp.set_free(i);
            }
            for r in 0..n {
                let mut row: Vec<f64> = basis_f.iter().map(|v| v[r]).collect();
                row.extend(points.iter().map(|p| -p[r]));
                lp.constrain(row, Relation::Ge, 0.0);
            }
            let mut row = trace.clone();
            row.extend(std::iter::repeat_n(0.0, m));
            lp.constrain(row, Relation::Eq, t);
            match lp.solve() {
                LpStatus::Optimal { x, .. } => Some(x[..k].to_vec()),
                _ => None,
            }
        })
        .collect();
    if optima.iter().any(Option::is_none) {
        return Err(Error::Numerical("support probe LP failed".into()));
    }
    let mut chart_points: Vec<Vec<Rational>> = Vec::new();
    for a in optima.into_iter().flatten() {
        let y: Vec<Rational> = chart
            .down(&a)
            .iter()
            .map(|v| {
                let snapped = (v / CHART_GRID).round() * CHART_GRID;
                rational_from_f64(snapped, (1.0 / CHART_GRID) as i64).unwrap_or_else(|| int(0))
            })
            .collect();
        if !chart_points.contains(&y) {
            chart_points.push(y);
        }
    }
    chart_points.sort();
    let poly = Polytope::hull(chart_points)?;
    let vertices: Vec<Vec<f64>> = crate::polytope::to_f64_points(&poly.vertices())
        .iter()
        .map(|y| chart.up(y))
        .collect();
    let section = ConeSection {
        torus_basis: torus.basis().to_vec(),
        trace_level: t,
        vertices,
        exact_vertices: None,
        exactness: Exactness::SampledInner,
        dim: poly.dim(),
        f_vector: poly.f_vector(),
        is_cube: poly.is_combinatorial_cube(),
    };
    require_open_interior(b, &section)?;
    Ok(section)
}

#[derive(Clone, Debug, Serialize)]
pub struct WeylReport {
    pub group_order: usize,
    pub invariant: bool,
    /// Largest Hausdorff distance between the vertex set and its image.
    pub worst_distance: f64,
    /// Indices of group actions that fail.
    pub violations: Vec<usize>,
}

pub const WEYL_TOL: f64 = 1e-6;

fn hausdorff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let dist = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    let one = |a: &[Vec<f64>], b: &[Vec<f64>]| {
        a.iter()
            .map(|x| b.iter().map(|y| dist(x, y)).fold(f64::INFINITY, f64::min))
            .fold(0.0f64, f64::max)
    };
    one(a, b).max(one(b, a))
}

/// Whether every group element maps the section's vertex set onto itself.
pub fn weyl_invariance_check(section: &ConeSection, group: &WeylGroup) -> WeylReport {
    let mut worst = 0.0f64;
    let mut violations = Vec::new();
    for (gi, action) in group.actions.iter().enumerate() {
        let ok = match &section.exact_vertices {
            Some(exact) => {
                let image: Vec<Vec<Rational>> = exact
                    .iter()
                    .map(|v| {
                        action
                            .iter()
                            .map(|row| row.iter().zip(v).fold(int(0), |acc, (m, x)| acc + m * x))
                            .collect()
                    })
                    .collect();
                let same = image.len() == exact.len() && image.iter().all(|p| exact.contains(p));
                let fimg = crate::polytope::to_f64_points(&image);
                worst = worst.max(hausdorff(&fimg, &section.vertices));
                same
            }
            None => {
                let mat: Vec<Vec<f64>> = action.iter().map(|r| r.iter().map(Field::to_f64).collect()).collect();
                let image: Vec<Vec<f64>> = section
                    .vertices
                    .iter()
                    .map(|v| mat.iter().map(|row| row.iter().zip(v).map(|(m, x)| m * x).sum()).collect())
                    .collect();
                let h = hausdorff(&image, &section.vertices);
                worst = worst.max(h);
                h <= WEYL_TOL
            }
        };
        if !ok {
            violations.push(gi);
        }
    }
    WeylReport {
        group_order: group.order(),
        invariant: violations.is_empty(),
        worst_distance: worst,
        violations,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AuditProbe {
    pub diagonal: Vec<f64>,
    pub certified: bool,
    pub lambda_max: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AuditReport {
    pub probes: usize,
    pub excluded: usize,
    pub witnesses: usize,
    pub worst_lambda_max: f64,
    pub failures: Vec<AuditProbe>,
}

impl AuditReport {
    pub fn success_rate(&self) -> f64 {
        if self.probes == self.excluded {
            return 1.0;
        }
        self.witnesses as f64 / (self.probes - self.excluded) as f64
    }
}

/// Interior points of the section: random convex combinations of vertices
/// pulled towards the barycenter.
pub fn interior_probes(section: &ConeSection, probes: usize, seed: u64) -> Vec<Vec<f64>> {
    let center = section.barycenter();
    let k = center.len();
    let mut g = rng::stream(seed, u64::MAX - 1);
    (0..probes)
        .map(|_| {
            let w: Vec<f64> = section.vertices.iter().map(|_| Exp1.sample(&mut g)).collect();
            let total: f64 = w.iter().sum();
            let shrink: f64 = g.random_range(0.05..0.95);
            (0..k)
                .map(|i| {
                    let p: f64 = section.vertices.iter().zip(&w).map(|(v, wi)| v[i] * wi / total).sum();
                    center[i] + shrink * (p - center[i])
                })
                .collect()
        })
        .collect()
}

/// Each interior probe must be certified and carry a Ricci negative metric.
pub fn containment_audit(b: &Bracket, section: &ConeSection, probes: usize, seed: u64) -> Result<AuditReport> {
    let points = interior_probes(section, probes, seed);
    let results: Vec<Result<Option<AuditProbe>>> = points
        .par_iter()
        .enumerate()
        .map(|(i, coords)| {
            let d = section.diagonal_of(coords);
            if d.iter().sum::<f64>() <= TRACE_TOL {
                return Ok(None);
            }
            let member = cone_membership(&d, b, seed.wrapping_add(i as u64))?;
            let Some(cert) = member.certificate else {
                return Ok(Some(AuditProbe {
                    diagonal: d,
                    certified: false,
                    lambda_max: None,
                }));
            };
            let der = Derivation::diagonal(&d, b)?;
            let config = SearchConfig {
                seed: seed.wrapping_add(i as u64),
                warm_starts: witness_from_certificate(&cert, b).into_iter().collect(),
                ..SearchConfig::default()
            };
            let lambda = match search_rn_metric(&der, b, &config)? {
                SearchOutcome::Witness(w) => Some(w.lambda_max),
                SearchOutcome::Failure { .. } => None,
            };
            Ok(Some(AuditProbe {
                diagonal: d,
                certified: true,
                lambda_max: lambda,
            }))
        })
        .collect();
    let mut report = AuditReport {
        probes,
        excluded: 0,
        witnesses: 0,
        worst_lambda_max: f64::NEG_INFINITY,
        failures: Vec::new(),
    };
    for r in results {
        match r? {
            None => report.excluded += 1,
            Some(p) => match p.lambda_max {
                Some(l) if p.certified => {
                    report.witnesses += 1;
                    report.worst_lambda_max = report.worst_lambda_max.max(l);
                }
                _ => report.failures.push(p),
            },
        }
    }
    Ok(report)
}

/// Diagonal matrix of a section point, for callers that need a `Mat`.
pub fn section_point_matrix(section: &ConeSection, coords: &[f64]) -> Mat {
    linalg::diag_mat(&section.diagonal_of(coords))
}

/// LP margin of a diagonal point against the weights, without preconditions;
/// positive exactly on the open cone in the nice multiplicity-free case.
pub fn weight_margin(d: &[f64], b: &Bracket) -> f64 {
    match certify_srn_nice(d, b) {
        Ok(NiceOutcome::Certified(c)) => c.margin,
        Ok(NiceOutcome::Infeasible(r)) => r.value.min(MARGIN_THRESHOLD),
        Err(_) => f64::NEG_INFINITY,
    }
}
