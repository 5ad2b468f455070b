//! Certificates for strongly Ricci negative diagonal derivations: LP
//! certificates over weight matrices or sampled moment values, the
//! constructive certificate for nonnegative derivations, and the necessary
//! condition.

use serde::Serialize;

use crate::bracket::{center, Bracket, Triple};
use crate::derivations::{diagonal_torus, eigen_blocks, Torus};
use crate::error::{Error, Result};
use crate::field::{rational_from_f64, Field, Rational};
use crate::linalg::{self, Mat};
use crate::lp::{LinearProgram, LpStatus, Relation};
use crate::moment::nice_basis_check;
use crate::orbit::{GroupTag, OrbitSample};

/// Margin required for an LP certificate.
pub const MARGIN_THRESHOLD: f64 = 1e-7;
/// Trace and spectrum positivity threshold.
pub const TRACE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertMethod {
    NiceLp,
    SampledLp,
    Constructive,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TermKey {
    Triple(Triple),
    Sample(usize),
}

#[derive(Clone, Debug)]
pub struct CertTerm {
    pub key: TermKey,
    pub coefficient: f64,
    /// Diagonal moment value `P` (a weight `F_ij^k` or a sampled value).
    pub point: Vec<f64>,
    /// Group element realizing `point` for sampled terms.
    pub group_element: Option<Mat>,
}

#[derive(Clone, Debug)]
pub struct ExactCertificate {
    pub coefficients: Vec<Rational>,
    pub margin: Rational,
}

/// `D - sum b P >= margin > 0` entrywise, `b >= 0`.
#[derive(Clone, Debug)]
pub struct SrnCertificate {
    pub method: CertMethod,
    pub derivation: Vec<f64>,
    pub terms: Vec<CertTerm>,
    pub margin: f64,
    pub exact: Option<ExactCertificate>,
}

impl SrnCertificate {
    /// Recomputed `min_r (D - sum b P)_r`.
    pub fn recomputed_margin(&self) -> f64 {
        let mut rest = self.derivation.clone();
        for t in &self.terms {
            for (r, p) in rest.iter_mut().zip(&t.point) {
                *r -= t.coefficient * p;
            }
        }
        rest.into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn total_coefficient(&self) -> f64 {
        self.terms.iter().map(|t| t.coefficient).sum()
    }

    /// Nonzero terms only.
    pub fn support(&self) -> impl Iterator<Item = &CertTerm> {
        self.terms.iter().filter(|t| t.coefficient > 0.0)
    }
}

/// Dual solution certifying that the nice LP has no positive margin:
/// `y >= 0`, `sum y = 1`, `y . F >= 0` for every weight and `y . D <= 0`.
#[derive(Clone, Debug)]
pub struct Refutation {
    pub y: Vec<f64>,
    /// `min y . D`, equal to the optimal LP margin.
    pub value: f64,
    pub exact_value: Option<Rational>,
    /// The torus is multiplicity-free, so the weights exhaust the diagonal
    /// moment image and the refutation is complete.
    pub complete: bool,
}

#[derive(Clone, Debug)]
pub enum NiceOutcome {
    Certified(SrnCertificate),
    Infeasible(Refutation),
}

#[derive(Clone, Debug)]
pub enum SampledOutcome {
    Certified(SrnCertificate),
    Unknown { best_margin: f64 },
}

fn trace(d: &[f64]) -> f64 {
    d.iter().sum()
}

/// Exact rational form of `d` when every entry is a short rational.
pub fn exact_diagonal(d: &[f64]) -> Option<Vec<Rational>> {
    d.iter()
        .map(|&x| {
            let q = rational_from_f64(x, 1 << 20)?;
            (Field::to_f64(&q) == x).then_some(q)
        })
        .collect()
}

fn require_torus_element(d: &[f64], b: &Bracket) -> Result<Torus> {
    if d.len() != b.dim() {
        return Err(Error::Dimension {
            expected: b.dim(),
            got: d.len(),
        });
    }
    let torus = diagonal_torus(b);
    if !torus.contains(d, 1e-9) {
        return Err(Error::Precondition(
            "D is not a diagonal derivation of the bracket".into(),
        ));
    }
    Ok(torus)
}

fn require_positive_trace(d: &[f64]) -> Result<()> {
    if trace(d) <= TRACE_TOL {
        return Err(Error::Precondition(format!(
            "trace {} is not positive",
            trace(d)
        )));
    }
    Ok(())
}

/// `max eps` s.t. `D - sum b_a P_a >= eps`, `b >= 0`, `eps <= cap`.
fn margin_lp<F: Field>(d: &[F], points: &[Vec<F>], cap: F) -> Option<(Vec<F>, F)> {
    let m = points.len();
    let n = d.len();
    let mut lp = LinearProgram::<F>::new(m + 1);
    let mut obj = vec![F::zero(); m + 1];
    obj[m] = F::one();
    lp.maximize(obj).set_free(m);
    for r in 0..n {
        let mut row: Vec<F> = points.iter().map(|p| p[r].clone()).collect();
        row.push(F::one());
        lp.constrain(row, Relation::Le, d[r].clone());
    }
    let mut row = vec![F::zero(); m + 1];
    row[m] = F::one();
    lp.constrain(row, Relation::Le, cap);
    match lp.solve() {
        LpStatus::Optimal { mut x, value } => {
            x.truncate(m);
            Some((x, value))
        }
        _ => None,
    }
}

/// `min y . D` s.t. `y >= 0`, `sum y = 1`, `y . P_a >= 0`.
fn refutation_lp<F: Field>(d: &[F], points: &[Vec<F>]) -> Option<(Vec<F>, F)> {
    let n = d.len();
    let mut lp = LinearProgram::<F>::new(n);
    lp.maximize(d.iter().map(|x| F::zero() - x.clone()).collect());
    lp.constrain(vec![F::one(); n], Relation::Eq, F::one());
    for p in points {
        lp.constrain(p.clone(), Relation::Ge, F::zero());
    }
    match lp.solve() {
        LpStatus::Optimal { x, value } => Some((x, F::zero() - value)),
        _ => None,
    }
}

fn cap_for(d: &[f64]) -> f64 {
    1.0 + d.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// LP certificate over the weight matrices `F_ij^k` of a nice basis.
pub fn certify_srn_nice(d: &[f64], b: &Bracket) -> Result<NiceOutcome> {
    if !nice_basis_check(b).nice {
        return Err(Error::Precondition("basis is not nice".into()));
    }
    let torus = require_torus_element(d, b)?;
    require_positive_trace(d)?;
    let n = b.dim();
    let support: Vec<Triple> = b.support();
    let weights: Vec<Vec<i64>> = support.iter().map(|t| t.weight(n)).collect();
    let points_f: Vec<Vec<f64>> = weights
        .iter()
        .map(|w| w.iter().map(|&x| x as f64).collect())
        .collect();
    let cap = cap_for(d);

    let exact_d = if b.is_exact() { exact_diagonal(d) } else { None };
    let (coeffs, margin, exact) = match &exact_d {
        Some(dq) => {
            let pq: Vec<Vec<Rational>> = weights
                .iter()
                .map(|w| w.iter().map(|&x| crate::field::int(x)).collect())
                .collect();
            let capq = rational_from_f64(cap.ceil(), 1).expect("integer cap");
            let (x, v) = margin_lp(dq, &pq, capq).ok_or_else(|| {
                Error::Numerical("exact margin LP did not reach an optimum".into())
            })?;
            let xf = linalg::to_f64_vec(&x);
            let vf = Field::to_f64(&v);
            (
                xf,
                vf,
                Some(ExactCertificate {
                    coefficients: x,
                    margin: v,
                }),
            )
        }
        None => {
            let (x, v) = margin_lp(d, &points_f, cap)
                .ok_or_else(|| Error::Numerical("margin LP did not reach an optimum".into()))?;
            (x, v, None)
        }
    };
    if margin > MARGIN_THRESHOLD {
        let terms = support
            .iter()
            .zip(coeffs)
            .zip(&points_f)
            .map(|((t, c), p)| CertTerm {
                key: TermKey::Triple(*t),
                coefficient: c,
                point: p.clone(),
                group_element: None,
            })
            .collect();
        return Ok(NiceOutcome::Certified(SrnCertificate {
            method: CertMethod::NiceLp,
            derivation: d.to_vec(),
            terms,
            margin,
            exact,
        }));
    }
    let complete = torus.is_multiplicity_free();
    let refutation = match &exact_d {
        Some(dq) => {
            let pq: Vec<Vec<Rational>> = weights
                .iter()
                .map(|w| w.iter().map(|&x| crate::field::int(x)).collect())
                .collect();
            let (y, v) = refutation_lp(dq, &pq)
                .ok_or_else(|| Error::Numerical("refutation LP failed".into()))?;
            Refutation {
                y: linalg::to_f64_vec(&y),
                value: Field::to_f64(&v),
                exact_value: Some(v),
                complete,
            }
        }
        None => {
            let (y, v) = refutation_lp(d, &points_f)
                .ok_or_else(|| Error::Numerical("refutation LP failed".into()))?;
            Refutation {
                y,
                value: v,
                exact_value: None,
                complete,
            }
        }
    };
    Ok(NiceOutcome::Infeasible(refutation))
}

/// Sorts `p` within each block, descending. Block permutations lie in the
/// centralizer, so the sorted diagonal is again a moment value of the orbit.
fn to_chamber(p: &[f64], blocks: &[Vec<usize>]) -> (Vec<f64>, Vec<usize>) {
    let mut out = p.to_vec();
    let mut perm: Vec<usize> = (0..p.len()).collect();
    for block in blocks {
        let mut vals: Vec<(f64, usize)> = block.iter().map(|&i| (p[i], i)).collect();
        vals.sort_by(|a, c| c.0.total_cmp(&a.0).then(a.1.cmp(&c.1)));
        for (&slot, (v, src)) in block.iter().zip(vals) {
            out[slot] = v;
            perm[src] = slot;
        }
    }
    (out, perm)
}

fn permutation_matrix(perm: &[usize]) -> Mat {
    let n = perm.len();
    let mut m = Mat::zeros(n, n);
    for (i, &j) in perm.iter().enumerate() {
        m[(j, i)] = 1.0;
    }
    // keep det > 0 with a sign on one row; signs do not move diagonal values
    if m.determinant() < 0.0 {
        for c in 0..n {
            m[(0, c)] = -m[(0, c)];
        }
    }
    m
}

/// LP certificate over sampled diagonal moment values from a subgroup of the
/// centralizer of `D`, combined only inside one chamber of the block
/// permutations.
pub fn certify_srn_sampled(d: &[f64], b: &Bracket, sample: &OrbitSample) -> Result<SampledOutcome> {
    require_torus_element(d, b)?;
    require_positive_trace(d)?;
    let d_blocks = eigen_blocks(d, 1e-9);
    let sample_blocks = sample.tag.blocks(b)?;
    let refines = sample_blocks
        .iter()
        .all(|sb| d_blocks.iter().any(|db| sb.iter().all(|i| db.contains(i))));
    if !refines {
        return Err(Error::Precondition(
            "sample group is not contained in the centralizer of D".into(),
        ));
    }
    let usable: Vec<(usize, Vec<f64>, Mat)> = sample
        .points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.diagonalized)
        .map(|(i, p)| {
            let (sorted, perm) = to_chamber(&p.moment.diagonal(), &d_blocks);
            (i, sorted, permutation_matrix(&perm) * &p.g)
        })
        .collect();
    if usable.is_empty() {
        return Err(Error::Precondition("sample has no diagonal moment values".into()));
    }
    let points: Vec<Vec<f64>> = usable.iter().map(|(_, p, _)| p.clone()).collect();
    let (coeffs, margin) = margin_lp(d, &points, cap_for(d))
        .ok_or_else(|| Error::Numerical("sampled margin LP failed".into()))?;
    if margin <= MARGIN_THRESHOLD {
        return Ok(SampledOutcome::Unknown { best_margin: margin });
    }
    let terms = usable
        .into_iter()
        .zip(coeffs)
        .filter(|(_, c)| *c > 0.0)
        .map(|((i, p, g), c)| CertTerm {
            key: TermKey::Sample(i),
            coefficient: c,
            point: p,
            group_element: Some(g),
        })
        .collect();
    Ok(SampledOutcome::Certified(SrnCertificate {
        method: CertMethod::SampledLp,
        derivation: d.to_vec(),
        terms,
        margin,
        exact: None,
    }))
}

/// `tr D > 0` and `D` restricted to the center has spectrum with positive
/// real parts.
pub fn necessary_condition(d: &Mat, b: &Bracket) -> bool {
    if d.trace() <= TRACE_TOL {
        return false;
    }
    let z = center(b);
    if z.is_empty() {
        return true;
    }
    let zm = Mat::from_columns(&z);
    let restricted = zm.transpose() * d * &zm;
    restricted
        .complex_eigenvalues()
        .iter()
        .all(|e| e.re > TRACE_TOL)
}

/// The obstruction for the algebra `s_D` itself. `f -> -f` identifies `s_D`
/// with `s_{-D}`, so only when both `D` and `-D` fail is every metric on
/// `s_D` excluded.
pub fn extension_obstructed(d: &Mat, b: &Bracket) -> bool {
    !necessary_condition(d, b) && !necessary_condition(&-d, b)
}

/// Certificate for `D >= 0` diagonal, positive on the center, nice basis:
/// each kernel index `i` is paired with a constant `c_{i j}^k != 0` whose
/// other indices are in the positive part, and `D - eps sum F` is made
/// positive by halving `eps`.
pub fn constructive_nonneg(d: &[f64], b: &Bracket) -> Result<SrnCertificate> {
    if !nice_basis_check(b).nice {
        return Err(Error::Precondition("basis is not nice".into()));
    }
    require_torus_element(d, b)?;
    let scale = d.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
    let tol = 1e-12 * scale;
    if d.iter().any(|&x| x < -tol) {
        return Err(Error::Precondition("D has a negative entry".into()));
    }
    let dm = linalg::diag_mat(d);
    let z = center(b);
    if !z.is_empty() {
        let zm = Mat::from_columns(&z);
        if linalg::sym_eigenvalues(&(zm.transpose() * &dm * &zm))[0] <= tol {
            return Err(Error::Precondition("D is not positive on the center".into()));
        }
    }
    let n = b.dim();
    let positive = |i: usize| d[i] > tol;
    let support = b.support();
    let mut chosen: Vec<Triple> = Vec::new();
    for i in (0..n).filter(|&i| !positive(i)) {
        let pick = support.iter().find(|t| {
            let (other, k) = if t.i == i {
                (t.j, t.k)
            } else if t.j == i {
                (t.i, t.k)
            } else {
                return false;
            };
            k != i && positive(other) && positive(k)
        });
        match pick {
            Some(t) => chosen.push(*t),
            None => {
                return Err(Error::Precondition(format!(
                    "no bracket from e{} into the positive part",
                    i + 1
                )))
            }
        }
    }
    let mut m = vec![0.0; n];
    for t in &chosen {
        for (mi, w) in m.iter_mut().zip(t.weight(n)) {
            *mi += w as f64;
        }
    }
    let mut eps = 1.0;
    let margin = loop {
        let worst = d
            .iter()
            .zip(&m)
            .map(|(x, y)| x - eps * y)
            .fold(f64::INFINITY, f64::min);
        if worst > 0.0 {
            break worst;
        }
        eps *= 0.5;
        if eps < 1e-12 {
            return Err(Error::Numerical("line search on eps failed".into()));
        }
    };
    let terms = chosen
        .iter()
        .map(|t| CertTerm {
            key: TermKey::Triple(*t),
            coefficient: eps,
            point: t.weight(n).into_iter().map(|x| x as f64).collect(),
            group_element: None,
        })
        .collect();
    Ok(SrnCertificate {
        method: CertMethod::Constructive,
        derivation: d.to_vec(),
        terms,
        margin,
        exact: None,
    })
}

/// Diagonal moment sample suitable for `certify_srn_sampled` on `D`.
pub fn centralizer_tag(d: &[f64]) -> GroupTag {
    GroupTag::DerivationCentralizer(d.to_vec())
}
