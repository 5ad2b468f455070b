//! Lie brackets stored by structure constants, and basis changes acting on them.
//!
//! A bracket on `R^n` is `[e_i, e_j] = sum_k c_ij^k e_k`. Only `i < j` is
//! stored; reads with `i > j` are synthesized by antisymmetry. All indices are
//! zero-based inside the crate and one-based in files and on the command line.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, Rational};
use crate::linalg::{self, Mat, Vector};

/// Relative tolerance for the Jacobi identity in float mode, measured against
/// the largest squared structure constant.
pub const JACOBI_TOL: f64 = 1e-9;

/// Smallest |det| accepted for a float basis change.
pub const DET_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub i: usize,
    pub j: usize,
    pub k: usize,
}

impl Triple {
    pub fn new(i: usize, j: usize, k: usize) -> Self {
        debug_assert!(i < j);
        Triple { i, j, k }
    }

    /// Diagonal of the weight matrix `F_ij^k`: -1 at `i` and `j`, +1 at `k`.
    pub fn weight(&self, n: usize) -> Vec<i64> {
        let mut w = vec![0i64; n];
        w[self.i] -= 1;
        w[self.j] -= 1;
        w[self.k] += 1;
        w
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.i + 1, self.j + 1, self.k + 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarKind {
    Rational,
    Float,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Scalar {
    Rational(Rational),
    Float(f64),
}

impl Scalar {
    pub fn to_f64(&self) -> f64 {
        match self {
            Scalar::Rational(q) => Field::to_f64(q),
            Scalar::Float(x) => *x,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Rational(q) => q.is_zero(),
            Scalar::Float(x) => *x == 0.0,
        }
    }

    fn neg(&self) -> Scalar {
        match self {
            Scalar::Rational(q) => Scalar::Rational(-q.clone()),
            Scalar::Float(x) => Scalar::Float(-x),
        }
    }

    fn add(&self, other: &Scalar) -> Scalar {
        match (self, other) {
            (Scalar::Rational(a), Scalar::Rational(b)) => Scalar::Rational(a + b),
            _ => Scalar::Float(self.to_f64() + other.to_f64()),
        }
    }
}

/// Scalars that can be read out of a [`Scalar`]. Floats accept everything;
/// rationals only accept exact constants.
pub trait FromScalar: Field {
    fn from_scalar(s: &Scalar) -> Option<Self>;
}

impl FromScalar for f64 {
    fn from_scalar(s: &Scalar) -> Option<Self> {
        Some(s.to_f64())
    }
}

impl FromScalar for Rational {
    fn from_scalar(s: &Scalar) -> Option<Self> {
        match s {
            Scalar::Rational(q) => Some(q.clone()),
            Scalar::Float(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bracket {
    dim: usize,
    kind: ScalarKind,
    constants: BTreeMap<Triple, Scalar>,
}

impl Bracket {
    pub fn zero(dim: usize) -> Self {
        Bracket {
            dim,
            kind: ScalarKind::Rational,
            constants: BTreeMap::new(),
        }
    }

    /// Builds an exact bracket from `(i, j, k, c)` terms meaning
    /// `[e_i, e_j] += c e_k` (zero-based). Terms with `i > j` are flipped;
    /// repeated terms accumulate.
    pub fn from_rational_terms<I>(dim: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, usize, Rational)>,
    {
        let mut b = Bracket::zero(dim);
        for (i, j, k, c) in terms {
            b.add_term(i, j, k, Scalar::Rational(c))?;
        }
        Ok(b)
    }

    pub fn from_float_terms<I>(dim: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, usize, f64)>,
    {
        let mut b = Bracket {
            dim,
            kind: ScalarKind::Float,
            constants: BTreeMap::new(),
        };
        for (i, j, k, c) in terms {
            b.add_term(i, j, k, Scalar::Float(c))?;
        }
        Ok(b)
    }

    /// Integer constants, the common case for named algebras.
    pub fn from_int_terms(dim: usize, terms: &[(usize, usize, usize, i64)]) -> Result<Self> {
        Self::from_rational_terms(
            dim,
            terms.iter().map(|&(i, j, k, c)| (i, j, k, crate::field::int(c))),
        )
    }

    /// Dense float tensor `c[i][j][k]` (full antisymmetric layout).
    pub fn from_dense(dim: usize, c: &[f64]) -> Self {
        let mut constants = BTreeMap::new();
        for i in 0..dim {
            for j in i + 1..dim {
                for k in 0..dim {
                    let v = c[(i * dim + j) * dim + k];
                    if v != 0.0 {
                        constants.insert(Triple::new(i, j, k), Scalar::Float(v));
                    }
                }
            }
        }
        Bracket {
            dim,
            kind: ScalarKind::Float,
            constants,
        }
    }

    fn add_term(&mut self, i: usize, j: usize, k: usize, c: Scalar) -> Result<()> {
        let n = self.dim;
        if i >= n || j >= n || k >= n {
            return Err(Error::Dimension {
                expected: n,
                got: i.max(j).max(k) + 1,
            });
        }
        if i == j {
            if c.is_zero() {
                return Ok(());
            }
            return Err(Error::Precondition(format!(
                "[e{0}, e{0}] must vanish",
                i + 1
            )));
        }
        if matches!(c, Scalar::Float(_)) {
            self.kind = ScalarKind::Float;
        }
        let (key, val) = if i < j {
            (Triple::new(i, j, k), c)
        } else {
            (Triple::new(j, i, k), c.neg())
        };
        let merged = match self.constants.get(&key) {
            Some(old) => old.add(&val),
            None => val,
        };
        if merged.is_zero() {
            self.constants.remove(&key);
        } else {
            self.constants.insert(key, merged);
        }
        if self.kind == ScalarKind::Float {
            let converted: BTreeMap<_, _> = std::mem::take(&mut self.constants)
                .into_iter()
                .map(|(t, s)| (t, Scalar::Float(s.to_f64())))
                .collect();
            self.constants = converted;
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> ScalarKind {
        self.kind
    }

    pub fn is_exact(&self) -> bool {
        self.kind == ScalarKind::Rational
    }

    pub fn is_zero(&self) -> bool {
        self.constants.values().all(Scalar::is_zero)
    }

    pub fn constants(&self) -> impl Iterator<Item = (&Triple, &Scalar)> {
        self.constants.iter()
    }

    pub fn num_constants(&self) -> usize {
        self.constants.len()
    }

    /// Index triples with nonzero constant.
    pub fn support(&self) -> Vec<Triple> {
        self.constants
            .iter()
            .filter(|(_, s)| !s.is_zero())
            .map(|(t, _)| *t)
            .collect()
    }

    /// Support with a relative magnitude cutoff, for brackets produced by
    /// floating-point actions.
    pub fn support_with_tol(&self, rel_tol: f64) -> Vec<Triple> {
        let m = self.max_abs_constant();
        self.constants
            .iter()
            .filter(|(_, s)| s.to_f64().abs() > rel_tol * m)
            .map(|(t, _)| *t)
            .collect()
    }

    /// Antisymmetric read of `c_ij^k`.
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        use std::cmp::Ordering::*;
        match i.cmp(&j) {
            Equal => 0.0,
            Less => self
                .constants
                .get(&Triple::new(i, j, k))
                .map_or(0.0, Scalar::to_f64),
            Greater => -self
                .constants
                .get(&Triple::new(j, i, k))
                .map_or(0.0, Scalar::to_f64),
        }
    }

    pub fn get_scalar(&self, t: &Triple) -> Option<&Scalar> {
        self.constants.get(t)
    }

    /// Dense antisymmetric tensor indexed `(i * n + j) * n + k`. `None` when
    /// `F` is exact and the bracket is not.
    pub fn dense<F: FromScalar>(&self) -> Option<Vec<F>> {
        let n = self.dim;
        let mut c = vec![F::zero(); n * n * n];
        for (t, s) in &self.constants {
            let v = F::from_scalar(s)?;
            c[(t.i * n + t.j) * n + t.k] = v.clone();
            c[(t.j * n + t.i) * n + t.k] = -v;
        }
        Some(c)
    }

    pub fn dense_f64(&self) -> Vec<f64> {
        self.dense::<f64>().expect("float conversion is total")
    }

    /// Matrix of `ad e_i`: column `j` holds `[e_i, e_j]`.
    pub fn ad_basis(&self, i: usize) -> Mat {
        let n = self.dim;
        DMatrix::from_fn(n, n, |k, j| self.get(i, j, k))
    }

    /// Matrix of `ad x` for an arbitrary vector.
    pub fn ad(&self, x: &Vector) -> Mat {
        let n = self.dim;
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            if x[i] != 0.0 {
                m += self.ad_basis(i) * x[i];
            }
        }
        m
    }

    pub fn apply(&self, x: &Vector, y: &Vector) -> Vector {
        self.ad(x) * y
    }

    /// Squared norm with ordered-pair summation: `sum_{i,j,k} (c_ij^k)^2`, so
    /// each elementary bracket `mu_ijk` has squared norm 2.
    pub fn norm_sq(&self) -> f64 {
        2.0 * self
            .constants
            .values()
            .map(|s| s.to_f64().powi(2))
            .sum::<f64>()
    }

    pub fn norm_sq_exact(&self) -> Option<Rational> {
        let mut acc = crate::field::int(0);
        for s in self.constants.values() {
            let q = Rational::from_scalar(s)?;
            acc += &q * &q;
        }
        Some(acc * crate::field::int(2))
    }

    pub fn max_abs_constant(&self) -> f64 {
        self.constants
            .values()
            .map(|s| s.to_f64().abs())
            .fold(0.0, f64::max)
    }

    pub fn to_float(&self) -> Bracket {
        Bracket {
            dim: self.dim,
            kind: ScalarKind::Float,
            constants: self
                .constants
                .iter()
                .map(|(t, s)| (*t, Scalar::Float(s.to_f64())))
                .collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Bracket {
        Bracket {
            dim: self.dim,
            kind: ScalarKind::Float,
            constants: self
                .constants
                .iter()
                .map(|(t, s)| (*t, Scalar::Float(c * s.to_f64())))
                .filter(|(_, s)| !s.is_zero())
                .collect(),
        }
    }

    /// Keeps only the constants whose triple lies in `keep`.
    pub fn restricted_to(&self, keep: &[Triple]) -> Bracket {
        Bracket {
            dim: self.dim,
            kind: self.kind,
            constants: self
                .constants
                .iter()
                .filter(|(t, _)| keep.contains(t))
                .map(|(t, s)| (*t, s.clone()))
                .collect(),
        }
    }

    /// Entrywise distance in the max norm.
    pub fn distance(&self, other: &Bracket) -> f64 {
        let mut keys: Vec<&Triple> = self.constants.keys().chain(other.constants.keys()).collect();
        keys.sort();
        keys.dedup();
        keys.into_iter()
            .map(|t| (self.get(t.i, t.j, t.k) - other.get(t.i, t.j, t.k)).abs())
            .fold(0.0, f64::max)
    }
}

impl fmt::Display for Bracket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.constants.is_empty() {
            return write!(f, "abelian R^{}", self.dim);
        }
        let mut first = true;
        let mut by_pair: BTreeMap<(usize, usize), Vec<(usize, &Scalar)>> = BTreeMap::new();
        for (t, s) in &self.constants {
            by_pair.entry((t.i, t.j)).or_default().push((t.k, s));
        }
        for ((i, j), terms) in by_pair {
            if !first {
                write!(f, ", ")?;
            }
            first = false;
            write!(f, "[e{},e{}]=", i + 1, j + 1)?;
            for (n, (k, s)) in terms.iter().enumerate() {
                let v = match s {
                    Scalar::Rational(q) => crate::field::format_rational(q),
                    Scalar::Float(x) => format!("{x}"),
                };
                if n > 0 {
                    write!(f, "+")?;
                }
                if v == "1" {
                    write!(f, "e{}", k + 1)?;
                } else {
                    write!(f, "{v}e{}", k + 1)?;
                }
            }
        }
        Ok(())
    }
}

fn jacobi_residual_generic<F: Field>(n: usize, c: &[F]) -> F {
    // returns max squared norm of the cycle sum over triples i<j<k
    let at = |i: usize, j: usize, k: usize| &c[(i * n + j) * n + k];
    let mut worst = F::zero();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let mut sq = F::zero();
                for l in 0..n {
                    let mut s = F::zero();
                    for m in 0..n {
                        s = s + at(i, j, m).clone() * at(m, k, l).clone()
                            + at(j, k, m).clone() * at(m, i, l).clone()
                            + at(k, i, m).clone() * at(m, j, l).clone();
                    }
                    sq = sq + s.clone() * s;
                }
                if sq > worst {
                    worst = sq;
                }
            }
        }
    }
    worst
}

/// Largest Euclidean norm of `[[x,y],z] + [[y,z],x] + [[z,x],y]` over basis
/// triples. Computed exactly for rational brackets.
pub fn validate_jacobi(b: &Bracket) -> f64 {
    let n = b.dim;
    match b.dense::<Rational>() {
        Some(c) if b.is_exact() => Field::to_f64(&jacobi_residual_generic(n, &c)).sqrt(),
        _ => jacobi_residual_generic(n, &b.dense_f64()).sqrt(),
    }
}

pub fn is_lie(b: &Bracket) -> bool {
    let r = validate_jacobi(b);
    if b.is_exact() {
        r == 0.0
    } else {
        r <= JACOBI_TOL * b.max_abs_constant().powi(2).max(f64::MIN_POSITIVE)
    }
}

pub fn require_lie(b: &Bracket) -> Result<()> {
    if is_lie(b) {
        Ok(())
    } else {
        Err(Error::NotLie {
            residual: validate_jacobi(b),
        })
    }
}

fn lower_central_generic<F: Field>(n: usize, c: &[F], tol: f64) -> Vec<usize> {
    let mut dims = vec![n];
    let mut current: Vec<Vec<F>> = (0..n)
        .map(|i| {
            let mut v = vec![F::zero(); n];
            v[i] = F::one();
            v
        })
        .collect();
    loop {
        let mut images = Vec::new();
        for i in 0..n {
            for v in &current {
                let mut w = vec![F::zero(); n];
                for (j, vj) in v.iter().enumerate() {
                    if vj.is_zero_within(0.0) {
                        continue;
                    }
                    for (k, wk) in w.iter_mut().enumerate() {
                        let cij = &c[(i * n + j) * n + k];
                        if !cij.is_zero_within(0.0) {
                            *wk = wk.clone() + cij.clone() * vj.clone();
                        }
                    }
                }
                images.push(w);
            }
        }
        let next = linalg::span_basis(&images, n, tol);
        let d = next.len();
        if d == *dims.last().unwrap() {
            break;
        }
        dims.push(d);
        if d == 0 {
            break;
        }
        current = next;
    }
    dims
}

/// Dimensions of `n ⊇ [n,n] ⊇ [n,[n,n]] ⊇ ...`. The chain ends at 0 for
/// nilpotent algebras and at the first repeated dimension otherwise.
pub fn lower_central_series(b: &Bracket) -> Result<Vec<usize>> {
    require_lie(b)?;
    let n = b.dim;
    Ok(match b.dense::<Rational>() {
        Some(c) if b.is_exact() => lower_central_generic(n, &c, 0.0),
        _ => lower_central_generic(n, &b.dense_f64(), 1e-10),
    })
}

pub fn is_nilpotent(b: &Bracket) -> Result<bool> {
    Ok(lower_central_series(b)?.last() == Some(&0))
}

/// Nilpotency step (number of nonzero terms of the lower central series).
pub fn nilpotency_step(b: &Bracket) -> Result<Option<usize>> {
    let chain = lower_central_series(b)?;
    Ok((chain.last() == Some(&0)).then(|| chain.len() - 1))
}

fn center_system<F: FromScalar>(b: &Bracket) -> Option<Vec<Vec<F>>> {
    let n = b.dim;
    let c = b.dense::<F>()?;
    let mut rows = Vec::with_capacity(n * n);
    for j in 0..n {
        for k in 0..n {
            rows.push((0..n).map(|i| c[(i * n + j) * n + k].clone()).collect());
        }
    }
    Some(rows)
}

/// Exact basis of the center (rational brackets only).
pub fn center_exact(b: &Bracket) -> Option<Vec<Vec<Rational>>> {
    if !b.is_exact() {
        return None;
    }
    let rows = center_system::<Rational>(b)?;
    Some(linalg::null_space(&rows, b.dim, 0.0))
}

/// Orthonormal basis of the center `{x : [x, y] = 0 for all y}`.
pub fn center(b: &Bracket) -> Vec<Vector> {
    let raw: Vec<Vector> = match center_exact(b) {
        Some(basis) => basis
            .iter()
            .map(|v| Vector::from_vec(linalg::to_f64_vec(v)))
            .collect(),
        None => {
            let rows = center_system::<f64>(b).expect("float");
            linalg::null_space(&rows, b.dim, 1e-10)
                .into_iter()
                .map(Vector::from_vec)
                .collect()
        }
    };
    linalg::orthonormalize(&raw, 1e-12)
}

/// Invertible matrix acting on brackets by `h·mu = h mu(h^-1 ·, h^-1 ·)`.
#[derive(Clone, Debug)]
pub struct BasisChange {
    matrix: Mat,
    inverse: Mat,
    exact: Option<(Vec<Vec<Rational>>, Vec<Vec<Rational>>)>,
}

impl BasisChange {
    pub fn new(matrix: Mat) -> Result<Self> {
        assert!(matrix.is_square(), "basis change must be square");
        let det = matrix.determinant();
        // Hadamard ratio: scale-invariant, 1 for orthogonal columns
        let volume: f64 = matrix.column_iter().map(|c| c.norm()).product();
        if !det.is_finite() || volume == 0.0 || det.abs() < DET_TOL * volume {
            return Err(Error::Singular { det });
        }
        let inverse = matrix
            .clone()
            .try_inverse()
            .ok_or(Error::Singular { det })?;
        Ok(BasisChange {
            matrix,
            inverse,
            exact: None,
        })
    }

    pub fn from_rational(rows: Vec<Vec<Rational>>) -> Result<Self> {
        let n = rows.len();
        let mut aug: Vec<Vec<Rational>> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mut a = r.clone();
                a.extend((0..n).map(|j| {
                    if i == j {
                        Rational::from_integer(1.into())
                    } else {
                        crate::field::int(0)
                    }
                }));
                a
            })
            .collect();
        let pivots = linalg::rref(&mut aug, 2 * n, 0.0);
        if pivots.len() < n || pivots[n - 1] >= n {
            return Err(Error::Singular { det: 0.0 });
        }
        let inv: Vec<Vec<Rational>> = aug.iter().map(|r| r[n..].to_vec()).collect();
        let to_mat = |m: &Vec<Vec<Rational>>| DMatrix::from_fn(n, n, |i, j| Field::to_f64(&m[i][j]));
        Ok(BasisChange {
            matrix: to_mat(&rows),
            inverse: to_mat(&inv),
            exact: Some((rows, inv)),
        })
    }

    pub fn identity(n: usize) -> Self {
        let id: Vec<Vec<Rational>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| crate::field::int(i64::from(i == j)))
                    .collect()
            })
            .collect();
        Self::from_rational(id).expect("identity is invertible")
    }

    pub fn diagonal(d: &[f64]) -> Result<Self> {
        Self::new(linalg::diag_mat(d))
    }

    pub fn scalar(n: usize, c: f64) -> Result<Self> {
        Self::diagonal(&vec![c; n])
    }

    pub fn matrix(&self) -> &Mat {
        &self.matrix
    }

    pub fn inverse(&self) -> &Mat {
        &self.inverse
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }

    /// Product `self · other`, so that `act(a.compose(b), mu) = act(a, act(b, mu))`.
    pub fn compose(&self, other: &BasisChange) -> BasisChange {
        let exact = match (&self.exact, &other.exact) {
            (Some((a, ai)), Some((b, bi))) => Some((mat_mul_q(a, b), mat_mul_q(bi, ai))),
            _ => None,
        };
        BasisChange {
            matrix: &self.matrix * &other.matrix,
            inverse: &other.inverse * &self.inverse,
            exact,
        }
    }
}

fn mat_mul_q(a: &[Vec<Rational>], b: &[Vec<Rational>]) -> Vec<Vec<Rational>> {
    let n = a.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).fold(crate::field::int(0), |acc, k| acc + &a[i][k] * &b[k][j]))
                .collect()
        })
        .collect()
}

fn act_generic<F: FromScalar>(h: &[Vec<F>], hinv: &[Vec<F>], b: &Bracket) -> Vec<F> {
    let n = b.dim;
    let mut out = vec![F::zero(); n * n * n];
    for (t, s) in &b.constants {
        let v = F::from_scalar(s).expect("checked by caller");
        for a in 0..n {
            for bb in a + 1..n {
                let w = hinv[t.i][a].clone() * hinv[t.j][bb].clone()
                    - hinv[t.j][a].clone() * hinv[t.i][bb].clone();
                if w.is_zero_within(0.0) {
                    continue;
                }
                let vw = v.clone() * w;
                for c in 0..n {
                    let hk = &h[c][t.k];
                    if hk.is_zero_within(0.0) {
                        continue;
                    }
                    let idx = (a * n + bb) * n + c;
                    out[idx] = out[idx].clone() + hk.clone() * vw.clone();
                }
            }
        }
    }
    out
}

/// The left action `h·mu = h mu(h^-1 ·, h^-1 ·)`. Exact when both inputs are.
pub fn act(h: &BasisChange, b: &Bracket) -> Result<Bracket> {
    let n = b.dim;
    if h.dim() != n {
        return Err(Error::Dimension {
            expected: n,
            got: h.dim(),
        });
    }
    if let (Some((hq, hiq)), true) = (&h.exact, b.is_exact()) {
        let c = act_generic::<Rational>(hq, hiq, b);
        let mut terms = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                for k in 0..n {
                    let v = &c[(i * n + j) * n + k];
                    if !v.is_zero() {
                        terms.push((i, j, k, v.clone()));
                    }
                }
            }
        }
        return Bracket::from_rational_terms(n, terms);
    }
    let hm: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| h.matrix[(i, j)]).collect())
        .collect();
    let him: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| h.inverse[(i, j)]).collect())
        .collect();
    let c = act_generic::<f64>(&hm, &him, b);
    Ok(Bracket::from_dense(n, &c))
}

/// Diagonal action `c_ij^k -> c_ij^k * h_k / (h_i h_j)`, exact for rational input.
pub fn act_diagonal_exact(h: &[Rational], b: &Bracket) -> Result<Bracket> {
    if h.len() != b.dim {
        return Err(Error::Dimension {
            expected: b.dim,
            got: h.len(),
        });
    }
    if h.iter().any(Zero::is_zero) {
        return Err(Error::Singular { det: 0.0 });
    }
    let mut out = b.clone();
    for (t, s) in out.constants.iter_mut() {
        let f = &h[t.k] / (&h[t.i] * &h[t.j]);
        *s = match s {
            Scalar::Rational(q) => Scalar::Rational(&*q * &f),
            Scalar::Float(x) => Scalar::Float(*x * Field::to_f64(&f)),
        };
    }
    Ok(out)
}

/// Float diagonal action; cheaper than [`act`] and used by the samplers.
pub fn act_diagonal(h: &[f64], b: &Bracket) -> Bracket {
    let constants = b
        .constants
        .iter()
        .map(|(t, s)| (*t, Scalar::Float(s.to_f64() * h[t.k] / (h[t.i] * h[t.j]))))
        .collect();
    Bracket {
        dim: b.dim,
        kind: ScalarKind::Float,
        constants,
    }
}

/// Whether every stored constant is nonzero with a positive value.
pub fn has_nonnegative_constants(b: &Bracket) -> bool {
    b.constants.values().all(|s| match s {
        Scalar::Rational(q) => !q.is_negative(),
        Scalar::Float(x) => *x >= 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::field::{int, rat};

    #[test]
    fn heisenberg_is_lie_and_two_step() {
        let h3 = corpus::heisenberg(1);
        assert_eq!(validate_jacobi(&h3), 0.0);
        assert_eq!(lower_central_series(&h3).unwrap(), vec![3, 1, 0]);
        let z = center(&h3);
        assert_eq!(z.len(), 1);
        assert!((z[0][2].abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn jacobi_failure_is_measured() {
        // [e1,e2]=e3, [e1,e3]=e1: the cycle on (1,2,3) sums to -e3
        let b = Bracket::from_int_terms(3, &[(0, 1, 2, 1), (0, 2, 0, 1)]).unwrap();
        assert_eq!(validate_jacobi(&b), 1.0);
        assert!(matches!(lower_central_series(&b), Err(Error::NotLie { .. })));
    }

    #[test]
    fn tricky5_series_and_center() {
        let t = corpus::tricky5();
        assert_eq!(validate_jacobi(&t), 0.0);
        // [n,n] = span{e3+e4, e5}, [n,[n,n]] = span{e5}
        assert_eq!(lower_central_series(&t).unwrap(), vec![5, 2, 1, 0]);
        // e3 - e4 is central as well as e5
        let z = center_exact(&t).unwrap();
        assert_eq!(z.len(), 2);
        assert!(z.contains(&vec![int(0), int(0), int(0), int(0), int(1)]));
        let rows: Vec<Vec<Rational>> = z.clone();
        let x = crate::linalg::solve(
            &(0..5).map(|r| rows.iter().map(|v| v[r].clone()).collect()).collect::<Vec<_>>(),
            &[int(0), int(0), int(1), int(-1), int(0)],
            2,
            0.0,
        );
        assert!(x.is_some());
    }

    #[test]
    fn abelian_series_and_center() {
        let a = corpus::abelian(4);
        assert_eq!(lower_central_series(&a).unwrap(), vec![4, 0]);
        assert_eq!(center(&a).len(), 4);
    }

    #[test]
    fn non_nilpotent_chain_stabilizes() {
        let hyp = corpus::milnor_hyp(4);
        assert_eq!(lower_central_series(&hyp).unwrap(), vec![4, 3]);
        assert!(!is_nilpotent(&hyp).unwrap());
    }

    #[test]
    fn antisymmetric_reads_and_flipped_input() {
        let b = Bracket::from_int_terms(3, &[(1, 0, 2, 1)]).unwrap();
        assert_eq!(b.get(0, 1, 2), -1.0);
        assert_eq!(b.get(1, 0, 2), 1.0);
        assert!(Bracket::from_int_terms(3, &[(1, 1, 2, 1)]).is_err());
    }

    #[test]
    fn scalar_action_divides_constants() {
        let h3 = corpus::heisenberg(1);
        let out = act(&BasisChange::scalar(3, 2.0).unwrap(), &h3).unwrap();
        assert!((out.get(0, 1, 2) - 0.5).abs() < 1e-15);
        let exact = act_diagonal_exact(&[int(2), int(2), int(2)], &h3).unwrap();
        assert_eq!(
            exact.get_scalar(&Triple::new(0, 1, 2)),
            Some(&Scalar::Rational(rat(1, 2)))
        );
    }

    #[test]
    fn diagonal_action_on_weight_vectors() {
        let h3 = corpus::heisenberg(1);
        let d = [2.0, 3.0, 5.0];
        let out = act(&BasisChange::diagonal(&d).unwrap(), &h3).unwrap();
        assert!((out.get(0, 1, 2) - 5.0 / 6.0).abs() < 1e-15);
        assert!(act_diagonal(&d, &h3).distance(&out) < 1e-15);
    }

    #[test]
    fn identity_action_is_trivial_and_exact() {
        let t = corpus::tricky5();
        let out = act(&BasisChange::identity(5), &t).unwrap();
        assert!(out.is_exact());
        assert_eq!(out, t);
    }

    #[test]
    fn singular_change_rejected() {
        assert!(matches!(
            BasisChange::diagonal(&[1.0, 0.0]),
            Err(Error::Singular { .. })
        ));
        assert!(BasisChange::from_rational(vec![vec![int(1), int(2)], vec![int(2), int(4)]]).is_err());
    }

    #[test]
    fn display_uses_one_based_indices() {
        assert_eq!(corpus::tricky5().to_string(), "[e1,e2]=e3+e4, [e1,e3]=e5, [e1,e4]=e5");
    }
}
