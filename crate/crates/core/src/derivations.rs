//! Derivation algebras, the diagonal torus and weight data.

use nalgebra::Complex;

use crate::bracket::{Bracket, FromScalar};
use crate::error::{Error, Result};
use crate::field::{int, Field, Rational};
use crate::linalg::{self, Mat, Vector};

/// Relative Leibniz tolerance, against `|D| |mu|`.
pub const LEIBNIZ_TOL: f64 = 1e-9;
/// Threshold on real parts for positivity of a spectrum.
pub const POSITIVE_TOL: f64 = 1e-10;

/// Largest norm of `D[x,y] - [Dx,y] - [x,Dy]` over basis pairs.
pub fn leibniz_residual(d: &Mat, b: &Bracket) -> f64 {
    let n = b.dim();
    let ads: Vec<Mat> = (0..n).map(|i| b.ad_basis(i)).collect();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            let ej = Vector::from_fn(n, |r, _| f64::from(u8::from(r == j)));
            let lhs = d * (&ads[i] * &ej);
            let dx = d.column(i).into_owned();
            let dy = d.column(j).into_owned();
            let rhs = b.ad(&dx) * &ej + &ads[i] * dy;
            worst = worst.max((lhs - rhs).norm());
        }
    }
    worst
}

fn leibniz_bound(d: &Mat, b: &Bracket) -> f64 {
    LEIBNIZ_TOL * d.norm().max(1.0) * b.norm_sq().sqrt().max(1.0)
}

/// A derivation of a fixed bracket, validated on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Derivation {
    matrix: Mat,
}

impl Derivation {
    pub fn new(matrix: Mat, b: &Bracket) -> Result<Self> {
        if matrix.nrows() != b.dim() || matrix.ncols() != b.dim() {
            return Err(Error::Dimension {
                expected: b.dim(),
                got: matrix.nrows(),
            });
        }
        let residual = leibniz_residual(&matrix, b);
        if residual > leibniz_bound(&matrix, b) {
            return Err(Error::NotDerivation { residual });
        }
        Ok(Derivation { matrix })
    }

    pub fn diagonal(d: &[f64], b: &Bracket) -> Result<Self> {
        Self::new(linalg::diag_mat(d), b)
    }

    pub fn matrix(&self) -> &Mat {
        &self.matrix
    }

    pub fn into_matrix(self) -> Mat {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    pub fn is_diagonal(&self) -> bool {
        linalg::is_diagonal(&self.matrix, 0.0)
    }

    pub fn diagonal_entries(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().copied().collect()
    }

    pub fn is_normal(&self, tol: f64) -> bool {
        let t = self.matrix.transpose();
        linalg::max_abs(&linalg::commutator(&self.matrix, &t)) <= tol * self.matrix.norm().powi(2).max(1.0)
    }
}

fn leibniz_system<F: FromScalar>(b: &Bracket) -> Option<Vec<Vec<F>>> {
    let n = b.dim();
    let c = b.dense::<F>()?;
    let at = |i: usize, j: usize, k: usize| c[(i * n + j) * n + k].clone();
    let var = |row: usize, col: usize| row * n + col;
    let mut rows = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for l in 0..n {
                let mut eq = vec![F::zero(); n * n];
                for k in 0..n {
                    let v = at(i, j, k);
                    if !v.is_zero_within(0.0) {
                        eq[var(l, k)] = eq[var(l, k)].clone() + v;
                    }
                }
                for m in 0..n {
                    let v = at(m, j, l);
                    if !v.is_zero_within(0.0) {
                        eq[var(m, i)] = eq[var(m, i)].clone() - v;
                    }
                    let v = at(i, m, l);
                    if !v.is_zero_within(0.0) {
                        eq[var(m, j)] = eq[var(m, j)].clone() - v;
                    }
                }
                if eq.iter().any(|x| !x.is_zero_within(0.0)) {
                    rows.push(eq);
                }
            }
        }
    }
    Some(rows)
}

#[derive(Clone, Debug)]
pub struct DerivationSpace {
    /// Exact null-space basis (row-major matrices), rational brackets only.
    pub exact: Option<Vec<Vec<Rational>>>,
    /// Frobenius-orthonormal basis.
    pub basis: Vec<Mat>,
}

impl DerivationSpace {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }
}

/// Basis of `Der(n)` from the null space of the Leibniz system.
pub fn derivation_space(b: &Bracket) -> Result<DerivationSpace> {
    crate::bracket::require_lie(b)?;
    let n = b.dim();
    let (exact, raw): (Option<Vec<Vec<Rational>>>, Vec<Vec<f64>>) = if b.is_exact() {
        let rows = leibniz_system::<Rational>(b).expect("exact bracket");
        let ns = linalg::null_space(&rows, n * n, 0.0);
        let raw = ns.iter().map(|v| linalg::to_f64_vec(v)).collect();
        (Some(ns), raw)
    } else {
        let rows = leibniz_system::<f64>(b).expect("float");
        (None, linalg::null_space(&rows, n * n, 1e-10))
    };
    let vecs: Vec<Vector> = raw.into_iter().map(Vector::from_vec).collect();
    let basis = linalg::orthonormalize(&vecs, 1e-12)
        .into_iter()
        .map(|v| Mat::from_row_slice(n, n, v.as_slice()))
        .collect();
    Ok(DerivationSpace { exact, basis })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Weight {
    /// Coordinates of the functional on the torus basis.
    pub functional: Vec<Rational>,
    /// Basis indices of the weight space.
    pub indices: Vec<usize>,
}

/// `Der(n) ∩ Diag(n)` in the given basis.
#[derive(Clone, Debug)]
pub struct Torus {
    n: usize,
    /// Diagonals of the basis matrices.
    basis: Vec<Vec<Rational>>,
    /// Entry `s` is the basis index read off as coordinate `s`.
    coordinate_index: Vec<usize>,
    weights: Vec<Weight>,
}

impl Torus {
    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vec<Rational>] {
        &self.basis
    }

    pub fn basis_f64(&self) -> Vec<Vec<f64>> {
        self.basis.iter().map(|v| linalg::to_f64_vec(v)).collect()
    }

    pub fn weights(&self) -> &[Weight] {
        &self.weights
    }

    /// `dim n_i = 1` for every weight.
    pub fn is_multiplicity_free(&self) -> bool {
        self.weights.iter().all(|w| w.indices.len() == 1)
    }

    /// Weight-space index of each basis vector.
    pub fn weight_of_index(&self) -> Vec<usize> {
        let mut out = vec![0; self.n];
        for (w, weight) in self.weights.iter().enumerate() {
            for &i in &weight.indices {
                out[i] = w;
            }
        }
        out
    }

    pub fn diagonal_from_coords(&self, coords: &[f64]) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for (a, t) in coords.iter().zip(&self.basis) {
            for (di, ti) in d.iter_mut().zip(t) {
                *di += a * Field::to_f64(ti);
            }
        }
        d
    }

    pub fn diagonal_from_coords_exact(&self, coords: &[Rational]) -> Vec<Rational> {
        let mut d = vec![int(0); self.n];
        for (a, t) in coords.iter().zip(&self.basis) {
            for (di, ti) in d.iter_mut().zip(t) {
                *di += a * ti;
            }
        }
        d
    }

    /// Coordinates of a diagonal on the torus basis; `None` if it is not in
    /// the torus (up to `tol` relative to its norm).
    pub fn coords_of(&self, diag: &[f64], tol: f64) -> Option<Vec<f64>> {
        let coords: Vec<f64> = self.coordinate_index.iter().map(|&i| diag[i]).collect();
        let back = self.diagonal_from_coords(&coords);
        let scale = diag.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
        let err = back
            .iter()
            .zip(diag)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        (err <= tol * scale).then_some(coords)
    }

    pub fn coords_of_exact(&self, diag: &[Rational]) -> Option<Vec<Rational>> {
        let coords: Vec<Rational> = self.coordinate_index.iter().map(|&i| diag[i].clone()).collect();
        (self.diagonal_from_coords_exact(&coords) == diag).then_some(coords)
    }

    pub fn contains(&self, diag: &[f64], tol: f64) -> bool {
        self.coords_of(diag, tol).is_some()
    }

    /// Trace of the basis elements (the trace functional in coordinates).
    pub fn trace_functional(&self) -> Vec<Rational> {
        self.basis
            .iter()
            .map(|t| t.iter().fold(int(0), |acc, x| acc + x))
            .collect()
    }

    /// Induced linear map on torus coordinates of a permutation of basis
    /// indices (`perm[i]` is the image of `e_i`): `diag(d) -> P diag(d) P^-1`.
    /// `None` if the permutation does not normalize the torus.
    pub fn induced_action(&self, perm: &[usize]) -> Option<Vec<Vec<Rational>>> {
        let r = self.dim();
        let mut cols = Vec::with_capacity(r);
        for t in &self.basis {
            let mut image = vec![int(0); self.n];
            for (i, v) in t.iter().enumerate() {
                image[perm[i]] = v.clone();
            }
            cols.push(self.coords_of_exact(&image)?);
        }
        // matrix with column s = coords of image of basis s
        Some((0..r).map(|row| (0..r).map(|s| cols[s][row].clone()).collect()).collect())
    }
}

/// `Der(n) ∩ Diag(n)`: the orthogonal complement in diagonal matrices of the
/// weight matrices `F_ij^k` with `c_ij^k != 0`.
pub fn diagonal_torus(b: &Bracket) -> Torus {
    let n = b.dim();
    let support = b.support();
    // columns reversed so that pivots land on late indices and the free
    // coordinates are the leading basis indices
    let rows: Vec<Vec<Rational>> = support
        .iter()
        .map(|t| t.weight(n).into_iter().rev().map(int).collect())
        .collect();
    let mut work = rows.clone();
    let pivots = linalg::rref(&mut work, n, 0.0);
    // one basis vector per free (reversed) column, ascending in original index
    let mut pairs: Vec<(usize, Vec<Rational>)> = linalg::null_space(&rows, n, 0.0)
        .into_iter()
        .zip((0..n).filter(|c| !pivots.contains(c)))
        .map(|(mut v, c)| {
            v.reverse();
            (n - 1 - c, v)
        })
        .collect();
    pairs.sort_by_key(|(i, _)| *i);
    let (coordinate_index, basis): (Vec<usize>, Vec<Vec<Rational>>) = pairs.into_iter().unzip();

    let mut weights: Vec<Weight> = Vec::new();
    for i in 0..n {
        let functional: Vec<Rational> = basis.iter().map(|t| t[i].clone()).collect();
        match weights.iter_mut().find(|w| w.functional == functional) {
            Some(w) => w.indices.push(i),
            None => weights.push(Weight {
                functional,
                indices: vec![i],
            }),
        }
    }
    Torus {
        n,
        basis,
        coordinate_index,
        weights,
    }
}

/// All weight values `alpha_i(D)` pairwise distinct.
pub fn is_generic(d: &[f64], torus: &Torus) -> Result<bool> {
    if torus.coords_of(d, 1e-9).is_none() {
        return Err(Error::Precondition(
            "diagonal is not in the torus".to_string(),
        ));
    }
    let scale = d.iter().map(|x| x * x).sum::<f64>().sqrt();
    let values: Vec<f64> = torus.weights.iter().map(|w| d[w.indices[0]]).collect();
    for a in 0..values.len() {
        for b in a + 1..values.len() {
            if (values[a] - values[b]).abs() <= 1e-9 * scale {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

pub fn eigenvalues(m: &Mat) -> Vec<Complex<f64>> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    m.complex_eigenvalues().iter().copied().collect()
}

/// All eigenvalues have real part above [`POSITIVE_TOL`].
pub fn is_positive_derivation(d: &Mat) -> bool {
    eigenvalues(d).iter().all(|z| z.re > POSITIVE_TOL)
}

/// Block structure of the centralizer of a diagonal matrix: groups of indices
/// with equal entries (within `tol` relative to the largest entry).
pub fn eigen_blocks(diag: &[f64], tol: f64) -> Vec<Vec<usize>> {
    let scale = diag.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
    let mut blocks: Vec<(f64, Vec<usize>)> = Vec::new();
    for (i, &v) in diag.iter().enumerate() {
        match blocks.iter_mut().find(|(c, _)| (c - v).abs() <= tol * scale) {
            Some((_, idx)) => idx.push(i),
            None => blocks.push((v, vec![i])),
        }
    }
    blocks.into_iter().map(|(_, idx)| idx).collect()
}

/// Weight-space blocks of the torus (the block structure of `G_t(n)`).
pub fn torus_blocks(torus: &Torus) -> Vec<Vec<usize>> {
    torus.weights.iter().map(|w| w.indices.clone()).collect()
}
