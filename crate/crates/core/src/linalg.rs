//! Small dense linear-algebra kernels shared across modules.
//!
//! Row reduction is generic over [`Field`]; everything that needs spectra or
//! exponentials works on `nalgebra` matrices of `f64`.

use nalgebra::{DMatrix, DVector};

use crate::field::Field;

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Reduced row echelon form. Returns the pivot columns. Entries with
/// magnitude below `tol * scale` count as zero (float fields only), where
/// `scale` is the largest entry of the input.
pub fn rref<F: Field>(rows: &mut [Vec<F>], ncols: usize, tol: f64) -> Vec<usize> {
    let scale = rows
        .iter()
        .flat_map(|r| r.iter().map(Field::abs_f64))
        .fold(0.0f64, f64::max)
        .max(1.0);
    let eps = tol * scale;
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        if r == rows.len() {
            break;
        }
        let pivot = if F::EXACT {
            (r..rows.len()).find(|&i| !rows[i][c].is_zero_within(0.0))
        } else {
            (r..rows.len())
                .max_by(|&a, &b| rows[a][c].abs_f64().total_cmp(&rows[b][c].abs_f64()))
                .filter(|&i| !rows[i][c].is_zero_within(eps))
        };
        let Some(p) = pivot else { continue };
        rows.swap(r, p);
        let inv = F::one() / rows[r][c].clone();
        for v in rows[r].iter_mut() {
            *v = v.clone() * inv.clone();
        }
        for i in 0..rows.len() {
            if i == r || rows[i][c].is_zero_within(0.0) {
                continue;
            }
            let factor = rows[i][c].clone();
            for j in 0..ncols {
                if rows[r][j].is_zero_within(0.0) {
                    continue;
                }
                let delta = factor.clone() * rows[r][j].clone();
                rows[i][j] = rows[i][j].clone() - delta;
            }
            if !F::EXACT {
                for j in 0..ncols {
                    if rows[i][j].is_zero_within(eps * 1e-3) {
                        rows[i][j] = F::zero();
                    }
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

pub fn rank<F: Field>(rows: &[Vec<F>], ncols: usize, tol: f64) -> usize {
    let mut work = rows.to_vec();
    rref(&mut work, ncols, tol).len()
}

/// Basis of `{x : A x = 0}`, one vector per free column with that column set
/// to one.
pub fn null_space<F: Field>(rows: &[Vec<F>], ncols: usize, tol: f64) -> Vec<Vec<F>> {
    let mut work = rows.to_vec();
    let pivots = rref(&mut work, ncols, tol);
    let free: Vec<usize> = (0..ncols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![F::zero(); ncols];
            v[f] = F::one();
            for (row, &pc) in pivots.iter().enumerate() {
                v[pc] = -work[row][f].clone();
            }
            v
        })
        .collect()
}

/// Row basis of the span of `vectors`.
pub fn span_basis<F: Field>(vectors: &[Vec<F>], ncols: usize, tol: f64) -> Vec<Vec<F>> {
    let mut work = vectors.to_vec();
    let pivots = rref(&mut work, ncols, tol);
    work.truncate(pivots.len());
    work
}

/// Solves `A x = b` for square or overdetermined consistent systems. Returns
/// `None` when inconsistent; free variables are set to zero.
pub fn solve<F: Field>(a: &[Vec<F>], b: &[F], ncols: usize, tol: f64) -> Option<Vec<F>> {
    let mut aug: Vec<Vec<F>> = a
        .iter()
        .zip(b)
        .map(|(row, rhs)| {
            let mut r = row.clone();
            r.push(rhs.clone());
            r
        })
        .collect();
    let pivots = rref(&mut aug, ncols + 1, tol);
    if pivots.contains(&ncols) {
        return None;
    }
    let mut x = vec![F::zero(); ncols];
    for (row, &pc) in pivots.iter().enumerate() {
        x[pc] = aug[row][ncols].clone();
    }
    Some(x)
}

/// Modified Gram–Schmidt on the given vectors, dropping dependent ones.
pub fn orthonormalize(vectors: &[Vector], tol: f64) -> Vec<Vector> {
    let mut out: Vec<Vector> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &out {
                let d = q.dot(&w);
                w.axpy(-d, q, 1.0);
            }
        }
        let n = w.norm();
        if n > tol {
            out.push(w / n);
        }
    }
    out
}

pub fn to_f64_vec<F: Field>(v: &[F]) -> Vec<f64> {
    v.iter().map(Field::to_f64).collect()
}

pub fn commutator(a: &Mat, b: &Mat) -> Mat {
    a * b - b * a
}

pub fn sym_part(a: &Mat) -> Mat {
    (a + a.transpose()) * 0.5
}

pub fn max_abs(a: &Mat) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(a: &Mat) -> Vec<f64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    let s = sym_part(a);
    let mut ev: Vec<f64> = s.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn lambda_max(a: &Mat) -> f64 {
    sym_eigenvalues(a).last().copied().unwrap_or(f64::NEG_INFINITY)
}

pub fn diag_mat(d: &[f64]) -> Mat {
    Mat::from_diagonal(&Vector::from_column_slice(d))
}

pub fn is_diagonal(a: &Mat, tol: f64) -> bool {
    (0..a.nrows()).all(|i| (0..a.ncols()).all(|j| i == j || a[(i, j)].abs() <= tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{int, Rational};

    #[test]
    fn exact_null_space_of_rank_one() {
        let rows = vec![vec![int(1), int(1), int(-1)]];
        let ns = null_space::<Rational>(&rows, 3, 0.0);
        assert_eq!(ns.len(), 2);
        for v in &ns {
            let dot = v[0].clone() + v[1].clone() - v[2].clone();
            assert_eq!(dot, int(0));
        }
    }

    #[test]
    fn float_rank_respects_tolerance() {
        let rows = vec![vec![1.0, 2.0], vec![2.0, 4.0 + 1e-14]];
        assert_eq!(rank(&rows, 2, 1e-10), 1);
        assert_eq!(rank(&rows, 2, 1e-16), 2);
    }

    #[test]
    fn solve_detects_inconsistency() {
        let a = vec![vec![int(1), int(1)], vec![int(2), int(2)]];
        assert!(solve(&a, &[int(1), int(3)], 2, 0.0).is_none());
        let x = solve(&a, &[int(1), int(2)], 2, 0.0).unwrap();
        assert_eq!(x[0].clone() + x[1].clone(), int(1));
    }
}
