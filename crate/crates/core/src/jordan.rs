//! Additive Jordan decomposition `D = D^R + D^iR + D^n` of a real matrix.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};

/// Relative eigenvalue gap used for the first clustering attempt.
pub const CLUSTER_GAP: f64 = 1e-7;
/// Residual bound on the `JordanParts` invariants.
pub const PARTS_TOL: f64 = 1e-8;

type CMat = DMatrix<Complex<f64>>;

#[derive(Clone, Debug)]
pub struct JordanParts {
    pub real_part: Mat,
    pub imaginary_part: Mat,
    pub nilpotent_part: Mat,
    /// Worst of the invariant residuals (sum, commutators, nilpotency).
    pub residual: f64,
    /// Clustering gap that was finally used.
    pub gap: f64,
}

impl JordanParts {
    pub fn semisimple(&self) -> Mat {
        &self.real_part + &self.imaginary_part
    }
}

fn cluster_centers(eigs: &[Complex<f64>], gap: f64) -> Vec<Complex<f64>> {
    let scale = eigs.iter().fold(1.0f64, |m, z| m.max(z.norm()));
    let tol = gap * scale;
    // cluster the closed upper half plane, then mirror
    let mut upper: Vec<Complex<f64>> = eigs
        .iter()
        .map(|z| Complex::new(z.re, z.im.abs()))
        .collect();
    upper.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let mut groups: Vec<Vec<Complex<f64>>> = Vec::new();
    for z in upper {
        match groups
            .iter_mut()
            .find(|g| g.iter().any(|w| (w - z).norm() <= tol))
        {
            Some(g) => g.push(z),
            None => groups.push(vec![z]),
        }
    }
    // merge groups chained through single linkage
    let mut merged = true;
    while merged {
        merged = false;
        'outer: for a in 0..groups.len() {
            for b in a + 1..groups.len() {
                if groups[a]
                    .iter()
                    .any(|x| groups[b].iter().any(|y| (x - y).norm() <= tol))
                {
                    let g = groups.remove(b);
                    groups[a].extend(g);
                    merged = true;
                    break 'outer;
                }
            }
        }
    }
    let mut centers = Vec::new();
    for g in groups {
        let mean = g.iter().sum::<Complex<f64>>() / g.len() as f64;
        if mean.im <= tol {
            centers.push(Complex::new(mean.re, 0.0));
        } else {
            centers.push(mean);
            centers.push(mean.conj());
        }
    }
    centers
}

fn to_complex(m: &Mat) -> CMat {
    m.map(|x| Complex::new(x, 0.0))
}

fn real_of(m: &CMat) -> Mat {
    m.map(|z| z.re)
}

/// `prod_{l != skip} (S - c_l)`.
fn product_except(s: &CMat, centers: &[Complex<f64>], skip: Option<usize>) -> CMat {
    let n = s.nrows();
    let id = CMat::identity(n, n);
    let mut out = id.clone();
    for (l, c) in centers.iter().enumerate() {
        if Some(l) != skip {
            out *= s - &id * *c;
        }
    }
    out
}

fn attempt(d: &Mat, gap: f64) -> Option<JordanParts> {
    let n = d.nrows();
    let eigs: Vec<Complex<f64>> = d.complex_eigenvalues().iter().copied().collect();
    let centers = cluster_centers(&eigs, gap);
    let scale = d.norm().max(1.0);

    // Newton iteration on the square-free polynomial with the cluster roots
    let mut s = to_complex(d);
    for _ in 0..64 {
        let p = product_except(&s, &centers, None);
        if p.norm() <= 1e-14 * scale.powi(centers.len() as i32) {
            break;
        }
        let mut dp = CMat::zeros(n, n);
        for j in 0..centers.len() {
            dp += product_except(&s, &centers, Some(j));
        }
        let inv = dp.try_inverse()?;
        let step = p * inv;
        let size = step.norm();
        s -= step;
        if size <= 1e-15 * scale {
            break;
        }
    }
    let s_real = real_of(&s);
    let s = to_complex(&s_real);

    // D^R = q(S) with q(c_j) = Re c_j
    let mut dr = CMat::zeros(n, n);
    for (j, cj) in centers.iter().enumerate() {
        let mut denom = Complex::new(1.0, 0.0);
        for (l, cl) in centers.iter().enumerate() {
            if l != j {
                denom *= cj - cl;
            }
        }
        dr += product_except(&s, &centers, Some(j)) * Complex::new(cj.re, 0.0) / denom;
    }
    let real_part = real_of(&dr);
    let imaginary_part = &s_real - &real_part;
    let nilpotent_part = d - &s_real;

    let mut residual = 0.0f64;
    residual = residual.max(linalg::max_abs(&(&real_part + &imaginary_part + &nilpotent_part - d)));
    for (a, b) in [
        (&real_part, &imaginary_part),
        (&real_part, &nilpotent_part),
        (&imaginary_part, &nilpotent_part),
    ] {
        residual = residual.max(linalg::max_abs(&linalg::commutator(a, b)));
    }
    let mut power = Mat::identity(n, n);
    for _ in 0..n {
        power = &power * &nilpotent_part;
    }
    residual = residual.max(linalg::max_abs(&power));
    Some(JordanParts {
        real_part,
        imaginary_part,
        nilpotent_part,
        residual: residual / scale,
        gap,
    })
}

/// Jordan parts via eigenvalue clustering; the gap is coarsened when the
/// first clustering leaves residuals above [`PARTS_TOL`].
pub fn jordan_decompose(d: &Mat) -> Result<JordanParts> {
    let n = d.nrows();
    if n == 0 {
        return Ok(JordanParts {
            real_part: d.clone(),
            imaginary_part: d.clone(),
            nilpotent_part: d.clone(),
            residual: 0.0,
            gap: CLUSTER_GAP,
        });
    }
    let mut best: Option<JordanParts> = None;
    for gap in [CLUSTER_GAP, 1e-5, 1e-3, 1e-2] {
        if let Some(parts) = attempt(d, gap) {
            if parts.residual <= PARTS_TOL {
                return Ok(parts);
            }
            if best.as_ref().is_none_or(|b| parts.residual < b.residual) {
                best = Some(parts);
            }
        }
    }
    Err(Error::Clustering {
        residual: best.map_or(f64::INFINITY, |b| b.residual),
    })
}
