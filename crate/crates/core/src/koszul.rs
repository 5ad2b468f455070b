//! Curvature of a left-invariant metric from the Koszul formula, with the
//! fixed basis taken orthonormal. Used as an independent oracle.

use crate::bracket::Bracket;
use crate::linalg::Mat;

#[derive(Clone, Debug)]
pub struct Curvature {
    pub dim: usize,
    /// `riemann[a * n + b]` is the endomorphism `R(e_a, e_b)`.
    pub riemann: Vec<Mat>,
    /// `((a, b), K(e_a, e_b))` for `a < b`.
    pub sectional: Vec<((usize, usize), f64)>,
    pub ricci: Mat,
    pub scalar: f64,
}

impl Curvature {
    pub fn sectional_max(&self) -> f64 {
        self.sectional
            .iter()
            .fold(f64::NEG_INFINITY, |m, (_, k)| m.max(*k))
    }
}

/// `L_i` with `(L_i)_{kj} = <nabla_{e_i} e_j, e_k>`.
pub fn connection(b: &Bracket) -> Vec<Mat> {
    let n = b.dim();
    let c = b.dense_f64();
    let at = |i: usize, j: usize, k: usize| c[(i * n + j) * n + k];
    (0..n)
        .map(|i| {
            Mat::from_fn(n, n, |k, j| 0.5 * (at(i, j, k) - at(j, k, i) + at(k, i, j)))
        })
        .collect()
}

pub fn koszul_oracle(b: &Bracket) -> Curvature {
    let n = b.dim();
    let l = connection(b);
    let c = b.dense_f64();
    let mut riemann = vec![Mat::zeros(n, n); n * n];
    for a in 0..n {
        for bb in a + 1..n {
            let mut r = &l[a] * &l[bb] - &l[bb] * &l[a];
            for m in 0..n {
                let cm = c[(a * n + bb) * n + m];
                if cm != 0.0 {
                    r -= &l[m] * cm;
                }
            }
            riemann[bb * n + a] = -&r;
            riemann[a * n + bb] = r;
        }
    }
    let mut sectional = Vec::new();
    for a in 0..n {
        for bb in a + 1..n {
            sectional.push(((a, bb), riemann[a * n + bb][(a, bb)]));
        }
    }
    let ricci = Mat::from_fn(n, n, |bb, cc| (0..n).map(|a| riemann[a * n + bb][(a, cc)]).sum());
    let scalar = ricci.trace();
    Curvature {
        dim: n,
        riemann,
        sectional,
        ricci,
        scalar,
    }
}
