//! Ricci operators of nilpotent metric Lie algebras and of their rank-one
//! solvable extensions `s_D = R f ⊕ n`, and metric transport.

use crate::bracket::{act, BasisChange, Bracket, Triple};
use crate::derivations::{leibniz_residual, Derivation};
use crate::error::{Error, Result};
use crate::koszul::koszul_oracle;
use crate::linalg::{self, Mat, Vector};

/// `lambda_max` threshold for Ricci negativity.
pub const NEGATIVE_TOL: f64 = 1e-9;

/// `Ric = 1/4 sum ad_i ad_i^T - 1/2 sum ad_i^T ad_i` for nilpotent brackets.
pub fn ricci_nilpotent(b: &Bracket) -> Mat {
    let n = b.dim();
    let mut out = Mat::zeros(n, n);
    for i in 0..n {
        let ad = b.ad_basis(i);
        out += (&ad * ad.transpose()) * 0.25 - (ad.transpose() * &ad) * 0.5;
    }
    out
}

/// Bracket of `s_D` on `R f ⊕ n`, with `f` as index 0 and `[f, X] = DX`.
pub fn extension_bracket(d: &Mat, b: &Bracket) -> Bracket {
    let n = b.dim();
    let mut terms: Vec<(Triple, f64)> = Vec::new();
    for i in 0..n {
        for k in 0..n {
            if d[(k, i)] != 0.0 {
                terms.push((Triple::new(0, i + 1, k + 1), d[(k, i)]));
            }
        }
    }
    for (t, s) in b.constants() {
        terms.push((Triple::new(t.i + 1, t.j + 1, t.k + 1), s.to_f64()));
    }
    Bracket::from_float_terms(n + 1, terms.into_iter().map(|(t, c)| (t.i, t.j, t.k, c)))
        .expect("indices in range")
}

/// Blocks of the Ricci operator of `(s_D, <,>)` with `|f| = 1`, `f ⟂ n`.
#[derive(Clone, Debug)]
pub struct RicciBlock {
    /// `-tr S(D)^2`.
    pub ff: f64,
    /// `<Ric f, e_i> = -tr(S(D) ad e_i)`.
    pub fn_row: Vector,
    /// `Ric_mu + 1/2 [D, D^T] - tr(D) S(D)`.
    pub nn: Mat,
    /// Mixed block of the Koszul oracle's Ricci operator.
    pub star: Vector,
    /// Largest entrywise gap between the assembled blocks and the oracle.
    pub oracle_delta: f64,
}

impl RicciBlock {
    pub fn assembled(&self) -> Mat {
        assemble(self.ff, &self.fn_row, &self.nn)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::sym_eigenvalues(&self.assembled())
    }

    pub fn lambda_max(&self) -> f64 {
        linalg::lambda_max(&self.assembled())
    }
}

fn assemble(ff: f64, row: &Vector, nn: &Mat) -> Mat {
    let n = nn.nrows();
    let mut m = Mat::zeros(n + 1, n + 1);
    m[(0, 0)] = ff;
    for i in 0..n {
        m[(0, i + 1)] = row[i];
        m[(i + 1, 0)] = row[i];
    }
    m.view_mut((1, 1), (n, n)).copy_from(nn);
    m
}

/// Closed-form blocks `(ff, fn_row, nn)`.
pub fn extension_blocks(d: &Mat, b: &Bracket) -> (f64, Vector, Mat) {
    let n = b.dim();
    let s = linalg::sym_part(d);
    let ff = -(&s * &s).trace();
    let row = Vector::from_fn(n, |i, _| -(&s * b.ad_basis(i)).trace());
    let nn = ricci_nilpotent(b) + linalg::commutator(d, &d.transpose()) * 0.5 - &s * d.trace();
    (ff, row, nn)
}

/// Closed-form Ricci operator of `s_D`, assembled.
pub fn extension_ricci(d: &Mat, b: &Bracket) -> Mat {
    let (ff, row, nn) = extension_blocks(d, b);
    assemble(ff, &row, &nn)
}

pub fn ricci_extension(d: &Derivation, b: &Bracket) -> Result<RicciBlock> {
    let residual = leibniz_residual(d.matrix(), b);
    if residual > 1e-9 * d.matrix().norm().max(1.0) * b.norm_sq().sqrt().max(1.0) {
        return Err(Error::NotDerivation { residual });
    }
    let (ff, fn_row, nn) = extension_blocks(d.matrix(), b);
    let oracle = koszul_oracle(&extension_bracket(d.matrix(), b)).ricci;
    let n = b.dim();
    let star = Vector::from_fn(n, |i, _| oracle[(0, i + 1)]);
    let oracle_delta = linalg::max_abs(&(assemble(ff, &fn_row, &nn) - oracle));
    Ok(RicciBlock {
        ff,
        fn_row,
        nn,
        star,
        oracle_delta,
    })
}

/// The block matrix `hbar = [[1/c, 0], [X, h]]`.
#[derive(Clone, Debug)]
pub struct MetricParams {
    pub c: f64,
    pub x: Vector,
    pub h: Mat,
}

impl MetricParams {
    pub fn identity(n: usize) -> Self {
        MetricParams {
            c: 1.0,
            x: Vector::zeros(n),
            h: Mat::identity(n, n),
        }
    }

    pub fn validate(&self) -> Result<BasisChange> {
        if self.c == 0.0 || !self.c.is_finite() {
            return Err(Error::Precondition("c must be nonzero".to_string()));
        }
        BasisChange::new(self.h.clone())
    }

    /// `hbar` as an `(n+1) x (n+1)` matrix, `f` first.
    pub fn hbar(&self) -> Mat {
        let n = self.h.nrows();
        let mut m = Mat::zeros(n + 1, n + 1);
        m[(0, 0)] = 1.0 / self.c;
        for i in 0..n {
            m[(i + 1, 0)] = self.x[i];
        }
        m.view_mut((1, 1), (n, n)).copy_from(&self.h);
        m
    }
}

/// The pair `(c h (D - ad h^-1 X) h^-1, h . mu)`; raw matrices, no Leibniz check.
pub fn transport_raw(p: &MetricParams, d: &Mat, b: &Bracket) -> Result<(Mat, Bracket)> {
    let h = p.validate()?;
    let y = h.inverse() * &p.x;
    let inner = d - b.ad(&y);
    let d2 = h.matrix() * inner * h.inverse() * p.c;
    Ok((d2, act(&h, b)?))
}

pub fn transport_metric(p: &MetricParams, d: &Derivation, b: &Bracket) -> Result<(Derivation, Bracket)> {
    let (d2, b2) = transport_raw(p, d.matrix(), b)?;
    Ok((Derivation::new(d2, &b2)?, b2))
}

#[derive(Clone, Debug)]
pub struct NegativityReport {
    pub negative: bool,
    pub lambda_max: f64,
}

/// Largest Ricci eigenvalue of `s_D` under the metric encoded by `p`.
pub fn transported_lambda_max(p: &MetricParams, d: &Mat, b: &Bracket) -> Result<f64> {
    let (d2, b2) = transport_raw(p, d, b)?;
    Ok(linalg::lambda_max(&extension_ricci(&d2, &b2)))
}

pub fn is_ricci_negative(d: &Derivation, b: &Bracket, p: &MetricParams) -> Result<NegativityReport> {
    let (d2, b2) = transport_metric(p, d, b)?;
    let lambda_max = linalg::lambda_max(&koszul_oracle(&extension_bracket(d2.matrix(), &b2)).ricci);
    Ok(NegativityReport {
        negative: lambda_max < -NEGATIVE_TOL,
        lambda_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    #[test]
    fn nilpotent_ricci_values() {
        assert_eq!(ricci_nilpotent(&corpus::abelian(3)).norm(), 0.0);
        let r = ricci_nilpotent(&corpus::heisenberg(1));
        assert!((r - linalg::diag_mat(&[-0.5, -0.5, 0.5])).norm() < 1e-15);
        let r = ricci_nilpotent(&corpus::tricky5());
        assert!((r - linalg::diag_mat(&[-2.0, -1.0, 0.0, 0.0, 1.0])).norm() < 1e-14);
    }

    #[test]
    fn nilpotent_ricci_matches_oracle() {
        for (name, b) in corpus::nilpotent_sweep() {
            let delta = linalg::max_abs(&(ricci_nilpotent(&b) - koszul_oracle(&b).ricci));
            assert!(delta < 1e-12, "{name}");
            assert!((ricci_nilpotent(&b).trace() + b.norm_sq() / 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn heisenberg_extension() {
        let b = corpus::heisenberg(1);
        let d = Derivation::diagonal(&[1.0, 1.0, 2.0], &b).unwrap();
        let r = ricci_extension(&d, &b).unwrap();
        assert!((r.ff + 6.0).abs() < 1e-14);
        assert!(r.fn_row.norm() < 1e-14 && r.star.norm() < 1e-14);
        assert!((&r.nn - linalg::diag_mat(&[-4.5, -4.5, -7.5])).norm() < 1e-14);
        assert!(r.oracle_delta < 1e-12);
        assert!((r.lambda_max() + 4.5).abs() < 1e-12);
    }

    #[test]
    fn hyperbolic_extension() {
        for n in 1..=5 {
            let b = corpus::abelian(n);
            let d = Derivation::new(Mat::identity(n, n), &b).unwrap();
            let r = ricci_extension(&d, &b).unwrap();
            assert!((r.assembled() + Mat::identity(n + 1, n + 1) * n as f64).norm() < 1e-12);
        }
    }

    #[test]
    fn non_normal_extension_matches_oracle() {
        // D = diag(1,1,2) + e3 (x) e1^T style nilpotent term on h3
        let b = corpus::heisenberg(1);
        let m = Mat::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.7, -0.3, 2.0]);
        let d = Derivation::new(m, &b).unwrap();
        let r = ricci_extension(&d, &b).unwrap();
        assert!(r.oracle_delta < 1e-12, "{}", r.oracle_delta);
        assert!(r.star.norm() > 1e-3);
    }

    #[test]
    fn transport_is_the_hbar_action() {
        let b = corpus::tricky5();
        let d = linalg::diag_mat(&[1.0, 0.5, 1.5, 1.5, 2.5]);
        let p = MetricParams {
            c: 1.7,
            x: Vector::from_vec(vec![0.3, -0.2, 0.5, 0.1, -0.4]),
            h: Mat::from_fn(5, 5, |i, j| if i == j { 1.0 + 0.1 * i as f64 } else { 0.05 * (i as f64 - j as f64) }),
        };
        let (d2, b2) = transport_raw(&p, &d, &b).unwrap();
        let hbar = BasisChange::new(p.hbar()).unwrap();
        let moved = act(&hbar, &extension_bracket(&d, &b)).unwrap();
        assert!(moved.distance(&extension_bracket(&d2, &b2)) < 1e-12);
    }

    #[test]
    fn transport_special_cases() {
        let b = corpus::heisenberg(1);
        let d = Derivation::diagonal(&[1.0, 1.0, 2.0], &b).unwrap();
        let (d2, b2) = transport_metric(&MetricParams::identity(3), &d, &b).unwrap();
        assert_eq!(d2, d);
        assert_eq!(b2.distance(&b), 0.0);
        let mut p = MetricParams::identity(3);
        p.c = 2.5;
        let (d2, _) = transport_metric(&p, &d, &b).unwrap();
        assert!((d2.matrix() - d.matrix() * 2.5).norm() < 1e-14);
        let mut p = MetricParams::identity(3);
        p.x = Vector::from_vec(vec![0.4, -1.0, 3.0]);
        let (d2, b2) = transport_metric(&p, &d, &b).unwrap();
        assert!((d2.matrix() - (d.matrix() - b.ad(&p.x))).norm() < 1e-14);
        let hbar = BasisChange::new(p.hbar()).unwrap();
        let moved = act(&hbar, &extension_bracket(d.matrix(), &b)).unwrap();
        let e1 = linalg::sym_eigenvalues(&koszul_oracle(&moved).ricci);
        let e2 = linalg::sym_eigenvalues(&koszul_oracle(&extension_bracket(d2.matrix(), &b2)).ricci);
        for (a, c) in e1.iter().zip(&e2) {
            assert!((a - c).abs() < 1e-8);
        }
        p.c = 0.0;
        assert!(transport_metric(&p, &d, &b).is_err());
    }

    #[test]
    fn negativity_examples() {
        let b = corpus::heisenberg(1);
        let d = Derivation::diagonal(&[1.0, 1.0, 2.0], &b).unwrap();
        let r = is_ricci_negative(&d, &b, &MetricParams::identity(3)).unwrap();
        assert!(r.negative && (r.lambda_max + 4.5).abs() < 1e-12);
        let a = corpus::abelian(3);
        let d = Derivation::new(Mat::identity(3, 3), &a).unwrap();
        let r = is_ricci_negative(&d, &a, &MetricParams::identity(3)).unwrap();
        assert!(r.negative && (r.lambda_max + 3.0).abs() < 1e-12);
    }
}
