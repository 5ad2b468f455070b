//! Degenerations along explicit curves of basis changes, the Heintze curve
//! and the transfer of strict curvature conditions back along a curve.

use rayon::prelude::*;
use serde::Serialize;

use crate::bracket::{act, act_diagonal, validate_jacobi, BasisChange, Bracket, Triple};
use crate::curvature::extension_bracket;
use crate::derivations::Derivation;
use crate::error::{Error, Result};
use crate::field::{int, Field, Rational};
use crate::koszul::koszul_oracle;
use crate::linalg::{self, Mat};
use crate::moment::{face_steering_exponents, weight_polytope};
use crate::polytope::Face;

/// `t_k = 2^k` for `k = 0..=SCHEDULE_MAX`.
pub const SCHEDULE_MAX: u32 = 20;
pub const CAUCHY_TOL: f64 = 1e-10;
/// Strictness margin for curvature predicates.
pub const PREDICATE_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub enum CurveKind {
    /// `h_t = diag(t^{e_1}, ..., t^{e_n})`, scaling `c_ij^k` by
    /// `t^{e_k - e_i - e_j}`.
    Diagonal { exponents: Vec<Rational> },
    /// Explicit basis changes at increasing times.
    Samples { times: Vec<f64>, matrices: Vec<Mat> },
}

#[derive(Clone, Debug)]
pub struct DegenerationCurve {
    pub source: Bracket,
    pub kind: CurveKind,
}

impl DegenerationCurve {
    pub fn diagonal(source: Bracket, exponents: Vec<Rational>) -> Result<Self> {
        if exponents.len() != source.dim() {
            return Err(Error::Dimension {
                expected: source.dim(),
                got: exponents.len(),
            });
        }
        Ok(DegenerationCurve {
            source,
            kind: CurveKind::Diagonal { exponents },
        })
    }

    pub fn samples(source: Bracket, times: Vec<f64>, matrices: Vec<Mat>) -> Result<Self> {
        if times.len() != matrices.len() || times.is_empty() {
            return Err(Error::Precondition("times and matrices must pair up".into()));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Precondition("sample times must increase".into()));
        }
        for m in &matrices {
            if m.nrows() != source.dim() || m.ncols() != source.dim() {
                return Err(Error::Dimension {
                    expected: source.dim(),
                    got: m.nrows(),
                });
            }
            BasisChange::new(m.clone())?;
        }
        Ok(DegenerationCurve {
            source,
            kind: CurveKind::Samples { times, matrices },
        })
    }

    /// Sample times used by the transfer: the geometric schedule for
    /// diagonal curves, the given times otherwise.
    pub fn schedule(&self) -> Vec<f64> {
        match &self.kind {
            CurveKind::Diagonal { .. } => (0..=SCHEDULE_MAX).map(|k| 2f64.powi(k as i32)).collect(),
            CurveKind::Samples { times, .. } => times.clone(),
        }
    }

    pub fn basis_change(&self, t: f64) -> Result<Mat> {
        match &self.kind {
            CurveKind::Diagonal { exponents } => Ok(linalg::diag_mat(
                &exponents.iter().map(|e| t.powf(e.to_f64())).collect::<Vec<_>>(),
            )),
            CurveKind::Samples { times, matrices } => times
                .iter()
                .position(|&s| s == t)
                .map(|i| matrices[i].clone())
                .ok_or_else(|| Error::Precondition(format!("no sample at t = {t}"))),
        }
    }

    /// `h_t . source`.
    pub fn at(&self, t: f64) -> Result<Bracket> {
        match &self.kind {
            CurveKind::Diagonal { exponents } => {
                let h: Vec<f64> = exponents.iter().map(|e| t.powf(e.to_f64())).collect();
                Ok(act_diagonal(&h, &self.source))
            }
            CurveKind::Samples { .. } => act(&BasisChange::new(self.basis_change(t)?)?, &self.source),
        }
    }
}

/// Exponent `e_k - e_i - e_j` of the constant `c_ij^k` along a diagonal curve.
pub fn decay_exponent(exponents: &[Rational], t: &Triple) -> Rational {
    &exponents[t.k] - &exponents[t.i] - &exponents[t.j]
}

#[derive(Clone, Debug)]
pub struct Limit {
    pub bracket: Bracket,
    /// Closed form (diagonal curves) or sampled.
    pub closed_form: bool,
    /// Last Cauchy gap for sampled curves, 0 for closed forms.
    pub cauchy_gap: f64,
    pub jacobi_residual: f64,
}

/// Limit of `h_t . source` as `t -> infinity`. Diagonal curves are handled
/// in closed form: constants with negative exponent vanish, zero exponents
/// are kept, positive ones diverge. Sampled curves use the Cauchy gap of the
/// last two samples up to `t_max`.
pub fn limit_bracket(curve: &DegenerationCurve, t_max: f64, tol: f64) -> Result<Limit> {
    let (bracket, closed_form, gap) = match &curve.kind {
        CurveKind::Diagonal { exponents } => {
            let mut keep = Vec::new();
            for (t, _) in curve.source.constants() {
                let s = decay_exponent(exponents, t);
                if s > int(0) {
                    return Err(Error::NoConvergence {
                        gap: f64::INFINITY,
                        t: f64::INFINITY,
                    });
                }
                if s == int(0) {
                    keep.push(*t);
                }
            }
            (curve.source.restricted_to(&keep), true, 0.0)
        }
        CurveKind::Samples { times, .. } => {
            let usable: Vec<f64> = times.iter().copied().filter(|&t| t <= t_max).collect();
            if usable.len() < 2 {
                return Err(Error::Precondition("need two samples up to t_max".into()));
            }
            let a = curve.at(usable[usable.len() - 2])?;
            let b = curve.at(usable[usable.len() - 1])?;
            let gap = a.distance(&b);
            if gap > tol {
                return Err(Error::NoConvergence {
                    gap,
                    t: usable[usable.len() - 1],
                });
            }
            let cleaned = b.scaled(1.0);
            (cleaned, false, gap)
        }
    };
    let jacobi_residual = validate_jacobi(&bracket);
    if jacobi_residual > 1e-8 {
        return Err(Error::NotLie {
            residual: jacobi_residual,
        });
    }
    Ok(Limit {
        bracket,
        closed_form,
        cauchy_gap: gap,
        jacobi_residual,
    })
}

/// The extension bracket with `ad f` acting as `t D`.
pub fn heintze_curve(d: &Derivation, b: &Bracket, t: f64) -> Bracket {
    extension_bracket(&(d.matrix() * t), b)
}

/// `diag(1, t, ..., t) . s_D`: `ad f = D` fixed while the nilradical bracket
/// decays like `1/t`, degenerating to the extension of the abelian algebra.
pub fn heintze_degeneration(d: &Derivation, b: &Bracket) -> Result<DegenerationCurve> {
    let source = extension_bracket(d.matrix(), b);
    let mut e = vec![int(1); b.dim() + 1];
    e[0] = int(0);
    DegenerationCurve::diagonal(source, e)
}

/// Diagonal curve steering `b` to `lambda_J` for a face `J` of `CH_mu`.
pub fn face_curve(b: &Bracket, face: &Face) -> Result<DegenerationCurve> {
    let poly = weight_polytope(b)?;
    DegenerationCurve::diagonal(b.clone(), face_steering_exponents(&poly, face))
}

/// `[e1,e2] = e3, [e1,e3] = e3` along `diag(t, 1/t, 1)` to the Heisenberg bracket.
pub fn milnor_heis_curve() -> DegenerationCurve {
    DegenerationCurve::diagonal(crate::corpus::milnor_source(), vec![int(1), int(-1), int(0)])
        .expect("dimension 3")
}

/// `[e3,e1] = e1, [e3,e2] = e2 + e1` along `diag(1, t, 1)` to the hyperbolic bracket.
pub fn milnor_hyp_curve() -> DegenerationCurve {
    DegenerationCurve::diagonal(crate::corpus::milnor_hyp_source(), vec![int(0), int(1), int(0)])
        .expect("dimension 3")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Predicate {
    RicciNegative,
    ScalarNegative,
}

impl Predicate {
    /// The curvature value the predicate requires to be negative, for the
    /// inner product making the basis orthonormal.
    pub fn value(&self, b: &Bracket) -> f64 {
        let k = koszul_oracle(b);
        match self {
            Predicate::RicciNegative => linalg::lambda_max(&k.ricci),
            Predicate::ScalarNegative => k.scalar,
        }
    }

    pub fn holds(&self, b: &Bracket) -> bool {
        self.value(b) < -PREDICATE_TOL
    }
}

#[derive(Clone, Debug)]
pub enum Transfer {
    /// The predicate holds at `h_k . source`, hence for the pulled back inner
    /// product `<h_k x, h_k y>` on the source.
    Found { k: usize, t: f64, value: f64, basis_change: Mat },
    /// Not reached within the schedule; not a refutation.
    NotFound { best_value: f64, limit_value: f64 },
}

/// Smallest `k` on the schedule with the predicate at `h_{t_k} . source`.
pub fn pinching_transfer(curve: &DegenerationCurve, predicate: Predicate) -> Result<Transfer> {
    let schedule = curve.schedule();
    let t_max = *schedule.last().expect("nonempty schedule");
    let limit = limit_bracket(curve, t_max, CAUCHY_TOL)?;
    let limit_value = predicate.value(&limit.bracket);
    if limit_value >= -PREDICATE_TOL {
        return Err(Error::Precondition(format!(
            "predicate fails at the limit ({limit_value:e})"
        )));
    }
    let values: Vec<Result<f64>> = schedule
        .par_iter()
        .map(|&t| Ok(predicate.value(&curve.at(t)?)))
        .collect();
    let mut best = f64::INFINITY;
    for (k, (v, &t)) in values.into_iter().zip(&schedule).enumerate() {
        let v = v?;
        best = best.min(v);
        if v < -PREDICATE_TOL {
            return Ok(Transfer::Found {
                k,
                t,
                value: v,
                basis_change: curve.basis_change(t)?,
            });
        }
    }
    Ok(Transfer::NotFound {
        best_value: best,
        limit_value,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub norm: f64,
    pub lambda_max: f64,
    pub scalar: f64,
}

/// Bracket norm and curvature along the schedule.
pub fn trajectory(curve: &DegenerationCurve) -> Result<Vec<TrajectoryPoint>> {
    curve
        .schedule()
        .par_iter()
        .map(|&t| {
            let b = curve.at(t)?;
            let k = koszul_oracle(&b);
            Ok(TrajectoryPoint {
                t,
                norm: b.norm_sq().sqrt(),
                lambda_max: linalg::lambda_max(&k.ricci),
                scalar: k.scalar,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::moment::closure_faces;

    #[test]
    fn heisenberg_to_abelian() {
        let c = DegenerationCurve::diagonal(corpus::heisenberg(1), vec![int(1), int(0), int(0)]).unwrap();
        let l = limit_bracket(&c, 1e6, CAUCHY_TOL).unwrap();
        assert!(l.bracket.support().is_empty());
        assert!((c.at(8.0).unwrap().get(0, 1, 2) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn divergent_curve() {
        let c = DegenerationCurve::diagonal(corpus::heisenberg(1), vec![int(0), int(0), int(1)]).unwrap();
        assert!(matches!(limit_bracket(&c, 1e6, CAUCHY_TOL), Err(Error::NoConvergence { .. })));
    }

    #[test]
    fn milnor_limits() {
        let l = limit_bracket(&milnor_heis_curve(), 1e6, CAUCHY_TOL).unwrap();
        assert_eq!(l.bracket, corpus::heisenberg(1));
        assert_eq!(l.jacobi_residual, 0.0);
        let l = limit_bracket(&milnor_hyp_curve(), 1e6, CAUCHY_TOL).unwrap();
        assert_eq!(l.bracket, corpus::milnor_hyp(3));
    }

    #[test]
    fn face_curves_match_closure_faces() {
        let b = corpus::tricky5();
        for (face, lambda) in closure_faces(&b).unwrap() {
            let c = face_curve(&b, &face).unwrap();
            let l = limit_bracket(&c, 1e6, CAUCHY_TOL).unwrap();
            assert_eq!(l.bracket, lambda);
        }
    }

    #[test]
    fn heintze_examples() {
        let h3 = corpus::heisenberg(1);
        let d = Derivation::diagonal(&[1.0, 1.0, 2.0], &h3).unwrap();
        let b1 = heintze_curve(&d, &h3, 1.0);
        assert_eq!(b1, extension_bracket(d.matrix(), &h3));
        let k = koszul_oracle(&heintze_curve(&d, &h3, 10.0));
        assert!(k.sectional.iter().all(|(_, v)| *v < 0.0));
        match pinching_transfer(&heintze_degeneration(&d, &h3).unwrap(), Predicate::RicciNegative).unwrap() {
            Transfer::Found { k, value, .. } => {
                assert_eq!(k, 0);
                assert!((value + 4.5).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
        let ab = corpus::abelian(3);
        let id = Derivation::diagonal(&[1.0; 3], &ab).unwrap();
        let k = koszul_oracle(&heintze_curve(&id, &ab, 2.0));
        let first = k.sectional[0].1;
        assert!(first < 0.0);
        assert!(k.sectional.iter().all(|(_, v)| (v - first).abs() < 1e-12));
    }

    #[test]
    fn milnor_transfers() {
        match pinching_transfer(&milnor_heis_curve(), Predicate::ScalarNegative).unwrap() {
            Transfer::Found { value, .. } => assert!(value < 0.0),
            other => panic!("{other:?}"),
        }
        match pinching_transfer(&milnor_hyp_curve(), Predicate::RicciNegative).unwrap() {
            Transfer::Found { value, .. } => assert!(value < 0.0),
            other => panic!("{other:?}"),
        }
        assert!(pinching_transfer(&milnor_heis_curve(), Predicate::RicciNegative).is_err());
    }

    #[test]
    fn heintze_commutes_with_centralizer() {
        let h3 = corpus::heisenberg(1);
        let d = Derivation::diagonal(&[1.0, 1.0, 2.0], &h3).unwrap();
        let g = Mat::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 0.5, 1.0, 0.0, 0.0, 0.0, 3.0]);
        let mut big = Mat::identity(4, 4);
        big.view_mut((1, 1), (3, 3)).copy_from(&g);
        let lhs = act(&BasisChange::new(big).unwrap(), &heintze_curve(&d, &h3, 3.0)).unwrap();
        let gb = act(&BasisChange::new(g.clone()).unwrap(), &h3).unwrap();
        let gd = &g * d.matrix() * g.clone().try_inverse().unwrap();
        let rhs = heintze_curve(&Derivation::new(gd, &gb).unwrap(), &gb, 3.0);
        assert!(lhs.distance(&rhs) < 1e-12);
    }

    #[test]
    fn sampled_curve_limit() {
        let b = corpus::heisenberg(1);
        let times: Vec<f64> = (0..=40).map(|k| 2f64.powi(k)).collect();
        let mats = times.iter().map(|t| linalg::diag_mat(&[*t, 1.0, 1.0])).collect();
        let c = DegenerationCurve::samples(b, times, mats).unwrap();
        let l = limit_bracket(&c, 2f64.powi(40), 1e-10).unwrap();
        assert!(!l.closed_form);
        assert!(l.bracket.max_abs_constant() < 1e-11);
        assert!(limit_bracket(&c, 1024.0, 1e-10).is_err());
    }

    #[test]
    fn continuity_along_curve() {
        let c = milnor_hyp_curve();
        let fine: Vec<f64> = (0..200).map(|i| 1.0 + i as f64 * 0.01).collect();
        let vals: Vec<f64> = fine
            .iter()
            .map(|&t| Predicate::RicciNegative.value(&c.at(t).unwrap()))
            .collect();
        let jump = vals.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
        assert!(jump < 0.05);
    }
}
