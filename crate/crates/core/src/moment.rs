//! The moment map `m(mu)`, weight polytopes `CH_mu`, nice bases and the
//! faces of the weight polytope.

use serde::Serialize;

use crate::bracket::{Bracket, Triple};
use crate::error::{Error, Result};
use crate::field::{int, Rational};
use crate::linalg::Mat;
use crate::lp::{LinearProgram, LpStatus, Relation};
use crate::polytope::{Face, Polytope};

/// Symmetric matrix with trace `-1`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentValue {
    matrix: Mat,
}

impl MomentValue {
    pub fn matrix(&self) -> &Mat {
        &self.matrix
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().copied().collect()
    }

    pub fn off_diagonal_norm(&self) -> f64 {
        let mut m = self.matrix.clone();
        m.fill_diagonal(0.0);
        m.norm()
    }

    /// `<m, E>` for a symmetric `E`.
    pub fn pair(&self, e: &Mat) -> f64 {
        self.matrix.dot(e)
    }

    /// Conjugate by an orthogonal matrix: `k m k^T`.
    pub fn conjugated(&self, k: &Mat) -> MomentValue {
        MomentValue {
            matrix: k * &self.matrix * k.transpose(),
        }
    }
}

/// `m(mu) = (sum_i ad_i ad_i^T - 2 sum_i ad_i^T ad_i) / |mu|^2`.
pub fn moment_map(b: &Bracket) -> Result<MomentValue> {
    let norm = b.norm_sq();
    if norm == 0.0 {
        return Err(Error::ZeroBracket);
    }
    let n = b.dim();
    let mut m = Mat::zeros(n, n);
    for i in 0..n {
        let ad = b.ad_basis(i);
        m += &ad * ad.transpose() - (ad.transpose() * &ad) * 2.0;
    }
    m /= norm;
    // exact symmetry
    let m = (&m + m.transpose()) * 0.5;
    Ok(MomentValue { matrix: m })
}

/// Normalized squared constants `c_ij^k^2 / sum c^2`; the diagonal of
/// `m(mu)` is `sum coord * F_ij^k`.
pub fn hull_coordinates(b: &Bracket) -> Vec<(Triple, f64)> {
    let total: f64 = b.constants().map(|(_, s)| s.to_f64().powi(2)).sum();
    b.constants()
        .map(|(t, s)| (*t, s.to_f64().powi(2) / total))
        .collect()
}

/// Exact diagonal of `m(mu)` for rational brackets.
pub fn moment_diagonal_exact(b: &Bracket) -> Option<Vec<Rational>> {
    let n = b.dim();
    let mut total = int(0);
    let mut diag = vec![int(0); n];
    for (t, s) in b.constants() {
        let crate::bracket::Scalar::Rational(q) = s else {
            return None;
        };
        let sq = q * q;
        total += &sq;
        for (d, w) in diag.iter_mut().zip(t.weight(n)) {
            *d += &sq * int(w);
        }
    }
    if total == int(0) {
        return None;
    }
    Some(diag.into_iter().map(|d| d / &total).collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct WeightPoint {
    pub weight: Vec<i64>,
    /// Triples with this weight and a nonzero constant.
    pub triples: Vec<Triple>,
}

/// `CH_mu`, with exact face lattice.
#[derive(Clone, Debug)]
pub struct WeightPolytope {
    pub points: Vec<WeightPoint>,
    pub polytope: Polytope,
}

impl WeightPolytope {
    /// Weight points that are extreme.
    pub fn vertices(&self) -> Vec<&WeightPoint> {
        self.polytope
            .vertex_indices()
            .iter()
            .map(|&i| &self.points[i])
            .collect()
    }

    pub fn faces(&self) -> &[Face] {
        self.polytope.faces()
    }

    /// Triples whose weight lies in `face`.
    pub fn face_triples(&self, face: &Face) -> Vec<Triple> {
        let funct = self.polytope.supporting_functional(face);
        let value = |w: &[i64]| -> Rational {
            funct
                .iter()
                .zip(w)
                .fold(int(0), |acc, (f, x)| acc + f * int(*x))
        };
        let best = value(&self.points[face.vertices[0]].weight);
        let mut out: Vec<Triple> = self
            .points
            .iter()
            .filter(|p| value(&p.weight) == best)
            .flat_map(|p| p.triples.iter().copied())
            .collect();
        out.sort();
        out
    }
}

pub fn weight_polytope(b: &Bracket) -> Result<WeightPolytope> {
    if b.is_zero() {
        return Err(Error::ZeroBracket);
    }
    let n = b.dim();
    let mut points: Vec<WeightPoint> = Vec::new();
    for t in b.support() {
        let w = t.weight(n);
        match points.iter_mut().find(|p| p.weight == w) {
            Some(p) => p.triples.push(t),
            None => points.push(WeightPoint {
                weight: w,
                triples: vec![t],
            }),
        }
    }
    let polytope = Polytope::hull(
        points
            .iter()
            .map(|p| p.weight.iter().map(|&x| int(x)).collect())
            .collect(),
    )?;
    Ok(WeightPolytope { points, polytope })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NiceViolation {
    /// `[e_i, e_j]` has more than one nonzero component.
    MultipleTargets { pair: (usize, usize), targets: Vec<usize> },
    /// Two distinct pairs hitting `e_k` share an index.
    OverlappingPairs {
        target: usize,
        first: (usize, usize),
        second: (usize, usize),
    },
}

#[derive(Clone, Debug, Serialize)]
pub struct NiceReport {
    pub nice: bool,
    pub violations: Vec<NiceViolation>,
}

/// Violations use 0-based indices.
pub fn nice_basis_check(b: &Bracket) -> NiceReport {
    let mut violations = Vec::new();
    let support = b.support();
    let mut by_pair: std::collections::BTreeMap<(usize, usize), Vec<usize>> = Default::default();
    for t in &support {
        by_pair.entry((t.i, t.j)).or_default().push(t.k);
    }
    for (pair, targets) in &by_pair {
        if targets.len() > 1 {
            violations.push(NiceViolation::MultipleTargets {
                pair: *pair,
                targets: targets.clone(),
            });
        }
    }
    for a in 0..support.len() {
        for c in a + 1..support.len() {
            let (s, t) = (support[a], support[c]);
            if s.k != t.k || (s.i, s.j) == (t.i, t.j) {
                continue;
            }
            if s.i == t.i || s.i == t.j || s.j == t.i || s.j == t.j {
                violations.push(NiceViolation::OverlappingPairs {
                    target: s.k,
                    first: (s.i, s.j),
                    second: (t.i, t.j),
                });
            }
        }
    }
    NiceReport {
        nice: violations.is_empty(),
        violations,
    }
}

/// `lambda_J` for every face `J` of `CH_mu`: the constants with weights on
/// the face. Emitted for any basis; the face count only equals the number
/// of degenerations in the nice case.
pub fn closure_faces(b: &Bracket) -> Result<Vec<(Face, Bracket)>> {
    let poly = weight_polytope(b)?;
    Ok(poly
        .faces()
        .iter()
        .map(|f| (f.clone(), b.restricted_to(&poly.face_triples(f))))
        .collect())
}

/// Signed distance-like margin of `p` to the hull of `points`: the negated
/// minimal sup-norm residual of a convex combination (0 when inside).
pub fn hull_margin(points: &[Vec<f64>], p: &[f64]) -> f64 {
    let m = points.len();
    let n = p.len();
    // variables: lambda_0..lambda_{m-1}, t
    let mut lp = LinearProgram::<f64>::new(m + 1);
    let mut obj = vec![0.0; m + 1];
    obj[m] = -1.0;
    lp.maximize(obj);
    let mut sum = vec![1.0; m + 1];
    sum[m] = 0.0;
    lp.constrain(sum, Relation::Eq, 1.0);
    for r in 0..n {
        let mut row: Vec<f64> = points.iter().map(|q| q[r]).collect();
        row.push(-1.0);
        lp.constrain(row, Relation::Le, p[r]);
        let mut row: Vec<f64> = points.iter().map(|q| q[r]).collect();
        row.push(1.0);
        lp.constrain(row, Relation::Ge, p[r]);
    }
    match lp.solve() {
        LpStatus::Optimal { value, .. } => value,
        _ => f64::NEG_INFINITY,
    }
}

/// Diagonal curve exponents steering toward `face`: along
/// `diag(t^{e_i})` the constants on the face are fixed and the others
/// decay like a negative power of `t`.
pub fn face_steering_exponents(poly: &WeightPolytope, face: &Face) -> Vec<Rational> {
    let w = poly.polytope.supporting_functional(face);
    let top = poly.points[face.vertices[0]]
        .weight
        .iter()
        .zip(&w)
        .fold(int(0), |acc, (x, f)| acc + f * int(*x));
    w.into_iter().map(|x| x + &top).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct DiagImageReport {
    pub points: usize,
    /// Smallest hull margin over the sampled diagonals (>= -1e-9 is inside).
    pub worst_margin: f64,
    pub worst_index: Option<usize>,
    pub contained: bool,
    /// Sup-distance from each vertex of `CH_mu` to its steered sample.
    pub vertex_distances: Vec<(Triple, f64)>,
    pub covered: bool,
    /// Equality with `CH_mu` is only claimed for nice bases.
    pub nice: bool,
}

/// Containment of sampled `Diag(m)` in `CH_mu`, and coverage of each vertex
/// by a steered diagonal curve.
pub fn diag_image_check(b: &Bracket, diagonals: &[Vec<f64>]) -> Result<DiagImageReport> {
    let poly = weight_polytope(b)?;
    let pts: Vec<Vec<f64>> = poly
        .points
        .iter()
        .map(|p| p.weight.iter().map(|&x| x as f64).collect())
        .collect();
    let mut worst_margin = f64::INFINITY;
    let mut worst_index = None;
    for (i, d) in diagonals.iter().enumerate() {
        let m = hull_margin(&pts, d);
        if m < worst_margin {
            worst_margin = m;
            worst_index = Some(i);
        }
    }
    if diagonals.is_empty() {
        worst_margin = 0.0;
    }
    let mut vertex_distances = Vec::new();
    for face in poly.faces().iter().filter(|f| f.dim == 0) {
        let e = face_steering_exponents(&poly, face);
        let target = &pts[face.vertices[0]];
        let mut t = 2.0f64;
        let mut dist = f64::INFINITY;
        while t <= 1e12 {
            let h: Vec<f64> = e.iter().map(|x| t.powf(crate::field::Field::to_f64(x))).collect();
            let moved = crate::bracket::act_diagonal(&h, b);
            let diag = moment_map(&moved)?.diagonal();
            dist = diag
                .iter()
                .zip(target)
                .fold(0.0f64, |m, (a, c)| m.max((a - c).abs()));
            if dist < 1e-3 {
                break;
            }
            t *= 4.0;
        }
        vertex_distances.push((poly.points[face.vertices[0]].triples[0], dist));
    }
    let covered = vertex_distances.iter().all(|(_, d)| *d < 1e-3);
    Ok(DiagImageReport {
        points: diagonals.len(),
        worst_margin,
        worst_index,
        contained: worst_margin >= -1e-9,
        vertex_distances,
        covered,
        nice: nice_basis_check(b).nice,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::curvature::ricci_nilpotent;
    use crate::linalg;

    fn t(i: usize, j: usize, k: usize) -> Triple {
        Triple::new(i - 1, j - 1, k - 1)
    }

    #[test]
    fn elementary_brackets_map_to_weights() {
        let b = Bracket::from_int_terms(4, &[(0, 2, 3, 1)]).unwrap();
        let m = moment_map(&b).unwrap();
        assert!((m.matrix() - linalg::diag_mat(&[-1.0, 0.0, -1.0, 1.0])).norm() < 1e-15);
    }

    #[test]
    fn tricky5_moment() {
        let m = moment_map(&corpus::tricky5()).unwrap();
        assert!((m.matrix() - linalg::diag_mat(&[-1.0, -0.5, 0.0, 0.0, 0.5])).norm() < 1e-15);
        assert_eq!(
            moment_diagonal_exact(&corpus::tricky5()).unwrap(),
            vec![int(-1), crate::field::rat(-1, 2), int(0), int(0), crate::field::rat(1, 2)]
        );
    }

    #[test]
    fn moment_is_four_ricci_over_norm() {
        for (_, b) in corpus::nilpotent_sweep() {
            if b.is_zero() {
                assert!(matches!(moment_map(&b), Err(Error::ZeroBracket)));
                continue;
            }
            let m = moment_map(&b).unwrap();
            let r = ricci_nilpotent(&b) * (4.0 / b.norm_sq());
            assert!((m.matrix() - r).norm() < 1e-13);
            assert!((m.matrix().trace() + 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn weight_polytopes() {
        let h3 = weight_polytope(&corpus::heisenberg(1)).unwrap();
        assert_eq!(h3.polytope.dim(), 0);
        let h5 = weight_polytope(&corpus::heisenberg(2)).unwrap();
        assert_eq!(h5.polytope.f_vector(), vec![2, 1]);
        let tr = weight_polytope(&corpus::tricky5()).unwrap();
        assert_eq!(tr.polytope.f_vector(), vec![4, 4, 1]);
        assert!(tr.polytope.is_combinatorial_cube());
        assert_eq!(tr.vertices().len(), 4);
    }

    #[test]
    fn tricky5_edges_and_diagonal() {
        let tr = weight_polytope(&corpus::tricky5()).unwrap();
        let edges: Vec<Vec<Triple>> = tr
            .faces()
            .iter()
            .filter(|f| f.dim == 1)
            .map(|f| tr.face_triples(f))
            .collect();
        assert!(edges.contains(&vec![t(1, 2, 3), t(1, 2, 4)]));
        assert!(edges.contains(&vec![t(1, 2, 3), t(1, 4, 5)]));
        // {123, 135} is a diagonal of the rectangle
        assert!(!edges.contains(&vec![t(1, 2, 3), t(1, 3, 5)]));
    }

    #[test]
    fn nice_bases() {
        assert!(nice_basis_check(&corpus::heisenberg(3)).nice);
        assert!(nice_basis_check(&corpus::abelian(3)).nice);
        let r = nice_basis_check(&corpus::tricky5());
        assert!(!r.nice);
        assert!(r.violations.contains(&NiceViolation::MultipleTargets {
            pair: (0, 1),
            targets: vec![2, 3]
        }));
        assert!(r.violations.contains(&NiceViolation::OverlappingPairs {
            target: 4,
            first: (0, 2),
            second: (0, 3)
        }));
    }

    #[test]
    fn closure_face_counts() {
        assert_eq!(closure_faces(&corpus::tricky5()).unwrap().len(), 9);
        let h3 = closure_faces(&corpus::heisenberg(1)).unwrap();
        assert_eq!(h3.len(), 1);
        assert_eq!(h3[0].1.distance(&corpus::heisenberg(1)), 0.0);
        let h5 = closure_faces(&corpus::heisenberg(2)).unwrap();
        assert_eq!(h5.len(), 3);
        assert_eq!(h5.iter().filter(|(_, l)| l.num_constants() == 1).count(), 2);
    }

    #[test]
    fn steering_reaches_vertices() {
        for b in [corpus::heisenberg(2), corpus::tricky5(), corpus::filiform(5)] {
            let r = diag_image_check(&b, &[moment_map(&b).unwrap().diagonal()]).unwrap();
            assert!(r.contained && r.covered, "{r:?}");
        }
    }

    #[test]
    fn hull_margin_signs() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!(hull_margin(&pts, &[0.2, 0.2]).abs() < 1e-12);
        assert!((hull_margin(&pts, &[1.0, 1.0]) + 0.5).abs() < 1e-9);
    }
}
