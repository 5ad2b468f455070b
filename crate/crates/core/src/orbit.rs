//! Sampling moment values along group orbits, steering samples to diagonal
//! moment values, and inverting the diagonal moment map on torus orbits.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::bracket::{act, act_diagonal, BasisChange, Bracket};
use crate::derivations::{diagonal_torus, eigen_blocks, torus_blocks};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::moment::{moment_map, MomentValue};
use crate::rng;

/// Log-scale range of sampled diagonal entries.
pub const LOG_RANGE: f64 = 6.0;
/// Off-diagonal moment residual accepted as diagonal.
pub const DIAGONAL_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub enum GroupTag {
    /// Positive diagonal matrices.
    DiagPositive,
    /// Block matrices over the weight spaces of the diagonal torus.
    TorusCentralizer,
    /// Block matrices over the eigenspaces of a diagonal derivation.
    DerivationCentralizer(Vec<f64>),
}

impl GroupTag {
    pub fn name(&self) -> &'static str {
        match self {
            GroupTag::DiagPositive => "diag-positive",
            GroupTag::TorusCentralizer => "torus-centralizer",
            GroupTag::DerivationCentralizer(_) => "derivation-centralizer",
        }
    }

    /// Index blocks of the group; singletons for `DiagPositive`.
    pub fn blocks(&self, b: &Bracket) -> Result<Vec<Vec<usize>>> {
        match self {
            GroupTag::DiagPositive => Ok((0..b.dim()).map(|i| vec![i]).collect()),
            GroupTag::TorusCentralizer => Ok(torus_blocks(&diagonal_torus(b))),
            GroupTag::DerivationCentralizer(d) => {
                if d.len() != b.dim() {
                    return Err(Error::Dimension {
                        expected: b.dim(),
                        got: d.len(),
                    });
                }
                if !diagonal_torus(b).contains(d, 1e-9) {
                    return Err(Error::Precondition(
                        "derivation is not a diagonal derivation of the bracket".into(),
                    ));
                }
                Ok(eigen_blocks(d, 1e-9))
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct OrbitPoint {
    pub g: Mat,
    pub moment: MomentValue,
    /// Off-diagonal part of the moment value is below [`DIAGONAL_TOL`].
    pub diagonalized: bool,
}

#[derive(Clone, Debug)]
pub struct OrbitSample {
    pub tag: GroupTag,
    pub seed: u64,
    pub points: Vec<OrbitPoint>,
}

impl OrbitSample {
    pub fn diagonals(&self) -> Vec<Vec<f64>> {
        self.points.iter().map(|p| p.moment.diagonal()).collect()
    }

    /// Diagonals of the points whose moment value is diagonal.
    pub fn diagonal_moment_values(&self) -> Vec<Vec<f64>> {
        self.points
            .iter()
            .filter(|p| p.diagonalized)
            .map(|p| p.moment.diagonal())
            .collect()
    }
}

fn random_element<R: Rng>(blocks: &[Vec<usize>], n: usize, rng: &mut R) -> Mat {
    loop {
        let mut g = Mat::zeros(n, n);
        let mut ok = true;
        for block in blocks {
            let k = block.len();
            let mut m = Mat::zeros(k, k);
            for a in 0..k {
                for c in 0..k {
                    m[(a, c)] = if a == c {
                        rng.random_range(-LOG_RANGE..LOG_RANGE).exp()
                    } else {
                        StandardNormal.sample(rng)
                    };
                }
            }
            let scale: f64 = (0..k).map(|a| m[(a, a)].abs()).product();
            let det = m.determinant();
            if det <= 1e-8 * scale {
                ok = false;
                break;
            }
            for (a, &i) in block.iter().enumerate() {
                for (c, &j) in block.iter().enumerate() {
                    g[(i, j)] = m[(a, c)];
                }
            }
        }
        if ok {
            return g;
        }
    }
}

/// Block-orthogonal `k` (det > 0 per block) with `k m k^T` diagonal, valid
/// when `m` is block diagonal over `blocks`.
fn block_rotation(m: &Mat, blocks: &[Vec<usize>]) -> Mat {
    let n = m.nrows();
    let mut k = Mat::zeros(n, n);
    for block in blocks {
        let s = block.len();
        let sub = Mat::from_fn(s, s, |a, c| m[(block[a], block[c])]);
        let eig = sub.symmetric_eigen();
        let mut q = eig.eigenvectors.transpose();
        if q.determinant() < 0.0 {
            for c in 0..s {
                q[(0, c)] = -q[(0, c)];
            }
        }
        for (a, &i) in block.iter().enumerate() {
            for (c, &j) in block.iter().enumerate() {
                k[(i, j)] = q[(a, c)];
            }
        }
    }
    k
}

fn off_diagonal(m: &Mat) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Unnormalized moment `sum ad ad^T - 2 sum ad^T ad` of the bracket with
/// the given constants on `support`.
fn moment_numerator(n: usize, support: &[crate::bracket::Triple], c: &[f64]) -> Mat {
    let b = Bracket::from_float_terms(
        n,
        support.iter().zip(c).map(|(t, v)| (t.i, t.j, t.k, *v)),
    )
    .expect("support indices in range");
    let mut m = Mat::zeros(n, n);
    for i in 0..n {
        let ad = b.ad_basis(i);
        m += &ad * ad.transpose() - (ad.transpose() * &ad) * 2.0;
    }
    m
}

/// Gauss-Newton over log-scalings `u`, zeroing the off-diagonal
/// part of `m(e^u . b)`. The numerator is quadratic in the constants, so
/// the Jacobian is exact by polarization. Returns the best `u` found.
pub fn diagonalize_by_scaling(b: &Bracket, u0: &[f64]) -> Result<Vec<f64>> {
    let n = b.dim();
    let support: Vec<crate::bracket::Triple> = b.constants().map(|(t, _)| *t).collect();
    let base: Vec<f64> = b.constants().map(|(_, s)| s.to_f64()).collect();
    if base.iter().all(|x| *x == 0.0) {
        return Err(Error::ZeroBracket);
    }
    let weights: Vec<Vec<i64>> = support.iter().map(|t| t.weight(n)).collect();
    let consts = |u: &[f64]| -> Vec<f64> {
        base.iter()
            .zip(&weights)
            .map(|(c, w)| c * w.iter().zip(u).map(|(x, y)| *x as f64 * y).sum::<f64>().exp())
            .collect()
    };
    let resid_jac = |u: &[f64], with_jac: bool| -> (Vec<f64>, Mat) {
        let c = consts(u);
        // normalize to avoid overflow; m is scale invariant
        let scale = c.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let c: Vec<f64> = c.iter().map(|x| x / scale).collect();
        let norm: f64 = 2.0 * c.iter().map(|x| x * x).sum::<f64>();
        let q = moment_numerator(n, &support, &c);
        let r = off_diagonal(&(&q / norm));
        let mut jac = Mat::zeros(r.len(), n);
        if with_jac {
            for s in 0..n {
                let v: Vec<f64> = c.iter().zip(&weights).map(|(x, w)| x * w[s] as f64).collect();
                let cv: Vec<f64> = c.iter().zip(&v).map(|(x, y)| x + y).collect();
                let dq = moment_numerator(n, &support, &cv) - &q - moment_numerator(n, &support, &v);
                let dn: f64 = 4.0 * c.iter().zip(&v).map(|(x, y)| x * y).sum::<f64>();
                let dr = off_diagonal(&(dq / norm - &q * (dn / (norm * norm))));
                for (a, x) in dr.into_iter().enumerate() {
                    jac[(a, s)] = x;
                }
            }
        }
        (r, jac)
    };
    let sq = |r: &[f64]| r.iter().map(|x| x * x).sum::<f64>();
    let mut u = u0.to_vec();
    let (mut r, mut jac) = resid_jac(&u, true);
    let mut cost = sq(&r);
    for _ in 0..100 {
        if cost.sqrt() < DIAGONAL_TOL * 1e-3 || r.is_empty() {
            break;
        }
        // minimum-norm Gauss-Newton step, capped in length
        let svd = jac.clone().svd(true, true);
        let smax = svd.singular_values.iter().fold(0.0f64, |m, x| m.max(*x));
        let Ok(mut delta) = svd.solve(&(-Vector::from_vec(r.clone())), 1e-10 * smax) else {
            break;
        };
        if delta.norm() > 1.0 {
            delta /= delta.norm();
        }
        let mut step = 1.0;
        let mut improved = false;
        while step > 1e-6 {
            let trial: Vec<f64> = u.iter().zip(delta.iter()).map(|(x, d)| x + step * d).collect();
            let (rt, _) = resid_jac(&trial, false);
            let ct = sq(&rt);
            if ct < cost {
                u = trial;
                cost = ct;
                (r, jac) = resid_jac(&u, true);
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok(u)
}

/// Removes from `u` the components along the torus and the identity; both
/// leave `m(e^u . b)` unchanged.
fn project_out_stabilizer(b: &Bracket, u: &[f64]) -> Vec<f64> {
    let n = b.dim();
    let mut dirs: Vec<Vector> = diagonal_torus(b)
        .basis_f64()
        .into_iter()
        .map(Vector::from_vec)
        .collect();
    dirs.push(Vector::from_element(n, 1.0));
    let mut v = Vector::from_column_slice(u);
    for q in linalg::orthonormalize(&dirs, 1e-12) {
        let c = q.dot(&v);
        v -= q * c;
    }
    v.iter().copied().collect()
}

fn steer(tag: &GroupTag, blocks: &[Vec<usize>], b: &Bracket, g: Mat) -> Result<OrbitPoint> {
    let (g, moment) = match tag {
        GroupTag::DiagPositive => {
            let u0: Vec<f64> = (0..b.dim()).map(|i| g[(i, i)].ln()).collect();
            let u = project_out_stabilizer(b, &diagonalize_by_scaling(b, &u0)?);
            let h: Vec<f64> = u.iter().map(|x| x.exp()).collect();
            let moment = moment_map(&act_diagonal(&h, b))?;
            (linalg::diag_mat(&h), moment)
        }
        _ => {
            let moved = act(&BasisChange::new(g.clone())?, b)?;
            let m = moment_map(&moved)?;
            let k = block_rotation(m.matrix(), blocks);
            (k.clone() * g, m.conjugated(&k))
        }
    };
    let diagonalized = moment.off_diagonal_norm() <= DIAGONAL_TOL;
    Ok(OrbitPoint {
        g,
        moment,
        diagonalized,
    })
}

/// `count` elements of the group with their moment values, each steered to
/// a diagonal moment value inside its orbit when possible. Point `i` uses
/// stream `i` of `seed`.
pub fn orbit_sample(tag: GroupTag, b: &Bracket, count: usize, seed: u64) -> Result<OrbitSample> {
    if b.is_zero() {
        return Err(Error::ZeroBracket);
    }
    let blocks = tag.blocks(b)?;
    let n = b.dim();
    let points = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, i as u64);
            let g = random_element(&blocks, n, &mut r);
            steer(&tag, &blocks, b, g)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OrbitSample { tag, seed, points })
}

/// Log-scalings `u` with `Diag(m(e^u . b)) = target`, by damped Newton on
/// the convex `log sum c^2 e^{2<u,F>} - 2<u,target>`. `target` must lie in
/// the relative interior of `CH_mu`.
pub fn invert_diagonal_moment(b: &Bracket, target: &[f64]) -> Result<Vec<f64>> {
    let n = b.dim();
    let terms: Vec<(f64, Vector)> = b
        .constants()
        .map(|(t, s)| {
            let f = Vector::from_iterator(n, t.weight(n).into_iter().map(|x| x as f64));
            (s.to_f64().powi(2).ln(), f)
        })
        .collect();
    if terms.is_empty() {
        return Err(Error::ZeroBracket);
    }
    let p = Vector::from_column_slice(target);
    let eval = |u: &Vector| -> (f64, Vector, Mat) {
        let logs: Vec<f64> = terms.iter().map(|(lc, f)| lc + 2.0 * f.dot(u)).collect();
        let top = logs.iter().fold(f64::NEG_INFINITY, |m, x| m.max(*x));
        let ws: Vec<f64> = logs.iter().map(|x| (x - top).exp()).collect();
        let total: f64 = ws.iter().sum();
        let value = top + total.ln() - 2.0 * p.dot(u);
        let mut mean = Vector::zeros(n);
        let mut second = Mat::zeros(n, n);
        for ((_, f), w) in terms.iter().zip(&ws) {
            mean += f * (w / total);
            second += f * f.transpose() * (w / total);
        }
        let grad = (&mean - &p) * 2.0;
        let hess = (second - &mean * mean.transpose()) * 4.0;
        (value, grad, hess)
    };
    let mut u = Vector::zeros(n);
    let (mut value, mut grad, mut hess) = eval(&u);
    for _ in 0..500 {
        if grad.norm() < 1e-13 {
            break;
        }
        let mut a = hess.clone();
        for d in 0..n {
            a[(d, d)] += 1e-12;
        }
        let dir = match a.clone().cholesky() {
            Some(ch) => -ch.solve(&grad),
            None => -grad.clone(),
        };
        let mut step = 1.0;
        let mut moved = false;
        while step > 1e-12 {
            let trial = &u + &dir * step;
            let (v2, g2, h2) = eval(&trial);
            if v2 <= value - 1e-4 * step * grad.dot(&dir).abs() || (v2 <= value && g2.norm() < grad.norm()) {
                u = trial;
                value = v2;
                grad = g2;
                hess = h2;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    if grad.norm() > 1e-8 {
        return Err(Error::Numerical(format!(
            "moment inversion stalled with gradient {:.3e}",
            grad.norm()
        )));
    }
    Ok(u.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::moment::hull_coordinates;

    #[test]
    fn diag_orbit_of_h3_is_a_point() {
        let s = orbit_sample(GroupTag::DiagPositive, &corpus::heisenberg(1), 20, 3).unwrap();
        for p in &s.points {
            assert!(p.diagonalized);
            assert!((p.moment.matrix() - linalg::diag_mat(&[-1.0, -1.0, 1.0])).norm() < 1e-12);
        }
    }

    fn tricky_coords(b: &Bracket) -> [f64; 4] {
        let c = hull_coordinates(b);
        let get = |i, j, k| {
            c.iter()
                .find(|(t, _)| (t.i, t.j, t.k) == (i, j, k))
                .map_or(0.0, |(_, v)| *v)
        };
        [get(0, 1, 2), get(0, 1, 3), get(0, 2, 4), get(0, 3, 4)]
    }

    #[test]
    fn tricky5_diag_orbit_relations() {
        let b = corpus::tricky5();
        let s = orbit_sample(GroupTag::DiagPositive, &b, 40, 11).unwrap();
        for p in &s.points {
            assert!(p.diagonalized);
            let moved = act(&BasisChange::new(p.g.clone()).unwrap(), &b).unwrap();
            let [a, bb, c, d] = tricky_coords(&moved);
            assert!((a + bb + c + d - 1.0).abs() < 1e-9);
            assert!((a * bb - c * d).abs() < 1e-9);
            assert!((a * c - bb * d).abs() < 1e-9);
        }
    }

    #[test]
    fn tricky5_torus_centralizer_relations() {
        let b = corpus::tricky5();
        let s = orbit_sample(GroupTag::TorusCentralizer, &b, 40, 5).unwrap();
        for p in &s.points {
            assert!(p.diagonalized);
            let moved = act(&BasisChange::new(p.g.clone()).unwrap(), &b).unwrap();
            let recomputed = moment_map(&moved).unwrap();
            assert!((recomputed.matrix() - p.moment.matrix()).norm() < 1e-10);
            let [a, bb, c, d] = tricky_coords(&moved);
            assert!((a + bb + c + d - 1.0).abs() < 1e-9);
            assert!((a * bb - c * d).abs() < 1e-9);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let b = corpus::tricky5();
        let a = orbit_sample(GroupTag::TorusCentralizer, &b, 8, 42).unwrap();
        let c = orbit_sample(GroupTag::TorusCentralizer, &b, 8, 42).unwrap();
        for (p, q) in a.points.iter().zip(&c.points) {
            assert_eq!(p.g, q.g);
        }
    }

    #[test]
    fn derivation_centralizer_requires_a_torus_element() {
        let b = corpus::heisenberg(1);
        let bad = GroupTag::DerivationCentralizer(vec![1.0, 1.0, 1.0]);
        assert!(orbit_sample(bad, &b, 2, 0).is_err());
        let good = GroupTag::DerivationCentralizer(vec![1.0, 1.0, 2.0]);
        let s = orbit_sample(good, &b, 4, 0).unwrap();
        assert!(s.points.iter().all(|p| p.diagonalized));
    }

    #[test]
    fn inversion_hits_interior_targets() {
        let b = corpus::heisenberg(2);
        let target = [-0.3, -0.3, -0.7, -0.7, 1.0];
        let u = invert_diagonal_moment(&b, &target).unwrap();
        let h: Vec<f64> = u.iter().map(|x| x.exp()).collect();
        let m = moment_map(&act_diagonal(&h, &b)).unwrap();
        for (x, y) in m.diagonal().iter().zip(&target) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}
