//! Exact convex hulls of small rational point sets with their face lattices.
//!
//! Facets are found by brute force over affinely independent subsets, which is
//! cheap for the point counts that occur here (a few weight matrices or cone
//! vertices in dimension at most eight). Every nonempty proper face is an
//! intersection of facets, so the lattice is the intersection closure of the
//! facet vertex sets.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{int, Rational};
use crate::linalg;

/// Hull ambient-dimension bound.
pub const MAX_DIM: usize = 8;

#[derive(Clone, Debug)]
pub struct Facet {
    /// Indices into [`Polytope::points`] lying on the facet.
    pub points: BTreeSet<usize>,
    /// Outer normal inside the direction space of the affine hull.
    pub normal: Vec<Rational>,
    pub offset: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Face {
    /// Vertex indices (into [`Polytope::points`]) of the face.
    pub vertices: Vec<usize>,
    pub dim: usize,
}

#[derive(Clone, Debug)]
pub struct Polytope {
    points: Vec<Vec<Rational>>,
    vertices: Vec<usize>,
    dim: usize,
    facets: Vec<Facet>,
    faces: Vec<Face>,
    direction_basis: Vec<Vec<Rational>>,
}

fn sub(a: &[Rational], b: &[Rational]) -> Vec<Rational> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter()
        .zip(b)
        .fold(Rational::zero(), |acc, (x, y)| acc + x * y)
}

fn affine_dim(points: &[&Vec<Rational>]) -> usize {
    if points.len() <= 1 {
        return 0;
    }
    let diffs: Vec<Vec<Rational>> = points[1..].iter().map(|p| sub(p, points[0])).collect();
    linalg::rank(&diffs, points[0].len(), 0.0)
}

/// All `k`-subsets of `0..n` in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(idx.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

impl Polytope {
    /// Hull of the given points; duplicates are merged (first occurrence kept).
    pub fn hull(points: Vec<Vec<Rational>>) -> Result<Polytope> {
        let Some(first) = points.first() else {
            return Err(Error::Precondition("hull of an empty point set".into()));
        };
        let ambient = first.len();
        if points.iter().any(|p| p.len() != ambient) {
            return Err(Error::Precondition("points of mixed dimension".into()));
        }
        let mut uniq: Vec<Vec<Rational>> = Vec::new();
        for p in points {
            if !uniq.contains(&p) {
                uniq.push(p);
            }
        }
        let points = uniq;
        let p0 = points[0].clone();
        let diffs: Vec<Vec<Rational>> = points.iter().map(|p| sub(p, &p0)).collect();
        let direction_basis = linalg::span_basis(&diffs, ambient, 0.0);
        let dim = direction_basis.len();
        if dim > MAX_DIM {
            return Err(Error::TooLarge {
                dim,
                bound: MAX_DIM,
            });
        }
        let mut poly = Polytope {
            points,
            vertices: Vec::new(),
            dim,
            facets: Vec::new(),
            faces: Vec::new(),
            direction_basis,
        };
        if dim == 0 {
            poly.vertices = vec![0];
            poly.faces = vec![Face {
                vertices: vec![0],
                dim: 0,
            }];
            return Ok(poly);
        }
        poly.find_facets();
        poly.build_faces();
        Ok(poly)
    }

    fn find_facets(&mut self) {
        let m = self.points.len();
        let d = self.dim;
        let mut seen: BTreeSet<BTreeSet<usize>> = BTreeSet::new();
        for subset in combinations(m, d) {
            let s0 = &self.points[subset[0]];
            // normal w = sum_l beta_l b_l orthogonal to s - s0 for s in subset
            let rows: Vec<Vec<Rational>> = subset[1..]
                .iter()
                .map(|&s| {
                    let diff = sub(&self.points[s], s0);
                    self.direction_basis.iter().map(|b| dot(b, &diff)).collect()
                })
                .collect();
            let ns = if rows.is_empty() {
                vec![vec![int(1)]]
            } else {
                linalg::null_space(&rows, d, 0.0)
            };
            if ns.len() != 1 {
                continue;
            }
            let beta = &ns[0];
            let ambient = s0.len();
            let mut w = vec![Rational::zero(); ambient];
            for (bl, b) in beta.iter().zip(&self.direction_basis) {
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi += bl * bi;
                }
            }
            let level = dot(&w, s0);
            let (mut above, mut below) = (false, false);
            let mut on = BTreeSet::new();
            for (i, p) in self.points.iter().enumerate() {
                let v = dot(&w, p) - &level;
                if v.is_zero() {
                    on.insert(i);
                } else if v > Rational::zero() {
                    above = true;
                } else {
                    below = true;
                }
            }
            if above && below {
                continue;
            }
            if above {
                w.iter_mut().for_each(|x| *x = -x.clone());
            }
            if seen.insert(on.clone()) {
                let offset = dot(&w, s0);
                self.facets.push(Facet {
                    points: on,
                    normal: w,
                    offset,
                });
            }
        }
    }

    fn build_faces(&mut self) {
        let mut sets: BTreeSet<BTreeSet<usize>> =
            self.facets.iter().map(|f| f.points.clone()).collect();
        loop {
            let current: Vec<BTreeSet<usize>> = sets.iter().cloned().collect();
            let mut grew = false;
            for a in 0..current.len() {
                for b in a + 1..current.len() {
                    let inter: BTreeSet<usize> =
                        current[a].intersection(&current[b]).copied().collect();
                    if !inter.is_empty() && sets.insert(inter) {
                        grew = true;
                    }
                }
            }
            if !grew {
                break;
            }
        }
        let all: BTreeSet<usize> = (0..self.points.len()).collect();
        sets.insert(all);
        // vertices are the singleton faces
        let mut vertices: Vec<usize> = sets
            .iter()
            .filter(|s| self.point_set_dim(s) == 0)
            .map(|s| *s.iter().next().expect("nonempty"))
            .collect();
        vertices.sort_unstable();
        vertices.dedup();
        self.vertices = vertices;
        let mut faces: Vec<Face> = sets
            .iter()
            .map(|s| Face {
                vertices: s
                    .iter()
                    .copied()
                    .filter(|i| self.vertices.contains(i))
                    .collect(),
                dim: self.point_set_dim(s),
            })
            .collect();
        faces.sort_by(|a, b| a.dim.cmp(&b.dim).then_with(|| a.vertices.cmp(&b.vertices)));
        faces.dedup();
        self.faces = faces;
    }

    fn point_set_dim(&self, s: &BTreeSet<usize>) -> usize {
        let pts: Vec<&Vec<Rational>> = s.iter().map(|&i| &self.points[i]).collect();
        affine_dim(&pts)
    }

    pub fn points(&self) -> &[Vec<Rational>] {
        &self.points
    }

    pub fn vertex_indices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn vertices(&self) -> Vec<Vec<Rational>> {
        self.vertices.iter().map(|&i| self.points[i].clone()).collect()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    /// All nonempty faces including the polytope itself, sorted by dimension.
    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    /// Number of faces of each dimension `0..=dim`.
    pub fn f_vector(&self) -> Vec<usize> {
        let mut f = vec![0; self.dim + 1];
        for face in &self.faces {
            f[face.dim] += 1;
        }
        f
    }

    /// Linear functional (in ambient coordinates) maximized on the points of
    /// `face` and strictly smaller on every other point. Zero for the whole
    /// polytope.
    pub fn supporting_functional(&self, face: &Face) -> Vec<Rational> {
        let ambient = self.points[0].len();
        let mut w = vec![Rational::zero(); ambient];
        let fv: BTreeSet<usize> = face.vertices.iter().copied().collect();
        for f in &self.facets {
            let fverts: BTreeSet<usize> =
                f.points.iter().copied().filter(|i| self.vertices.contains(i)).collect();
            if fv.is_subset(&fverts) {
                for (wi, ni) in w.iter_mut().zip(&f.normal) {
                    *wi += ni;
                }
            }
        }
        w
    }

    /// Whether the face lattice is that of a `k`-cube: f-vector
    /// `C(k,i) 2^(k-i)`, every vertex on exactly `k` edges, every 2-face a
    /// quadrilateral.
    pub fn is_combinatorial_cube(&self) -> bool {
        let k = self.dim;
        let f = self.f_vector();
        let binom = |n: usize, r: usize| -> usize {
            (0..r).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
        };
        for (i, fi) in f.iter().enumerate() {
            if *fi != binom(k, i) << (k - i) {
                return false;
            }
        }
        let mut degree: BTreeMap<usize, usize> = BTreeMap::new();
        for face in self.faces.iter().filter(|f| f.dim == 1) {
            for v in &face.vertices {
                *degree.entry(*v).or_default() += 1;
            }
        }
        let simple = k == 0 || self.vertices.iter().all(|v| degree.get(v) == Some(&k));
        let quads = self
            .faces
            .iter()
            .filter(|f| f.dim == 2)
            .all(|f| f.vertices.len() == 4);
        simple && quads
    }

    /// Exact membership of a rational point in the hull.
    pub fn contains(&self, x: &[Rational]) -> bool {
        let p0 = &self.points[0];
        let diff = sub(x, p0);
        // must lie in the affine hull
        let mut rows = self.direction_basis.clone();
        rows.push(diff);
        if linalg::rank(&rows, x.len(), 0.0) > self.dim {
            return false;
        }
        if self.dim == 0 {
            return x == p0.as_slice();
        }
        self.facets.iter().all(|f| dot(&f.normal, x) <= f.offset)
    }
}

/// Float convenience for reporting.
pub fn to_f64_points(points: &[Vec<Rational>]) -> Vec<Vec<f64>> {
    points.iter().map(|p| linalg::to_f64_vec(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{int, rat};

    fn pts(v: &[&[i64]]) -> Vec<Vec<Rational>> {
        v.iter().map(|p| p.iter().map(|&x| int(x)).collect()).collect()
    }

    #[test]
    fn square_with_interior_point() {
        let p = Polytope::hull(pts(&[&[0, 0], &[2, 0], &[0, 2], &[2, 2], &[1, 1]])).unwrap();
        assert_eq!(p.dim(), 2);
        assert_eq!(p.vertex_indices(), &[0, 1, 2, 3]);
        assert_eq!(p.f_vector(), vec![4, 4, 1]);
        assert!(p.is_combinatorial_cube());
        assert!(p.contains(&[rat(1, 2), rat(3, 2)]));
        assert!(!p.contains(&[int(3), int(0)]));
    }

    #[test]
    fn triangle_is_not_a_cube() {
        let p = Polytope::hull(pts(&[&[0, 0], &[1, 0], &[0, 1]])).unwrap();
        assert_eq!(p.f_vector(), vec![3, 3, 1]);
        assert!(!p.is_combinatorial_cube());
    }

    #[test]
    fn segment_embedded_in_higher_dimension() {
        let p = Polytope::hull(pts(&[&[1, 0, 0], &[0, 1, 0], &[0, 0, 0]])).unwrap();
        assert_eq!(p.dim(), 2);
        let s = Polytope::hull(pts(&[&[1, 1, 0], &[3, 3, 0], &[2, 2, 0]])).unwrap();
        assert_eq!(s.dim(), 1);
        assert_eq!(s.vertex_indices(), &[0, 1]);
        assert!(s.is_combinatorial_cube());
        assert!(!s.contains(&[int(2), int(1), int(0)]));
    }

    #[test]
    fn cube_face_lattice() {
        let mut v = Vec::new();
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    v.push(vec![int(a), int(b), int(c)]);
                }
            }
        }
        let p = Polytope::hull(v).unwrap();
        assert_eq!(p.f_vector(), vec![8, 12, 6, 1]);
        assert!(p.is_combinatorial_cube());
    }

    #[test]
    fn supporting_functional_isolates_face() {
        let p = Polytope::hull(pts(&[&[0, 0], &[2, 0], &[0, 2], &[2, 2]])).unwrap();
        for face in p.faces() {
            let w = p.supporting_functional(face);
            let vals: Vec<Rational> = p.points().iter().map(|x| dot(&w, x)).collect();
            let best = vals.iter().max().unwrap().clone();
            for (i, v) in vals.iter().enumerate() {
                assert_eq!(*v == best, face.vertices.contains(&i), "{face:?}");
            }
        }
    }

    #[test]
    fn combination_count() {
        assert_eq!(combinations(5, 2).len(), 10);
        assert_eq!(combinations(3, 0), vec![Vec::<usize>::new()]);
        assert!(combinations(2, 3).is_empty());
    }
}
