//! Orthogonal Weyl group, restricted to signed permutation automorphisms.

use crate::bracket::Bracket;
use crate::derivations::Torus;
use crate::error::{Error, Result};
use crate::field::Rational;
use crate::linalg::Mat;

/// Search bound on the dimension.
pub const MAX_WEYL_DIM: usize = 8;

/// `e_i -> signs[i] e_{perm[i]}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SignedPermutation {
    pub perm: Vec<usize>,
    pub signs: Vec<i8>,
}

impl SignedPermutation {
    pub fn identity(n: usize) -> Self {
        SignedPermutation {
            perm: (0..n).collect(),
            signs: vec![1; n],
        }
    }

    pub fn matrix(&self) -> Mat {
        let n = self.perm.len();
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(self.perm[i], i)] = f64::from(self.signs[i]);
        }
        m
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Self {
        let n = self.perm.len();
        let mut perm = vec![0; n];
        let mut signs = vec![1; n];
        for i in 0..n {
            let j = other.perm[i];
            perm[i] = self.perm[j];
            signs[i] = other.signs[i] * self.signs[j];
        }
        SignedPermutation { perm, signs }
    }

    pub fn inverse(&self) -> Self {
        let n = self.perm.len();
        let mut perm = vec![0; n];
        let mut signs = vec![1; n];
        for i in 0..n {
            perm[self.perm[i]] = i;
            signs[self.perm[i]] = self.signs[i];
        }
        SignedPermutation { perm, signs }
    }
}

/// Linear map on torus coordinates, rows of exact entries.
pub type TorusAction = Vec<Vec<Rational>>;

#[derive(Clone, Debug)]
pub struct WeylGroup {
    /// Number of signed permutation automorphisms normalizing the torus.
    pub automorphism_count: u64,
    /// One automorphism per distinct induced action on the torus.
    pub representatives: Vec<SignedPermutation>,
    /// Induced actions, aligned with `representatives`.
    pub actions: Vec<TorusAction>,
}

impl WeylGroup {
    pub fn order(&self) -> usize {
        self.actions.len()
    }

    pub fn actions_f64(&self) -> Vec<Mat> {
        self.actions
            .iter()
            .map(|a| {
                let r = a.len();
                Mat::from_fn(r, r, |i, j| crate::field::Field::to_f64(&a[i][j]))
            })
            .collect()
    }
}

/// Checks `c_{pi i, pi j}^{pi k} s_i s_j = s_k c_ij^k` on all triples whose
/// largest index is `last`.
fn consistent(c: &[f64], n: usize, last: usize, perm: &[usize], signs: &[i8]) -> bool {
    let at = |i: usize, j: usize, k: usize| c[(i * n + j) * n + k];
    for i in 0..=last {
        for j in 0..=last {
            if i == j {
                continue;
            }
            for k in 0..=last {
                if i != last && j != last && k != last {
                    continue;
                }
                let lhs = at(perm[i], perm[j], perm[k]) * f64::from(signs[i] * signs[j]);
                let rhs = f64::from(signs[k]) * at(i, j, k);
                if (lhs - rhs).abs() > 1e-12 * (1.0 + rhs.abs()) {
                    return false;
                }
            }
        }
    }
    true
}

/// Signed permutation automorphisms of `b` normalizing the torus, grouped
/// by their action on torus coordinates.
pub fn orthogonal_weyl_group(b: &Bracket, torus: &Torus) -> Result<WeylGroup> {
    let n = b.dim();
    if n > MAX_WEYL_DIM {
        return Err(Error::TooLarge {
            dim: n,
            bound: MAX_WEYL_DIM,
        });
    }
    let c = b.dense_f64();
    let mut group = WeylGroup {
        automorphism_count: 0,
        representatives: Vec::new(),
        actions: Vec::new(),
    };
    let mut perm = vec![0usize; n];
    let mut signs = vec![1i8; n];
    let mut used = vec![false; n];
    search(0, n, &c, torus, &mut perm, &mut signs, &mut used, &mut group);
    Ok(group)
}

#[allow(clippy::too_many_arguments)]
fn search(
    i: usize,
    n: usize,
    c: &[f64],
    torus: &Torus,
    perm: &mut [usize],
    signs: &mut [i8],
    used: &mut [bool],
    group: &mut WeylGroup,
) {
    if i == n {
        if let Some(action) = torus.induced_action(perm) {
            group.automorphism_count += 1;
            if !group.actions.contains(&action) {
                group.actions.push(action);
                group.representatives.push(SignedPermutation {
                    perm: perm.to_vec(),
                    signs: signs.to_vec(),
                });
            }
        }
        return;
    }
    for target in 0..n {
        if used[target] {
            continue;
        }
        for s in [1i8, -1] {
            perm[i] = target;
            signs[i] = s;
            if consistent(c, n, i, perm, signs) {
                used[target] = true;
                search(i + 1, n, c, torus, perm, signs, used, group);
                used[target] = false;
            }
        }
    }
}
