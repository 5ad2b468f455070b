//! Linear programs over any [`Field`].
//!
//! Exact fields use a dense two-phase simplex with Bland's rule for both
//! entering and leaving variables, so it terminates without cycling and
//! returns exact optima. Floating point programs go to `microlp`, whose
//! bounded revised simplex is far more robust to nearly dependent rows than
//! a dense tableau.

use crate::field::Field;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
struct Constraint<F> {
    coeffs: Vec<F>,
    rel: Relation,
    rhs: F,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpStatus<F> {
    Optimal { x: Vec<F>, value: F },
    Infeasible,
    Unbounded,
    /// The floating point solver gave up; no conclusion.
    Failed(String),
}

impl<F> LpStatus<F> {
    pub fn is_optimal(&self) -> bool {
        matches!(self, LpStatus::Optimal { .. })
    }
}

/// `maximize c·x` subject to linear constraints. Variables are nonnegative
/// unless marked free.
#[derive(Clone, Debug)]
pub struct LinearProgram<F> {
    num_vars: usize,
    objective: Vec<F>,
    free: Vec<bool>,
    rows: Vec<Constraint<F>>,
}

impl<F: Field> LinearProgram<F> {
    pub fn new(num_vars: usize) -> Self {
        LinearProgram {
            num_vars,
            objective: vec![F::zero(); num_vars],
            free: vec![false; num_vars],
            rows: Vec::new(),
        }
    }

    pub fn maximize(&mut self, objective: Vec<F>) -> &mut Self {
        assert_eq!(objective.len(), self.num_vars);
        self.objective = objective;
        self
    }

    pub fn set_free(&mut self, var: usize) -> &mut Self {
        self.free[var] = true;
        self
    }

    pub fn constrain(&mut self, coeffs: Vec<F>, rel: Relation, rhs: F) -> &mut Self {
        assert_eq!(coeffs.len(), self.num_vars);
        self.rows.push(Constraint { coeffs, rel, rhs });
        self
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn solve(&self) -> LpStatus<F> {
        if F::EXACT {
            Simplex::build(self, 0.0).run(self)
        } else {
            self.solve_float()
        }
    }

    fn solve_float(&self) -> LpStatus<F> {
        use microlp::{ComparisonOp, OptimizationDirection, Problem};
        let mut p = Problem::new(OptimizationDirection::Maximize);
        let vars: Vec<_> = (0..self.num_vars)
            .map(|v| {
                let lower = if self.free[v] { f64::NEG_INFINITY } else { 0.0 };
                p.add_var(self.objective[v].to_f64(), (lower, f64::INFINITY))
            })
            .collect();
        for r in &self.rows {
            let expr: Vec<_> = vars
                .iter()
                .zip(&r.coeffs)
                .filter(|(_, c)| !c.is_zero_within(0.0))
                .map(|(v, c)| (*v, c.to_f64()))
                .collect();
            let op = match r.rel {
                Relation::Le => ComparisonOp::Le,
                Relation::Ge => ComparisonOp::Ge,
                Relation::Eq => ComparisonOp::Eq,
            };
            p.add_constraint(expr, op, r.rhs.to_f64());
        }
        match p.solve() {
            Ok(outcome) => match outcome.solution() {
                Some(sol) => {
                    let x: Vec<F> = vars.iter().map(|v| F::from_f64(sol.var_value(*v))).collect();
                    let value = x
                        .iter()
                        .zip(&self.objective)
                        .fold(F::zero(), |acc, (a, c)| acc + a.clone() * c.clone());
                    LpStatus::Optimal { x, value }
                }
                None => LpStatus::Failed("interrupted".into()),
            },
            Err(microlp::Error::Unbounded) => LpStatus::Unbounded,
            Err(microlp::Error::Infeasible) => LpStatus::Infeasible,
            Err(e) => LpStatus::Failed(e.to_string()),
        }
    }
}

struct Simplex<F> {
    tab: Vec<Vec<F>>, // m rows × (cols + 1), last column = rhs
    basis: Vec<usize>,
    cols: usize,
    artificial_start: usize,
    tol: f64,
    // structural column index for x_v (and its negative part when free)
    pos_col: Vec<usize>,
    neg_col: Vec<Option<usize>>,
}

impl<F: Field> Simplex<F> {
    fn build(lp: &LinearProgram<F>, tol: f64) -> Self {
        let mut pos_col = Vec::with_capacity(lp.num_vars);
        let mut neg_col = Vec::with_capacity(lp.num_vars);
        let mut cols = 0;
        for v in 0..lp.num_vars {
            pos_col.push(cols);
            cols += 1;
            if lp.free[v] {
                neg_col.push(Some(cols));
                cols += 1;
            } else {
                neg_col.push(None);
            }
        }
        let structural = cols;
        // normalize rows to nonnegative rhs
        let rows: Vec<(Vec<F>, Relation, F)> = lp
            .rows
            .iter()
            .map(|r| {
                if r.rhs < F::zero() {
                    let rel = match r.rel {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    (r.coeffs.iter().map(|c| -c.clone()).collect(), rel, -r.rhs.clone())
                } else {
                    (r.coeffs.clone(), r.rel, r.rhs.clone())
                }
            })
            .collect();
        let num_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
        let num_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
        let artificial_start = structural + num_slack;
        let total = artificial_start + num_art;
        let m = rows.len();
        let mut tab = vec![vec![F::zero(); total + 1]; m];
        let mut basis = vec![0; m];
        let (mut s, mut a) = (structural, artificial_start);
        for (r, (coeffs, rel, rhs)) in rows.into_iter().enumerate() {
            for (v, c) in coeffs.into_iter().enumerate() {
                if c.is_zero_within(0.0) {
                    continue;
                }
                if let Some(nc) = neg_col[v] {
                    tab[r][nc] = -c.clone();
                }
                tab[r][pos_col[v]] = c;
            }
            tab[r][total] = rhs;
            match rel {
                Relation::Le => {
                    tab[r][s] = F::one();
                    basis[r] = s;
                    s += 1;
                }
                Relation::Ge => {
                    tab[r][s] = -F::one();
                    s += 1;
                    tab[r][a] = F::one();
                    basis[r] = a;
                    a += 1;
                }
                Relation::Eq => {
                    tab[r][a] = F::one();
                    basis[r] = a;
                    a += 1;
                }
            }
        }
        Simplex {
            tab,
            basis,
            cols: total,
            artificial_start,
            tol,
            pos_col,
            neg_col,
        }
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let inv = F::one() / self.tab[row][col].clone();
        for v in self.tab[row].iter_mut() {
            *v = v.clone() * inv.clone();
        }
        let pivot_row = self.tab[row].clone();
        for (r, line) in self.tab.iter_mut().enumerate() {
            if r == row || line[col].is_zero_within(0.0) {
                continue;
            }
            let f = line[col].clone();
            for (j, pv) in pivot_row.iter().enumerate() {
                if !pv.is_zero_within(0.0) {
                    line[j] = line[j].clone() - f.clone() * pv.clone();
                }
            }
            line[col] = F::zero();
        }
        self.basis[row] = col;
    }

    /// Optimizes `cost` (length `cols`) over columns `< limit`.
    /// Returns `false` when unbounded.
    fn optimize(&mut self, cost: &[F], limit: usize) -> bool {
        let scale_tol = self.tol;
        loop {
            // reduced costs r_j = c_j - sum_i c_{B_i} T_ij
            let mut entering = None;
            for j in 0..limit {
                if self.basis.contains(&j) {
                    continue;
                }
                let mut r = cost[j].clone();
                for (i, &b) in self.basis.iter().enumerate() {
                    if !cost[b].is_zero_within(0.0) && !self.tab[i][j].is_zero_within(0.0) {
                        r = r - cost[b].clone() * self.tab[i][j].clone();
                    }
                }
                if r.sign_within(scale_tol) > 0 {
                    entering = Some(j);
                    break;
                }
            }
            let Some(col) = entering else { return true };
            let mut leave: Option<(usize, F)> = None;
            for i in 0..self.tab.len() {
                let a = &self.tab[i][col];
                if a.sign_within(scale_tol) <= 0 {
                    continue;
                }
                let ratio = self.tab[i][self.cols].clone() / a.clone();
                let better = match &leave {
                    None => true,
                    Some((li, lr)) => {
                        let d = ratio.clone() - lr.clone();
                        let s = d.sign_within(scale_tol);
                        s < 0 || (s == 0 && self.basis[i] < self.basis[*li])
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
            match leave {
                None => return false,
                Some((row, _)) => self.pivot(row, col),
            }
        }
    }

    fn run(mut self, lp: &LinearProgram<F>) -> LpStatus<F> {
        let total = self.cols;
        if self.artificial_start < total {
            let mut cost = vec![F::zero(); total];
            for c in cost.iter_mut().skip(self.artificial_start) {
                *c = -F::one();
            }
            self.optimize(&cost, total);
            let infeasibility = self
                .basis
                .iter()
                .enumerate()
                .filter(|(_, &b)| b >= self.artificial_start)
                .fold(F::zero(), |acc, (i, _)| acc + self.tab[i][total].clone());
            let scale = self
                .tab
                .iter()
                .map(|r| r[total].abs_f64())
                .fold(1.0, f64::max);
            if !infeasibility.is_zero_within(self.tol * scale * 10.0) {
                return LpStatus::Infeasible;
            }
            // drive remaining artificials out of the basis
            let mut r = 0;
            while r < self.tab.len() {
                if self.basis[r] >= self.artificial_start {
                    let col = (0..self.artificial_start)
                        .find(|&j| !self.tab[r][j].is_zero_within(self.tol));
                    match col {
                        Some(j) => self.pivot(r, j),
                        None => {
                            self.tab.remove(r);
                            self.basis.remove(r);
                            continue;
                        }
                    }
                }
                r += 1;
            }
        }
        let mut cost = vec![F::zero(); total];
        for v in 0..lp.num_vars {
            cost[self.pos_col[v]] = lp.objective[v].clone();
            if let Some(nc) = self.neg_col[v] {
                cost[nc] = -lp.objective[v].clone();
            }
        }
        if !self.optimize(&cost, self.artificial_start) {
            return LpStatus::Unbounded;
        }
        let mut col_val = vec![F::zero(); total];
        for (i, &b) in self.basis.iter().enumerate() {
            col_val[b] = self.tab[i][total].clone();
        }
        let x: Vec<F> = (0..lp.num_vars)
            .map(|v| {
                let p = col_val[self.pos_col[v]].clone();
                match self.neg_col[v] {
                    Some(nc) => p - col_val[nc].clone(),
                    None => p,
                }
            })
            .collect();
        let value = x
            .iter()
            .zip(&lp.objective)
            .fold(F::zero(), |acc, (a, c)| acc + a.clone() * c.clone());
        LpStatus::Optimal { x, value }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{int, rat, Rational};

    #[test]
    fn textbook_maximum() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let mut lp = LinearProgram::<Rational>::new(2);
        lp.maximize(vec![int(3), int(5)])
            .constrain(vec![int(1), int(0)], Relation::Le, int(4))
            .constrain(vec![int(0), int(2)], Relation::Le, int(12))
            .constrain(vec![int(3), int(2)], Relation::Le, int(18));
        match lp.solve() {
            LpStatus::Optimal { x, value } => {
                assert_eq!(x, vec![int(2), int(6)]);
                assert_eq!(value, int(36));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn equality_and_free_variables() {
        // max -x + y with x free, x + y = 1, y <= 3/2 -> x = -1/2, value 2
        let mut lp = LinearProgram::<Rational>::new(2);
        lp.maximize(vec![int(-1), int(1)])
            .set_free(0)
            .constrain(vec![int(1), int(1)], Relation::Eq, int(1))
            .constrain(vec![int(0), int(1)], Relation::Le, rat(3, 2));
        match lp.solve() {
            LpStatus::Optimal { x, value } => {
                assert_eq!(x, vec![rat(-1, 2), rat(3, 2)]);
                assert_eq!(value, int(2));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::<f64>::new(1);
        lp.constrain(vec![1.0], Relation::Ge, 2.0)
            .constrain(vec![1.0], Relation::Le, 1.0);
        assert_eq!(lp.solve(), LpStatus::Infeasible);

        let mut lp = LinearProgram::<f64>::new(2);
        lp.maximize(vec![1.0, 0.0])
            .constrain(vec![1.0, -1.0], Relation::Le, 1.0);
        assert_eq!(lp.solve(), LpStatus::Unbounded);
    }

    #[test]
    fn degenerate_redundant_equalities() {
        let mut lp = LinearProgram::<Rational>::new(2);
        lp.maximize(vec![int(1), int(1)])
            .constrain(vec![int(1), int(1)], Relation::Eq, int(2))
            .constrain(vec![int(2), int(2)], Relation::Eq, int(4))
            .constrain(vec![int(1), int(0)], Relation::Ge, int(0));
        match lp.solve() {
            LpStatus::Optimal { value, .. } => assert_eq!(value, int(2)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn float_matches_exact_on_random_feasible_programs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let n = 3;
            let rows: Vec<Vec<i64>> = (0..4)
                .map(|_| (0..n).map(|_| rng.random_range(-3..=5)).collect())
                .collect();
            let obj: Vec<i64> = (0..n).map(|_| rng.random_range(-2..=4)).collect();
            let mut q = LinearProgram::<Rational>::new(n);
            let mut f = LinearProgram::<f64>::new(n);
            q.maximize(obj.iter().map(|&c| int(c)).collect());
            f.maximize(obj.iter().map(|&c| c as f64).collect());
            for r in &rows {
                q.constrain(r.iter().map(|&c| int(c)).collect(), Relation::Le, int(10));
                f.constrain(r.iter().map(|&c| c as f64).collect(), Relation::Le, 10.0);
            }
            // box keeps everything bounded
            for v in 0..n {
                let mut e = vec![0i64; n];
                e[v] = 1;
                q.constrain(e.iter().map(|&c| int(c)).collect(), Relation::Le, int(20));
                f.constrain(e.iter().map(|&c| c as f64).collect(), Relation::Le, 20.0);
            }
            match (q.solve(), f.solve()) {
                (LpStatus::Optimal { value: a, .. }, LpStatus::Optimal { value: b, .. }) => {
                    assert!((Field::to_f64(&a) - b).abs() < 1e-8);
                }
                (a, b) => assert_eq!(a.is_optimal(), b.is_optimal()),
            }
        }
    }
}
