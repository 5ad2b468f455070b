//! Derivative-free search for a metric making the rank-one extension by `D`
//! Ricci negative.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::bracket::Bracket;
use crate::certify::{CertMethod, SrnCertificate};
use crate::curvature::{is_ricci_negative, transported_lambda_max, MetricParams};
use crate::derivations::Derivation;
use crate::error::Result;
use crate::linalg::{self, Mat, Vector};
use crate::orbit::invert_diagonal_moment;
use crate::rng;

pub const DEFAULT_BUDGET: usize = 10_000;
pub const WITNESS_THRESHOLD: f64 = -1e-6;

const ROUND: usize = 8;
const MIN_STEP: f64 = 1e-4;
const MAX_COORD: f64 = 40.0;

#[derive(Clone, Debug)]
pub struct SearchConfig {
    pub budget: usize,
    pub seed: u64,
    pub warm_starts: Vec<MetricParams>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            budget: DEFAULT_BUDGET,
            seed: rng::DEFAULT_SEED,
            warm_starts: Vec::new(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RnWitness {
    pub params: MetricParams,
    /// Largest Ricci eigenvalue from the Koszul formula.
    pub lambda_max: f64,
    pub evaluations: usize,
    /// `None` for the deterministic start, else the restart index.
    pub restart: Option<usize>,
}

#[derive(Clone, Debug)]
pub enum SearchOutcome {
    Witness(RnWitness),
    Failure { best_lambda_max: f64, evaluations: usize },
}

impl SearchOutcome {
    pub fn witness(&self) -> Option<&RnWitness> {
        match self {
            SearchOutcome::Witness(w) => Some(w),
            SearchOutcome::Failure { .. } => None,
        }
    }
}

/// Coordinates `(X, a, s)` with `h = exp(sum a_i E_i + s Id) h0`.
struct Problem<'a> {
    d: &'a Derivation,
    b: &'a Bracket,
    generators: Vec<Mat>,
    n: usize,
}

struct RunResult {
    best: f64,
    evaluations: usize,
    witness: Option<RnWitness>,
}

impl<'a> Problem<'a> {
    fn new(d: &'a Derivation, b: &'a Bracket) -> Self {
        let n = b.dim();
        let m = d.matrix();
        let mut generators = Vec::new();
        let diagonal = linalg::is_diagonal(m, 1e-12);
        for i in 0..n {
            for j in 0..n {
                if !diagonal || (m[(i, i)] - m[(j, j)]).abs() <= 1e-9 {
                    let mut e = Mat::zeros(n, n);
                    e[(i, j)] = 1.0;
                    generators.push(e);
                }
            }
        }
        generators.push(Mat::identity(n, n));
        Problem {
            d,
            b,
            generators,
            n,
        }
    }

    fn dim(&self) -> usize {
        self.n + self.generators.len()
    }

    fn params(&self, theta: &[f64], base: &MetricParams) -> MetricParams {
        let mut a = Mat::zeros(self.n, self.n);
        for (g, t) in self.generators.iter().zip(&theta[self.n..]) {
            a += g * *t;
        }
        MetricParams {
            c: 1.0,
            x: &base.x + Vector::from_column_slice(&theta[..self.n]),
            h: a.exp() * &base.h,
        }
    }

    fn value(&self, theta: &[f64], base: &MetricParams) -> f64 {
        if theta.iter().any(|t| !t.is_finite() || t.abs() > MAX_COORD) {
            return f64::INFINITY;
        }
        match transported_lambda_max(&self.params(theta, base), self.d.matrix(), self.b) {
            Ok(v) if v.is_finite() => v,
            _ => f64::INFINITY,
        }
    }

    fn verify(&self, theta: &[f64], base: &MetricParams) -> Option<(MetricParams, f64)> {
        let p = self.params(theta, base);
        let report = is_ricci_negative(self.d, self.b, &p).ok()?;
        (report.lambda_max < WITNESS_THRESHOLD).then_some((p, report.lambda_max))
    }

    /// Polls every coordinate in both directions, moves to the best
    /// improvement, halves the step on failure.
    fn pattern(&self, theta0: Vec<f64>, base: &MetricParams, cap: usize, restart: Option<usize>) -> RunResult {
        let mut theta = theta0;
        let mut best = self.value(&theta, base);
        let mut evaluations = 1;
        let mut step = 0.5;
        let found = |theta: &[f64], best: f64, evaluations: usize| -> Option<RnWitness> {
            if best < WITNESS_THRESHOLD {
                let (params, lambda_max) = self.verify(theta, base)?;
                return Some(RnWitness {
                    params,
                    lambda_max,
                    evaluations,
                    restart,
                });
            }
            None
        };
        if let Some(w) = found(&theta, best, evaluations) {
            return RunResult {
                best,
                evaluations,
                witness: Some(w),
            };
        }
        while evaluations < cap && step >= MIN_STEP {
            let mut move_to: Option<(Vec<f64>, f64)> = None;
            'poll: for i in 0..self.dim() {
                for sign in [1.0, -1.0] {
                    if evaluations >= cap {
                        break 'poll;
                    }
                    let mut trial = theta.clone();
                    trial[i] += sign * step;
                    let v = self.value(&trial, base);
                    evaluations += 1;
                    if v < move_to.as_ref().map_or(best, |m| m.1) - 1e-13 {
                        move_to = Some((trial, v));
                    }
                }
            }
            match move_to {
                Some((t, v)) => {
                    theta = t;
                    best = v;
                    if let Some(w) = found(&theta, best, evaluations) {
                        return RunResult {
                            best,
                            evaluations,
                            witness: Some(w),
                        };
                    }
                    step = (step * 2.0).min(2.0);
                }
                None => step *= 0.5,
            }
        }
        RunResult {
            best,
            evaluations,
            witness: None,
        }
    }
}

/// Restarted pattern search minimizing the largest Ricci eigenvalue of the
/// extension by `D` over metric parameters. The first run starts from the
/// identity and each warm start; later restarts are random and run in
/// rounds in parallel, the lowest successful restart index winning.
pub fn search_rn_metric(d: &Derivation, b: &Bracket, config: &SearchConfig) -> Result<SearchOutcome> {
    let problem = Problem::new(d, b);
    let n = b.dim();
    let mut bases: Vec<MetricParams> = config
        .warm_starts
        .iter()
        .filter(|p| p.validate().is_ok())
        .cloned()
        .collect();
    bases.push(MetricParams::identity(n));
    let mut used = 0;
    let mut best = f64::INFINITY;
    let first_cap = (config.budget / 4).max(1);

    for base in &bases {
        if used >= config.budget {
            break;
        }
        let cap = first_cap.min(config.budget - used);
        let run = problem.pattern(vec![0.0; problem.dim()], base, cap, None);
        used += run.evaluations;
        best = best.min(run.best);
        if let Some(mut w) = run.witness {
            w.evaluations = used;
            return Ok(SearchOutcome::Witness(w));
        }
    }

    let per_restart = (config.budget / 20).max(50);
    let identity = MetricParams::identity(n);
    let mut next = 0usize;
    while used < config.budget {
        let remaining = config.budget - used;
        let count = ROUND.min(remaining.div_ceil(per_restart));
        let cap = (remaining / count).min(per_restart).max(1);
        let runs: Vec<RunResult> = (next..next + count)
            .into_par_iter()
            .map(|r| {
                let mut rng = rng::stream(config.seed, r as u64);
                let normal = Normal::new(0.0, 0.7).expect("valid deviation");
                let mut theta: Vec<f64> = (0..problem.dim()).map(|_| normal.sample(&mut rng)).collect();
                // bias the scale coordinate towards small brackets
                let last = theta.len() - 1;
                theta[last] += rng.random_range(0.0..2.0);
                problem.pattern(theta, &identity, cap, Some(r))
            })
            .collect();
        next += count;
        let mut consumed = 0;
        for run in runs {
            consumed += run.evaluations;
            best = best.min(run.best);
            if let Some(mut w) = run.witness {
                w.evaluations = used + consumed;
                return Ok(SearchOutcome::Witness(w));
            }
        }
        used += consumed;
    }
    Ok(SearchOutcome::Failure {
        best_lambda_max: best,
        evaluations: used,
    })
}

/// Metric realizing a nice or constructive certificate: with
/// `s = sum b`, `P = sum b F / s` pushed slightly towards the barycenter of
/// the weights, a diagonal scaling `e^u` with `Diag m(e^u . mu) = P'` and
/// `h = r e^u`, the nilradical block is `-tr D (D - s P')`.
pub fn witness_from_certificate(cert: &SrnCertificate, b: &Bracket) -> Option<MetricParams> {
    if cert.method == CertMethod::SampledLp {
        return sampled_warm_start(cert, b);
    }
    let n = b.dim();
    let d = &cert.derivation;
    let tr: f64 = d.iter().sum();
    if tr <= 0.0 {
        return None;
    }
    let weights: Vec<Vec<f64>> = b
        .support()
        .iter()
        .map(|t| t.weight(n).into_iter().map(|x| x as f64).collect())
        .collect();
    if weights.is_empty() {
        return Some(MetricParams::identity(n));
    }
    let bary: Vec<f64> = (0..n)
        .map(|r| weights.iter().map(|w| w[r]).sum::<f64>() / weights.len() as f64)
        .collect();
    let s: f64 = cert.terms.iter().map(|t| t.coefficient).sum();
    let (s, target) = if s <= 1e-12 {
        let dmin = d.iter().fold(f64::INFINITY, |m, x| m.min(*x));
        let bmax = bary.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        (dmin / (2.0 * bmax + 1.0), bary)
    } else {
        let p: Vec<f64> = (0..n)
            .map(|r| cert.terms.iter().map(|t| t.coefficient * t.point[r]).sum::<f64>() / s)
            .collect();
        let spread = p
            .iter()
            .zip(&bary)
            .fold(0.0f64, |m, (a, c)| m.max((a - c).abs()));
        let delta = (cert.margin / (2.0 * s * spread + 1e-300)).min(0.5);
        let target = p
            .iter()
            .zip(&bary)
            .map(|(a, c)| (1.0 - delta) * a + delta * c)
            .collect();
        (s, target)
    };
    let u = invert_diagonal_moment(b, &target).ok()?;
    let scaled = crate::bracket::act_diagonal(&u.iter().map(|x| x.exp()).collect::<Vec<_>>(), b);
    let norm2 = scaled.norm_sq();
    let r = (norm2 / (4.0 * s * tr)).sqrt();
    Some(MetricParams {
        c: 1.0,
        x: Vector::zeros(n),
        h: linalg::diag_mat(&u.iter().map(|x| r * x.exp()).collect::<Vec<_>>()),
    })
}

/// `h = r g` for the group element of the heaviest sampled term.
fn sampled_warm_start(cert: &SrnCertificate, b: &Bracket) -> Option<MetricParams> {
    let n = b.dim();
    let tr: f64 = cert.derivation.iter().sum();
    let s = cert.total_coefficient();
    let term = cert
        .support()
        .max_by(|a, c| a.coefficient.total_cmp(&c.coefficient))?;
    let g = term.group_element.as_ref()?;
    let moved = crate::bracket::act(&crate::bracket::BasisChange::new(g.clone()).ok()?, b).ok()?;
    let r = (moved.norm_sq() / (4.0 * s * tr)).sqrt();
    Some(MetricParams {
        c: 1.0,
        x: Vector::zeros(n),
        h: g * r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::{certify_srn_nice, constructive_nonneg, NiceOutcome};
    use crate::corpus;

    fn diag(d: &[f64], b: &Bracket) -> Derivation {
        Derivation::diagonal(d, b).unwrap()
    }

    #[test]
    fn identity_witnesses() {
        let h3 = corpus::heisenberg(1);
        let out = search_rn_metric(&diag(&[1.0, 1.0, 2.0], &h3), &h3, &SearchConfig::default()).unwrap();
        let w = out.witness().unwrap();
        assert_eq!(w.evaluations, 1);
        assert!((w.lambda_max + 4.5).abs() < 1e-12);
        let ab = corpus::abelian(3);
        let out = search_rn_metric(&diag(&[1.0; 3], &ab), &ab, &SearchConfig::default()).unwrap();
        assert!((out.witness().unwrap().lambda_max + 3.0).abs() < 1e-12);
    }

    #[test]
    fn trace_zero_fails() {
        let h3 = corpus::heisenberg(1);
        let out = search_rn_metric(&diag(&[-1.0, 1.0, 0.0], &h3), &h3, &SearchConfig::default()).unwrap();
        match out {
            SearchOutcome::Failure { evaluations, best_lambda_max } => {
                assert_eq!(evaluations, DEFAULT_BUDGET);
                assert!(best_lambda_max >= 0.0 - 1e-12);
            }
            SearchOutcome::Witness(w) => panic!("{w:?}"),
        }
    }

    #[test]
    fn search_finds_non_identity_witness() {
        // negative entry: the identity metric is not Ricci negative
        let h3 = corpus::heisenberg(1);
        let d = diag(&[-0.4, 0.9, 0.5], &h3);
        let cfg = SearchConfig {
            budget: 4000,
            ..SearchConfig::default()
        };
        let w = search_rn_metric(&d, &h3, &cfg).unwrap();
        assert!(w.witness().expect("witness").lambda_max < WITNESS_THRESHOLD);
    }

    #[test]
    fn certificate_warm_start_is_a_witness() {
        let h3 = corpus::heisenberg(1);
        for dv in [[-0.4, 0.9, 0.5], [1.0, 1.0, 2.0], [2.0, -0.5, 1.5]] {
            let NiceOutcome::Certified(c) = certify_srn_nice(&dv, &h3).unwrap() else {
                panic!()
            };
            let p = witness_from_certificate(&c, &h3).unwrap();
            let r = is_ricci_negative(&diag(&dv, &h3), &h3, &p).unwrap();
            assert!(r.negative, "{dv:?} {}", r.lambda_max);
        }
        let h5 = corpus::heisenberg(2);
        let dv = [0.0, 1.0, 0.0, 1.0, 1.0];
        let c = constructive_nonneg(&dv, &h5).unwrap();
        let p = witness_from_certificate(&c, &h5).unwrap();
        assert!(is_ricci_negative(&diag(&dv, &h5), &h5, &p).unwrap().negative);
    }

    #[test]
    fn deterministic_restarts() {
        let h3 = corpus::heisenberg(1);
        let d = diag(&[-0.45, 0.95, 0.5], &h3);
        let cfg = SearchConfig {
            budget: 3000,
            seed: 17,
            warm_starts: Vec::new(),
        };
        let a = search_rn_metric(&d, &h3, &cfg).unwrap();
        let b = search_rn_metric(&d, &h3, &cfg).unwrap();
        match (a, b) {
            (SearchOutcome::Witness(a), SearchOutcome::Witness(b)) => {
                assert_eq!(a.restart, b.restart);
                assert_eq!(a.lambda_max, b.lambda_max);
            }
            (SearchOutcome::Failure { best_lambda_max: x, .. }, SearchOutcome::Failure { best_lambda_max: y, .. }) => {
                assert_eq!(x, y)
            }
            _ => panic!("nondeterministic"),
        }
    }
}
