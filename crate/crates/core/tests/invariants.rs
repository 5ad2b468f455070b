use proptest::prelude::*;

use rnl_core::bracket::{act, act_diagonal, act_diagonal_exact, center, validate_jacobi, BasisChange, Bracket};
use rnl_core::certify::{certify_srn_nice, NiceOutcome};
use rnl_core::cone::{cone_membership, Verdict};
use rnl_core::corpus;
use rnl_core::curvature::{extension_bracket, ricci_extension, ricci_nilpotent, transport_metric, MetricParams};
use rnl_core::degeneration::{heintze_curve, limit_bracket, DegenerationCurve, CAUCHY_TOL};
use rnl_core::derivations::{
    derivation_space, diagonal_torus, eigen_blocks, is_positive_derivation, leibniz_residual, Derivation,
};
use rnl_core::field::{int, rat, Field};
use rnl_core::jordan::jordan_decompose;
use rnl_core::koszul::koszul_oracle;
use rnl_core::linalg::{self, Mat, Vector};
use rnl_core::moment::{hull_margin, moment_map, nice_basis_check, weight_polytope};
use rnl_core::weyl::orthogonal_weyl_group;

fn sweep() -> Vec<Bracket> {
    corpus::nilpotent_sweep().into_iter().map(|(_, b)| b).collect()
}

fn nice_sweep() -> Vec<Bracket> {
    sweep().into_iter().filter(|b| nice_basis_check(b).nice).collect()
}

fn corpus_bracket() -> impl Strategy<Value = Bracket> {
    prop::sample::select(sweep())
}

/// Diagonally dominated, hence invertible.
fn invertible(n: usize) -> impl Strategy<Value = Mat> {
    prop::collection::vec(-1.0f64..1.0, n * n).prop_map(move |v| Mat::from_vec(n, n, v) + Mat::identity(n, n) * 2.5)
}

fn orthogonal(n: usize) -> impl Strategy<Value = Mat> {
    prop::collection::vec(-1.0f64..1.0, n * n).prop_map(move |v| {
        let q = (Mat::from_vec(n, n, v) + Mat::identity(n, n) * 0.1).qr().q();
        q
    })
}

fn with_matrix() -> impl Strategy<Value = (Bracket, Mat, Mat)> {
    corpus_bracket().prop_flat_map(|b| {
        let n = b.dim();
        (Just(b), invertible(n), invertible(n))
    })
}

fn torus_point(b: &Bracket, coords: &[f64]) -> Vec<f64> {
    let t = diagonal_torus(b);
    t.diagonal_from_coords(&coords[..t.dim()])
}

fn bracket_and_torus_point() -> impl Strategy<Value = (Bracket, Vec<f64>)> {
    corpus_bracket().prop_flat_map(|b| {
        let k = diagonal_torus(&b).dim();
        (Just(b), prop::collection::vec(-2.0f64..2.0, k))
    })
}

fn nice_bracket_and_torus_point() -> impl Strategy<Value = (Bracket, Vec<f64>)> {
    prop::sample::select(nice_sweep()).prop_flat_map(|b| {
        let k = diagonal_torus(&b).dim();
        (Just(b), prop::collection::vec(-2.0f64..2.0, k))
    })
}

fn random_derivation(b: &Bracket, coeffs: &[f64]) -> Mat {
    let space = derivation_space(b).unwrap();
    let n = b.dim();
    let mut d = Mat::zeros(n, n);
    for (m, c) in space.basis.iter().zip(coeffs) {
        d += m * *c;
    }
    d
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn act_is_a_left_action((b, h1, h2) in with_matrix()) {
        let g1 = BasisChange::new(h1.clone()).unwrap();
        let g2 = BasisChange::new(h2.clone()).unwrap();
        let g12 = BasisChange::new(&h1 * &h2).unwrap();
        let lhs = act(&g1, &act(&g2, &b).unwrap()).unwrap();
        let rhs = act(&g12, &b).unwrap();
        let scale = b.max_abs_constant().max(1.0) * 100.0;
        prop_assert!(lhs.distance(&rhs) <= 1e-10 * scale);
    }

    #[test]
    fn act_preserves_lie_and_center((b, h, _) in with_matrix()) {
        let moved = act(&BasisChange::new(h).unwrap(), &b).unwrap();
        prop_assert!(validate_jacobi(&moved) <= 1e-9 * moved.max_abs_constant().powi(2).max(1.0));
        prop_assert_eq!(center(&moved).len(), center(&b).len());
    }

    #[test]
    fn exact_and_float_modes_agree(b in corpus_bracket(), h in prop::collection::vec(1i64..9, 9)) {
        let n = b.dim();
        let hq: Vec<_> = h[..n.min(9)].iter().cycle().take(n).map(|&x| rat(x, 4)).collect();
        let hf: Vec<f64> = hq.iter().map(Field::to_f64).collect();
        let exact = act_diagonal_exact(&hq, &b).unwrap();
        let float = act_diagonal(&hf, &b.to_float());
        prop_assert!(exact.distance(&float) <= 1e-12 * exact.max_abs_constant().max(1.0));
        if !b.is_zero() {
            let me = moment_map(&exact).unwrap();
            let mf = moment_map(&float).unwrap();
            prop_assert!((me.matrix() - mf.matrix()).amax() <= 1e-12);
        }
    }

    #[test]
    fn derivations_and_jordan_parts_satisfy_leibniz(b in corpus_bracket(), seed in prop::collection::vec(-1.0f64..1.0, 64)) {
        let space = derivation_space(&b).unwrap();
        for m in &space.basis {
            prop_assert!(leibniz_residual(m, &b) <= 1e-9);
        }
        let d = random_derivation(&b, &seed);
        if let Ok(parts) = jordan_decompose(&d) {
            let tol = 1e-7 * d.norm().max(1.0) * b.max_abs_constant().max(1.0);
            prop_assert!(leibniz_residual(&parts.real_part, &b) <= tol);
            prop_assert!(leibniz_residual(&parts.imaginary_part, &b) <= tol);
            prop_assert!(leibniz_residual(&parts.nilpotent_part, &b) <= tol);
        }
    }

    #[test]
    fn ricci_closed_form_matches_koszul(b in corpus_bracket(), seed in prop::collection::vec(-1.0f64..1.0, 64)) {
        let d = random_derivation(&b, &seed);
        let der = Derivation::new(d.clone(), &b).unwrap();
        let block = ricci_extension(&der, &b).unwrap();
        let koszul = koszul_oracle(&extension_bracket(&d, &b)).ricci;
        prop_assert!((block.assembled() - &koszul).amax() <= 1e-9);
        if der.is_normal(1e-12) {
            prop_assert!(block.star.norm() <= 1e-9 || (block.star.clone() - &block.fn_row).amax() <= 1e-9);
        }
    }

    #[test]
    fn ricci_spectrum_is_isometry_invariant(
        (b, d) in bracket_and_torus_point(),
        x in prop::collection::vec(-1.0f64..1.0, 7),
        c in 0.3f64..3.0,
    ) {
        let n = b.dim();
        let der = Derivation::diagonal(&torus_point(&b, &pad(&d)), &b).unwrap();
        let h = Mat::identity(n, n) * 1.3 + Mat::from_fn(n, n, |i, j| 0.1 * ((i * 3 + j) as f64).sin());
        let p = MetricParams { c, x: Vector::from_column_slice(&x[..n]), h };
        let (d2, b2) = transport_metric(&p, &der, &b).unwrap();
        let closed = ricci_extension(&d2, &b2).unwrap().eigenvalues();
        let hbar = BasisChange::new(p.hbar()).unwrap();
        let moved = act(&hbar, &extension_bracket(der.matrix(), &b)).unwrap();
        let direct = linalg::sym_eigenvalues(&koszul_oracle(&moved).ricci);
        for (a, z) in closed.iter().zip(&direct) {
            prop_assert!((a - z).abs() <= 1e-8 * a.abs().max(1.0));
        }
    }

    #[test]
    fn nilpotent_ricci_trace((b, h, _) in with_matrix()) {
        let moved = act(&BasisChange::new(h).unwrap(), &b).unwrap();
        let r = ricci_nilpotent(&moved);
        prop_assert!((r.trace() + 0.25 * moved.norm_sq()).abs() <= 1e-9 * moved.norm_sq().max(1.0));
    }

    #[test]
    fn moment_map_equivariance_scale_and_trace(
        (b, k) in prop::sample::select(sweep().into_iter().filter(|b| !b.is_zero()).collect::<Vec<_>>())
            .prop_flat_map(|b| { let n = b.dim(); (Just(b), orthogonal(n)) }),
        c in prop_oneof![-3.0f64..-0.1, 0.1f64..3.0],
    ) {
        let m = moment_map(&b).unwrap();
        let kb = act(&BasisChange::new(k.clone()).unwrap(), &b).unwrap();
        let mk = moment_map(&kb).unwrap();
        prop_assert!((mk.matrix() - &k * m.matrix() * k.transpose()).amax() <= 1e-10);
        prop_assert!((moment_map(&b.scaled(c)).unwrap().matrix() - m.matrix()).amax() <= 1e-12);
        prop_assert!((mk.matrix().trace() + 1.0).abs() <= 1e-12);
        // m = 4 Ric / |mu|^2
        let ric = ricci_nilpotent(&kb);
        prop_assert!((mk.matrix() - ric * (4.0 / kb.norm_sq())).amax() <= 1e-9);
    }

    #[test]
    fn nice_diagonal_orbit_moments_lie_in_hull(
        (b, u) in prop::sample::select(nice_sweep().into_iter().filter(|b| !b.is_zero()).collect::<Vec<_>>())
            .prop_flat_map(|b| { let n = b.dim(); (Just(b), prop::collection::vec(-2.0f64..2.0, n)) }),
    ) {
        let scaled = act_diagonal(&u.iter().map(|x| x.exp()).collect::<Vec<_>>(), &b);
        let p = moment_map(&scaled).unwrap().diagonal();
        let poly = weight_polytope(&b).unwrap();
        let pts: Vec<Vec<f64>> = poly.points.iter().map(|w| w.weight.iter().map(|&x| x as f64).collect()).collect();
        prop_assert!(hull_margin(&pts, &p) >= -1e-9);
    }

    #[test]
    fn certification_monotone_and_homogeneous(
        (b, d) in nice_bracket_and_torus_point(),
        e in prop::collection::vec(0.0f64..1.0, 8),
        s in 0.2f64..5.0,
    ) {
        let dv = torus_point(&b, &pad(&d));
        if dv.iter().sum::<f64>() <= 1e-6 { return Ok(()); }
        if let Ok(NiceOutcome::Certified(c)) = certify_srn_nice(&dv, &b) {
            // a positive torus element: the grading derivation plus a random nonnegative one
            let torus = diagonal_torus(&b);
            let pos = positive_torus_element(&b, &e);
            if let Some(p) = pos {
                let sum: Vec<f64> = dv.iter().zip(&p).map(|(a, z)| a + z).collect();
                match certify_srn_nice(&sum, &b).unwrap() {
                    NiceOutcome::Certified(c2) => prop_assert!(c2.margin >= c.margin - 1e-9),
                    NiceOutcome::Infeasible(_) => prop_assert!(false, "monotonicity failed"),
                }
            }
            let scaled: Vec<f64> = dv.iter().map(|x| x * s).collect();
            prop_assert!(torus.contains(&scaled, 1e-9));
            match certify_srn_nice(&scaled, &b).unwrap() {
                NiceOutcome::Certified(c2) => prop_assert!((c2.margin - s * c.margin).abs() <= 1e-9 * s.max(1.0)),
                NiceOutcome::Infeasible(_) => prop_assert!(s * c.margin <= 1e-7 + 1e-9),
            }
        }
    }

    #[test]
    fn positive_derivations_are_certified((b, d) in nice_bracket_and_torus_point()) {
        let dv = torus_point(&b, &pad(&d));
        if is_positive_derivation(&linalg::diag_mat(&dv)) && dv.iter().fold(f64::INFINITY, |m, x| m.min(*x)) > 1e-6 {
            prop_assert!(matches!(certify_srn_nice(&dv, &b).unwrap(), NiceOutcome::Certified(_)));
        }
    }

    #[test]
    fn cone_convex_scaled_and_absorbing(
        (b, d1) in nice_bracket_and_torus_point(),
        d2 in prop::collection::vec(-2.0f64..2.0, 8),
        e in prop::collection::vec(0.0f64..1.0, 8),
        s in 0.2f64..5.0,
    ) {
        let p = torus_point(&b, &pad(&d1));
        let q = torus_point(&b, &d2);
        let margin = |x: &[f64]| match certify_srn_nice(x, &b) {
            Ok(NiceOutcome::Certified(c)) => Some(c.margin),
            _ => None,
        };
        if let (Some(mp), Some(mq)) = (margin(&p), margin(&q)) {
            let mid: Vec<f64> = p.iter().zip(&q).map(|(a, z)| 0.5 * (a + z)).collect();
            prop_assert!(margin(&mid).unwrap_or(f64::NEG_INFINITY) >= mp.min(mq) - 1e-9);
        }
        if p.iter().sum::<f64>() > 1e-6 {
            let inside = cone_membership(&p, &b, 1).unwrap().verdict;
            let scaled: Vec<f64> = p.iter().map(|x| x * s).collect();
            let inside_scaled = cone_membership(&scaled, &b, 1).unwrap().verdict;
            prop_assert!((inside == Verdict::In) == (inside_scaled == Verdict::In));
            if inside == Verdict::In {
                if let Some(pos) = positive_torus_element(&b, &e) {
                    let sum: Vec<f64> = p.iter().zip(&pos).map(|(a, z)| a + z).collect();
                    prop_assert_eq!(cone_membership(&sum, &b, 1).unwrap().verdict, Verdict::In);
                }
            }
        }
    }

    #[test]
    fn limits_are_exactly_lie(b in corpus_bracket(), e in prop::collection::vec(-3i64..4, 7)) {
        let n = b.dim();
        let exps = e[..n].iter().map(|&x| int(x)).collect();
        let curve = DegenerationCurve::diagonal(b, exps).unwrap();
        if let Ok(l) = limit_bracket(&curve, 1e6, CAUCHY_TOL) {
            prop_assert!(l.bracket.is_exact());
            prop_assert_eq!(validate_jacobi(&l.bracket), 0.0);
        }
    }

    #[test]
    fn heintze_commutes_with_centralizer(
        (b, d) in bracket_and_torus_point(),
        g in prop::collection::vec(-0.5f64..0.5, 49),
        t in 0.5f64..4.0,
    ) {
        let n = b.dim();
        let dv = torus_point(&b, &pad(&d));
        let der = Derivation::diagonal(&dv, &b).unwrap();
        // centralizer of D: block diagonal along equal eigenvalues
        let blocks = eigen_blocks(&dv, 1e-12);
        let mut gm = Mat::identity(n, n) * 1.5;
        for block in &blocks {
            for &i in block {
                for &j in block {
                    gm[(i, j)] += g[i * 7 + j];
                }
            }
        }
        let Ok(gc) = BasisChange::new(gm.clone()) else { return Ok(()) };
        let mut big = Mat::identity(n + 1, n + 1);
        big.view_mut((1, 1), (n, n)).copy_from(&gm);
        let lhs = act(&BasisChange::new(big).unwrap(), &heintze_curve(&der, &b, t)).unwrap();
        let gb = act(&gc, &b).unwrap();
        let gd = &gm * der.matrix() * gc.inverse();
        let rhs = heintze_curve(&Derivation::new(gd, &gb).unwrap(), &gb, t);
        prop_assert!(lhs.distance(&rhs) <= 1e-9 * (1.0 + lhs.max_abs_constant()));
    }
}

fn pad(v: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    out.resize(8, 0.0);
    out
}

/// A positive diagonal derivation: a positive grading found by LP over the
/// torus, plus a random nonnegative torus element when one is available.
fn positive_torus_element(b: &Bracket, e: &[f64]) -> Option<Vec<f64>> {
    let torus = diagonal_torus(b);
    let basis = torus.basis_f64();
    let k = torus.dim();
    let n = b.dim();
    use rnl_core::lp::{LinearProgram, LpStatus, Relation};
    let mut lp = LinearProgram::<f64>::new(k);
    lp.maximize(vec![0.0; k]);
    for i in 0..k {
        lp.set_free(i);
    }
    for r in 0..n {
        lp.constrain(basis.iter().map(|v| v[r]).collect(), Relation::Ge, 1.0);
    }
    let LpStatus::Optimal { x, .. } = lp.solve() else { return None };
    let p = torus.diagonal_from_coords(&x);
    let scale = e[0] + 0.05;
    Some(p.into_iter().map(|v| v * scale).collect())
}

#[test]
fn torus_annihilates_weights_exactly() {
    for b in sweep() {
        let torus = diagonal_torus(&b);
        for t in b.support() {
            for v in torus.basis() {
                let dot = t.weight(b.dim()).iter().zip(v).fold(int(0), |acc, (w, x)| acc + int(*w) * x);
                assert_eq!(dot, int(0));
            }
        }
    }
}

#[test]
fn weyl_groups_are_groups_preserving_the_torus() {
    for b in sweep().into_iter().filter(|b| b.dim() <= 6) {
        let torus = diagonal_torus(&b);
        let w = orthogonal_weyl_group(&b, &torus).unwrap();
        let ident: Vec<Vec<_>> = (0..torus.dim())
            .map(|i| (0..torus.dim()).map(|j| if i == j { int(1) } else { int(0) }).collect())
            .collect();
        assert!(w.actions.contains(&ident));
        let mul = |a: &Vec<Vec<rnl_core::field::Rational>>, c: &Vec<Vec<rnl_core::field::Rational>>| {
            (0..a.len())
                .map(|i| {
                    (0..a.len())
                        .map(|j| (0..a.len()).fold(int(0), |acc, l| acc + &a[i][l] * &c[l][j]))
                        .collect::<Vec<_>>()
                })
                .collect::<Vec<_>>()
        };
        for a in &w.actions {
            assert!(w.actions.iter().any(|c| mul(a, c) == ident), "inverse missing");
            for c in &w.actions {
                assert!(w.actions.contains(&mul(a, c)), "not closed");
            }
        }
        for g in &w.representatives {
            let m = g.matrix();
            for v in torus.basis_f64() {
                let conj = &m * linalg::diag_mat(&v) * m.transpose();
                assert!(linalg::is_diagonal(&conj, 1e-12));
                assert!(torus.contains(&conj.diagonal().iter().copied().collect::<Vec<_>>(), 1e-12));
            }
        }
    }
}

#[test]
fn corpus_entries_are_exactly_lie() {
    for name in ["abelian:4", "heisenberg:3", "heisenberg:5", "heisenberg:7", "filiform:5", "tricky5", "milnor_heis", "milnor_hyp:4", "milnor_source", "milnor_hyp_source"] {
        let e = corpus::lookup(name).unwrap();
        assert!(e.bracket.is_exact());
        assert_eq!(validate_jacobi(&e.bracket), 0.0, "{name}");
    }
    assert_eq!(corpus::lookup("tricky5").unwrap().step, Some(3));
    assert_eq!(corpus::lookup("heisenberg:5").unwrap().step, Some(2));
}
