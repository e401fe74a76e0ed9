use approx::assert_relative_eq;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use slcp::driver::*;
use slcp::model::{BlackBoxFn, Objective, ProblemBuilder, StandardFormProblem};
use slcp::problems::{build, floudas, kirschen_ozturk, simple, BenchmarkId};

fn min_eigenvalue(b: &DMatrix<f64>) -> f64 {
    b.clone().symmetric_eigen().eigenvalues.min()
}

#[test]
fn bfgs_matching_curvature_is_a_no_op() {
    let b = DMatrix::identity(3, 3);
    let out = damped_bfgs_update(&b, &[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]);
    assert_relative_eq!(out, b, epsilon = 1e-15);
}

#[test]
fn bfgs_undamped_when_curvature_is_large() {
    // s'z = 2 >= 0.2 s'Bs, so theta = 1 and B' s = z.
    let b = DMatrix::identity(2, 2);
    let s = [1.0, 0.0];
    let z = [2.0, 0.5];
    let out = damped_bfgs_update(&b, &s, &z);
    let bs = &out * nalgebra::DVector::from_column_slice(&s);
    assert_relative_eq!(bs[0], 2.0, epsilon = 1e-14);
    assert_relative_eq!(bs[1], 0.5, epsilon = 1e-14);
}

#[test]
fn bfgs_damped_negative_curvature() {
    // s = e1, z = -e1: theta = 0.8 / 2 = 0.4, r = 0.2 e1, s'B's = 0.2.
    let b = DMatrix::identity(2, 2);
    let out = damped_bfgs_update(&b, &[1.0, 0.0], &[-1.0, 0.0]);
    assert_relative_eq!(out[(0, 0)], 0.2, epsilon = 1e-14);
    assert_relative_eq!(out[(1, 1)], 1.0, epsilon = 1e-14);
    assert!(min_eigenvalue(&out) > 0.0);
}

#[test]
fn bfgs_skips_tiny_steps() {
    let b = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
    assert_eq!(damped_bfgs_update(&b, &[1e-16, 0.0], &[5.0, 1.0]), b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]
    #[test]
    fn bfgs_stays_spd(
        s in proptest::collection::vec(-3.0f64..3.0, 4),
        z in proptest::collection::vec(-3.0f64..3.0, 4),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(4, 4, |_, _| rng.gen_range(-1.0..1.0));
        let b = &a * a.transpose() + DMatrix::identity(4, 4) * 0.1;
        prop_assume!(s.iter().map(|v| v * v).sum::<f64>().sqrt() > 1e-6);
        let out = damped_bfgs_update(&b, &s, &z);
        prop_assert!((&out - out.transpose()).amax() < 1e-12);
        prop_assert!(min_eigenvalue(&out) > 0.0);
    }
}

#[test]
fn termination_checks() {
    assert_eq!(check_termination(&[0.0, 0.0], &[1.0, 1.0], 1e-6, 1e-8), TerminationCheck::GradLagrangian);
    assert_eq!(check_termination(&[5.0, 0.0], &[0.0, 0.0], 1e-6, 1e-8), TerminationCheck::StepSize);
    assert_eq!(check_termination(&[5.0, 0.0], &[1e-3, 0.0], 1e-6, 1e-8), TerminationCheck::Continue);
    // inf-norm for the gradient, 2-norm for the step
    assert_eq!(check_termination(&[5e-7, -5e-7], &[1.0], 1e-6, 1e-8), TerminationCheck::GradLagrangian);
    assert_eq!(check_termination(&[1.0], &[8e-9, 8e-9], 1e-6, 1e-8), TerminationCheck::Continue);
}

/// Objective x0 + x1 + x2 with only black-box rows (posynomials hidden).
fn black_box_only(rng: &mut ChaCha8Rng) -> StandardFormProblem {
    let mut b = ProblemBuilder::new("bb");
    let v: Vec<usize> = (0..3).map(|i| b.var(format!("x{i}"))).collect();
    for r in 0..rng.gen_range(1..4) {
        let terms: Vec<(f64, Vec<(usize, f64)>)> = (0..rng.gen_range(1..4))
            .map(|_| (rng.gen_range(0.1..2.0), v.iter().map(|&i| (i, rng.gen_range(-2.0..2.0))).collect()))
            .collect();
        let refs: Vec<(f64, &[(usize, f64)])> = terms.iter().map(|(c, e)| (*c, e.as_slice())).collect();
        let p = b.posy(&refs);
        if r == 0 && rng.gen_bool(0.5) {
            b.bb_eq_one("h", BlackBoxFn::from_posynomial("h", p));
        } else {
            b.bb_leq_one(format!("g{r}"), BlackBoxFn::from_posynomial(format!("g{r}"), p));
        }
    }
    let f = b.posy(&[(1.0, &[(v[0], 1.0)]), (1.0, &[(v[1], 1.0)]), (1.0, &[(v[2], 1.0)])]);
    b.build(Objective::Posynomial(f))
}

#[test]
fn slcp_spec_equals_lsqp_without_gp_rows() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..25 {
        let p = black_box_only(&mut rng);
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(0.2..3.0)).collect();
        let slcp = build_subproblem(&IterateState::new(&p, &x, Algorithm::Slcp).unwrap(), &p, Algorithm::Slcp, 1e8);
        let lsqp = build_subproblem(&IterateState::new(&p, &x, Algorithm::Lsqp).unwrap(), &p, Algorithm::Lsqp, 1e8);
        assert!(slcp.lse_cons.is_empty() && slcp.affine_ineq.is_empty() && slcp.affine_eq.is_empty());
        assert_eq!(slcp.lin_ineq.len(), lsqp.lin_ineq.len());
        for (a, b) in slcp.lin_ineq.iter().chain(&slcp.lin_eq).zip(lsqp.lin_ineq.iter().chain(&lsqp.lin_eq)) {
            assert!((a.value - b.value).abs() <= 1e-14);
            assert!(a.grad.iter().zip(&b.grad).all(|(u, v)| (u - v).abs() <= 1e-14));
        }
        assert_eq!(slcp.grad0, lsqp.grad0);
        assert_eq!(slcp.step_bounds, lsqp.step_bounds);
    }
}

#[test]
fn monomial_rows_are_exact_and_black_boxes_anchor_at_log_g() {
    let p = kirschen_ozturk::problem();
    let x = kirschen_ozturk::NOMINAL_START;
    let state = IterateState::new(&p, &x, Algorithm::Slcp).unwrap();
    let spec = build_subproblem(&state, &p, Algorithm::Slcp, 1e8);
    assert_eq!(spec.affine_ineq.len(), p.mono_ineq.len());
    for (row, m) in spec.affine_ineq.iter().zip(&p.mono_ineq) {
        assert_eq!(row.grad, m.body.exponents);
        assert_relative_eq!(row.value, m.body.eval(&x).unwrap().ln(), max_relative = 1e-14);
    }
    let g = p.bb_ineq[0].body.eval(&x).unwrap();
    assert_relative_eq!(spec.lin_ineq[0].eval(&vec![0.0; x.len()]), g.ln(), max_relative = 1e-14);
    assert_eq!(spec.lse_cons.len(), p.posy_ineq.len());
}

#[test]
fn sqp_rows_are_linearized_in_x() {
    let p = simple::problem();
    let state = IterateState::new(&p, &simple::START, Algorithm::Sqp).unwrap();
    let spec = build_subproblem(&state, &p, Algorithm::Sqp, 1e8);
    let c = &p.posy_ineq[0].body;
    assert_relative_eq!(spec.lin_ineq[0].value, c.eval(&simple::START).unwrap() - 1.0, max_relative = 1e-14);
    assert_eq!(spec.lin_ineq[0].grad, c.gradient(&simple::START).unwrap());
    let (lo, _) = spec.step_bounds.as_ref().unwrap()[0];
    assert_relative_eq!(lo, 1e-9 - simple::START[0]);
}

/// `log f + sum over black-box rows of mu_i log g_i`, as a function of y.
fn reduced_lagrangian(p: &StandardFormProblem, mu: &[f64], y: &[f64]) -> f64 {
    let x: Vec<f64> = y.iter().map(|v| v.exp()).collect();
    let n_before = p.posy_ineq.len() + p.mono_ineq.len();
    let mut l = p.objective.eval(&x).unwrap().ln();
    for (k, row) in p.bb_ineq.iter().enumerate() {
        l += mu[n_before + k] * row.body.eval(&x).unwrap().ln();
    }
    let n_eq_before = n_before + p.bb_ineq.len() + p.mono_eq.len();
    for (k, row) in p.bb_eq.iter().enumerate() {
        l += mu[n_eq_before + k] * row.body.eval(&x).unwrap().ln();
    }
    l
}

#[test]
fn reduced_gradient_matches_finite_differences_on_snapshots() {
    let p = kirschen_ozturk::problem();
    let mut snapshots = Vec::new();
    let mut obs = |_: &IterationRecord, s: &IterateState| snapshots.push(s.clone());
    solve_observed(&p, &kirschen_ozturk::NOMINAL_START, &SolveOptions::new(Algorithm::Slcp), Some(&mut obs)).unwrap();
    assert!(snapshots.len() > 5);
    for s in snapshots.iter().step_by(3) {
        let g = reduced_lagrangian_gradient(s, &p, Algorithm::Slcp);
        for j in 0..s.y.len() {
            let h = 1e-6;
            let (mut yp, mut ym) = (s.y.clone(), s.y.clone());
            yp[j] += h;
            ym[j] -= h;
            let fd = (reduced_lagrangian(&p, &s.mu, &yp) - reduced_lagrangian(&p, &s.mu, &ym)) / (2.0 * h);
            assert!((g[j] - fd).abs() <= 1e-6 * (1.0 + fd.abs()), "iter {} var {j}: {} vs {fd}", s.iter, g[j]);
        }
    }
}

#[test]
fn reduced_gradient_with_zero_multipliers_is_objective_gradient() {
    let p = floudas::problem();
    let mut s = IterateState::new(&p, &floudas::LITERATURE_OPTIMUM, Algorithm::Slcp).unwrap();
    s.mu.iter_mut().for_each(|m| *m = 0.0);
    let g = reduced_lagrangian_gradient(&s, &p, Algorithm::Slcp);
    let x = &floudas::LITERATURE_OPTIMUM;
    let f: f64 = x[..3].iter().sum();
    for j in 0..8 {
        let expect = if j < 3 { x[j] / f } else { 0.0 };
        assert_relative_eq!(g[j], expect, epsilon = 1e-15);
    }
}

#[test]
fn pure_gp_reduced_gradient_ignores_multipliers() {
    let p = simple::problem();
    let mut s = IterateState::new(&p, &simple::START, Algorithm::Slcp).unwrap();
    let before = reduced_lagrangian_gradient(&s, &p, Algorithm::Slcp);
    s.mu = vec![123.0];
    assert_eq!(reduced_lagrangian_gradient(&s, &p, Algorithm::Slcp), before);
    // LSQP uses the full Lagrangian, which does move.
    let s2 = IterateState::new(&p, &simple::START, Algorithm::Lsqp).unwrap();
    let mut s3 = s2.clone();
    s3.mu = vec![123.0];
    assert_ne!(
        reduced_lagrangian_gradient(&s2, &p, Algorithm::Lsqp),
        reduced_lagrangian_gradient(&s3, &p, Algorithm::Lsqp)
    );
}

#[test]
fn simple_example_regression() {
    let p = simple::problem();
    let lsqp = solve(&p, &simple::START, &SolveOptions::new(Algorithm::Lsqp)).unwrap();
    let slcp = solve(&p, &simple::START, &SolveOptions::new(Algorithm::Slcp)).unwrap();
    assert_eq!(lsqp.termination, Termination::GradLagrangian);
    assert_eq!(slcp.termination, Termination::GradLagrangian);
    assert!((lsqp.f_star - slcp.f_star).abs() <= 1e-6 * slcp.f_star);
    assert_eq!((lsqp.iterations, slcp.iterations), (17, 13));
    // LSQP passes through infeasible points on the way; SLCP never does.
    assert!(lsqp.history.iter().any(|h| h.max_violation > 1e-6));
    assert!(slcp.history.iter().all(|h| h.max_violation <= 1e-6));
}

#[test]
fn grad_lagrangian_termination_is_honest() {
    for id in [BenchmarkId::SimpleExample, BenchmarkId::Floudas, BenchmarkId::KirschenOzturk] {
        let def = build(id).unwrap();
        for a in Algorithm::ALL {
            let r = solve(&def.problem, &id.nominal_start(), &SolveOptions::new(a)).unwrap();
            if r.termination == Termination::GradLagrangian {
                assert!(r.grad_lagrangian < 1e-6, "{id} {a}");
                assert_eq!(r.history.last().unwrap().termination, Some(Termination::GradLagrangian));
            }
        }
    }
}

#[test]
fn floudas_from_reference_stops_quickly() {
    let def = build(BenchmarkId::Floudas).unwrap();
    for a in Algorithm::ALL {
        let r = solve(&def.problem, &def.reference.x, &SolveOptions::new(a)).unwrap();
        assert!(r.termination.converged() && r.iterations <= 3, "{a}: {:?} after {}", r.termination, r.iterations);
    }
}

#[test]
fn algorithms_agree_on_floudas() {
    let def = build(BenchmarkId::Floudas).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x0: Vec<f64> = def.reference.x.iter().map(|v| v * rng.gen_range(0.95..1.05)).collect();
    let runs: Vec<SolveResult> = Algorithm::ALL
        .iter()
        .map(|&a| solve(&def.problem, &x0, &SolveOptions::new(a)).unwrap())
        .collect();
    for a in &runs {
        for b in &runs {
            assert!((a.f_star - b.f_star).abs() <= 1e-6 * a.f_star);
            for (u, v) in a.x_star.iter().zip(&b.x_star) {
                assert!((u - v).abs() <= 1e-4 * u.abs().max(v.abs()));
            }
        }
    }
}

#[test]
fn iterates_stay_positive_and_b_spd() {
    for id in [BenchmarkId::SimpleExample, BenchmarkId::Floudas, BenchmarkId::KirschenOzturk, BenchmarkId::Hoburg1] {
        let p = id.problem();
        for a in [Algorithm::Lsqp, Algorithm::Slcp] {
            let mut ok = true;
            let mut obs = |_: &IterationRecord, s: &IterateState| {
                ok &= s.x.iter().all(|v| *v > 0.0 && v.is_finite());
                ok &= s.y.iter().zip(&s.x).all(|(y, x)| (y.exp() - x).abs() <= 1e-14 * x);
                ok &= min_eigenvalue(&s.b) >= 1e-12;
            };
            solve_observed(&p, &id.nominal_start(), &SolveOptions::new(a), Some(&mut obs)).unwrap();
            assert!(ok, "{id} {a}");
        }
    }
}

#[test]
fn objective_scaling_leaves_log_space_iterates_unchanged() {
    let p = kirschen_ozturk::problem();
    let scaled = p.with_scaled_objective(10.0);
    for a in [Algorithm::Lsqp, Algorithm::Slcp] {
        let mut xs1 = Vec::new();
        let mut xs10 = Vec::new();
        let r1 = solve_observed(&p, &kirschen_ozturk::NOMINAL_START, &SolveOptions::new(a), Some(&mut |_, s| xs1.push(s.x.clone()))).unwrap();
        let r10 = solve_observed(&scaled, &kirschen_ozturk::NOMINAL_START, &SolveOptions::new(a), Some(&mut |_, s| xs10.push(s.x.clone()))).unwrap();
        assert_eq!(r1.iterations, r10.iterations);
        for (u, v) in xs1.iter().flatten().zip(xs10.iter().flatten()) {
            assert!((u - v).abs() <= 1e-9 * u.abs());
        }
        assert_relative_eq!(r10.f_star, 10.0 * r1.f_star, max_relative = 1e-9);
    }
}

#[test]
fn monotone_search_is_available() {
    let p = simple::problem();
    let mut o = SolveOptions::new(Algorithm::Slcp);
    o.line_search.nonmonotone_memory = 1;
    let r = solve(&p, &simple::START, &o).unwrap();
    assert!(r.termination.converged());
    let mut merits = r.history.iter().map(|h| h.merit);
    let first = merits.next().unwrap();
    // with memory 1 every accepted step lowers the merit at the penalty of its iteration
    assert!(r.history.iter().all(|h| !h.line_search_failed));
    assert!(first.is_finite());
}

#[test]
fn start_outside_bounds_is_rejected() {
    let p = floudas::problem();
    let mut x = floudas::LITERATURE_OPTIMUM;
    x[0] = 50.0;
    assert!(matches!(
        solve(&p, &x, &SolveOptions::new(Algorithm::Slcp)),
        Err(SolveError::OutOfBounds { index: 0, .. })
    ));
    assert!(matches!(
        solve(&p, &x[..3], &SolveOptions::new(Algorithm::Slcp)),
        Err(SolveError::Dimension { expected: 8, found: 3 })
    ));
}

#[test]
fn history_csv_has_one_row_per_iteration() {
    let r = solve(&simple::problem(), &simple::START, &SolveOptions::new(Algorithm::Slcp)).unwrap();
    let mut buf = Vec::new();
    r.write_history_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), r.iterations + 1);
    assert!(text.lines().last().unwrap().ends_with("grad_lagrangian"));
}
