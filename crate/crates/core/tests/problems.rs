use slcp::driver::{solve, Algorithm, SolveOptions, Termination};
use slcp::problems::drag::drag_blackbox;
use slcp::problems::hoburg::Variant;
use slcp::problems::{build, build_hoburg, BenchmarkId};

#[test]
fn every_reference_is_feasible_and_stationary() {
    for id in BenchmarkId::ALL {
        let def = build(id).unwrap();
        assert!(def.reference.max_violation(&def.problem).unwrap() <= 1e-6, "{id}");
        let r = solve(&def.problem, &def.reference.x, &SolveOptions::new(Algorithm::Slcp)).unwrap();
        assert!(r.termination.converged() && r.iterations <= 3, "{id}: {} after {}", r.termination, r.iterations);
        assert!((r.f_star - def.reference.objective).abs() <= 1e-7 * def.reference.objective, "{id}");
    }
}

/// Independent oracle: for fixed x the objective is convex in log y with
/// unconstrained minimiser y* = (2/3)^(1/0.11), so the best y is
/// min(y*, 1 - 0.01 x^-1.1 - x^0.1). What remains is a 1-D search in x.
fn simple_oracle() -> f64 {
    let y_star = (2.0f64 / 3.0).powf(1.0 / 0.11);
    let phi = |v: f64| v.powf(-0.1) + 15.0 * v.powf(0.01);
    let best = |x: f64| {
        let y_max = 1.0 - 0.01 * x.powf(-1.1) - x.powf(0.1);
        if y_max <= 0.0 {
            return f64::INFINITY;
        }
        phi(x) + phi(y_star.min(y_max))
    };
    let (mut lo, mut hi) = (1e-4f64.ln(), 0.0f64);
    for _ in 0..6 {
        let n = 2000;
        let (i_best, _) = (0..=n)
            .map(|i| best((lo + (hi - lo) * i as f64 / n as f64).exp()))
            .enumerate()
            .fold((0, f64::INFINITY), |a, (i, v)| if v < a.1 { (i, v) } else { a });
        let h = (hi - lo) / n as f64;
        let c = lo + h * i_best as f64;
        (lo, hi) = (c - 2.0 * h, c + 2.0 * h);
    }
    best((0.5 * (lo + hi)).exp())
}

#[test]
fn simple_reference_matches_grid_oracle() {
    let def = build(BenchmarkId::SimpleExample).unwrap();
    let oracle = simple_oracle();
    assert!((def.reference.objective - oracle).abs() <= 1e-9 * oracle, "{} vs {oracle}", def.reference.objective);
}

#[test]
fn hoburg_variants_share_an_optimum() {
    let f: Vec<f64> = [Variant::Gp, Variant::OneBlackBox, Variant::ThreeBlackBoxes]
        .into_iter()
        .map(|v| build_hoburg(v).reference.objective)
        .collect();
    for w in f.windows(2) {
        assert!((w[0] - w[1]).abs() <= 1e-6 * w[0], "{f:?}");
    }
}

#[test]
fn hoburg_variants_solved_from_the_same_start_agree() {
    let start = BenchmarkId::Hoburg0.nominal_start();
    let runs: Vec<f64> = [BenchmarkId::Hoburg0, BenchmarkId::Hoburg1, BenchmarkId::Hoburg3]
        .into_iter()
        .map(|id| {
            let r = solve(&id.problem(), &start, &SolveOptions::new(Algorithm::Slcp)).unwrap();
            assert_eq!(r.termination, Termination::GradLagrangian, "{id}");
            r.f_star
        })
        .collect();
    assert!((runs[0] - runs[1]).abs() <= 1e-6 * runs[0] && (runs[0] - runs[2]).abs() <= 1e-6 * runs[0], "{runs:?}");
}

#[test]
fn sprint_drag_black_box_reproduces_gp_value() {
    let def = build(BenchmarkId::Hoburg0).unwrap();
    let p = &def.problem;
    let x = &def.reference.x;
    let at = |n: &str| x[p.variable_index(n).unwrap()];
    let bb = drag_blackbox(at("C_L_sprint"), at("tau"), at("Re_sprint")).unwrap();
    let gp = at("C_Dp_sprint");
    assert!((bb.c_dp - gp).abs() <= 1e-8 * gp, "{} vs {gp}", bb.c_dp);
    assert!(!bb.extrapolated);
}

#[test]
fn floudas_objective_is_the_sum_of_the_first_three() {
    let def = build(BenchmarkId::Floudas).unwrap();
    let x = &def.reference.x;
    assert!((x[0] + x[1] + x[2] - def.reference.objective).abs() <= 1e-9 * def.reference.objective);
    // published optimum of this test problem
    assert!((def.reference.objective - 7049.248).abs() < 0.01);
}
