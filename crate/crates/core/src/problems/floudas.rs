//! Eight-variable heat exchanger design.
//!
//! Five of the six constraints are signomials `p+ - p- <= 1`. They are passed
//! to the solvers as black boxes `p+ / (1 + p-) <= 1`, which is positive
//! everywhere and describes the same feasible set.
//!
//! Without its variable bounds the problem is unbounded below (`x1, x6 -> 0`
//! satisfies every row), so the usual bounds of the test set are attached.
//! The first term of `c1` divides by `x1 x6`; with `x2 x6` instead the
//! reference optimum (f = 7049.25) would not be a KKT point.

use crate::model::{Objective, ProblemBuilder, StandardFormProblem};

use super::ratio_constraint;

/// Optimum reported in the literature, used as a starting guess.
pub const LITERATURE_OPTIMUM: [f64; 8] = [
    579.3167, 1359.943, 5110.071, 182.0174, 295.5985, 217.9799, 286.4162, 395.5979,
];
pub const LITERATURE_OBJECTIVE: f64 = 7049.25;

pub const BOUNDS: [(f64, f64); 8] = [
    (100.0, 10000.0),
    (1000.0, 10000.0),
    (1000.0, 10000.0),
    (10.0, 1000.0),
    (10.0, 1000.0),
    (10.0, 1000.0),
    (10.0, 1000.0),
    (10.0, 1000.0),
];

pub fn problem() -> StandardFormProblem {
    let mut b = ProblemBuilder::new("floudas");
    let x: Vec<usize> = BOUNDS
        .iter()
        .enumerate()
        .map(|(i, (lo, hi))| b.var_bounded(format!("x{}", i + 1), *lo, *hi))
        .collect();
    let n = 8;
    let (x1, x2, x3, x4, x5, x6, x7, x8) = (x[0], x[1], x[2], x[3], x[4], x[5], x[6], x[7]);

    let p = b.posy(&[(833.33252, &[(x4, 1.0), (x1, -1.0), (x6, -1.0)]), (100.0, &[(x6, -1.0)])]);
    let m = b.posy(&[(1.0, &[]), (83333.333, &[(x1, -1.0), (x6, -1.0)])]);
    b.bb_leq_one("c1", ratio_constraint("c1", n, p, m));

    let p = b.posy(&[(1250.0, &[(x5, 1.0), (x2, -1.0), (x7, -1.0)]), (1.0, &[(x4, 1.0), (x7, -1.0)])]);
    let m = b.posy(&[(1.0, &[]), (1250.0, &[(x4, 1.0), (x2, -1.0), (x7, -1.0)])]);
    b.bb_leq_one("c2", ratio_constraint("c2", n, p, m));

    let p = b.posy(&[(1250000.0, &[(x3, -1.0), (x8, -1.0)]), (1.0, &[(x5, 1.0), (x8, -1.0)])]);
    let m = b.posy(&[(1.0, &[]), (2500.0, &[(x5, 1.0), (x3, -1.0), (x8, -1.0)])]);
    b.bb_leq_one("c3", ratio_constraint("c3", n, p, m));

    let p = b.posy(&[(0.0025, &[(x4, 1.0)]), (0.0025, &[(x6, 1.0)])]);
    b.posy_leq_one("c4", p);

    let p = b.posy(&[(0.0025, &[(x5, 1.0)]), (0.0025, &[(x7, 1.0)])]);
    let m = b.posy(&[(1.0, &[]), (0.0025, &[(x4, 1.0)])]);
    b.bb_leq_one("c5", ratio_constraint("c5", n, p, m));

    let p = b.posy(&[(0.01, &[(x8, 1.0)])]);
    let m = b.posy(&[(1.0, &[]), (0.01, &[(x5, 1.0)])]);
    b.bb_leq_one("c6", ratio_constraint("c6", n, p, m));

    let f = b.posy(&[(1.0, &[(x1, 1.0)]), (1.0, &[(x2, 1.0)]), (1.0, &[(x3, 1.0)])]);
    b.build(Objective::Posynomial(f))
}
