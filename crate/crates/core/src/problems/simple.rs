//! Two-variable geometric program used as a didactic example.

use crate::model::{Objective, ProblemBuilder, StandardFormProblem};

pub const START: [f64; 2] = [0.3, 0.05];

/// `min x^-0.1 + 15 x^0.01 + y^-0.1 + 15 y^0.01`
/// `s.t. 0.01 x^-1.1 + x^0.1 + y <= 1`.
pub fn problem() -> StandardFormProblem {
    let mut b = ProblemBuilder::new("simple");
    let x = b.var("x");
    let y = b.var("y");
    let c = b.posy(&[(0.01, &[(x, -1.1)]), (1.0, &[(x, 0.1)]), (1.0, &[(y, 1.0)])]);
    b.posy_leq_one("budget", c);
    let f = b.posy(&[
        (1.0, &[(x, -0.1)]),
        (15.0, &[(x, 0.01)]),
        (1.0, &[(y, -0.1)]),
        (15.0, &[(y, 0.01)]),
    ]);
    b.build(Objective::Posynomial(f))
}
