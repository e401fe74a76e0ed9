//! Benchmark problems and their stored reference optima.

pub mod benchmark;
pub mod constants;
pub mod drag;
pub mod floudas;
pub mod hoburg;
pub mod kirschen_ozturk;
pub mod simple;

pub use benchmark::{
    build, build_floudas, build_hoburg, build_kirschen_ozturk, build_simple_example, build_with_reference,
    compute_reference, write_reference, BenchmarkDef, BenchmarkError, BenchmarkId, ReferenceOptimum,
};

use crate::model::{BlackBoxFn, Posynomial};

/// Black box `num / den <= 1` for posynomials `num` and `den`, with the
/// quotient-rule gradient. Used for signomial rows `num - (den - 1) <= 1`.
pub fn ratio_constraint(name: &str, n: usize, num: Posynomial, den: Posynomial) -> BlackBoxFn {
    let support: Vec<usize> = (0..n)
        .filter(|&i| {
            num.terms
                .iter()
                .chain(&den.terms)
                .any(|t| t.exponents[i] != 0.0)
        })
        .collect();
    let (gn, gd) = (num.clone(), den.clone());
    BlackBoxFn::new(name, n, support, move |x| Ok(num.eval(x)? / den.eval(x)?)).with_gradient(move |x| {
        let (p, q) = (gn.eval(x)?, gd.eval(x)?);
        let (dp, dq) = (gn.gradient(x)?, gd.gradient(x)?);
        Ok(dp.iter().zip(&dq).map(|(a, b)| a / q - p * b / (q * q)).collect())
    })
}
