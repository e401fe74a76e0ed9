//! Profile-drag fit for the NACA 24xx family and its implicit inverse.
//!
//! The fit is a five-term posynomial in `(C_L, tau, Re, C_Dp)` that must not
//! exceed 1. Every term falls with `C_Dp`, so for fixed `(C_L, tau, Re)`
//! there is exactly one `C_Dp` where it equals 1; [`drag_blackbox`] finds it.

use thiserror::Error;

use crate::model::{BlackBoxFn, ModelError, Monomial, Posynomial};

/// `(coefficient, [C_L, tau, Re, C_Dp] exponents)`.
pub const DRAG_FIT: [(f64, [f64; 4]); 5] = [
    (2.56, [5.88, -3.32, -1.54, -2.26]),
    (3.80e-9, [-0.92, 6.23, -1.38, -9.57]),
    (2.20e-3, [-0.01, 0.03, 0.14, -0.73]),
    (1.19e4, [9.78, 1.76, -1.00, -0.91]),
    (6.14e-6, [6.53, -0.52, -0.99, -5.19]),
];

const BRACKET: (f64, f64) = (1e-4, 1e-1);
/// How far the bracket may grow (in decades per side) before giving up.
const MAX_EXPANSIONS: usize = 6;
const CL_RANGE: (f64, f64) = (0.01, 2.0);
const TAU_RANGE: (f64, f64) = (0.05, 0.25);
const RE_RANGE: (f64, f64) = (1e5, 1e9);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DragError {
    #[error("drag fit inputs must be positive and finite (C_L={c_l}, tau={tau}, Re={re})")]
    Domain { c_l: f64, tau: f64, re: f64 },
    #[error("no profile drag root in [{lo:e}, {hi:e}] for C_L={c_l}, tau={tau}, Re={re}")]
    Bracket {
        c_l: f64,
        tau: f64,
        re: f64,
        lo: f64,
        hi: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DragSolution {
    pub c_dp: f64,
    /// Inputs outside the fitted range, or a root outside the default bracket.
    pub extrapolated: bool,
    /// `d log C_Dp / d log (C_L, tau, Re)`.
    pub log_sensitivity: [f64; 3],
}

/// Drag-fit posynomial over the given variable indices.
pub fn drag_fit_posynomial(n: usize, c_l: usize, tau: usize, re: usize, c_dp: usize) -> Posynomial {
    Posynomial::new(
        DRAG_FIT
            .iter()
            .map(|(c, a)| Monomial::sparse(n, *c, &[(c_l, a[0]), (tau, a[1]), (re, a[2]), (c_dp, a[3])]))
            .collect(),
    )
}

/// `log(sum_j exp(z_j + b_j u))` with its softmax weights.
fn log_fit(z: &[f64; 5], u: f64) -> (f64, [f64; 5]) {
    let mut e = [0.0; 5];
    for j in 0..5 {
        e[j] = z[j] + DRAG_FIT[j].1[3] * u;
    }
    let m = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in e.iter_mut() {
        *v = (*v - m).exp();
        total += *v;
    }
    for v in e.iter_mut() {
        *v /= total;
    }
    (m + total.ln(), e)
}

/// Value of the drag-fit posynomial.
pub fn drag_fit_value(c_l: f64, tau: f64, re: f64, c_dp: f64) -> f64 {
    DRAG_FIT
        .iter()
        .map(|(c, a)| c * c_l.powf(a[0]) * tau.powf(a[1]) * re.powf(a[2]) * c_dp.powf(a[3]))
        .sum()
}

/// Profile drag `C_Dp` at which the fit equals exactly 1.
///
/// Works on `u = log C_Dp`, where the log of the fit is convex and strictly
/// decreasing: Newton steps are kept inside a shrinking bracket and replaced
/// by bisection whenever they leave it.
pub fn drag_blackbox(c_l: f64, tau: f64, re: f64) -> Result<DragSolution, DragError> {
    let ok = |v: f64| v > 0.0 && v.is_finite();
    if !(ok(c_l) && ok(tau) && ok(re)) {
        return Err(DragError::Domain { c_l, tau, re });
    }
    let lv = [c_l.ln(), tau.ln(), re.ln()];
    let mut z = [0.0; 5];
    for (j, (c, a)) in DRAG_FIT.iter().enumerate() {
        z[j] = c.ln() + a[0] * lv[0] + a[1] * lv[1] + a[2] * lv[2];
    }
    let h = |u: f64| log_fit(&z, u).0;

    let mut extrapolated = !(CL_RANGE.0..=CL_RANGE.1).contains(&c_l)
        || !(TAU_RANGE.0..=TAU_RANGE.1).contains(&tau)
        || !(RE_RANGE.0..=RE_RANGE.1).contains(&re);
    let (mut lo, mut hi) = (BRACKET.0.ln(), BRACKET.1.ln());
    let ten = 10f64.ln();
    let mut expansions = 0;
    while h(lo) < 0.0 || h(hi) > 0.0 {
        if expansions == MAX_EXPANSIONS {
            return Err(DragError::Bracket {
                c_l,
                tau,
                re,
                lo: lo.exp(),
                hi: hi.exp(),
            });
        }
        if h(lo) < 0.0 {
            lo -= ten;
        }
        if h(hi) > 0.0 {
            hi += ten;
        }
        expansions += 1;
        extrapolated = true;
    }

    let mut u = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (val, w) = log_fit(&z, u);
        if val == 0.0 {
            break;
        }
        if val > 0.0 {
            lo = u;
        } else {
            hi = u;
        }
        let slope: f64 = (0..5).map(|j| w[j] * DRAG_FIT[j].1[3]).sum();
        let mut next = u - val / slope;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - u).abs() <= 1e-15 * (1.0 + u.abs()) {
            u = next;
            break;
        }
        u = next;
    }

    let (_, w) = log_fit(&z, u);
    let slope: f64 = (0..5).map(|j| w[j] * DRAG_FIT[j].1[3]).sum();
    let mut log_sensitivity = [0.0; 3];
    for (k, s) in log_sensitivity.iter_mut().enumerate() {
        let dz: f64 = (0..5).map(|j| w[j] * DRAG_FIT[j].1[k]).sum();
        *s = -dz / slope;
    }
    Ok(DragSolution {
        c_dp: u.exp(),
        extrapolated,
        log_sensitivity,
    })
}

/// Constraint `f(C_L, tau, Re) / C_Dp <= 1` with `f` from [`drag_blackbox`]
/// and gradients from the implicit function theorem.
pub fn drag_constraint(name: &str, n: usize, c_l: usize, tau: usize, re: usize, c_dp: usize) -> BlackBoxFn {
    let to_model = move |e: DragError| ModelError::BlackBox {
        name: "drag".into(),
        reason: e.to_string(),
    };
    BlackBoxFn::new(name, n, vec![c_l, tau, re, c_dp], move |x| {
        let s = drag_blackbox(x[c_l], x[tau], x[re]).map_err(to_model)?;
        Ok(s.c_dp / x[c_dp])
    })
    .with_gradient(move |x| {
        let s = drag_blackbox(x[c_l], x[tau], x[re]).map_err(to_model)?;
        let g = s.c_dp / x[c_dp];
        let mut grad = vec![0.0; n];
        for (k, idx) in [c_l, tau, re].into_iter().enumerate() {
            grad[idx] += g * s.log_sensitivity[k] / x[idx];
        }
        grad[c_dp] -= g / x[c_dp];
        Ok(grad)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                for k in 0..5 {
                    let c_l = 0.1 + 0.3 * i as f64;
                    let tau = 0.06 + 0.04 * j as f64;
                    let re = 10f64.powf(5.5 + 0.75 * k as f64);
                    out.push((c_l, tau, re));
                }
            }
        }
        out
    }

    #[test]
    fn root_satisfies_the_fit() {
        for (c_l, tau, re) in grid() {
            let s = drag_blackbox(c_l, tau, re).unwrap();
            let r = drag_fit_value(c_l, tau, re, s.c_dp);
            assert!((r - 1.0).abs() <= 1e-12, "{c_l} {tau} {re}: {r}");
        }
    }

    fn bisection(c_l: f64, tau: f64, re: f64) -> f64 {
        let (mut lo, mut hi) = (1e-8f64, 10.0f64);
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            if drag_fit_value(c_l, tau, re, mid) > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo * hi).sqrt()
    }

    #[test]
    fn agrees_with_bisection_and_falls_with_re_below_3e6() {
        for i in 0..6 {
            for j in 0..4 {
                let (c_l, tau) = (0.2 + 0.25 * i as f64, 0.07 + 0.05 * j as f64);
                let mut prev = f64::INFINITY;
                // The Re^0.14 term turns the fit upward beyond a few million.
                for k in 0..15 {
                    let re = 10f64.powf(5.0 + 0.1 * k as f64);
                    let s = drag_blackbox(c_l, tau, re).unwrap().c_dp;
                    let b = bisection(c_l, tau, re);
                    assert!((s - b).abs() <= 1e-10 * b);
                    assert!(s < prev);
                    prev = s;
                }
            }
        }
    }

    #[test]
    fn implicit_gradient_matches_finite_differences() {
        let n = 4;
        let bb = drag_constraint("drag", n, 0, 1, 2, 3);
        for (c_l, tau, re) in grid() {
            let x = [c_l, tau, re, 0.008];
            let g = bb.gradient(&x).unwrap();
            let fd = bb.fd_gradient(&x).unwrap();
            for i in 0..n {
                let scale = fd[i].abs().max(1e-12);
                assert!((g[i] - fd[i]).abs() <= 1e-4 * scale, "{x:?} [{i}] {} vs {}", g[i], fd[i]);
            }
        }
    }

    #[test]
    fn bad_inputs_are_rejected() {
        assert!(matches!(drag_blackbox(-1.0, 0.1, 1e6), Err(DragError::Domain { .. })));
        assert!(matches!(drag_blackbox(0.5, 0.1, f64::NAN), Err(DragError::Domain { .. })));
        assert!(drag_blackbox(0.5, 0.12, 1e6).is_ok_and(|s| !s.extrapolated));
        assert!(drag_blackbox(0.5, 0.12, 1e3).is_ok_and(|s| s.extrapolated));
    }
}
