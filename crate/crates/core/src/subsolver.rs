//! Primal-dual interior-point solver for the relaxed convex sub-problem
//!
//! ```text
//!     minimize    1/2 d'Bd + g'd + K sum_i sigma_i^2
//!     subject to  lse_i(anchor_i + d)  <= sigma_i
//!                 a_i + c_i' d         <= sigma_i      (affine / linearized)
//!                 a_j + c_j' d          = sigma_j      (equalities, sigma free)
//!                 sigma_i >= 0
//!                 lo <= d <= hi                        (hard box, optional)
//! ```
//!
//! Equality rows are eliminated directly: their slack is the row residual, so
//! they only contribute `K (a_j + c_j'd)^2` to the objective. Inequality rows
//! and their slacks get log barriers. The barrier parameter is cut by 10 per
//! outer stage; each stage runs damped Newton on the perturbed KKT system with
//! the slack block eliminated analytically, which leaves an `n x n` SPD system.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::transform::LseForm;

pub const DEFAULT_SLACK_WEIGHT: f64 = 1e8;
pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_NEWTON: usize = 200;

const FRACTION_TO_BOUNDARY: f64 = 0.99;
const BACKTRACK: f64 = 0.5;
const MAX_BACKTRACKS: usize = 60;
const BARRIER_REDUCTION: f64 = 10.0;
const REGULARIZATION: f64 = 1e-10;
const DUAL_SCALE_REF: f64 = 100.0;

/// `value + grad . d`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRow {
    pub value: f64,
    pub grad: Vec<f64>,
}

impl LinearRow {
    pub fn new(value: f64, grad: Vec<f64>) -> Self {
        Self { value, grad }
    }

    pub fn eval(&self, d: &[f64]) -> f64 {
        self.value + dot(&self.grad, d)
    }
}

/// Log-sum-exp row evaluated at `anchor + d`.
#[derive(Debug, Clone, PartialEq)]
pub struct LseRow {
    pub form: LseForm,
    pub anchor: Vec<f64>,
}

impl LseRow {
    pub fn eval(&self, d: &[f64]) -> f64 {
        let y: Vec<f64> = self.anchor.iter().zip(d).map(|(a, b)| a + b).collect();
        self.form.value(&y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemSpec {
    pub grad0: DVector<f64>,
    pub hessian: DMatrix<f64>,
    pub lse_cons: Vec<LseRow>,
    pub affine_ineq: Vec<LinearRow>,
    pub lin_ineq: Vec<LinearRow>,
    pub affine_eq: Vec<LinearRow>,
    pub lin_eq: Vec<LinearRow>,
    pub slack_weight: f64,
    /// Hard per-coordinate limits on the step, never relaxed.
    pub step_bounds: Option<Vec<(f64, f64)>>,
}

impl SubproblemSpec {
    pub fn unconstrained(grad0: DVector<f64>, hessian: DMatrix<f64>) -> Self {
        Self {
            grad0,
            hessian,
            lse_cons: Vec::new(),
            affine_ineq: Vec::new(),
            lin_ineq: Vec::new(),
            affine_eq: Vec::new(),
            lin_eq: Vec::new(),
            slack_weight: DEFAULT_SLACK_WEIGHT,
            step_bounds: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.grad0.len()
    }

    pub fn n_ineq(&self) -> usize {
        self.lse_cons.len() + self.affine_ineq.len() + self.lin_ineq.len()
    }

    pub fn n_eq(&self) -> usize {
        self.affine_eq.len() + self.lin_eq.len()
    }

    /// Inequality rows first (lse, affine, linearized), then equality rows
    /// (affine, linearized); multipliers and slacks follow this order.
    pub fn n_rows(&self) -> usize {
        self.n_ineq() + self.n_eq()
    }

    fn linear_ineq_rows(&self) -> impl Iterator<Item = &LinearRow> {
        self.affine_ineq.iter().chain(&self.lin_ineq)
    }

    fn eq_rows(&self) -> impl Iterator<Item = &LinearRow> {
        self.affine_eq.iter().chain(&self.lin_eq)
    }

    /// Values of every constraint row at `d`, in row order.
    pub fn row_values(&self, d: &[f64]) -> Vec<f64> {
        self.lse_cons
            .iter()
            .map(|r| r.eval(d))
            .chain(self.linear_ineq_rows().map(|r| r.eval(d)))
            .chain(self.eq_rows().map(|r| r.eval(d)))
            .collect()
    }

    /// Objective of the relaxed problem at `(d, sigma)`.
    pub fn objective(&self, d: &[f64], sigma: &[f64]) -> f64 {
        let dv = DVector::from_column_slice(d);
        0.5 * dv.dot(&(&self.hessian * &dv))
            + self.grad0.dot(&dv)
            + self.slack_weight * sigma.iter().map(|s| s * s).sum::<f64>()
    }

    /// Smallest feasible slacks for a given step: `max(row, 0)` for
    /// inequalities and the row residual for equalities.
    pub fn implied_slacks(&self, d: &[f64]) -> Vec<f64> {
        let ni = self.n_ineq();
        self.row_values(d)
            .into_iter()
            .enumerate()
            .map(|(i, v)| if i < ni { v.max(0.0) } else { v })
            .collect()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let b = &self.hessian;
        b.nrows() == b.ncols()
            && (0..b.nrows()).all(|i| (0..i).all(|j| (b[(i, j)] - b[(j, i)]).abs() <= tol))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubproblemStatus {
    Optimal,
    MaxIter,
    Degenerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemSolution {
    pub d: Vec<f64>,
    /// One per row, `>= 0` for inequality rows.
    pub multipliers: Vec<f64>,
    /// One per row.
    pub sigma: Vec<f64>,
    /// `(lower, upper)` duals of the step box; zero when there is no box.
    pub bound_multipliers: Vec<(f64, f64)>,
    pub status: SubproblemStatus,
    pub kkt_residual: f64,
    pub newton_iterations: usize,
}

/// One Newton iterate, reported through the optional trace callback.
#[derive(Debug, Clone)]
pub struct NewtonTrace {
    pub iteration: usize,
    pub barrier: f64,
    pub residual: f64,
    pub step: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

enum IneqRow<'a> {
    Lse(&'a LseRow),
    Linear { row: &'a LinearRow, nz: Vec<usize> },
}

struct RowEval {
    value: f64,
    /// (index, partial) pairs.
    grad: Vec<(usize, f64)>,
    /// Row-major compact hessian over the indices of `grad` (lse rows only).
    hess: Option<Vec<f64>>,
}

impl IneqRow<'_> {
    fn eval(&self, d: &[f64], with_hessian: bool) -> RowEval {
        match self {
            IneqRow::Lse(r) => {
                let y: Vec<f64> = r.anchor.iter().zip(d).map(|(a, b)| a + b).collect();
                if with_hessian {
                    let e = r.form.eval_compact(&y);
                    RowEval {
                        value: e.value,
                        grad: r.form.support.iter().copied().zip(e.gradient).collect(),
                        hess: Some(e.hessian),
                    }
                } else {
                    RowEval {
                        value: r.form.value(&y),
                        grad: Vec::new(),
                        hess: None,
                    }
                }
            }
            IneqRow::Linear { row, nz } => RowEval {
                value: row.eval(d),
                grad: nz.iter().map(|&i| (i, row.grad[i])).collect(),
                hess: None,
            },
        }
    }

    fn value(&self, d: &[f64]) -> f64 {
        match self {
            IneqRow::Lse(r) => r.eval(d),
            IneqRow::Linear { row, .. } => row.eval(d),
        }
    }
}

fn nonzeros(v: &[f64]) -> Vec<usize> {
    v.iter()
        .enumerate()
        .filter(|(_, x)| **x != 0.0)
        .map(|(i, _)| i)
        .collect()
}

struct Problem<'a> {
    n: usize,
    rows: Vec<IneqRow<'a>>,
    /// B + 2K sum_eq c c'
    h_base: DMatrix<f64>,
    /// g + 2K sum_eq a c
    g_base: DVector<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    k: f64,
}

#[derive(Clone)]
struct Iterate {
    d: Vec<f64>,
    /// Relaxation slacks `sigma`.
    s: Vec<f64>,
    /// Row slacks: `row(d) - s + w = 0`, `w > 0`.
    w: Vec<f64>,
    lam: Vec<f64>,
    nu: Vec<f64>,
    zl: Vec<f64>,
    zu: Vec<f64>,
}

struct Residual {
    /// stationarity (d and slack blocks) infinity norm
    stationarity: f64,
    primal: f64,
    dual: f64,
    /// max |complementarity product - mu|
    complementarity: f64,
    norm2: f64,
    /// divisor for the dual-valued parts, max(1, largest dual / 100)
    scale: f64,
}

impl Residual {
    fn max(&self) -> f64 {
        (self.stationarity / self.scale)
            .max(self.primal)
            .max(self.dual / self.scale)
            .max(self.complementarity / self.scale)
    }
}

impl<'a> Problem<'a> {
    fn new(spec: &'a SubproblemSpec) -> Self {
        let n = spec.dim();
        let k = spec.slack_weight;
        let mut rows: Vec<IneqRow<'a>> = spec.lse_cons.iter().map(IneqRow::Lse).collect();
        rows.extend(spec.linear_ineq_rows().map(|row| IneqRow::Linear {
            row,
            nz: nonzeros(&row.grad),
        }));
        let mut h_base = spec.hessian.clone();
        let mut g_base = spec.grad0.clone();
        for row in spec.eq_rows() {
            let nz = nonzeros(&row.grad);
            for &i in &nz {
                g_base[i] += 2.0 * k * row.value * row.grad[i];
                for &j in &nz {
                    h_base[(i, j)] += 2.0 * k * row.grad[i] * row.grad[j];
                }
            }
        }
        let (lo, hi) = match &spec.step_bounds {
            Some(b) => b.iter().cloned().unzip(),
            None => (vec![f64::NEG_INFINITY; n], vec![f64::INFINITY; n]),
        };
        Self {
            n,
            rows,
            h_base,
            g_base,
            lo,
            hi,
            k,
        }
    }

    fn m(&self) -> usize {
        self.rows.len()
    }

    fn initial(&self, mu: f64) -> Iterate {
        let n = self.n;
        let d: Vec<f64> = (0..n)
            .map(|i| {
                let (lo, hi) = (self.lo[i], self.hi[i]);
                if lo.is_finite() && hi.is_finite() {
                    if lo < 0.0 && 0.0 < hi {
                        0.0_f64.clamp(lo + 0.01 * (hi - lo), hi - 0.01 * (hi - lo))
                    } else {
                        0.5 * (lo + hi)
                    }
                } else if lo.is_finite() {
                    0.0_f64.max(lo + 1e-3 * (1.0 + lo.abs()))
                } else if hi.is_finite() {
                    0.0_f64.min(hi - 1e-3 * (1.0 + hi.abs()))
                } else {
                    0.0
                }
            })
            .collect();
        let s: Vec<f64> = self
            .rows
            .iter()
            .map(|r| r.value(&d).max(0.0) + 1.0)
            .collect();
        let w: Vec<f64> = self
            .rows
            .iter()
            .zip(&s)
            .map(|(r, si)| si - r.value(&d))
            .collect();
        let lam = w.iter().map(|wi| mu / wi).collect();
        let nu = s.iter().map(|si| mu / si).collect();
        let zl = (0..n)
            .map(|i| {
                if self.lo[i].is_finite() {
                    mu / (d[i] - self.lo[i])
                } else {
                    0.0
                }
            })
            .collect();
        let zu = (0..n)
            .map(|i| {
                if self.hi[i].is_finite() {
                    mu / (self.hi[i] - d[i])
                } else {
                    0.0
                }
            })
            .collect();
        Iterate {
            d,
            s,
            w,
            lam,
            nu,
            zl,
            zu,
        }
    }

    /// Gradient of the relaxed objective in `d` (with the eliminated equalities).
    fn objective_grad(&self, d: &[f64]) -> DVector<f64> {
        let dv = DVector::from_column_slice(d);
        &self.h_base * dv + &self.g_base
    }

    fn residual(&self, it: &Iterate, mu: f64, evals: &[RowEval]) -> Residual {
        let mut rd = self.objective_grad(&it.d);
        for (ev, lam) in evals.iter().zip(&it.lam) {
            for &(i, gi) in &ev.grad {
                rd[i] += lam * gi;
            }
        }
        for i in 0..self.n {
            rd[i] += it.zu[i] - it.zl[i];
        }
        let mut stationarity = rd.amax();
        let mut norm2 = rd.norm_squared();
        let mut primal: f64 = 0.0;
        let mut dual: f64 = 0.0;
        let mut comp: f64 = 0.0;
        for (i, ev) in evals.iter().enumerate() {
            let rs = 2.0 * self.k * it.s[i] - it.lam[i] - it.nu[i];
            stationarity = stationarity.max(rs.abs());
            norm2 += rs * rs;
            let rp = ev.value - it.s[i] + it.w[i];
            primal = primal.max(rp.abs()).max(-it.s[i]).max(-it.w[i]);
            norm2 += rp * rp;
            dual = dual.max(-it.lam[i]).max(-it.nu[i]);
            let c1 = it.lam[i] * it.w[i] - mu;
            let c2 = it.nu[i] * it.s[i] - mu;
            comp = comp.max(c1.abs()).max(c2.abs());
            norm2 += c1 * c1 + c2 * c2;
        }
        for i in 0..self.n {
            if self.lo[i].is_finite() {
                let gap = it.d[i] - self.lo[i];
                primal = primal.max(-gap);
                dual = dual.max(-it.zl[i]);
                let c = it.zl[i] * gap - mu;
                comp = comp.max(c.abs());
                norm2 += c * c;
            }
            if self.hi[i].is_finite() {
                let gap = self.hi[i] - it.d[i];
                primal = primal.max(-gap);
                dual = dual.max(-it.zu[i]);
                let c = it.zu[i] * gap - mu;
                comp = comp.max(c.abs());
                norm2 += c * c;
            }
        }
        let largest = it
            .lam
            .iter()
            .chain(&it.nu)
            .chain(&it.zl)
            .chain(&it.zu)
            .fold(0.0_f64, |a, v| a.max(v.abs()));
        Residual {
            stationarity,
            primal,
            dual,
            complementarity: comp,
            norm2: norm2.sqrt(),
            scale: (largest / DUAL_SCALE_REF).max(1.0),
        }
    }

    fn strictly_feasible(&self, it: &Iterate) -> bool {
        it.s.iter().chain(&it.w).all(|v| *v > 0.0)
            && (0..self.n).all(|i| it.d[i] > self.lo[i] && it.d[i] < self.hi[i])
    }

    /// Newton direction for barrier `mu`, or `None` if the reduced system
    /// cannot be factored even after regularization.
    fn direction(&self, it: &Iterate, mu: f64, evals: &[RowEval]) -> Option<Iterate> {
        let n = self.n;
        let m = self.m();
        let k2 = 2.0 * self.k;
        let mut h = self.h_base.clone();
        let mut rhs = -self.objective_grad(&it.d);
        let mut w = vec![0.0; m];
        let mut dd = vec![0.0; m];
        let mut rho = vec![0.0; m];
        let mut rp = vec![0.0; m];
        for (i, ev) in evals.iter().enumerate() {
            rp[i] = ev.value - it.s[i] + it.w[i];
            w[i] = it.lam[i] / it.w[i];
            let v = it.nu[i] / it.s[i];
            dd[i] = k2 + w[i] + v;
            rho[i] = -k2 * it.s[i] + mu / it.w[i] + mu / it.s[i] + w[i] * rp[i];
            let coef = w[i] - w[i] * w[i] / dd[i];
            let lin = -mu / it.w[i] - w[i] * rp[i] + w[i] * rho[i] / dd[i];
            for (a, &(ia, ga)) in ev.grad.iter().enumerate() {
                rhs[ia] += lin * ga;
                for (b, &(ib, gb)) in ev.grad.iter().enumerate() {
                    let mut entry = coef * ga * gb;
                    if let Some(hess) = &ev.hess {
                        entry += it.lam[i] * hess[a * ev.grad.len() + b];
                    }
                    h[(ia, ib)] += entry;
                }
            }
        }
        for i in 0..n {
            if self.lo[i].is_finite() {
                let gap = it.d[i] - self.lo[i];
                h[(i, i)] += it.zl[i] / gap;
                rhs[i] += mu / gap;
            }
            if self.hi[i].is_finite() {
                let gap = self.hi[i] - it.d[i];
                h[(i, i)] += it.zu[i] / gap;
                rhs[i] -= mu / gap;
            }
        }
        let chol = match Cholesky::new(h.clone()) {
            Some(c) => c,
            None => {
                let scale = h.diagonal().amax().max(1.0);
                let reg = h + DMatrix::identity(n, n) * (REGULARIZATION * scale);
                Cholesky::new(reg)?
            }
        };
        let delta_d = chol.solve(&rhs);
        if delta_d.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let delta_d: Vec<f64> = delta_d.iter().copied().collect();
        let mut ds = vec![0.0; m];
        let mut dw = vec![0.0; m];
        let mut dlam = vec![0.0; m];
        let mut dnu = vec![0.0; m];
        for (i, ev) in evals.iter().enumerate() {
            let gd: f64 = ev.grad.iter().map(|&(j, g)| g * delta_d[j]).sum();
            ds[i] = (rho[i] + w[i] * gd) / dd[i];
            dlam[i] = mu / it.w[i] - it.lam[i] + w[i] * (rp[i] + gd - ds[i]);
            dw[i] = mu / it.lam[i] - it.w[i] - it.w[i] / it.lam[i] * dlam[i];
            dnu[i] = mu / it.s[i] - it.nu[i] - (it.nu[i] / it.s[i]) * ds[i];
        }
        let mut dzl = vec![0.0; n];
        let mut dzu = vec![0.0; n];
        for i in 0..n {
            if self.lo[i].is_finite() {
                let gap = it.d[i] - self.lo[i];
                dzl[i] = mu / gap - it.zl[i] - it.zl[i] / gap * delta_d[i];
            }
            if self.hi[i].is_finite() {
                let gap = self.hi[i] - it.d[i];
                dzu[i] = mu / gap - it.zu[i] + it.zu[i] / gap * delta_d[i];
            }
        }
        Some(Iterate {
            d: delta_d,
            s: ds,
            w: dw,
            lam: dlam,
            nu: dnu,
            zl: dzl,
            zu: dzu,
        })
    }

    /// Largest step keeping slacks, duals and box gaps positive, scaled by the
    /// fraction-to-boundary factor.
    fn max_step(&self, it: &Iterate, dir: &Iterate) -> f64 {
        let mut alpha: f64 = 1.0;
        let mut limit = |x: f64, dx: f64| {
            if dx < 0.0 {
                alpha = alpha.min(-FRACTION_TO_BOUNDARY * x / dx);
            }
        };
        for i in 0..self.m() {
            limit(it.s[i], dir.s[i]);
            limit(it.w[i], dir.w[i]);
            limit(it.lam[i], dir.lam[i]);
            limit(it.nu[i], dir.nu[i]);
        }
        for i in 0..self.n {
            if self.lo[i].is_finite() {
                limit(it.d[i] - self.lo[i], dir.d[i]);
                limit(it.zl[i], dir.zl[i]);
            }
            if self.hi[i].is_finite() {
                limit(self.hi[i] - it.d[i], -dir.d[i]);
                limit(it.zu[i], dir.zu[i]);
            }
        }
        alpha
    }

    fn evals(&self, d: &[f64]) -> Vec<RowEval> {
        self.rows.iter().map(|r| r.eval(d, true)).collect()
    }
}

fn axpy(it: &Iterate, dir: &Iterate, alpha: f64) -> Iterate {
    let f = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + alpha * y).collect() };
    Iterate {
        d: f(&it.d, &dir.d),
        s: f(&it.s, &dir.s),
        w: f(&it.w, &dir.w),
        lam: f(&it.lam, &dir.lam),
        nu: f(&it.nu, &dir.nu),
        zl: f(&it.zl, &dir.zl),
        zu: f(&it.zu, &dir.zu),
    }
}

pub fn solve_subproblem(spec: &SubproblemSpec, tol: f64, max_newton: usize) -> SubproblemSolution {
    solve_subproblem_traced(spec, tol, max_newton, None)
}

pub fn solve_subproblem_traced(
    spec: &SubproblemSpec,
    tol: f64,
    max_newton: usize,
    mut trace: Option<&mut dyn FnMut(&NewtonTrace)>,
) -> SubproblemSolution {
    let prob = Problem::new(spec);
    let has_barrier = prob.m() > 0
        || prob.lo.iter().any(|v| v.is_finite())
        || prob.hi.iter().any(|v| v.is_finite());
    let mut mu = if has_barrier { 1.0 } else { 0.0 };
    let mu_final = 0.01 * tol;
    let mut it = prob.initial(mu);
    let mut newton = 0;
    let mut status = SubproblemStatus::MaxIter;

    'outer: loop {
        // Inner Newton loop at fixed barrier.
        loop {
            let evals = prob.evals(&it.d);
            let res = prob.residual(&it, mu, &evals);
            if mu <= mu_final {
                if prob.residual(&it, 0.0, &evals).max() <= tol {
                    status = SubproblemStatus::Optimal;
                    break 'outer;
                }
            } else if res.max() <= (10.0 * mu).max(tol) {
                break;
            }
            if newton >= max_newton {
                break 'outer;
            }
            newton += 1;
            let Some(dir) = prob.direction(&it, mu, &evals) else {
                status = SubproblemStatus::Degenerate;
                break 'outer;
            };
            let mut alpha = prob.max_step(&it, &dir);
            let mut accepted = None;
            for _ in 0..MAX_BACKTRACKS {
                let trial = axpy(&it, &dir, alpha);
                if prob.strictly_feasible(&trial) {
                    let tev = prob.evals(&trial.d);
                    let tres = prob.residual(&trial, mu, &tev);
                    if tres.norm2 <= (1.0 - 0.01 * alpha) * res.norm2 || !has_barrier {
                        accepted = Some(trial);
                        break;
                    }
                }
                alpha *= BACKTRACK;
            }
            if let Some(t) = trace.as_deref_mut() {
                t(&NewtonTrace {
                    iteration: newton,
                    barrier: mu,
                    residual: res.max(),
                    step: if accepted.is_some() { alpha } else { 0.0 },
                });
            }
            match accepted {
                Some(trial) => it = trial,
                None => {
                    // Stalled at this barrier level; a smaller barrier may
                    // still make progress, otherwise give up.
                    if mu <= mu_final {
                        break 'outer;
                    }
                    break;
                }
            }
        }
        if mu <= mu_final {
            continue;
        }
        mu = (mu / BARRIER_REDUCTION).max(mu_final);
        if !has_barrier {
            mu = 0.0;
        }
    }

    let ni = prob.m();
    let mut multipliers = it.lam.clone();
    let mut sigma = it.s.clone();
    for row in spec.eq_rows() {
        let r = row.eval(&it.d);
        sigma.push(r);
        multipliers.push(2.0 * spec.slack_weight * r);
    }
    debug_assert_eq!(multipliers.len(), ni + spec.n_eq());
    let bound_multipliers = it.zl.iter().copied().zip(it.zu.iter().copied()).collect();
    let mut sol = SubproblemSolution {
        d: it.d,
        multipliers,
        sigma,
        bound_multipliers,
        status,
        kkt_residual: 0.0,
        newton_iterations: newton,
    };
    sol.kkt_residual = kkt_residual(spec, &sol);
    if status == SubproblemStatus::Optimal && sol.kkt_residual > tol {
        sol.status = SubproblemStatus::MaxIter;
    }
    sol
}

/// Unperturbed KKT residual of a candidate solution: the max of the
/// stationarity infinity-norm, primal infeasibility, dual infeasibility and
/// complementarity, with the dual-valued parts divided by max(1, largest
/// dual / 100). The duals of `sigma >= 0` are recovered from the slack
/// stationarity condition.
pub fn kkt_residual(spec: &SubproblemSpec, sol: &SubproblemSolution) -> f64 {
    let prob = Problem::new(spec);
    let ni = prob.m();
    let n = prob.n;
    if sol.d.len() != n || sol.multipliers.len() != spec.n_rows() || sol.sigma.len() != spec.n_rows() {
        return f64::INFINITY;
    }
    let k2 = 2.0 * spec.slack_weight;
    let s = sol.sigma[..ni].to_vec();
    let lam = sol.multipliers[..ni].to_vec();
    let nu: Vec<f64> = s.iter().zip(&lam).map(|(si, li)| k2 * si - li).collect();
    let (zl, zu): (Vec<f64>, Vec<f64>) = if sol.bound_multipliers.len() == n {
        sol.bound_multipliers.iter().cloned().unzip()
    } else {
        (vec![0.0; n], vec![0.0; n])
    };
    // Row slacks are implied by d and sigma; a negative one is a violation.
    let w: Vec<f64> = prob
        .rows
        .iter()
        .zip(&s)
        .map(|(r, si)| si - r.value(&sol.d))
        .collect();
    let it = Iterate {
        d: sol.d.clone(),
        s,
        w,
        lam,
        nu,
        zl,
        zu,
    };
    let evals = prob.evals(&it.d);
    let res = prob.residual(&it, 0.0, &evals);
    // Equality-row consistency: reported slack and multiplier must match the
    // eliminated form.
    let mut eq_gap: f64 = 0.0;
    for (j, row) in spec.eq_rows().enumerate() {
        let r = row.eval(&sol.d);
        eq_gap = eq_gap
            .max((sol.sigma[ni + j] - r).abs())
            .max((sol.multipliers[ni + j] - k2 * r).abs() / k2.max(1.0));
    }
    res.max().max(eq_gap)
}
