//! Outer iterations for SQP, LSQP and SLCP.
//!
//! All three share one loop: evaluate the problem at `x_k`, build a convex
//! sub-problem, solve it, run an exact-penalty line search, relax the
//! multipliers toward the sub-problem estimates and apply a damped BFGS update.
//! LSQP and SLCP work in `y = log x`; SQP works on `x` directly.

use std::collections::VecDeque;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::model::{BlackBoxFn, ModelError, Monomial, Posynomial, StandardFormProblem};
use crate::subsolver::{
    self, LinearRow, LseRow, SubproblemSolution, SubproblemSpec, SubproblemStatus,
};
use crate::transform::posynomial_to_lse;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Sqp,
    Lsqp,
    Slcp,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Sqp, Algorithm::Lsqp, Algorithm::Slcp];

    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Sqp => "sqp",
            Algorithm::Lsqp => "lsqp",
            Algorithm::Slcp => "slcp",
        }
    }

    pub fn log_space(&self) -> bool {
        !matches!(self, Algorithm::Sqp)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sqp" => Ok(Algorithm::Sqp),
            "lsqp" => Ok(Algorithm::Lsqp),
            "slcp" => Ok(Algorithm::Slcp),
            other => Err(format!("unknown algorithm '{other}' (expected sqp, lsqp or slcp)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchOptions {
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    pub alpha_min: f64,
    /// Penalty parameter is kept at least `margin * max |multiplier|`.
    pub penalty_margin: f64,
    /// Step halvings allowed to restore positivity of function values.
    pub max_positivity_halvings: usize,
    /// Number of recent merit values the Armijo test compares against
    /// (Grippo-Lampariello-Lucidi). 1 gives the monotone search.
    pub nonmonotone_memory: usize,
}

impl Default for LineSearchOptions {
    fn default() -> Self {
        Self {
            armijo: 1e-4,
            backtrack: 0.5,
            max_backtracks: 30,
            alpha_min: 1e-10,
            penalty_margin: 1.1,
            max_positivity_halvings: 30,
            nonmonotone_memory: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub algorithm: Algorithm,
    pub eps_gl: f64,
    pub eps_dx: f64,
    pub max_iter: usize,
    pub slack_weight: f64,
    pub sub_tol: f64,
    pub max_newton: usize,
    pub line_search: LineSearchOptions,
}

impl SolveOptions {
    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            eps_gl: 1e-6,
            eps_dx: 1e-8,
            max_iter: 500,
            slack_weight: subsolver::DEFAULT_SLACK_WEIGHT,
            sub_tol: subsolver::DEFAULT_TOL,
            max_newton: subsolver::DEFAULT_MAX_NEWTON,
            line_search: LineSearchOptions::default(),
        }
    }

    fn check(&self) -> Result<(), SolveError> {
        let ls = &self.line_search;
        let ok = self.eps_gl > 0.0
            && self.eps_dx > 0.0
            && self.slack_weight > 0.0
            && self.sub_tol > 0.0
            && ls.armijo > 0.0
            && ls.armijo < 1.0
            && ls.backtrack > 0.0
            && ls.backtrack < 1.0
            && ls.alpha_min > 0.0
            && ls.penalty_margin >= 1.0;
        if ok {
            Ok(())
        } else {
            Err(SolveError::Options(format!("{self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Termination {
    GradLagrangian,
    StepSize,
    MaxIter,
    PositivityFailure,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::GradLagrangian => "grad_lagrangian",
            Termination::StepSize => "step_size",
            Termination::MaxIter => "max_iter",
            Termination::PositivityFailure => "positivity_failure",
        }
    }

    pub fn converged(&self) -> bool {
        matches!(self, Termination::GradLagrangian | Termination::StepSize)
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Termination {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "grad_lagrangian" => Ok(Termination::GradLagrangian),
            "step_size" => Ok(Termination::StepSize),
            "max_iter" => Ok(Termination::MaxIter),
            "positivity_failure" => Ok(Termination::PositivityFailure),
            other => Err(format!("unknown termination '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationCheck {
    Continue,
    GradLagrangian,
    StepSize,
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("start point has {found} entries, problem has {expected} variables")]
    Dimension { expected: usize, found: usize },
    #[error("start value x[{index}] = {value} outside [{lower}, {upper}]")]
    OutOfBounds {
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("cannot evaluate problem at the start point: {0}")]
    Start(ModelError),
    #[error("invalid solver options: {0}")]
    Options(String),
}

/// One row of the iteration history.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    /// Objective at the new iterate.
    pub objective: f64,
    /// `||x_{k+1} - x_k||_2`.
    pub step_norm: f64,
    pub alpha: f64,
    /// Merit value at the new iterate.
    pub merit: f64,
    pub max_violation: f64,
    pub grad_lagrangian: f64,
    pub sub_status: SubproblemStatus,
    pub sub_kkt_residual: f64,
    pub newton_iterations: usize,
    pub line_search_failed: bool,
    pub termination: Option<Termination>,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub x_star: Vec<f64>,
    pub f_star: f64,
    pub iterations: usize,
    pub termination: Termination,
    /// Multipliers in row order (posynomial, monomial and black-box
    /// inequalities, then monomial and black-box equalities).
    pub multipliers: Vec<f64>,
    pub grad_lagrangian: f64,
    pub history: Vec<IterationRecord>,
}

impl SolveResult {
    /// Writes the history as CSV.
    pub fn write_history_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "iter,f,step_norm,alpha,merit,max_violation,grad_lagrangian,termination")?;
        for r in &self.history {
            writeln!(
                w,
                "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{}",
                r.iter,
                r.objective,
                r.step_norm,
                r.alpha,
                r.merit,
                r.max_violation,
                r.grad_lagrangian,
                r.termination.map(|t| t.as_str()).unwrap_or("")
            )?;
        }
        Ok(())
    }
}

/// Constraint function in a fixed row order.
#[derive(Clone, Copy)]
enum Row<'a> {
    Posy(&'a Posynomial),
    Mono(&'a Monomial),
    BlackBox(&'a BlackBoxFn),
}

impl Row<'_> {
    fn eval(&self, x: &[f64], strict: bool) -> Result<f64, ModelError> {
        match self {
            Row::Posy(p) => p.eval(x),
            Row::Mono(m) => m.eval(x),
            Row::BlackBox(b) if strict => b.eval(x),
            Row::BlackBox(b) => b.eval_raw(x),
        }
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        match self {
            Row::Posy(p) => p.gradient(x),
            Row::Mono(m) => m.gradient(x),
            Row::BlackBox(b) => b.gradient(x),
        }
    }

    fn is_black_box(&self) -> bool {
        matches!(self, Row::BlackBox(_))
    }
}

/// Rows in multiplier order together with the number of inequality rows.
fn rows(problem: &StandardFormProblem) -> (Vec<Row<'_>>, usize) {
    let mut rows: Vec<Row> = problem.posy_ineq.iter().map(|r| Row::Posy(&r.body)).collect();
    rows.extend(problem.mono_ineq.iter().map(|r| Row::Mono(&r.body)));
    rows.extend(problem.bb_ineq.iter().map(|r| Row::BlackBox(&r.body)));
    let n_ineq = rows.len();
    rows.extend(problem.mono_eq.iter().map(|r| Row::Mono(&r.body)));
    rows.extend(problem.bb_eq.iter().map(|r| Row::BlackBox(&r.body)));
    (rows, n_ineq)
}

/// Labels of the constraint rows in multiplier order.
pub fn row_labels(problem: &StandardFormProblem) -> Vec<String> {
    problem
        .posy_ineq
        .iter()
        .map(|r| r.label.clone())
        .chain(problem.mono_ineq.iter().map(|r| r.label.clone()))
        .chain(problem.bb_ineq.iter().map(|r| r.label.clone()))
        .chain(problem.mono_eq.iter().map(|r| r.label.clone()))
        .chain(problem.bb_eq.iter().map(|r| r.label.clone()))
        .collect()
}

/// Function values and x-space gradients at one point.
#[derive(Debug, Clone)]
pub struct PointEval {
    pub f: f64,
    pub grad_f: Vec<f64>,
    /// Raw constraint values in row order.
    pub values: Vec<f64>,
    pub grads: Vec<Vec<f64>>,
    pub n_ineq: usize,
}

impl PointEval {
    /// Evaluates everything at `x`. With `strict`, black-box values must be
    /// positive (needed for the log transform) and so must the objective.
    pub fn at(problem: &StandardFormProblem, x: &[f64], strict: bool) -> Result<Self, ModelError> {
        let (rows, n_ineq) = rows(problem);
        let f = problem.objective.eval(x)?;
        if strict && f <= 0.0 {
            return Err(ModelError::NonPositiveValue {
                name: "objective".into(),
                value: f,
            });
        }
        let grad_f = problem.objective.gradient(x)?;
        let mut values = Vec::with_capacity(rows.len());
        let mut grads = Vec::with_capacity(rows.len());
        for r in &rows {
            values.push(r.eval(x, strict)?);
            grads.push(r.gradient(x)?);
        }
        Ok(Self {
            f,
            grad_f,
            values,
            grads,
            n_ineq,
        })
    }

    /// Largest constraint violation in natural units (`c - 1` or `|c - 1|`).
    pub fn max_violation(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(i, c)| {
                if i < self.n_ineq {
                    (c - 1.0).max(0.0)
                } else {
                    (c - 1.0).abs()
                }
            })
            .fold(0.0, f64::max)
    }

    /// Row value in the algorithm's space: `log c` or `c - 1`.
    fn row_value(&self, i: usize, log_space: bool) -> f64 {
        if log_space {
            self.values[i].ln()
        } else {
            self.values[i] - 1.0
        }
    }

    fn row_grad(&self, i: usize, x: &[f64], log_space: bool) -> Vec<f64> {
        if log_space {
            log_grad(self.values[i], &self.grads[i], x)
        } else {
            self.grads[i].clone()
        }
    }

    fn objective_value(&self, log_space: bool) -> f64 {
        if log_space {
            self.f.ln()
        } else {
            self.f
        }
    }

    fn objective_grad(&self, x: &[f64], log_space: bool) -> Vec<f64> {
        if log_space {
            log_grad(self.f, &self.grad_f, x)
        } else {
            self.grad_f.clone()
        }
    }

    /// Exact-penalty merit `obj + nu * sum(violations)` in the given space.
    pub fn merit(&self, nu: f64, log_space: bool) -> f64 {
        self.objective_value(log_space) + nu * self.violation_sum(log_space)
    }

    fn merit_parts(&self, log_space: bool) -> (f64, f64) {
        (self.objective_value(log_space), self.violation_sum(log_space))
    }

    fn violation_sum(&self, log_space: bool) -> f64 {
        (0..self.values.len())
            .map(|i| {
                let v = self.row_value(i, log_space);
                if i < self.n_ineq {
                    v.max(0.0)
                } else {
                    v.abs()
                }
            })
            .sum()
    }
}

fn log_grad(value: f64, grad: &[f64], x: &[f64]) -> Vec<f64> {
    grad.iter().zip(x).map(|(g, xi)| xi * g / value).collect()
}

/// Everything the outer loop carries between iterations.
#[derive(Debug, Clone)]
pub struct IterateState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub mu: Vec<f64>,
    /// Multipliers of the lower and upper variable bounds.
    pub bound_mu: Vec<(f64, f64)>,
    pub b: DMatrix<f64>,
    pub eval: PointEval,
    pub iter: usize,
    /// Current exact-penalty parameter.
    pub penalty: f64,
    /// `(objective, violation sum)` of the most recent iterates, newest last.
    recent: VecDeque<(f64, f64)>,
}

impl IterateState {
    pub fn new(problem: &StandardFormProblem, x0: &[f64], algorithm: Algorithm) -> Result<Self, SolveError> {
        let n = problem.n_vars();
        if x0.len() != n {
            return Err(SolveError::Dimension {
                expected: n,
                found: x0.len(),
            });
        }
        for (i, v) in problem.variables.iter().enumerate() {
            if !(x0[i] >= v.lower && x0[i] <= v.upper) {
                return Err(SolveError::OutOfBounds {
                    index: i,
                    value: x0[i],
                    lower: v.lower,
                    upper: v.upper,
                });
            }
        }
        let eval = PointEval::at(problem, x0, algorithm.log_space()).map_err(SolveError::Start)?;
        let recent = VecDeque::from([eval.merit_parts(algorithm.log_space())]);
        Ok(Self {
            x: x0.to_vec(),
            y: x0.iter().map(|v| v.ln()).collect(),
            mu: vec![1.0; eval.values.len()],
            bound_mu: vec![(0.0, 0.0); n],
            b: DMatrix::identity(n, n),
            eval,
            iter: 0,
            penalty: 0.0,
            recent,
        })
    }
}

/// Builds the convex sub-problem at the current iterate.
///
/// SLCP keeps posynomials as log-sum-exp rows and monomials as exact affine
/// rows; LSQP linearizes everything in log space; SQP linearizes `c(x) - 1`
/// in `x`. Variable bounds become hard limits on the step.
pub fn build_subproblem(
    state: &IterateState,
    problem: &StandardFormProblem,
    algorithm: Algorithm,
    slack_weight: f64,
) -> SubproblemSpec {
    let log_space = algorithm.log_space();
    let x = &state.x;
    let ev = &state.eval;
    let grad0 = DVector::from_vec(ev.objective_grad(x, log_space));
    let mut spec = SubproblemSpec::unconstrained(grad0, state.b.clone());
    spec.slack_weight = slack_weight;
    let (rows, n_ineq) = rows(problem);
    for (i, row) in rows.iter().enumerate() {
        let eq = i >= n_ineq;
        if algorithm == Algorithm::Slcp {
            match row {
                Row::Posy(p) => {
                    spec.lse_cons.push(LseRow {
                        form: posynomial_to_lse(p),
                        anchor: state.y.clone(),
                    });
                    continue;
                }
                Row::Mono(m) => {
                    let lin = LinearRow::new(ev.values[i].ln(), m.exponents.clone());
                    if eq {
                        spec.affine_eq.push(lin);
                    } else {
                        spec.affine_ineq.push(lin);
                    }
                    continue;
                }
                Row::BlackBox(_) => {}
            }
        }
        let lin = LinearRow::new(ev.row_value(i, log_space), ev.row_grad(i, x, log_space));
        if eq {
            spec.lin_eq.push(lin);
        } else {
            spec.lin_ineq.push(lin);
        }
    }
    spec.step_bounds = Some(
        problem
            .variables
            .iter()
            .enumerate()
            .map(|(i, v)| {
                if log_space {
                    (v.lower.ln() - state.y[i], v.upper.ln() - state.y[i])
                } else {
                    (v.lower - x[i], v.upper - x[i])
                }
            })
            .collect(),
    );
    spec
}

/// Gradient of the Lagrangian at `eval` with multipliers `mu`.
///
/// With `reduced`, only black-box rows contribute (the rows SLCP cannot
/// represent exactly); bound multipliers are added when given.
fn lagrangian_gradient(
    eval: &PointEval,
    x: &[f64],
    problem: &StandardFormProblem,
    mu: &[f64],
    bound_mu: Option<&[(f64, f64)]>,
    log_space: bool,
    reduced: bool,
) -> Vec<f64> {
    let (rows, _) = rows(problem);
    let mut g = eval.objective_grad(x, log_space);
    for (i, row) in rows.iter().enumerate() {
        if reduced && !row.is_black_box() {
            continue;
        }
        if mu[i] == 0.0 {
            continue;
        }
        let scale = if log_space { mu[i] / eval.values[i] } else { mu[i] };
        for (j, gj) in eval.grads[i].iter().enumerate() {
            if *gj != 0.0 {
                g[j] += scale * gj * if log_space { x[j] } else { 1.0 };
            }
        }
    }
    if let Some(bm) = bound_mu {
        for (gj, (zl, zu)) in g.iter_mut().zip(bm) {
            *gj += zu - zl;
        }
    }
    g
}

/// Gradient used for the BFGS pairs: the reduced Lagrangian for SLCP and the
/// full Lagrangian for LSQP and SQP.
pub fn reduced_lagrangian_gradient(
    state: &IterateState,
    problem: &StandardFormProblem,
    algorithm: Algorithm,
) -> Vec<f64> {
    lagrangian_gradient(
        &state.eval,
        &state.x,
        problem,
        &state.mu,
        None,
        algorithm.log_space(),
        algorithm == Algorithm::Slcp,
    )
}

/// Full Lagrangian gradient including the variable-bound multipliers; this is
/// what the termination test looks at.
pub fn full_lagrangian_gradient(
    state: &IterateState,
    problem: &StandardFormProblem,
    algorithm: Algorithm,
) -> Vec<f64> {
    lagrangian_gradient(
        &state.eval,
        &state.x,
        problem,
        &state.mu,
        Some(&state.bound_mu),
        algorithm.log_space(),
        false,
    )
}

/// Damped BFGS update of `b` with step `s` and gradient change `z`.
///
/// `r = theta z + (1 - theta) B s` with `theta = 1` when `s'z >= 0.2 s'Bs`
/// and `0.8 s'Bs / (s'Bs - s'z)` otherwise, so `s'r >= 0.2 s'Bs > 0`.
pub fn damped_bfgs_update(b: &DMatrix<f64>, s: &[f64], z: &[f64]) -> DMatrix<f64> {
    let sv = DVector::from_column_slice(s);
    if sv.norm() < 1e-14 {
        return b.clone();
    }
    let zv = DVector::from_column_slice(z);
    let bs = b * &sv;
    let sbs = sv.dot(&bs);
    let sz = sv.dot(&zv);
    if !(sbs > 0.0) || !sz.is_finite() {
        return b.clone();
    }
    let theta = if sz >= 0.2 * sbs { 1.0 } else { 0.8 * sbs / (sbs - sz) };
    let r = &zv * theta + &bs * (1.0 - theta);
    let sr = sv.dot(&r);
    if !(sr > 0.0) {
        return b.clone();
    }
    let mut out = b - (&bs * bs.transpose()) / sbs + (&r * r.transpose()) / sr;
    // Round-off leaves tiny asymmetries; keep the matrix exactly symmetric.
    let t = out.transpose();
    out = (&out + t) * 0.5;
    out
}

pub fn check_termination(grad_l: &[f64], dx: &[f64], eps_gl: f64, eps_dx: f64) -> TerminationCheck {
    let gl = grad_l.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let step = dx.iter().map(|v| v * v).sum::<f64>().sqrt();
    if gl < eps_gl {
        TerminationCheck::GradLagrangian
    } else if step < eps_dx {
        TerminationCheck::StepSize
    } else {
        TerminationCheck::Continue
    }
}

/// Result of a line search.
#[derive(Debug, Clone)]
pub struct LineSearchOutcome {
    pub alpha: f64,
    /// Evaluation at the accepted point; `None` when no positive point was
    /// found within the halving budget.
    pub eval: Option<PointEval>,
    pub merit: f64,
    /// True when Armijo decrease was never met and `alpha_min` was taken.
    pub failed: bool,
}

fn trial_point(state: &IterateState, d: &[f64], alpha: f64, log_space: bool) -> Vec<f64> {
    trial_point_from(&state.x, &state.y, d, alpha, log_space)
}

fn trial_point_from(x: &[f64], y: &[f64], d: &[f64], alpha: f64, log_space: bool) -> Vec<f64> {
    if log_space {
        y.iter().zip(d).map(|(yi, di)| (yi + alpha * di).exp()).collect()
    } else {
        x.iter().zip(d).map(|(xi, di)| xi + alpha * di).collect()
    }
}

/// Backtracking line search on the exact-penalty merit
/// `phi = obj + nu * sum(violations)` in the algorithm's space.
///
/// `predicted` is the first-order change of the merit along `d` as given by
/// the sub-problem model. The step is first halved until every function can
/// be evaluated (and, in log space, is positive), then backtracked for
/// Armijo decrease.
pub fn merit_line_search(
    state: &IterateState,
    problem: &StandardFormProblem,
    d: &[f64],
    predicted: f64,
    algorithm: Algorithm,
    opts: &LineSearchOptions,
) -> LineSearchOutcome {
    let log_space = algorithm.log_space();
    let nu = state.penalty;
    let phi0 = state.eval.merit(nu, log_space);
    let phi_ref = state
        .recent
        .iter()
        .map(|(o, v)| o + nu * v)
        .fold(phi0, f64::max);
    let mut alpha = 1.0;
    let mut halvings = 0;
    let mut first = None;
    loop {
        let x = trial_point(state, d, alpha, log_space);
        if x.iter().all(|v| *v > 0.0 && v.is_finite()) {
            if let Ok(ev) = PointEval::at(problem, &x, log_space) {
                first = Some(ev);
                break;
            }
        }
        if halvings >= opts.max_positivity_halvings {
            break;
        }
        halvings += 1;
        alpha *= 0.5;
    }
    let Some(mut ev) = first else {
        return LineSearchOutcome {
            alpha: 0.0,
            eval: None,
            merit: phi0,
            failed: true,
        };
    };
    for _ in 0..opts.max_backtracks {
        let phi = ev.merit(nu, log_space);
        let accept = if predicted < 0.0 {
            phi <= phi_ref + opts.armijo * alpha * predicted
        } else {
            phi < phi_ref
        };
        if accept {
            return LineSearchOutcome {
                alpha,
                eval: Some(ev),
                merit: phi,
                failed: false,
            };
        }
        // Backtrack, skipping points that cannot be evaluated.
        loop {
            alpha *= opts.backtrack;
            if alpha < opts.alpha_min {
                break;
            }
            let x = trial_point(state, d, alpha, log_space);
            if let Ok(e) = PointEval::at(problem, &x, log_space) {
                ev = e;
                break;
            }
        }
        if alpha < opts.alpha_min {
            break;
        }
    }
    let alpha = opts.alpha_min;
    let x = trial_point(state, d, alpha, log_space);
    match PointEval::at(problem, &x, log_space) {
        Ok(e) => {
            let merit = e.merit(nu, log_space);
            LineSearchOutcome {
                alpha,
                eval: Some(e),
                merit,
                failed: true,
            }
        }
        Err(_) => LineSearchOutcome {
            alpha: 0.0,
            eval: None,
            merit: phi0,
            failed: true,
        },
    }
}

/// Predicted first-order merit change of the sub-problem step.
fn predicted_merit_change(spec: &SubproblemSpec, d: &[f64], nu: f64) -> f64 {
    let ni = spec.n_ineq();
    let viol = |vals: Vec<f64>| -> f64 {
        vals.into_iter()
            .enumerate()
            .map(|(i, v)| if i < ni { v.max(0.0) } else { v.abs() })
            .sum()
    };
    let zero = vec![0.0; d.len()];
    spec.grad0.iter().zip(d).map(|(g, di)| g * di).sum::<f64>()
        + nu * (viol(spec.row_values(d)) - viol(spec.row_values(&zero)))
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |a, x| a.max(x.abs()))
}

/// Per-iteration observer, e.g. for printing a trace.
pub type IterationObserver<'a> = &'a mut dyn FnMut(&IterationRecord, &IterateState);

pub fn solve(problem: &StandardFormProblem, x0: &[f64], opts: &SolveOptions) -> Result<SolveResult, SolveError> {
    solve_observed(problem, x0, opts, None)
}

pub fn solve_observed(
    problem: &StandardFormProblem,
    x0: &[f64],
    opts: &SolveOptions,
    mut observer: Option<IterationObserver<'_>>,
) -> Result<SolveResult, SolveError> {
    opts.check()?;
    let algorithm = opts.algorithm;
    let log_space = algorithm.log_space();
    let mut state = IterateState::new(problem, x0, algorithm)?;
    let mut history = Vec::new();
    let mut termination = Termination::MaxIter;
    let mut grad_l = inf_norm(&full_lagrangian_gradient(&state, problem, algorithm));
    // In x-space the multipliers carry the units of the objective, and so
    // does the slack bias lambda / 2K; scale K to match. Log-space
    // objectives are already scale-free.
    let slack_weight = if log_space {
        opts.slack_weight
    } else {
        opts.slack_weight * state.eval.f.abs().max(1.0)
    };

    while state.iter < opts.max_iter {
        state.iter += 1;
        let spec = build_subproblem(&state, problem, algorithm, slack_weight);
        let sol: SubproblemSolution = subsolver::solve_subproblem(&spec, opts.sub_tol, opts.max_newton);
        if sol.status != SubproblemStatus::Optimal {
            log::debug!(
                "{} iter {}: sub-problem {:?}, residual {:.3e}",
                problem.name,
                state.iter,
                sol.status,
                sol.kkt_residual
            );
        }
        let d: Vec<f64> = if sol.d.iter().all(|v| v.is_finite()) {
            sol.d.clone()
        } else {
            vec![0.0; spec.dim()]
        };

        let mu_qp = &sol.multipliers;
        let mu_max = inf_norm(mu_qp);
        // Powell's rule: never below the current estimate, but allowed to
        // relax toward it so that one poor early estimate does not stick.
        let target = opts.line_search.penalty_margin * mu_max;
        state.penalty = target.max(0.5 * (state.penalty + target));
        let predicted = predicted_merit_change(&spec, &d, state.penalty);
        let ls = merit_line_search(&state, problem, &d, predicted, algorithm, &opts.line_search);
        let Some(new_eval) = ls.eval else {
            termination = Termination::PositivityFailure;
            history.push(IterationRecord {
                iter: state.iter,
                objective: state.eval.f,
                step_norm: 0.0,
                alpha: 0.0,
                merit: ls.merit,
                max_violation: state.eval.max_violation(),
                grad_lagrangian: grad_l,
                sub_status: sol.status,
                sub_kkt_residual: sol.kkt_residual,
                newton_iterations: sol.newton_iterations,
                line_search_failed: true,
                termination: Some(termination),
            });
            break;
        };
        let alpha = ls.alpha;

        // Multiplier relaxation toward the sub-problem estimates.
        for (m, q) in state.mu.iter_mut().zip(mu_qp) {
            *m += alpha * (q - *m);
        }
        for (bm, q) in state.bound_mu.iter_mut().zip(&sol.bound_multipliers) {
            bm.0 += alpha * (q.0 - bm.0);
            bm.1 += alpha * (q.1 - bm.1);
        }

        // BFGS pair from gradients at both points with the new multipliers.
        let g_old = reduced_lagrangian_gradient(&state, problem, algorithm);
        let x_old = std::mem::take(&mut state.x);
        let y_old = std::mem::take(&mut state.y);
        let x_new = trial_point_from(&x_old, &y_old, &d, alpha, log_space);
        state.y = x_new.iter().map(|v| v.ln()).collect();
        state.x = x_new;
        state.eval = new_eval;
        state.recent.push_back(state.eval.merit_parts(log_space));
        while state.recent.len() > opts.line_search.nonmonotone_memory.max(1) {
            state.recent.pop_front();
        }
        let g_new = reduced_lagrangian_gradient(&state, problem, algorithm);
        let s: Vec<f64> = if log_space {
            state.y.iter().zip(&y_old).map(|(a, b)| a - b).collect()
        } else {
            state.x.iter().zip(&x_old).map(|(a, b)| a - b).collect()
        };
        let z: Vec<f64> = g_new.iter().zip(&g_old).map(|(a, b)| a - b).collect();
        if z.iter().all(|v| v.is_finite()) {
            let updated = damped_bfgs_update(&state.b, &s, &z);
            state.b = if updated.clone().cholesky().is_some() {
                updated
            } else {
                log::debug!("{} iter {}: BFGS lost definiteness, resetting", problem.name, state.iter);
                DMatrix::identity(s.len(), s.len())
            };
        }

        let gl = full_lagrangian_gradient(&state, problem, algorithm);
        grad_l = inf_norm(&gl);
        let dx: Vec<f64> = state.x.iter().zip(&x_old).map(|(a, b)| a - b).collect();
        let check = check_termination(&gl, &dx, opts.eps_gl, opts.eps_dx);
        let term = match check {
            TerminationCheck::Continue => None,
            TerminationCheck::GradLagrangian => Some(Termination::GradLagrangian),
            TerminationCheck::StepSize => Some(Termination::StepSize),
        };
        let record = IterationRecord {
            iter: state.iter,
            objective: state.eval.f,
            step_norm: dx.iter().map(|v| v * v).sum::<f64>().sqrt(),
            alpha,
            merit: state.eval.merit(state.penalty, log_space),
            max_violation: state.eval.max_violation(),
            grad_lagrangian: grad_l,
            sub_status: sol.status,
            sub_kkt_residual: sol.kkt_residual,
            newton_iterations: sol.newton_iterations,
            line_search_failed: ls.failed,
            termination: term,
        };
        if let Some(obs) = observer.as_deref_mut() {
            obs(&record, &state);
        }
        history.push(record);
        if let Some(t) = term {
            termination = t;
            break;
        }
    }
    if termination == Termination::MaxIter {
        if let Some(last) = history.last_mut() {
            last.termination = Some(Termination::MaxIter);
        }
    }
    Ok(SolveResult {
        f_star: state.eval.f,
        x_star: state.x,
        iterations: state.iter,
        termination,
        multipliers: state.mu,
        grad_lagrangian: grad_l,
        history,
    })
}
