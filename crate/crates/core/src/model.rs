//! Problem model: positive variables, monomials, posynomials, black-box
//! functions and the standard form consumed by every solver in this crate.
//!
//! The standard form is
//!
//! ```text
//!     minimize    f(x)
//!     subject to  p_i(x) <= 1     posynomials
//!                 m_j(x)  = 1     monomial equalities
//!                 m_k(x) <= 1     monomial inequalities
//!                 g_l(x) <= 1     black boxes
//!                 h_r(x)  = 1     black boxes
//!                 lower <= x <= upper,  lower > 0
//! ```

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Default strictly positive lower bound applied to every variable.
pub const DEFAULT_LOWER_BOUND: f64 = 1e-9;

/// Relative central-difference step for black boxes without an analytic gradient.
pub const FD_RELATIVE_STEP: f64 = 1e-6;
/// Absolute floor on the finite-difference step.
pub const FD_ABSOLUTE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ModelError {
    #[error("variable {index} is not strictly positive (value {value})")]
    NonPositiveVariable { index: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("black box `{name}` failed: {reason}")]
    BlackBox { name: String, reason: String },
    #[error("black box `{name}` returned non-positive value {value}")]
    NonPositiveValue { name: String, value: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub index: usize,
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

/// `c * prod_i x_i^{a_i}` with dense exponents over every problem variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub coefficient: f64,
    pub exponents: Vec<f64>,
}

fn check_point(x: &[f64], n: usize) -> Result<(), ModelError> {
    if x.len() != n {
        return Err(ModelError::Dimension {
            expected: n,
            found: x.len(),
        });
    }
    if let Some((index, &value)) = x.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(ModelError::NonPositiveVariable { index, value });
    }
    Ok(())
}

impl Monomial {
    pub fn new(coefficient: f64, exponents: Vec<f64>) -> Self {
        Self {
            coefficient,
            exponents,
        }
    }

    /// Monomial over `n` variables built from `(index, exponent)` pairs.
    /// Repeated indices accumulate.
    pub fn sparse(n: usize, coefficient: f64, powers: &[(usize, f64)]) -> Self {
        let mut exponents = vec![0.0; n];
        for &(i, a) in powers {
            exponents[i] += a;
        }
        Self {
            coefficient,
            exponents,
        }
    }

    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, ModelError> {
        check_point(x, self.dim())?;
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        let mut value = self.coefficient;
        for (a, xi) in self.exponents.iter().zip(x) {
            if *a == 1.0 {
                value *= xi;
            } else if *a != 0.0 {
                value *= xi.powf(*a);
            }
        }
        value
    }

    /// Gradient in x: `value * a_i / x_i`.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        let value = self.eval(x)?;
        Ok(self
            .exponents
            .iter()
            .zip(x)
            .map(|(a, xi)| value * a / xi)
            .collect())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            coefficient: self.coefficient * factor,
            exponents: self.exponents.clone(),
        }
    }

    /// Product of two monomials.
    pub fn mul(&self, other: &Monomial) -> Self {
        Self {
            coefficient: self.coefficient * other.coefficient,
            exponents: self
                .exponents
                .iter()
                .zip(&other.exponents)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn recip(&self) -> Self {
        Self {
            coefficient: 1.0 / self.coefficient,
            exponents: self.exponents.iter().map(|a| -a).collect(),
        }
    }
}

/// Sum of monomials sharing the same variable set.
#[derive(Debug, Clone, PartialEq)]
pub struct Posynomial {
    pub terms: Vec<Monomial>,
}

impl Posynomial {
    pub fn new(terms: Vec<Monomial>) -> Self {
        Self { terms }
    }

    pub fn dim(&self) -> usize {
        self.terms.first().map_or(0, Monomial::dim)
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, ModelError> {
        check_point(x, self.dim())?;
        Ok(self.terms.iter().map(|t| t.eval_unchecked(x)).sum())
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        check_point(x, self.dim())?;
        let mut grad = vec![0.0; self.dim()];
        for term in &self.terms {
            let value = term.eval_unchecked(x);
            for (i, a) in term.exponents.iter().enumerate() {
                if *a != 0.0 {
                    grad[i] += value * a / x[i];
                }
            }
        }
        Ok(grad)
    }

    /// Every term divided by the monomial `m`.
    pub fn div_monomial(&self, m: &Monomial) -> Self {
        let inv = m.recip();
        Self {
            terms: self.terms.iter().map(|t| t.mul(&inv)).collect(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            terms: self.terms.iter().map(|t| t.scaled(factor)).collect(),
        }
    }
}

impl From<Monomial> for Posynomial {
    fn from(m: Monomial) -> Self {
        Self { terms: vec![m] }
    }
}

pub type EvalFn = dyn Fn(&[f64]) -> Result<f64, ModelError> + Send + Sync;
pub type GradFn = dyn Fn(&[f64]) -> Result<Vec<f64>, ModelError> + Send + Sync;

#[derive(Clone)]
pub enum BlackBoxGradient {
    Analytic(Arc<GradFn>),
    FiniteDifference,
}

/// Function known only through evaluation. The evaluator receives the full
/// variable vector and must be pure; `support` lists the variables it reads,
/// which bounds the finite-difference work.
#[derive(Clone)]
pub struct BlackBoxFn {
    pub name: String,
    pub support: Vec<usize>,
    pub dim: usize,
    evaluator: Arc<EvalFn>,
    pub gradient: BlackBoxGradient,
}

impl fmt::Debug for BlackBoxFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BlackBoxFn")
            .field("name", &self.name)
            .field("support", &self.support)
            .field(
                "gradient",
                &match self.gradient {
                    BlackBoxGradient::Analytic(_) => "analytic",
                    BlackBoxGradient::FiniteDifference => "finite-difference",
                },
            )
            .finish()
    }
}

impl BlackBoxFn {
    pub fn new<F>(name: impl Into<String>, dim: usize, support: Vec<usize>, evaluator: F) -> Self
    where
        F: Fn(&[f64]) -> Result<f64, ModelError> + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            support,
            dim,
            evaluator: Arc::new(evaluator),
            gradient: BlackBoxGradient::FiniteDifference,
        }
    }

    pub fn with_gradient<G>(mut self, gradient: G) -> Self
    where
        G: Fn(&[f64]) -> Result<Vec<f64>, ModelError> + Send + Sync + 'static,
    {
        self.gradient = BlackBoxGradient::Analytic(Arc::new(gradient));
        self
    }

    /// Wraps a posynomial as an opaque function (analytic gradient kept).
    pub fn from_posynomial(name: impl Into<String>, p: Posynomial) -> Self {
        let dim = p.dim();
        let support = (0..dim)
            .filter(|&i| p.terms.iter().any(|t| t.exponents[i] != 0.0))
            .collect();
        let pg = p.clone();
        Self::new(name, dim, support, move |x| p.eval(x)).with_gradient(move |x| pg.gradient(x))
    }

    /// Raw evaluation; may return any finite value.
    pub fn eval_raw(&self, x: &[f64]) -> Result<f64, ModelError> {
        if x.len() != self.dim {
            return Err(ModelError::Dimension {
                expected: self.dim,
                found: x.len(),
            });
        }
        let v = (self.evaluator)(x)?;
        if !v.is_finite() {
            return Err(ModelError::BlackBox {
                name: self.name.clone(),
                reason: format!("non-finite value {v}"),
            });
        }
        Ok(v)
    }

    /// Evaluation that also enforces strict positivity of the value.
    pub fn eval(&self, x: &[f64]) -> Result<f64, ModelError> {
        let v = self.eval_raw(x)?;
        if v <= 0.0 {
            return Err(ModelError::NonPositiveValue {
                name: self.name.clone(),
                value: v,
            });
        }
        Ok(v)
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        match &self.gradient {
            BlackBoxGradient::Analytic(g) => {
                let grad = g(x)?;
                if grad.len() != self.dim {
                    return Err(ModelError::Dimension {
                        expected: self.dim,
                        found: grad.len(),
                    });
                }
                Ok(grad)
            }
            BlackBoxGradient::FiniteDifference => self.fd_gradient(x),
        }
    }

    /// Central differences over the support, falling back to a forward
    /// difference when the backward point would leave the positive orthant.
    pub fn fd_gradient(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        let mut grad = vec![0.0; self.dim];
        let mut probe = x.to_vec();
        for &i in &self.support {
            let h = (FD_RELATIVE_STEP * x[i].abs()).max(FD_ABSOLUTE_FLOOR);
            probe[i] = x[i] + h;
            let fp = self.eval_raw(&probe)?;
            if x[i] - h > 0.0 {
                probe[i] = x[i] - h;
                let fm = self.eval_raw(&probe)?;
                grad[i] = (fp - fm) / (2.0 * h);
            } else {
                probe[i] = x[i];
                let f0 = self.eval_raw(&probe)?;
                grad[i] = (fp - f0) / h;
            }
            probe[i] = x[i];
        }
        Ok(grad)
    }
}

#[derive(Debug, Clone)]
pub enum Objective {
    Posynomial(Posynomial),
    BlackBox(BlackBoxFn),
}

impl Objective {
    pub fn eval(&self, x: &[f64]) -> Result<f64, ModelError> {
        match self {
            Objective::Posynomial(p) => p.eval(x),
            Objective::BlackBox(b) => b.eval_raw(x),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        match self {
            Objective::Posynomial(p) => p.gradient(x),
            Objective::BlackBox(b) => b.gradient(x),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Objective::Posynomial(p) => p.dim(),
            Objective::BlackBox(b) => b.dim,
        }
    }
}

/// A constraint body tagged with a human-readable label.
#[derive(Debug, Clone)]
pub struct Labeled<T> {
    pub label: String,
    pub body: T,
}

impl<T> Labeled<T> {
    pub fn new(label: impl Into<String>, body: T) -> Self {
        Self {
            label: label.into(),
            body,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StandardFormProblem {
    pub name: String,
    pub variables: Vec<Variable>,
    pub objective: Objective,
    pub posy_ineq: Vec<Labeled<Posynomial>>,
    pub mono_eq: Vec<Labeled<Monomial>>,
    pub mono_ineq: Vec<Labeled<Monomial>>,
    pub bb_ineq: Vec<Labeled<BlackBoxFn>>,
    pub bb_eq: Vec<Labeled<BlackBoxFn>>,
}

impl StandardFormProblem {
    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn n_constraints(&self) -> usize {
        self.posy_ineq.len()
            + self.mono_eq.len()
            + self.mono_ineq.len()
            + self.bb_ineq.len()
            + self.bb_eq.len()
    }

    /// Posynomial objective with posynomial and monomial constraints only.
    pub fn is_pure_gp(&self) -> bool {
        matches!(self.objective, Objective::Posynomial(_))
            && self.bb_ineq.is_empty()
            && self.bb_eq.is_empty()
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn lower_bounds(&self) -> Vec<f64> {
        self.variables.iter().map(|v| v.lower).collect()
    }

    pub fn upper_bounds(&self) -> Vec<f64> {
        self.variables.iter().map(|v| v.upper).collect()
    }

    /// Same problem with the objective multiplied by `factor > 0`.
    pub fn with_scaled_objective(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.objective = match &self.objective {
            Objective::Posynomial(p) => Objective::Posynomial(p.scaled(factor)),
            Objective::BlackBox(b) => {
                let inner = b.clone();
                let ginner = b.clone();
                let mut bb = BlackBoxFn::new(
                    format!("{}*{factor}", b.name),
                    b.dim,
                    b.support.clone(),
                    move |x| inner.eval_raw(x).map(|v| v * factor),
                );
                bb = bb.with_gradient(move |x| {
                    ginner
                        .gradient(x)
                        .map(|g| g.into_iter().map(|v| v * factor).collect())
                });
                Objective::BlackBox(bb)
            }
        };
        out
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ValidationIssue {
    NonPositiveLowerBound { variable: String, lower: f64 },
    InvertedBounds { variable: String, lower: f64, upper: f64 },
    DimensionMismatch { item: String, expected: usize, found: usize },
    NonPositiveCoefficient { item: String, term: usize, coefficient: f64 },
    NonFiniteExponent { item: String, term: usize },
    EmptyPosynomial { item: String },
    BadSupport { item: String, index: usize },
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NonPositiveLowerBound { variable, lower } => {
                write!(f, "variable `{variable}` has non-positive lower bound {lower}")
            }
            Self::InvertedBounds {
                variable,
                lower,
                upper,
            } => write!(f, "variable `{variable}` has lower {lower} > upper {upper}"),
            Self::DimensionMismatch {
                item,
                expected,
                found,
            } => write!(f, "`{item}` has dimension {found}, expected {expected}"),
            Self::NonPositiveCoefficient {
                item,
                term,
                coefficient,
            } => write!(f, "`{item}` term {term} has non-positive coefficient {coefficient}"),
            Self::NonFiniteExponent { item, term } => {
                write!(f, "`{item}` term {term} has a non-finite exponent")
            }
            Self::EmptyPosynomial { item } => write!(f, "`{item}` has no terms"),
            Self::BadSupport { item, index } => {
                write!(f, "`{item}` reads variable {index} which does not exist")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
    pub pure_gp: bool,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }
}

fn check_monomial(item: &str, term: usize, m: &Monomial, n: usize, out: &mut Vec<ValidationIssue>) {
    if m.dim() != n {
        out.push(ValidationIssue::DimensionMismatch {
            item: item.to_string(),
            expected: n,
            found: m.dim(),
        });
    }
    if !(m.coefficient > 0.0) || !m.coefficient.is_finite() {
        out.push(ValidationIssue::NonPositiveCoefficient {
            item: item.to_string(),
            term,
            coefficient: m.coefficient,
        });
    }
    if m.exponents.iter().any(|a| !a.is_finite()) {
        out.push(ValidationIssue::NonFiniteExponent {
            item: item.to_string(),
            term,
        });
    }
}

fn check_posynomial(item: &str, p: &Posynomial, n: usize, out: &mut Vec<ValidationIssue>) {
    if p.terms.is_empty() {
        out.push(ValidationIssue::EmptyPosynomial {
            item: item.to_string(),
        });
    }
    for (k, t) in p.terms.iter().enumerate() {
        check_monomial(item, k, t, n, out);
    }
}

fn check_black_box(item: &str, b: &BlackBoxFn, n: usize, out: &mut Vec<ValidationIssue>) {
    if b.dim != n {
        out.push(ValidationIssue::DimensionMismatch {
            item: item.to_string(),
            expected: n,
            found: b.dim,
        });
    }
    for &i in &b.support {
        if i >= n {
            out.push(ValidationIssue::BadSupport {
                item: item.to_string(),
                index: i,
            });
        }
    }
}

/// Checks every structural invariant of the model; never fails, the report
/// carries the violations.
pub fn validate(problem: &StandardFormProblem) -> ValidationReport {
    let n = problem.n_vars();
    let mut issues = Vec::new();
    for v in &problem.variables {
        if !(v.lower > 0.0) {
            issues.push(ValidationIssue::NonPositiveLowerBound {
                variable: v.name.clone(),
                lower: v.lower,
            });
        }
        if v.lower > v.upper {
            issues.push(ValidationIssue::InvertedBounds {
                variable: v.name.clone(),
                lower: v.lower,
                upper: v.upper,
            });
        }
    }
    match &problem.objective {
        Objective::Posynomial(p) => check_posynomial("objective", p, n, &mut issues),
        Objective::BlackBox(b) => check_black_box("objective", b, n, &mut issues),
    }
    for c in &problem.posy_ineq {
        check_posynomial(&c.label, &c.body, n, &mut issues);
    }
    for c in problem.mono_eq.iter().chain(&problem.mono_ineq) {
        check_monomial(&c.label, 0, &c.body, n, &mut issues);
    }
    for c in problem.bb_ineq.iter().chain(&problem.bb_eq) {
        check_black_box(&c.label, &c.body, n, &mut issues);
    }
    ValidationReport {
        issues,
        pure_gp: problem.is_pure_gp(),
    }
}

/// Incremental construction of a [`StandardFormProblem`]. Variables must be
/// declared before any expression referencing them is built, since exponent
/// vectors are dense over the final variable count.
#[derive(Debug, Default)]
pub struct ProblemBuilder {
    name: String,
    variables: Vec<Variable>,
    posy_ineq: Vec<Labeled<Posynomial>>,
    mono_eq: Vec<Labeled<Monomial>>,
    mono_ineq: Vec<Labeled<Monomial>>,
    bb_ineq: Vec<Labeled<BlackBoxFn>>,
    bb_eq: Vec<Labeled<BlackBoxFn>>,
}

impl ProblemBuilder {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn var(&mut self, name: impl Into<String>) -> usize {
        self.var_bounded(name, DEFAULT_LOWER_BOUND, f64::INFINITY)
    }

    pub fn var_bounded(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> usize {
        let index = self.variables.len();
        self.variables.push(Variable {
            index,
            name: name.into(),
            lower,
            upper,
        });
        index
    }

    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    /// Monomial `c * prod x_i^{a_i}` over the variables declared so far.
    pub fn mono(&self, c: f64, powers: &[(usize, f64)]) -> Monomial {
        Monomial::sparse(self.variables.len(), c, powers)
    }

    pub fn posy(&self, terms: &[(f64, &[(usize, f64)])]) -> Posynomial {
        Posynomial::new(terms.iter().map(|(c, p)| self.mono(*c, p)).collect())
    }

    pub fn posy_leq_one(&mut self, label: impl Into<String>, p: Posynomial) -> &mut Self {
        self.posy_ineq.push(Labeled::new(label, p));
        self
    }

    /// `p(x) <= m(x)` rewritten as `p/m <= 1`.
    pub fn posy_leq_mono(&mut self, label: impl Into<String>, p: Posynomial, m: &Monomial) -> &mut Self {
        let q = p.div_monomial(m);
        self.posy_leq_one(label, q)
    }

    pub fn mono_eq_one(&mut self, label: impl Into<String>, m: Monomial) -> &mut Self {
        self.mono_eq.push(Labeled::new(label, m));
        self
    }

    pub fn mono_leq_one(&mut self, label: impl Into<String>, m: Monomial) -> &mut Self {
        self.mono_ineq.push(Labeled::new(label, m));
        self
    }

    pub fn bb_leq_one(&mut self, label: impl Into<String>, g: BlackBoxFn) -> &mut Self {
        self.bb_ineq.push(Labeled::new(label, g));
        self
    }

    pub fn bb_eq_one(&mut self, label: impl Into<String>, h: BlackBoxFn) -> &mut Self {
        self.bb_eq.push(Labeled::new(label, h));
        self
    }

    /// Adds `g(x) <= 0` as `g(x) + 1 <= 1`.
    pub fn bb_leq_zero(&mut self, label: impl Into<String>, g: BlackBoxFn) -> &mut Self {
        let inner = g.clone();
        let shifted = BlackBoxFn {
            name: format!("{}+1", g.name),
            support: g.support.clone(),
            dim: g.dim,
            evaluator: Arc::new(move |x| inner.eval_raw(x).map(|v| v + 1.0)),
            gradient: g.gradient.clone(),
        };
        self.bb_leq_one(label, shifted)
    }

    pub fn build(self, objective: Objective) -> StandardFormProblem {
        StandardFormProblem {
            name: self.name,
            variables: self.variables,
            objective,
            posy_ineq: self.posy_ineq,
            mono_eq: self.mono_eq,
            mono_ineq: self.mono_ineq,
            bb_ineq: self.bb_ineq,
            bb_eq: self.bb_eq,
        }
    }
}

pub fn eval_monomial(m: &Monomial, x: &[f64]) -> Result<f64, ModelError> {
    m.eval(x)
}

pub fn eval_posynomial(p: &Posynomial, x: &[f64]) -> Result<f64, ModelError> {
    p.eval(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn simple_constraint() -> Posynomial {
        Posynomial::new(vec![
            Monomial::new(0.01, vec![-1.1, 0.0]),
            Monomial::new(1.0, vec![0.1, 0.0]),
            Monomial::new(1.0, vec![0.0, 1.0]),
        ])
    }

    #[test]
    fn identity_monomial_is_one() {
        let m = Monomial::new(1.0, vec![0.0; 3]);
        assert_eq!(m.eval(&[0.2, 7.0, 1e5]).unwrap(), 1.0);
    }

    #[test]
    fn linear_monomial() {
        let m = Monomial::new(2.0, vec![1.0]);
        assert_relative_eq!(m.eval(&[3.0]).unwrap(), 6.0, max_relative = 1e-15);
    }

    #[test]
    fn floudas_term() {
        let m = Monomial::new(0.0025, vec![1.0]);
        assert_relative_eq!(m.eval(&[100.0]).unwrap(), 0.25, max_relative = 1e-15);
    }

    #[test]
    fn nonpositive_point_is_domain_error() {
        let m = Monomial::new(1.0, vec![1.0, 2.0]);
        assert_eq!(
            m.eval(&[1.0, 0.0]),
            Err(ModelError::NonPositiveVariable {
                index: 1,
                value: 0.0
            })
        );
        assert!(matches!(
            m.eval(&[1.0]),
            Err(ModelError::Dimension { .. })
        ));
    }

    #[test]
    fn single_term_posynomial_matches_monomial() {
        let m = Monomial::new(3.5, vec![0.3, -1.2]);
        let p = Posynomial::from(m.clone());
        let x = [0.7, 2.3];
        assert_eq!(p.eval(&x).unwrap(), m.eval(&x).unwrap());
    }

    #[test]
    fn simple_example_constraint_at_start() {
        // 0.01 * 0.3^-1.1 + 0.3^0.1 + 0.05, evaluated independently with powf.
        let expected = 0.01 * 0.3f64.powf(-1.1) + 0.3f64.powf(0.1) + 0.05;
        let got = simple_constraint().eval(&[0.3, 0.05]).unwrap();
        assert_relative_eq!(got, expected, max_relative = 1e-14);
        assert_relative_eq!(got, 0.974_17, max_relative = 1e-5);
        assert!(got < 1.0);
    }

    #[test]
    fn simple_objective_at_ones() {
        let p = Posynomial::new(vec![
            Monomial::new(1.0, vec![-0.1, 0.0]),
            Monomial::new(15.0, vec![0.01, 0.0]),
            Monomial::new(1.0, vec![0.0, -0.1]),
            Monomial::new(15.0, vec![0.0, 0.01]),
        ]);
        assert_eq!(p.eval(&[1.0, 1.0]).unwrap(), 32.0);
    }

    #[test]
    fn posynomial_gradient_matches_finite_difference() {
        let p = simple_constraint();
        let x = [0.3, 0.05];
        let g = p.gradient(&x).unwrap();
        for i in 0..2 {
            let h = 1e-7 * x[i];
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let fd = (p.eval(&xp).unwrap() - p.eval(&xm).unwrap()) / (2.0 * h);
            assert_relative_eq!(g[i], fd, max_relative = 1e-6);
        }
    }

    #[test]
    fn black_box_fd_gradient() {
        let bb = BlackBoxFn::new("prod", 3, vec![0, 2], |x| Ok(x[0] * x[0] * x[2]));
        let g = bb.gradient(&[2.0, 5.0, 3.0]).unwrap();
        assert_relative_eq!(g[0], 12.0, max_relative = 1e-8);
        assert_eq!(g[1], 0.0);
        assert_relative_eq!(g[2], 4.0, max_relative = 1e-8);
    }

    #[test]
    fn black_box_positivity() {
        let bb = BlackBoxFn::new("neg", 1, vec![0], |x| Ok(1.0 - x[0]));
        assert!(bb.eval_raw(&[2.0]).is_ok());
        assert!(matches!(
            bb.eval(&[2.0]),
            Err(ModelError::NonPositiveValue { .. })
        ));
    }

    #[test]
    fn leq_zero_helper_shifts_by_one() {
        let mut b = ProblemBuilder::new("t");
        let x = b.var("x");
        b.bb_leq_zero(
            "x-2<=0",
            BlackBoxFn::new("x-2", 1, vec![x], |v| Ok(v[0] - 2.0)),
        );
        let p = b.build(Objective::Posynomial(Posynomial::from(Monomial::new(
            1.0,
            vec![1.0],
        ))));
        assert_eq!(p.bb_ineq[0].body.eval(&[1.5]).unwrap(), 0.5);
    }

    fn small_problem() -> StandardFormProblem {
        let mut b = ProblemBuilder::new("small");
        let x = b.var("x");
        let y = b.var("y");
        let p = b.posy(&[(0.5, &[(x, 1.0)]), (0.5, &[(y, 1.0)])]);
        b.posy_leq_one("sum", p);
        let m = b.mono(2.0, &[(x, 1.0), (y, -1.0)]);
        b.mono_eq_one("ratio", m);
        let obj = b.posy(&[(1.0, &[(x, -1.0)]), (1.0, &[(y, -1.0)])]);
        b.build(Objective::Posynomial(obj))
    }

    #[test]
    fn validate_detects_negative_coefficient() {
        let mut p = small_problem();
        let report = p.validate();
        assert!(report.is_valid());
        assert!(report.pure_gp);
        p.posy_ineq[0].body.terms[1].coefficient = -1.0;
        let report = p.validate();
        assert!(!report.is_valid());
        assert!(report.issues.iter().any(|i| matches!(
            i,
            ValidationIssue::NonPositiveCoefficient { item, term: 1, .. } if item == "sum"
        )));
        assert!(report.issues[0].to_string().contains("sum"));
    }

    #[test]
    fn validate_detects_bounds_and_dimensions() {
        let mut p = small_problem();
        p.variables[0].lower = 0.0;
        p.variables[1].upper = 1e-12;
        p.mono_eq[0].body.exponents.push(1.0);
        let report = p.validate();
        assert_eq!(report.issues.len(), 3);
    }

    #[test]
    fn black_box_breaks_pure_gp() {
        let mut p = small_problem();
        p.bb_ineq.push(Labeled::new(
            "bb",
            BlackBoxFn::new("one", 2, vec![], |_| Ok(0.5)),
        ));
        assert!(!p.validate().pure_gp);
        assert!(!p.is_pure_gp());
    }

    proptest! {
        #[test]
        fn monomial_rescaling(
            c in 0.01f64..100.0,
            a in proptest::collection::vec(-3.0f64..3.0, 3),
            x in proptest::collection::vec(0.1f64..10.0, 3),
            s in 0.1f64..10.0,
            i in 0usize..3,
        ) {
            let m = Monomial::new(c, a.clone());
            let mut xs = x.clone();
            xs[i] *= s;
            let ratio = m.eval(&xs).unwrap() / m.eval(&x).unwrap();
            prop_assert!((ratio / s.powf(a[i]) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn posynomial_is_sum_of_terms(
            terms in proptest::collection::vec(
                (0.01f64..100.0, proptest::collection::vec(-2.0f64..2.0, 4)), 1..6),
            x in proptest::collection::vec(0.1f64..10.0, 4),
        ) {
            let p = Posynomial::new(terms.iter().map(|(c, a)| Monomial::new(*c, a.clone())).collect());
            let direct: f64 = p.terms.iter().map(|t| t.eval(&x).unwrap()).sum();
            let v = p.eval(&x).unwrap();
            prop_assert!(((v - direct) / direct).abs() <= 1e-14);
        }

        #[test]
        fn validate_iff_invariants(
            coeffs in proptest::collection::vec(-1.0f64..1.0, 1..5),
            lower in -1.0f64..1.0,
        ) {
            let n = 2;
            let mut b = ProblemBuilder::new("mut");
            b.var_bounded("a", lower, f64::INFINITY);
            b.var("b");
            let p = Posynomial::new(coeffs.iter().map(|&c| Monomial::new(c, vec![1.0, 0.0])).collect());
            b.posy_leq_one("p", p);
            let prob = b.build(Objective::Posynomial(Posynomial::from(Monomial::new(1.0, vec![0.0; n]))));
            let expected = lower > 0.0 && coeffs.iter().all(|&c| c > 0.0);
            prop_assert_eq!(prob.validate().is_valid(), expected);
        }
    }
}
