//! Benchmark registry: problems addressable by id, with stored reference
//! optima.
//!
//! Reference files are `name = value` lines (the objective under the key
//! `objective`, then one line per variable) and are regenerated by
//! [`compute_reference`], never edited by hand.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::driver::{solve, Algorithm, PointEval, SolveError, SolveOptions};
use crate::model::{ModelError, StandardFormProblem};

use super::constants::{Constants, ConstantsError};
use super::hoburg::Variant;
use super::{floudas, hoburg, kirschen_ozturk, simple};

/// Feasibility tolerance a stored reference must meet.
pub const REFERENCE_FEASIBILITY: f64 = 1e-6;
/// Default gradient tolerance for regenerating references.
pub const REFERENCE_EPS_GL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BenchmarkId {
    SimpleExample,
    Floudas,
    KirschenOzturk,
    Hoburg0,
    Hoburg1,
    Hoburg3,
}

impl BenchmarkId {
    pub const ALL: [BenchmarkId; 6] = [
        Self::SimpleExample,
        Self::Floudas,
        Self::KirschenOzturk,
        Self::Hoburg0,
        Self::Hoburg1,
        Self::Hoburg3,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::SimpleExample => "simple",
            Self::Floudas => "floudas",
            Self::KirschenOzturk => "kirschen_ozturk",
            Self::Hoburg0 => "hoburg0",
            Self::Hoburg1 => "hoburg1",
            Self::Hoburg3 => "hoburg3",
        }
    }

    pub fn description(&self) -> &'static str {
        match self {
            Self::SimpleExample => "two-variable GP example",
            Self::Floudas => "heat exchanger design, five signomial rows black-boxed",
            Self::KirschenOzturk => "wing sizing with fuselage fuel tank",
            Self::Hoburg0 => "UAV sizing, pure GP",
            Self::Hoburg1 => "UAV sizing, sprint drag fit black-boxed",
            Self::Hoburg3 => "UAV sizing, all drag fits black-boxed",
        }
    }

    /// Problem built from the shipped constants.
    pub fn problem(&self) -> StandardFormProblem {
        match self {
            Self::SimpleExample => simple::problem(),
            Self::Floudas => floudas::problem(),
            Self::KirschenOzturk => kirschen_ozturk::problem(),
            Self::Hoburg0 => hoburg::problem(Variant::Gp),
            Self::Hoburg1 => hoburg::problem(Variant::OneBlackBox),
            Self::Hoburg3 => hoburg::problem(Variant::ThreeBlackBoxes),
        }
    }

    /// Shipped constants file, relative to the core crate.
    pub fn constants_file(&self) -> Option<&'static str> {
        match self {
            Self::SimpleExample | Self::Floudas => None,
            Self::KirschenOzturk => Some("data/kirschen_ozturk.constants"),
            Self::Hoburg0 | Self::Hoburg1 | Self::Hoburg3 => Some("data/hoburg.constants"),
        }
    }

    pub fn reference_file(&self) -> String {
        format!("data/references/{}.ref", self.as_str())
    }

    /// Point the reference solve starts from.
    pub fn nominal_start(&self) -> Vec<f64> {
        match self {
            Self::SimpleExample => simple::START.to_vec(),
            Self::Floudas => floudas::LITERATURE_OPTIMUM.to_vec(),
            Self::KirschenOzturk => kirschen_ozturk::NOMINAL_START.to_vec(),
            Self::Hoburg0 | Self::Hoburg1 | Self::Hoburg3 => hoburg::NOMINAL_START.to_vec(),
        }
    }

    fn embedded_reference(&self) -> &'static str {
        match self {
            Self::SimpleExample => include_str!("../../data/references/simple.ref"),
            Self::Floudas => include_str!("../../data/references/floudas.ref"),
            Self::KirschenOzturk => include_str!("../../data/references/kirschen_ozturk.ref"),
            Self::Hoburg0 => include_str!("../../data/references/hoburg0.ref"),
            Self::Hoburg1 => include_str!("../../data/references/hoburg1.ref"),
            Self::Hoburg3 => include_str!("../../data/references/hoburg3.ref"),
        }
    }
}

impl fmt::Display for BenchmarkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BenchmarkId {
    type Err = BenchmarkError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|id| id.as_str() == key || (key == "simple_example" && *id == Self::SimpleExample))
            .ok_or_else(|| BenchmarkError::UnknownId(s.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum BenchmarkError {
    #[error("unknown benchmark `{0}` (expected one of simple, floudas, kirschen_ozturk, hoburg0, hoburg1, hoburg3)")]
    UnknownId(String),
    #[error(transparent)]
    Constants(#[from] ConstantsError),
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0} exists (pass --force to overwrite)")]
    Exists(String),
    #[error("reference {source_name} has no value for {key}")]
    MissingValue { source_name: String, key: String },
    #[error("reference {source_name} is infeasible: max violation {violation:e}")]
    Infeasible { source_name: String, violation: f64 },
    #[error("reference {source_name} cannot be evaluated: {source}")]
    Evaluation {
        source_name: String,
        #[source]
        source: ModelError,
    },
    #[error("reference solve for {id} did not converge: {reason}")]
    NotConverged { id: BenchmarkId, reason: String },
    #[error(transparent)]
    Solve(#[from] SolveError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceOptimum {
    pub x: Vec<f64>,
    pub objective: f64,
    /// How the point was obtained.
    pub provenance: String,
}

impl ReferenceOptimum {
    pub fn parse(text: &str, source_name: &str, problem: &StandardFormProblem) -> Result<Self, BenchmarkError> {
        let c = Constants::parse(text, source_name)?;
        let get = |key: &str| {
            c.keys().any(|k| k == key).then(|| c.get(key)).ok_or_else(|| BenchmarkError::MissingValue {
                source_name: source_name.to_string(),
                key: key.to_string(),
            })
        };
        let objective = get("objective")?;
        let x = problem
            .variables
            .iter()
            .map(|v| get(&v.name))
            .collect::<Result<Vec<_>, _>>()?;
        let provenance = text
            .lines()
            .filter_map(|l| l.strip_prefix("# provenance:"))
            .map(str::trim)
            .collect::<Vec<_>>()
            .join(" ");
        Ok(Self { x, objective, provenance })
    }

    pub fn load(path: &Path, problem: &StandardFormProblem) -> Result<Self, BenchmarkError> {
        let text = std::fs::read_to_string(path).map_err(|source| BenchmarkError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string(), problem)
    }

    pub fn to_text(&self, problem: &StandardFormProblem) -> String {
        let mut out = format!("# Reference optimum for {}\n", problem.name);
        for line in self.provenance.lines() {
            let _ = writeln!(out, "# provenance: {line}");
        }
        let _ = writeln!(out, "objective = {:.17e}", self.objective);
        for (v, x) in problem.variables.iter().zip(&self.x) {
            let _ = writeln!(out, "{} = {:.17e}", v.name, x);
        }
        out
    }

    /// Largest constraint violation at the stored point.
    pub fn max_violation(&self, problem: &StandardFormProblem) -> Result<f64, ModelError> {
        Ok(PointEval::at(problem, &self.x, false)?.max_violation())
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkDef {
    pub id: BenchmarkId,
    pub problem: StandardFormProblem,
    pub reference: ReferenceOptimum,
    pub constants_file: Option<PathBuf>,
}

impl BenchmarkDef {
    /// Checks the reference against the problem's constraints.
    fn checked(self, source_name: &str) -> Result<Self, BenchmarkError> {
        let violation = self
            .reference
            .max_violation(&self.problem)
            .map_err(|source| BenchmarkError::Evaluation {
                source_name: source_name.to_string(),
                source,
            })?;
        if !(violation <= REFERENCE_FEASIBILITY) {
            return Err(BenchmarkError::Infeasible {
                source_name: source_name.to_string(),
                violation,
            });
        }
        Ok(self)
    }
}

/// Benchmark with the shipped reference optimum.
pub fn build(id: BenchmarkId) -> Result<BenchmarkDef, BenchmarkError> {
    let problem = id.problem();
    let name = id.reference_file();
    let reference = ReferenceOptimum::parse(id.embedded_reference(), &name, &problem)?;
    BenchmarkDef {
        id,
        problem,
        reference,
        constants_file: id.constants_file().map(PathBuf::from),
    }
    .checked(&name)
}

/// Benchmark with the reference optimum read from `path`.
pub fn build_with_reference(id: BenchmarkId, path: &Path) -> Result<BenchmarkDef, BenchmarkError> {
    let problem = id.problem();
    let reference = ReferenceOptimum::load(path, &problem)?;
    BenchmarkDef {
        id,
        problem,
        reference,
        constants_file: id.constants_file().map(PathBuf::from),
    }
    .checked(&path.display().to_string())
}

pub fn build_simple_example() -> BenchmarkDef {
    build(BenchmarkId::SimpleExample).expect("shipped reference is valid")
}

pub fn build_floudas() -> BenchmarkDef {
    build(BenchmarkId::Floudas).expect("shipped reference is valid")
}

pub fn build_kirschen_ozturk() -> BenchmarkDef {
    build(BenchmarkId::KirschenOzturk).expect("shipped reference is valid")
}

pub fn build_hoburg(variant: Variant) -> BenchmarkDef {
    let id = match variant {
        Variant::Gp => BenchmarkId::Hoburg0,
        Variant::OneBlackBox => BenchmarkId::Hoburg1,
        Variant::ThreeBlackBoxes => BenchmarkId::Hoburg3,
    };
    build(id).expect("shipped reference is valid")
}

/// Solves from the nominal start with SLCP to the gradient tolerance `eps_gl`.
pub fn compute_reference(id: BenchmarkId, eps_gl: f64) -> Result<ReferenceOptimum, BenchmarkError> {
    let problem = id.problem();
    let mut opts = SolveOptions::new(Algorithm::Slcp);
    opts.eps_gl = eps_gl;
    opts.eps_dx = 1e-14;
    opts.max_iter = 2000;
    let r = solve(&problem, &id.nominal_start(), &opts)?;
    if !r.termination.converged() {
        return Err(BenchmarkError::NotConverged {
            id,
            reason: r.termination.as_str().to_string(),
        });
    }
    Ok(ReferenceOptimum {
        objective: r.f_star,
        provenance: format!(
            "SLCP solve from the nominal start; {} after {} iterations, max |grad L| {:.1e}",
            r.termination.as_str(),
            r.iterations,
            r.grad_lagrangian
        ),
        x: r.x_star,
    })
}

/// Writes a freshly computed reference to `dir/{id}.ref`. Refuses to
/// overwrite an existing file unless `force` is set.
pub fn write_reference(id: BenchmarkId, dir: &Path, force: bool, eps_gl: f64) -> Result<PathBuf, BenchmarkError> {
    let path = dir.join(format!("{}.ref", id.as_str()));
    if path.exists() && !force {
        return Err(BenchmarkError::Exists(path.display().to_string()));
    }
    let r = compute_reference(id, eps_gl)?;
    std::fs::write(&path, r.to_text(&id.problem())).map_err(|source| BenchmarkError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip() {
        for id in BenchmarkId::ALL {
            assert_eq!(id.as_str().parse::<BenchmarkId>().unwrap(), id);
        }
        assert_eq!("Simple-Example".parse::<BenchmarkId>().unwrap(), BenchmarkId::SimpleExample);
        assert!("hoburg2".parse::<BenchmarkId>().is_err());
    }

    #[test]
    fn shipped_references_load() {
        for id in BenchmarkId::ALL {
            let def = build(id).unwrap();
            assert_eq!(def.reference.x.len(), def.problem.n_vars());
            let f = def.problem.objective.eval(&def.reference.x).unwrap();
            assert!((f - def.reference.objective).abs() <= 1e-9 * f.abs(), "{id}");
            assert!(!def.reference.provenance.is_empty());
        }
    }

    #[test]
    fn reference_text_round_trips() {
        let def = build_floudas();
        let text = def.reference.to_text(&def.problem);
        let back = ReferenceOptimum::parse(&text, "mem", &def.problem).unwrap();
        assert_eq!(back, def.reference);
    }

    #[test]
    fn missing_variable_is_named() {
        let p = simple::problem();
        let err = ReferenceOptimum::parse("objective = 1\nx = 0.5\n", "partial.ref", &p).unwrap_err();
        assert!(err.to_string().contains("partial.ref") && err.to_string().contains(" y"));
    }

    #[test]
    fn infeasible_reference_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ref");
        // 0.01 / 0.1^1.1 alone exceeds 1.
        std::fs::write(&path, "objective = 1\nx = 0.1\ny = 0.5\n").unwrap();
        let err = build_with_reference(BenchmarkId::SimpleExample, &path).unwrap_err();
        assert!(matches!(err, BenchmarkError::Infeasible { .. }), "{err}");
    }

    #[test]
    fn write_refuses_to_overwrite() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("simple.ref"), "keep").unwrap();
        let err = write_reference(BenchmarkId::SimpleExample, dir.path(), false, REFERENCE_EPS_GL).unwrap_err();
        assert!(err.to_string().contains("--force"));
        assert_eq!(std::fs::read_to_string(dir.path().join("simple.ref")).unwrap(), "keep");
        let path = write_reference(BenchmarkId::SimpleExample, dir.path(), true, REFERENCE_EPS_GL).unwrap();
        assert!(build_with_reference(BenchmarkId::SimpleExample, &path).is_ok());
    }
}
