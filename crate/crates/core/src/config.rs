//! JSON run configuration.
//!
//! ```json
//! {
//!   "kind": "control",
//!   "domain": "omega90",
//!   "levels": [2, 6],
//!   "reference_offset": 2,
//!   "nu": 1.0,
//!   "f": "0",
//!   "u_d": "x + y",
//!   "solver": { "gmres_tol": 1e-10, "restart": 50, "max_iters": 500,
//!               "cg_tol": 1e-12, "backend": "cholesky" },
//!   "study": { "metrics": ["err_H1_state"] }
//! }
//! ```
//!
//! `domain` is a builtin name or `{"vertices": [[x, y], ...]}`. `levels` are
//! study rows (`h·√2 = 2^-k`); `level` is the number of bisection passes for
//! a single solve. Bvp studies take `solution` (and optionally `f`) instead of
//! `nu` and `u_d`.

use serde::{Deserialize, Serialize};

use crate::control::ControlProblem;
use crate::error::{Error, Result};
use crate::fem::SolverSettings;
use crate::functions::AnalyticFunction;
use crate::geometry::{BuiltinDomain, PolygonalDomain};
use crate::solvers::{GmresOptions, SpdBackend};
use crate::study::{DomainChoice, StudyConfig, StudyProblem};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    #[default]
    Control,
    Bvp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DomainSpec {
    Name(String),
    Polygon { vertices: Vec<[f64; 2]> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_gmres_tol")]
    pub gmres_tol: f64,
    #[serde(default = "default_restart")]
    pub restart: usize,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_cg_tol")]
    pub cg_tol: f64,
    #[serde(default)]
    pub backend: SpdBackend,
}

fn default_gmres_tol() -> f64 {
    GmresOptions::default().rel_tol
}
fn default_restart() -> usize {
    GmresOptions::default().restart
}
fn default_max_iters() -> usize {
    GmresOptions::default().max_iters
}
fn default_cg_tol() -> f64 {
    SolverSettings::default().cg_tol
}
fn default_reference_offset() -> usize {
    2
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            gmres_tol: default_gmres_tol(),
            restart: default_restart(),
            max_iters: default_max_iters(),
            cg_tol: default_cg_tol(),
            backend: SpdBackend::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    #[serde(default)]
    pub metrics: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub kind: Kind,
    pub domain: DomainSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<[i32; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<usize>,
    #[serde(default = "default_reference_offset")]
    pub reference_offset: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_d: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solution: Option<String>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub study: StudySection,
}

fn missing(field: &str, why: &str) -> Error {
    Error::Config(format!("missing field `{field}` ({why})"))
}

fn function(field: &str, source: &str) -> Result<AnalyticFunction> {
    AnalyticFunction::parse(source).map_err(|e| Error::Config(format!("field `{field}`: {e}")))
}

impl RunConfig {
    /// Parses JSON, reporting the line of syntax and schema errors.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn domain_choice(&self) -> Result<DomainChoice> {
        match &self.domain {
            DomainSpec::Name(n) => BuiltinDomain::from_name(n).map(DomainChoice::Builtin),
            DomainSpec::Polygon { vertices } => PolygonalDomain::new(vertices.clone()).map(DomainChoice::Custom),
        }
    }

    pub fn gmres(&self) -> GmresOptions {
        GmresOptions { rel_tol: self.solver.gmres_tol, restart: self.solver.restart, max_iters: self.solver.max_iters }
    }

    pub fn solver_settings(&self) -> SolverSettings {
        SolverSettings { backend: self.solver.backend, cg_tol: self.solver.cg_tol }
    }

    fn validate_solver(&self) -> Result<()> {
        let s = &self.solver;
        if !(s.gmres_tol > 0.0 && s.cg_tol > 0.0) {
            return Err(Error::Config("solver tolerances must be positive".into()));
        }
        if s.restart == 0 || s.max_iters == 0 {
            return Err(Error::Config("solver.restart and solver.max_iters must be positive".into()));
        }
        Ok(())
    }

    pub fn control_problem(&self) -> Result<ControlProblem> {
        let nu = self.nu.ok_or_else(|| missing("nu", "regularization parameter"))?;
        let u_d = self.u_d.as_deref().ok_or_else(|| missing("u_d", "desired state"))?;
        let f = function("f", self.f.as_deref().unwrap_or("0"))?;
        ControlProblem::new(nu, f, function("u_d", u_d)?).map_err(|e| Error::Config(format!("field `nu`: {e}")))
    }

    /// Fills defaulted optional fields so the echoed config is explicit.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        if c.f.is_none() {
            c.f = Some("0".into());
        }
        c
    }

    pub fn study_config(&self) -> Result<StudyConfig> {
        self.validate_solver()?;
        let [first, last] = self.levels.ok_or_else(|| missing("levels", "[first_row, last_row]"))?;
        let problem = match self.kind {
            Kind::Control => StudyProblem::Control(self.control_problem()?),
            Kind::Bvp => {
                let y = self.solution.as_deref().ok_or_else(|| missing("solution", "exact solution of the bvp"))?;
                StudyProblem::Bvp {
                    solution: function("solution", y)?,
                    f: function("f", self.f.as_deref().unwrap_or("0"))?,
                }
            }
        };
        let cfg = StudyConfig {
            domain: self.domain_choice()?,
            first_row: first,
            last_row: last,
            reference_offset: self.reference_offset,
            problem,
            metrics: self.study.metrics.clone(),
            gmres: self.gmres(),
            solver: self.solver_settings(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Number of bisection passes for a single solve.
    pub fn solve_level(&self) -> Result<usize> {
        self.validate_solver()?;
        if self.kind != Kind::Control {
            return Err(Error::Config("solve-control needs \"kind\": \"control\"".into()));
        }
        self.level.ok_or_else(|| missing("level", "number of bisection passes"))
    }
}
