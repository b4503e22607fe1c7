//! Run configuration (JSON).

use std::fmt;
use std::path::{Path, PathBuf};

use psinehari::{Coefficient, GridSpec, Operators, ProblemParams, PsiFunction, SolveOptions};
use serde::{Deserialize, Serialize};

/// Environment variable overriding `solver.seed`.
pub const SEED_ENV: &str = "PSINEHARI_SEED";

/// Failure of a subcommand, carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, unreadable or invalid config: exit 2.
    Usage(String),
    /// The computation ran but a mathematical check or branch failed: exit 1.
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Failed(m) => write!(f, "failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<psinehari::Error> for CliError {
    fn from(e: psinehari::Error) -> Self {
        use psinehari::Error as E;
        match e {
            E::InvalidGrid(_)
            | E::InvalidOrder(_)
            | E::InvalidPsi(_)
            | E::InvalidConfig(_)
            | E::Coefficient(_)
            | E::ShapeError { .. }
            | E::UnknownQuantity(_)
            | E::Io(_)
            | E::Csv(_) => CliError::Usage(e.to_string()),
            other => CliError::Failed(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemConfig {
    pub alpha: f64,
    pub beta: f64,
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub a: Coefficient,
    pub mu: Coefficient,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig {
            alpha: 0.8,
            beta: 0.5,
            p: 1.5,
            q: 2.0,
            r: 2.4,
            gamma: 0.5,
            lambda: 1e-3,
            a: Coefficient::Constant { value: 1.0 },
            mu: Coefficient::Constant { value: 0.5 },
        }
    }
}

/// Everything a run needs. Missing keys take their defaults, unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub grid: GridSpec,
    pub psi: PsiFunction,
    pub solver: SolveOptions,
    /// Directory receiving the output files.
    pub output: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            problem: ProblemConfig::default(),
            grid: GridSpec::default(),
            psi: PsiFunction::Identity,
            solver: SolveOptions::default(),
            output: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Defaults when no path is given.
    pub fn load_or_default(path: Option<&Path>) -> CliResult<Self> {
        path.map_or_else(|| Ok(RunConfig::default()), Self::load)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Applies `PSINEHARI_SEED` if set.
    pub fn apply_env(&mut self) -> CliResult<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.solver.seed =
                v.trim().parse().map_err(|_| CliError::Usage(format!("{SEED_ENV}={v} is not an unsigned integer")))?;
        }
        Ok(())
    }

    pub fn params(&self) -> CliResult<ProblemParams> {
        self.grid.validate()?;
        let pc = &self.problem;
        Ok(ProblemParams {
            alpha: pc.alpha,
            beta: pc.beta,
            p: pc.p,
            q: pc.q,
            r: pc.r,
            gamma: pc.gamma,
            lambda: pc.lambda,
            a: pc.a.to_field(&self.grid)?,
            mu: pc.mu.to_field(&self.grid)?,
        })
    }

    pub fn operators(&self) -> CliResult<Operators> {
        Ok(Operators::new(self.problem.alpha, self.problem.beta, self.psi, &self.grid)?)
    }
}
