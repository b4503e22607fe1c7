//! Discrete ψ-Hilfer operators, a singular double-phase energy and its
//! Nehari-manifold fibering analysis on `[0, T]` and `[0, T]²`.
//!
//! The modules build on each other bottom-up: [`domain`] (grids, fields,
//! parameters), [`fracops`] (fractional integrals and derivatives), [`spaces`]
//! (modulars and norms), [`energy`], [`nehari`] (fibering maps), [`solver`]
//! (branch minimization) and [`oracle`] (independent reference computations).

pub mod domain;
pub mod energy;
pub mod error;
pub mod fracops;
pub mod nehari;
pub mod oracle;
pub mod solver;
pub mod spaces;

pub use domain::{
    integrate, validate_params, AnalyticField, Coefficient, Exponents, Field, GridSpec, ProblemParams, PsiFunction,
    ValidationReport,
};
pub use energy::{energy, energy_gradient, weak_residual, EnergyBreakdown};
pub use error::{Error, Result};
pub use fracops::{Axis, FracOperator, Operators, Side};
pub use nehari::{FiberReport, NehariClass, NehariTag, Tolerances};
pub use solver::{Branch, SolveOptions, SolveResult};
pub use spaces::NormBundle;
