//! Numerical toolkit for the diffusive Hamilton-Jacobi equation
//! `u_t - Δu = |∇u|^p`.
//!
//! - [`exponents`]: constants derived from `p`.
//! - [`closed_form`]: explicit solution families with exact derivatives.
//! - [`ode`]: the self-similar profile equation and its integrator.
//! - [`shooting`]: admissible slopes for backward profiles and the forward critical slope.
//! - [`pde`]: method-of-lines solver on an interval or a radial domain.
//! - [`estimates`]: empirical checks of gradient and differential Harnack bounds.

// `!(x > 0.0)` is used on purpose so NaN is rejected with the bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closed_form;
pub mod error;
pub mod estimates;
pub mod exponents;
pub mod ode;
pub mod pde;
pub mod shooting;

pub use closed_form::{ClosedFormSolution, Family, FieldValues, SpaceTimePoint};
pub use error::{Error, Result};
pub use estimates::{EstimateReport, SolutionSource, Verdict};
pub use exponents::{make_context, ExponentContext, Regime};
pub use pde::{PdeControls, PdeProblem, PdeRun};
pub use shooting::{CriticalAlphaResult, ForwardClass, ForwardTag};
