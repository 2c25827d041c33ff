//! JSON job configurations. Unknown keys are rejected everywhere.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use dhj_core::estimates::{Cylinder, FailureProbeControls, HalfspaceGrid, OdeBoundParams, Sampling};
use dhj_core::ode::{integrate, IntegratorControls, ProfileOde};
use dhj_core::pde::{BoundaryCondition, BoundarySpec, Domain1D, FieldData, PdeControls, PdeProblem};
use dhj_core::shooting::backward_alpha0;
use dhj_core::{ClosedFormSolution, Error, ExponentContext};

use crate::CliError;

/// One of the explicit solution families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    TravelingWave {
        a: Vec<f64>,
    },
    StationaryHalfLine {
        offset: f64,
        #[serde(default = "one")]
        dim: usize,
    },
    QuadraticSinh {
        k: f64,
        #[serde(default = "zero_drift")]
        drift: Vec<f64>,
    },
    QuadraticLogLinear {
        k: f64,
        #[serde(default = "one")]
        dim: usize,
    },
    LogHeatKernel {
        n: usize,
    },
    LinearOptimality {
        eps: f64,
        #[serde(default = "one")]
        dim: usize,
    },
    /// Backward profile; `alpha` defaults to half the admissible bound.
    SelfSimilarBackward {
        alpha: Option<f64>,
        #[serde(default = "default_profile_y_max")]
        y_max: f64,
        #[serde(default = "one")]
        dim: usize,
    },
    SelfSimilarForward {
        alpha: f64,
        #[serde(default = "default_profile_y_max")]
        y_max: f64,
        #[serde(default = "one")]
        dim: usize,
    },
}

fn one() -> usize {
    1
}

fn zero_drift() -> Vec<f64> {
    vec![0.0]
}

fn default_profile_y_max() -> f64 {
    200.0
}

impl FamilySpec {
    pub fn build(&self, ctx: &ExponentContext) -> Result<ClosedFormSolution, Error> {
        let ctx = *ctx;
        match self {
            FamilySpec::TravelingWave { a } => ClosedFormSolution::traveling_wave(ctx, a.clone()),
            FamilySpec::StationaryHalfLine { offset, dim } => ClosedFormSolution::stationary_half_line(ctx, *offset, *dim),
            FamilySpec::QuadraticSinh { k, drift } => ClosedFormSolution::quadratic_sinh(ctx, *k, drift.clone()),
            FamilySpec::QuadraticLogLinear { k, dim } => ClosedFormSolution::quadratic_log_linear(ctx, *k, *dim),
            FamilySpec::LogHeatKernel { n } => ClosedFormSolution::log_heat_kernel(ctx, *n),
            FamilySpec::LinearOptimality { eps, dim } => ClosedFormSolution::linear_optimality(ctx, *eps, *dim),
            FamilySpec::SelfSimilarBackward { alpha, y_max, dim } => {
                let alpha = alpha.unwrap_or_else(|| 0.5 * backward_alpha0(&ctx));
                let alpha0 = backward_alpha0(&ctx);
                if !(alpha > 0.0 && alpha < alpha0) {
                    return Err(Error::InvalidParameter {
                        name: "alpha",
                        reason: format!("expected alpha in (0, {alpha0}), got {alpha}"),
                    });
                }
                let controls = IntegratorControls::default().with_y_max(*y_max);
                controls.validate()?;
                let traj = integrate(&ProfileOde::backward(ctx), alpha, &controls)?;
                ClosedFormSolution::self_similar(Arc::new(traj), *dim)
            }
            FamilySpec::SelfSimilarForward { alpha, y_max, dim } => {
                let controls = IntegratorControls::default().with_y_max(*y_max);
                controls.validate()?;
                let traj = integrate(&ProfileOde::forward(ctx), *alpha, &controls)?;
                ClosedFormSolution::self_similar(Arc::new(traj), *dim)
            }
        }
    }
}

/// Space-time translation applied after building a family: `u(x + dx, t + dt)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftSpec {
    #[serde(default)]
    pub dx: Option<Vec<f64>>,
    #[serde(default)]
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionSpec {
    pub solution: FamilySpec,
    #[serde(default)]
    pub shift: Option<ShiftSpec>,
}

impl SolutionSpec {
    pub fn build(&self, ctx: &ExponentContext) -> Result<ClosedFormSolution, Error> {
        let s = self.solution.build(ctx)?;
        match &self.shift {
            None => Ok(s),
            Some(sh) => {
                let dx = sh.dx.clone().unwrap_or_else(|| vec![0.0; s.dim()]);
                s.shifted(&dx, sh.dt)
            }
        }
    }
}

/// Scalar data for initial and boundary values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    Family {
        spec: FamilySpec,
        #[serde(default)]
        shift: Option<ShiftSpec>,
    },
    Gaussian {
        amp: f64,
        #[serde(default)]
        center: f64,
        width: f64,
    },
    Constant {
        value: f64,
    },
    Sum {
        terms: Vec<DataSpec>,
    },
    Tabulated {
        x: Vec<f64>,
        u: Vec<f64>,
    },
}

impl DataSpec {
    pub fn build(&self, ctx: &ExponentContext) -> Result<FieldData, Error> {
        Ok(match self {
            DataSpec::Family { spec, shift } => {
                let s = SolutionSpec { solution: spec.clone(), shift: shift.clone() }.build(ctx)?;
                FieldData::Family(s)
            }
            DataSpec::Gaussian { amp, center, width } => {
                if !(*width > 0.0) {
                    return Err(Error::InvalidParameter { name: "width", reason: "must be positive".into() });
                }
                FieldData::Gaussian { amp: *amp, center: *center, width: *width }
            }
            DataSpec::Constant { value } => FieldData::Constant(*value),
            DataSpec::Sum { terms } => {
                let mut it = terms.iter();
                let first = it
                    .next()
                    .ok_or_else(|| Error::InvalidParameter { name: "terms", reason: "empty sum".into() })?
                    .build(ctx)?;
                let mut acc = first;
                for t in it {
                    acc = FieldData::Sum(Box::new(acc), Box::new(t.build(ctx)?));
                }
                acc
            }
            DataSpec::Tabulated { x, u } => {
                if x.len() != u.len() || x.is_empty() || x.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::InvalidParameter {
                        name: "tabulated",
                        reason: "x must be strictly increasing and match u in length".into(),
                    });
                }
                FieldData::Tabulated { x: x.clone(), u: u.clone() }
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryEndSpec {
    Dirichlet(DataSpec),
    Symmetry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundarySpecConfig {
    /// Dirichlet values from the initial data at both ends (symmetry at a radial origin).
    FromInitial,
    Ends { lo: BoundaryEndSpec, hi: BoundaryEndSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeConfig {
    pub p: f64,
    pub domain: Domain1D,
    pub h: f64,
    pub t_end: f64,
    #[serde(default)]
    pub snapshots: Vec<f64>,
    pub initial: DataSpec,
    pub boundary: BoundarySpecConfig,
    #[serde(default)]
    pub controls: PdeControls,
}

impl PdeConfig {
    pub fn build(&self, ctx: &ExponentContext) -> Result<PdeProblem, Error> {
        let initial = self.initial.build(ctx)?;
        let end = |e: &BoundaryEndSpec| -> Result<BoundaryCondition, Error> {
            Ok(match e {
                BoundaryEndSpec::Dirichlet(d) => BoundaryCondition::Dirichlet(d.build(ctx)?),
                BoundaryEndSpec::Symmetry => BoundaryCondition::Symmetry,
            })
        };
        let boundary = match &self.boundary {
            BoundarySpecConfig::FromInitial => match self.domain.geometry {
                dhj_core::pde::Geometry::Line => BoundarySpec::dirichlet_from(&initial),
                dhj_core::pde::Geometry::Radial { .. } => BoundarySpec::radial(initial.clone()),
            },
            BoundarySpecConfig::Ends { lo, hi } => BoundarySpec { lo: end(lo)?, hi: end(hi)? },
        };
        Ok(PdeProblem {
            domain: self.domain,
            h: self.h,
            initial,
            boundary,
            t_end: self.t_end,
            snapshots: self.snapshots.clone(),
        })
    }
}

fn default_lambdas() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}

fn default_slack() -> f64 {
    1e-3
}

fn default_tol() -> f64 {
    1e-6
}

/// A verification job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case", deny_unknown_fields)]
pub enum VerifyConfig {
    Bernstein {
        p: f64,
        source: SolutionSpec,
        cylinder: Cylinder,
        #[serde(default)]
        sampling: Sampling,
        #[serde(default)]
        scale_lambdas: Option<Vec<f64>>,
    },
    LiYauPointwise {
        p: f64,
        source: SolutionSpec,
        cylinder: Cylinder,
        a: f64,
        #[serde(default)]
        sampling: Sampling,
        #[serde(default)]
        scale_lambdas: Option<Vec<f64>>,
    },
    LiYauTwoPoint {
        p: f64,
        source: SolutionSpec,
        cylinder: Cylinder,
        #[serde(default)]
        sampling: Sampling,
        #[serde(default)]
        scale_lambdas: Option<Vec<f64>>,
    },
    /// `|∇u| = M - u = 1/ε` at `(e_1, 1)` on `B_2 × (0, 1]` for the linear family.
    BernsteinOptimality {
        p: f64,
        eps: f64,
        #[serde(default = "one")]
        dim: usize,
    },
    HalfspaceGrowth {
        p: f64,
        alpha: Option<f64>,
        #[serde(default = "default_halfspace_y_max")]
        y_max: f64,
        #[serde(default)]
        grid: HalfspaceGrid,
        #[serde(default = "default_lambdas")]
        lambdas: Vec<f64>,
    },
    LiYauFailure {
        p: f64,
        n: usize,
        #[serde(default)]
        controls: FailureProbeControls,
    },
    LiYauOptimality {
        p: f64,
        alpha: f64,
        a: f64,
        #[serde(default)]
        y_max: Option<f64>,
    },
    OdeInequality(OdeBoundParams),
    CriticalProfile {
        p: f64,
        #[serde(default = "default_tol")]
        tol: f64,
        #[serde(default = "default_slack")]
        slack: f64,
    },
}

fn default_halfspace_y_max() -> f64 {
    1000.0
}

impl VerifyConfig {
    /// Sort key for merged sweeps.
    pub fn key(&self) -> (String, f64) {
        let name = serde_json::to_value(self)
            .ok()
            .and_then(|v| v.get("check").and_then(|c| c.as_str()).map(String::from))
            .unwrap_or_default();
        let p = match self {
            VerifyConfig::Bernstein { p, .. }
            | VerifyConfig::LiYauPointwise { p, .. }
            | VerifyConfig::LiYauTwoPoint { p, .. }
            | VerifyConfig::BernsteinOptimality { p, .. }
            | VerifyConfig::HalfspaceGrowth { p, .. }
            | VerifyConfig::LiYauFailure { p, .. }
            | VerifyConfig::LiYauOptimality { p, .. }
            | VerifyConfig::CriticalProfile { p, .. } => *p,
            VerifyConfig::OdeInequality(o) => o.gamma,
        };
        (name, p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "sweep", rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepConfig {
    BackwardProfile {
        p: Vec<f64>,
        #[serde(default = "half")]
        alpha_factor: f64,
        #[serde(default = "default_profile_y_max")]
        y_max: f64,
    },
    CriticalAlpha {
        p: Vec<f64>,
        #[serde(default = "default_tol")]
        tol: f64,
    },
    Verify {
        jobs: Vec<VerifyConfig>,
    },
}

fn half() -> f64 {
    0.5
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
}
