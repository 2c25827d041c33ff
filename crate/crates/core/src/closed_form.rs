//! Explicit solutions of `u_t - Δu = |∇u|^p` with hand-coded derivatives.
//!
//! Every family is evaluated in its own base coordinates and then mapped
//! through the symmetries of the equation: space/time translation and the
//! scaling `u ↦ λ^{β-1} u(λx, λ²t)`. A [`ClosedFormSolution`] therefore stores
//!
//! ```text
//! u(x, t) = λ^{β-1} base(λ x + ξ, λ² t + τ)
//! ```
//!
//! which is closed under both operations. Half-space families use the last
//! coordinate `x_n` as the normal variable.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::exponents::{pow_abs, ExponentContext, Regime};
use crate::ode::{Direction, ProfileTrajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimePoint {
    pub x: Vec<f64>,
    pub t: f64,
}

impl SpaceTimePoint {
    pub fn new(x: Vec<f64>, t: f64) -> Self {
        Self { x, t }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

/// `u`, `∇u`, `u_t` and `Δu` at a point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldValues {
    pub u: f64,
    pub grad_u: Vec<f64>,
    pub u_t: f64,
    pub laplacian_u: f64,
}

impl FieldValues {
    pub fn grad_norm(&self) -> f64 {
        self.grad_u.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone)]
pub enum Family {
    /// `|a|^p t + a·x`.
    TravelingWave { a: Vec<f64> },
    /// `c_p((x_n+a)^{1-β} - a^{1-β})` for `p > 2`, `c(p)(a^{1-β} - (a+x_n)^{1-β})` for `p < 2`.
    StationaryHalfLine { offset: f64, dim: usize },
    /// `log[1 + exp(a'·x' + (|a'|²+k²)t) sinh(k x_n)]`, `p = 2`.
    QuadraticSinh { k: f64, drift: Vec<f64> },
    /// `log(1 + k x_n)`, `p = 2`.
    QuadraticLogLinear { k: f64, dim: usize },
    /// `-(n/2) log t - |x|²/(4t)`, `p = 2`.
    LogHeatKernel { n: usize },
    /// `ε^{-1} x_1 + ε^{-p} t`.
    LinearOptimality { eps: f64, dim: usize },
    /// Backward: `|t|^γ φ(x_n/√|t|)` on `t < 0`.
    /// Forward: `-(t+1)^γ φ(x_n/√(t+1))`, the negative of the absorbing-equation solution.
    SelfSimilar { direction: Direction, profile: Arc<ProfileTrajectory>, dim: usize },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::TravelingWave { .. } => "TravelingWave",
            Family::StationaryHalfLine { .. } => "StationaryHalfLine",
            Family::QuadraticSinh { .. } => "QuadraticSinh",
            Family::QuadraticLogLinear { .. } => "QuadraticLogLinear",
            Family::LogHeatKernel { .. } => "LogHeatKernel",
            Family::LinearOptimality { .. } => "LinearOptimality",
            Family::SelfSimilar { .. } => "SelfSimilar",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Family::TravelingWave { a } => a.len(),
            Family::StationaryHalfLine { dim, .. }
            | Family::QuadraticLogLinear { dim, .. }
            | Family::LinearOptimality { dim, .. }
            | Family::SelfSimilar { dim, .. } => *dim,
            Family::QuadraticSinh { drift, .. } => drift.len() + 1,
            Family::LogHeatKernel { n } => *n,
        }
    }

    /// True for families posed on the half-space `x_n > 0`.
    pub fn is_half_space(&self) -> bool {
        !matches!(
            self,
            Family::TravelingWave { .. } | Family::LogHeatKernel { .. } | Family::LinearOptimality { .. }
        )
    }
}

#[derive(Debug, Clone)]
pub struct ClosedFormSolution {
    ctx: ExponentContext,
    family: Family,
    lambda: f64,
    space_shift: Vec<f64>,
    time_shift: f64,
}

fn require_quadratic(ctx: &ExponentContext, family: &'static str) -> Result<()> {
    if ctx.regime != Regime::Quadratic {
        return Err(invalid("p", format!("{family} requires p = 2, got {}", ctx.p)));
    }
    Ok(())
}

fn require_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(invalid("dim", "ambient dimension must be at least 1"));
    }
    Ok(())
}

impl ClosedFormSolution {
    fn from_family(ctx: ExponentContext, family: Family) -> Self {
        let dim = family.dim();
        Self { ctx, family, lambda: 1.0, space_shift: vec![0.0; dim], time_shift: 0.0 }
    }

    pub fn traveling_wave(ctx: ExponentContext, a: Vec<f64>) -> Result<Self> {
        require_dim(a.len())?;
        if a.iter().all(|v| *v == 0.0) || a.iter().any(|v| !v.is_finite()) {
            return Err(invalid("a", "traveling wave direction must be a nonzero finite vector"));
        }
        Ok(Self::from_family(ctx, Family::TravelingWave { a }))
    }

    pub fn stationary_half_line(ctx: ExponentContext, offset: f64, dim: usize) -> Result<Self> {
        require_dim(dim)?;
        match ctx.regime {
            Regime::Quadratic => {
                return Err(invalid("p", "stationary half-line family is not defined for p = 2"))
            }
            Regime::Superquadratic if !(offset >= 0.0) => {
                return Err(invalid("offset", format!("expected offset >= 0 for p > 2, got {offset}")))
            }
            Regime::Subquadratic if !(offset > 0.0) => {
                return Err(invalid("offset", format!("expected offset > 0 for p < 2, got {offset}")))
            }
            _ => {}
        }
        if !offset.is_finite() {
            return Err(invalid("offset", "must be finite"));
        }
        Ok(Self::from_family(ctx, Family::StationaryHalfLine { offset, dim }))
    }

    pub fn quadratic_sinh(ctx: ExponentContext, k: f64, drift: Vec<f64>) -> Result<Self> {
        require_quadratic(&ctx, "QuadraticSinh")?;
        if !(k > 0.0) || !k.is_finite() {
            return Err(invalid("k", format!("expected k > 0, got {k}")));
        }
        Ok(Self::from_family(ctx, Family::QuadraticSinh { k, drift }))
    }

    pub fn quadratic_log_linear(ctx: ExponentContext, k: f64, dim: usize) -> Result<Self> {
        require_quadratic(&ctx, "QuadraticLogLinear")?;
        require_dim(dim)?;
        if !(k > 0.0) || !k.is_finite() {
            return Err(invalid("k", format!("expected k > 0, got {k}")));
        }
        Ok(Self::from_family(ctx, Family::QuadraticLogLinear { k, dim }))
    }

    pub fn log_heat_kernel(ctx: ExponentContext, n: usize) -> Result<Self> {
        require_quadratic(&ctx, "LogHeatKernel")?;
        require_dim(n)?;
        Ok(Self::from_family(ctx, Family::LogHeatKernel { n }))
    }

    pub fn linear_optimality(ctx: ExponentContext, eps: f64, dim: usize) -> Result<Self> {
        require_dim(dim)?;
        if !(eps > 0.0 && eps < 1.0) {
            return Err(invalid("eps", format!("expected eps in (0,1), got {eps}")));
        }
        Ok(Self::from_family(ctx, Family::LinearOptimality { eps, dim }))
    }

    pub fn self_similar(profile: Arc<ProfileTrajectory>, dim: usize) -> Result<Self> {
        require_dim(dim)?;
        let ctx = profile.ode.context;
        let direction = profile.ode.direction;
        if profile.samples.len() < 2 {
            return Err(invalid("profile", "trajectory has fewer than two samples"));
        }
        Ok(Self::from_family(ctx, Family::SelfSimilar { direction, profile, dim }))
    }

    pub fn context(&self) -> &ExponentContext {
        &self.ctx
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn dim(&self) -> usize {
        self.family.dim()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Translates in space and time: the result is `u(x + dx, t + dt)`.
    pub fn shifted(&self, dx: &[f64], dt: f64) -> Result<Self> {
        if dx.len() != self.dim() {
            return Err(invalid("dx", format!("expected length {}, got {}", self.dim(), dx.len())));
        }
        let mut out = self.clone();
        for (s, d) in out.space_shift.iter_mut().zip(dx) {
            *s += self.lambda * d;
        }
        out.time_shift += self.lambda * self.lambda * dt;
        Ok(out)
    }

    /// The scaling map `u ↦ λ^{β-1} u(λx, λ²t)`.
    ///
    /// Families with a parametric closed form are re-tagged (for instance the
    /// stationary offset becomes `a/λ`); the others keep a scale factor.
    pub fn rescale(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(invalid("lambda", format!("expected lambda > 0, got {lambda}")));
        }
        if lambda == 1.0 {
            return Ok(self.clone());
        }
        let untouched = self.lambda == 1.0
            && self.time_shift == 0.0
            && self.space_shift.iter().all(|s| *s == 0.0);
        if untouched {
            let beta = self.ctx.beta;
            let retagged = match &self.family {
                Family::TravelingWave { a } => Some(Family::TravelingWave {
                    a: a.iter().map(|v| v * lambda.powf(beta)).collect(),
                }),
                Family::StationaryHalfLine { offset, dim } => {
                    Some(Family::StationaryHalfLine { offset: offset / lambda, dim: *dim })
                }
                Family::QuadraticSinh { k, drift } => Some(Family::QuadraticSinh {
                    k: k * lambda,
                    drift: drift.iter().map(|v| v * lambda).collect(),
                }),
                Family::QuadraticLogLinear { k, dim } => {
                    Some(Family::QuadraticLogLinear { k: k * lambda, dim: *dim })
                }
                _ => None,
            };
            if let Some(family) = retagged {
                return Ok(Self::from_family(self.ctx, family));
            }
        }
        let mut out = self.clone();
        out.lambda *= lambda;
        Ok(out)
    }

    fn domain_error(&self, reason: impl Into<String>) -> Error {
        Error::OutsideDomain { family: self.family.name(), reason: reason.into() }
    }

    /// Exact `u, ∇u, u_t, Δu`.
    pub fn eval(&self, pt: &SpaceTimePoint) -> Result<FieldValues> {
        let n = self.dim();
        if pt.dim() != n {
            return Err(self.domain_error(format!("point has dimension {}, family has {n}", pt.dim())));
        }
        if pt.x.iter().any(|v| !v.is_finite()) || !pt.t.is_finite() {
            return Err(self.domain_error("non-finite coordinates"));
        }
        let lam = self.lambda;
        let xb: Vec<f64> = pt.x.iter().zip(&self.space_shift).map(|(x, s)| lam * x + s).collect();
        let tb = lam * lam * pt.t + self.time_shift;
        let base = self.eval_base(&xb, tb)?;
        if lam == 1.0 {
            return Ok(base);
        }
        let beta = self.ctx.beta;
        let su = lam.powf(beta - 1.0);
        let sg = lam.powf(beta);
        let st = lam.powf(beta + 1.0);
        Ok(FieldValues {
            u: su * base.u,
            grad_u: base.grad_u.iter().map(|g| sg * g).collect(),
            u_t: st * base.u_t,
            laplacian_u: st * base.laplacian_u,
        })
    }

    /// `u_t - Δu - |∇u|^p` from the analytic derivatives.
    pub fn residual(&self, pt: &SpaceTimePoint) -> Result<f64> {
        let v = self.eval(pt)?;
        Ok(v.u_t - v.laplacian_u - self.ctx.pow_p(v.grad_norm()))
    }

    fn eval_base(&self, x: &[f64], t: f64) -> Result<FieldValues> {
        let n = x.len();
        let p = self.ctx.p;
        let beta = self.ctx.beta;
        let xn = x[n - 1];
        if self.family.is_half_space() && xn < 0.0 {
            return Err(self.domain_error(format!("x_n = {xn} < 0")));
        }
        let mut grad = vec![0.0; n];
        let fv = match &self.family {
            Family::TravelingWave { a } => {
                let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
                let ap = pow_abs(na, p);
                grad.copy_from_slice(a);
                FieldValues {
                    u: ap * t + a.iter().zip(x).map(|(a, x)| a * x).sum::<f64>(),
                    grad_u: grad,
                    u_t: ap,
                    laplacian_u: 0.0,
                }
            }
            Family::StationaryHalfLine { offset, .. } => {
                let a = *offset;
                let z = xn + a;
                if z <= 0.0 {
                    return Err(self.domain_error("x_n + offset must be positive"));
                }
                let e = 1.0 - beta;
                // c = β^β/|1-β| in both regimes; the sign flips with 1-β.
                let c = self.ctx.c_p.expect("c_p exists for p != 2");
                let sign = if e > 0.0 { 1.0 } else { -1.0 };
                let u = sign * c * (z.powf(e) - a.powf(e));
                let du = sign * c * e * z.powf(-beta);
                let d2u = -sign * c * e * beta * z.powf(-beta - 1.0);
                grad[n - 1] = du;
                FieldValues { u, grad_u: grad, u_t: 0.0, laplacian_u: d2u }
            }
            Family::QuadraticSinh { k, drift } => {
                let k = *k;
                let a2: f64 = drift.iter().map(|v| v * v).sum();
                let phase: f64 = drift.iter().zip(x).map(|(a, x)| a * x).sum::<f64>() + (a2 + k * k) * t;
                let e = phase.exp();
                let s = (k * xn).sinh();
                let c = (k * xn).cosh();
                let w = 1.0 + e * s;
                let es_w = e * s / w;
                for (g, a) in grad.iter_mut().zip(drift) {
                    *g = a * es_w;
                }
                grad[n - 1] = e * k * c / w;
                let quad = e * e * (a2 * s * s + k * k * c * c) / (w * w);
                FieldValues {
                    u: w.ln(),
                    grad_u: grad,
                    u_t: (a2 + k * k) * es_w,
                    laplacian_u: (a2 + k * k) * es_w - quad,
                }
            }
            Family::QuadraticLogLinear { k, .. } => {
                let w = 1.0 + k * xn;
                grad[n - 1] = k / w;
                FieldValues { u: w.ln(), grad_u: grad, u_t: 0.0, laplacian_u: -k * k / (w * w) }
            }
            Family::LogHeatKernel { n: dim } => {
                if !(t > 0.0) {
                    return Err(self.domain_error(format!("requires t > 0, got {t}")));
                }
                let r2: f64 = x.iter().map(|v| v * v).sum();
                let nh = *dim as f64 / 2.0;
                for (g, xi) in grad.iter_mut().zip(x) {
                    *g = -xi / (2.0 * t);
                }
                FieldValues {
                    u: -nh * t.ln() - r2 / (4.0 * t),
                    grad_u: grad,
                    u_t: -nh / t + r2 / (4.0 * t * t),
                    laplacian_u: -nh / t,
                }
            }
            Family::LinearOptimality { eps, .. } => {
                let inv = 1.0 / eps;
                let ut = eps.powf(-p);
                grad[0] = inv;
                FieldValues { u: inv * x[0] + ut * t, grad_u: grad, u_t: ut, laplacian_u: 0.0 }
            }
            Family::SelfSimilar { direction, profile, .. } => {
                let gamma = self.ctx.gamma_ss;
                let (tau, sign) = match direction {
                    Direction::Backward => {
                        if !(t < 0.0) {
                            return Err(self.domain_error(format!("backward profile requires t < 0, got {t}")));
                        }
                        (-t, 1.0)
                    }
                    Direction::Forward => {
                        if !(t > -1.0) {
                            return Err(self.domain_error(format!("forward profile requires t > -1, got {t}")));
                        }
                        (t + 1.0, -1.0)
                    }
                };
                let rt = tau.sqrt();
                let y = xn / rt;
                let (phi, dphi, d2phi) = profile.state_at(y)?;
                let tg = tau.powf(gamma);
                // d/dτ of τ^γ φ(x/√τ) is τ^{γ-1}(γφ - yφ'/2)
                let dtau = tau.powf(gamma - 1.0) * (gamma * phi - 0.5 * y * dphi);
                let dt_sign = match direction {
                    Direction::Backward => -1.0,
                    Direction::Forward => 1.0,
                };
                grad[n - 1] = sign * tg / rt * dphi;
                FieldValues {
                    u: sign * tg * phi,
                    grad_u: grad,
                    u_t: sign * dt_sign * dtau,
                    laplacian_u: sign * tg / tau * d2phi,
                }
            }
        };
        Ok(fv)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::make_context;
    use crate::ode::{integrate, IntegratorControls, ProfileOde};

    fn ctx(p: f64) -> ExponentContext {
        make_context(p).unwrap()
    }

    fn pt(x: &[f64], t: f64) -> SpaceTimePoint {
        SpaceTimePoint::new(x.to_vec(), t)
    }

    /// Second-order central differences of `u` as an independent check on the
    /// hand-coded derivatives.
    fn fd_residual(s: &ClosedFormSolution, x: &[f64], t: f64) -> f64 {
        let h = 1e-4;
        let u = |x: &[f64], t: f64| s.eval(&pt(x, t)).unwrap().u;
        let u0 = u(x, t);
        let ut = (u(x, t + h) - u(x, t - h)) / (2.0 * h);
        let mut lap = 0.0;
        let mut g2 = 0.0;
        for i in 0..x.len() {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += h;
            xm[i] -= h;
            let (up, um) = (u(&xp, t), u(&xm, t));
            lap += (up - 2.0 * u0 + um) / (h * h);
            g2 += ((up - um) / (2.0 * h)).powi(2);
        }
        ut - lap - g2.sqrt().powf(s.context().p)
    }

    #[test]
    fn traveling_wave_values() {
        let s = ClosedFormSolution::traveling_wave(ctx(3.0), vec![1.0]).unwrap();
        let v = s.eval(&pt(&[0.0], 1.0)).unwrap();
        assert_eq!(v.u, 1.0);
        assert_eq!(v.grad_u, vec![1.0]);
        assert_eq!(v.u_t, 1.0);
        assert_eq!(s.residual(&pt(&[0.3], -2.0)).unwrap(), 0.0);
    }

    #[test]
    fn quadratic_sinh_vanishes_on_boundary() {
        let s = ClosedFormSolution::quadratic_sinh(ctx(2.0), 1.0, vec![]).unwrap();
        for t in [-3.0, 0.0, 2.5] {
            assert_eq!(s.eval(&pt(&[0.0], t)).unwrap().u, 0.0);
        }
    }

    #[test]
    fn quadratic_sinh_matches_entire_solution() {
        let s = ClosedFormSolution::quadratic_sinh(ctx(2.0), 1.0, vec![]).unwrap();
        for (x, t) in [(0.5, -1.0), (2.0, 0.3), (0.01, 1.0)] {
            let direct = (1.0 + f64::exp(t) * f64::sinh(x)).ln();
            assert!((s.eval(&pt(&[x], t)).unwrap().u - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn stationary_p3_value() {
        let s = ClosedFormSolution::stationary_half_line(ctx(3.0), 0.0, 1).unwrap();
        let v = s.eval(&pt(&[4.0], 0.0)).unwrap();
        assert!((v.u - 2.0 * 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn stationary_subquadratic_residual() {
        let s = ClosedFormSolution::stationary_half_line(ctx(1.5), 1.0, 1).unwrap();
        assert!(s.residual(&pt(&[2.0], 0.0)).unwrap().abs() < 1e-12);
        // finite-difference oracle agrees
        assert!(fd_residual(&s, &[2.0], 0.0).abs() < 1e-6);
    }

    #[test]
    fn log_heat_kernel_residual() {
        let s = ClosedFormSolution::log_heat_kernel(ctx(2.0), 2).unwrap();
        assert!(s.residual(&pt(&[1.0, 1.0], 1.0)).unwrap().abs() < 1e-12);
        assert!(fd_residual(&s, &[1.0, 1.0], 1.0).abs() < 1e-6);
    }

    #[test]
    fn finite_difference_oracle_all_families() {
        let fams = vec![
            (ClosedFormSolution::traveling_wave(ctx(2.5), vec![0.7, -0.4]).unwrap(), vec![0.2, 0.9], 0.4),
            (ClosedFormSolution::stationary_half_line(ctx(3.0), 0.5, 2).unwrap(), vec![-1.0, 0.8], 0.0),
            (ClosedFormSolution::quadratic_sinh(ctx(2.0), 1.3, vec![0.4]).unwrap(), vec![0.3, 0.6], -0.2),
            (ClosedFormSolution::quadratic_log_linear(ctx(2.0), 2.0, 1).unwrap(), vec![0.4], 1.0),
            (ClosedFormSolution::linear_optimality(ctx(3.0), 0.5, 2).unwrap(), vec![0.1, 0.2], 0.3),
        ];
        for (s, x, t) in fams {
            assert!(s.residual(&pt(&x, t)).unwrap().abs() < 1e-12, "{}", s.family().name());
            assert!(fd_residual(&s, &x, t).abs() < 1e-5, "{}", s.family().name());
        }
    }

    #[test]
    fn construction_constraints() {
        assert!(ClosedFormSolution::quadratic_sinh(ctx(3.0), 1.0, vec![]).is_err());
        assert!(ClosedFormSolution::log_heat_kernel(ctx(2.5), 1).is_err());
        assert!(ClosedFormSolution::quadratic_log_linear(ctx(1.5), 1.0, 1).is_err());
        assert!(ClosedFormSolution::stationary_half_line(ctx(2.0), 1.0, 1).is_err());
        assert!(ClosedFormSolution::stationary_half_line(ctx(1.5), 0.0, 1).is_err());
        assert!(ClosedFormSolution::stationary_half_line(ctx(3.0), 0.0, 1).is_ok());
        assert!(ClosedFormSolution::traveling_wave(ctx(3.0), vec![0.0, 0.0]).is_err());
        assert!(ClosedFormSolution::linear_optimality(ctx(3.0), 1.0, 1).is_err());
    }

    #[test]
    fn domains_are_strict() {
        let s = ClosedFormSolution::stationary_half_line(ctx(3.0), 1.0, 1).unwrap();
        assert!(matches!(s.eval(&pt(&[-0.1], 0.0)), Err(Error::OutsideDomain { .. })));
        let h = ClosedFormSolution::log_heat_kernel(ctx(2.0), 1).unwrap();
        assert!(h.eval(&pt(&[0.0], 0.0)).is_err());
        assert!(h.eval(&pt(&[0.0, 0.0], 1.0)).is_err());
    }

    #[test]
    fn rescale_retags_stationary_offset() {
        let s = ClosedFormSolution::stationary_half_line(ctx(3.0), 1.0, 1).unwrap();
        let r = s.rescale(2.0).unwrap();
        match r.family() {
            Family::StationaryHalfLine { offset, .. } => assert_eq!(*offset, 0.5),
            _ => panic!("family changed"),
        }
        let beta = s.context().beta;
        for x in [0.0, 0.3, 1.7, 5.0] {
            let lhs = r.eval(&pt(&[x], 0.0)).unwrap().u;
            let rhs = 2f64.powf(beta - 1.0) * s.eval(&pt(&[2.0 * x], 0.0)).unwrap().u;
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn rescale_identity_and_composition() {
        let s = ClosedFormSolution::log_heat_kernel(ctx(2.0), 1).unwrap();
        let p0 = pt(&[0.4], 0.7);
        assert_eq!(s.rescale(1.0).unwrap().eval(&p0).unwrap(), s.eval(&p0).unwrap());
        let a = s.rescale(0.7).unwrap().rescale(1.9).unwrap();
        let b = s.rescale(0.7 * 1.9).unwrap();
        assert!((a.eval(&p0).unwrap().u - b.eval(&p0).unwrap().u).abs() < 1e-10);
        assert!(a.residual(&p0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn self_similar_backward_residual_and_scale_invariance() {
        let c = ctx(3.0);
        let traj = integrate(&ProfileOde::backward(c), 0.1, &IntegratorControls::default().with_y_max(50.0)).unwrap();
        let s = ClosedFormSolution::self_similar(Arc::new(traj), 1).unwrap();
        let p0 = pt(&[0.8], -0.5);
        assert!(s.residual(&p0).unwrap().abs() < 1e-12);
        assert!(fd_residual(&s, &[0.8], -0.5).abs() < 1e-5);
        let r = s.rescale(2.0).unwrap();
        assert!((r.eval(&p0).unwrap().u - s.eval(&p0).unwrap().u).abs() < 1e-12);
        assert!(s.eval(&pt(&[0.8], 0.1)).is_err());
        assert!(matches!(s.eval(&pt(&[100.0], -1.0)), Err(Error::ProfileCoverage { .. })));
    }

    #[test]
    fn self_similar_forward_solves_equation() {
        let c = ctx(3.0);
        let traj = integrate(&ProfileOde::forward(c), 0.05, &IntegratorControls::default().with_y_max(20.0)).unwrap();
        let s = ClosedFormSolution::self_similar(Arc::new(traj), 1).unwrap();
        assert!(s.residual(&pt(&[0.6], 0.5)).unwrap().abs() < 1e-12);
        assert!(fd_residual(&s, &[0.6], 0.5).abs() < 1e-5);
    }

    #[test]
    fn shift_translates() {
        let s = ClosedFormSolution::log_heat_kernel(ctx(2.0), 1).unwrap();
        let sh = s.shifted(&[0.5], 2.0).unwrap();
        let a = sh.eval(&pt(&[0.1], 0.3)).unwrap().u;
        let b = s.eval(&pt(&[0.6], 2.3)).unwrap().u;
        assert!((a - b).abs() < 1e-15);
    }
}
