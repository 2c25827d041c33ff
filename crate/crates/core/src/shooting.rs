//! Shooting in the initial slope `alpha = phi'(0)`.
//!
//! Backward profiles: every `alpha` in `(0, alpha0)` yields a global positive
//! increasing profile, concave then convex. Forward profiles (`p > 2`): slopes
//! split into `J1` (phi'' eventually negative), `J2` (finite-y blow-up, detected
//! through `phi'^{p-1} > y + 1`) and a single critical slope between them.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::exponents::{pow_abs, ExponentContext};
use crate::ode::{
    integrate, integrate_until, psi_ratio, psi_ratio_upto, EventKind, IntegratorControls, ProfileOde,
    ProfileTrajectory, TailFit, Termination,
};

fn require_superquadratic(ctx: &ExponentContext) -> Result<()> {
    if !(ctx.p > 2.0) {
        return Err(Error::Precondition(format!("forward shooting requires p > 2, got p = {}", ctx.p)));
    }
    Ok(())
}

/// `alpha0 = (eps/2)^beta` with `eps = 1/2 - max(gamma, 0)`.
pub fn backward_alpha0(ctx: &ExponentContext) -> f64 {
    let eps = 0.5 - ctx.gamma_ss.max(0.0);
    (eps / 2.0).powf(ctx.beta)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BackwardShapeReport {
    pub p: f64,
    pub alpha: f64,
    pub alpha0: f64,
    pub y_reached: f64,
    pub termination: Termination,
    pub phi_positive: bool,
    pub phi_prime_positive: bool,
    pub upcross_count: usize,
    pub downcross_count: usize,
    /// Location where `phi''` turns positive.
    pub r_bar: Option<f64>,
    pub psi_fit: Option<TailFit>,
    #[serde(rename = "L_limit")]
    pub l_limit: f64,
    pub psi_rel_error: Option<f64>,
    /// `min Z` over the second half of the trajectory, `Z = phi'^{p-1}/y`.
    pub z_tail_min: f64,
    pub z_lambda: f64,
    pub z_check: bool,
    pub shape_ok: bool,
}

/// Integrates the backward profile and reports its shape.
pub fn backward_profile(
    ctx: &ExponentContext,
    alpha: f64,
    controls: &IntegratorControls,
) -> Result<(ProfileTrajectory, BackwardShapeReport)> {
    let alpha0 = backward_alpha0(ctx);
    if !(alpha > 0.0 && alpha < alpha0) {
        return Err(invalid("alpha", format!("expected alpha in (0, {alpha0}), got {alpha}")));
    }
    let traj = integrate(&ProfileOde::backward(*ctx), alpha, controls)?;
    let inner = traj.samples.iter().skip(1);
    let phi_positive = inner.clone().all(|s| s.phi > 0.0);
    let phi_prime_positive = inner.clone().all(|s| s.phi_prime > 0.0);
    let upcross_count = traj.count_events(EventKind::PhiPrimePrimeUpcross);
    let downcross_count = traj.count_events(EventKind::PhiPrimePrimeNegative);
    let r_bar = traj.first_event(EventKind::PhiPrimePrimeUpcross).map(|e| e.y);
    let psi_fit = psi_ratio(&traj).ok().map(|s| s.fit);
    let psi_rel_error = psi_fit.map(|f| (f.psi_inf / ctx.l_limit - 1.0).abs());

    let y_last = traj.y_last();
    let z_tail_min = traj
        .samples
        .iter()
        .filter(|s| s.y >= 0.5 * y_last && s.y > 0.0)
        .map(|s| pow_abs(s.phi_prime, ctx.p - 1.0) / s.y)
        .fold(f64::INFINITY, f64::min);
    let z_lambda = 0.5 * ctx.beta.min(1.0);
    let z_check = z_tail_min >= z_lambda;
    let shape_ok = phi_positive
        && phi_prime_positive
        && upcross_count == 1
        && downcross_count == 0
        && traj.termination == Termination::ReachedYMax;

    let report = BackwardShapeReport {
        p: ctx.p,
        alpha,
        alpha0,
        y_reached: y_last,
        termination: traj.termination,
        phi_positive,
        phi_prime_positive,
        upcross_count,
        downcross_count,
        r_bar,
        psi_fit,
        l_limit: ctx.l_limit,
        psi_rel_error,
        z_tail_min,
        z_lambda,
        z_check,
        shape_ok,
    };
    Ok((traj, report))
}

/// Explicit lower end of the forward `J1` interval:
/// `alpha1 = min(alpha2, (beta/8 · y1 · (1+eps)^{-p})^beta)`.
pub fn forward_alpha1(ctx: &ExponentContext) -> Result<f64> {
    require_superquadratic(ctx)?;
    let p = ctx.p;
    let beta = ctx.beta;
    let eps = 1.0 / (2.0 * (p - 2.0));
    let alpha2 = (1.0 + eps).powf(-p * beta);
    let y1 = (eps / (ctx.gamma_ss * (1.0 + eps) + 1.0)).min(1.0);
    let second = (beta / 8.0 * y1 * (1.0 + eps).powf(-p)).powf(beta);
    Ok(alpha2.min(second))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ForwardTag {
    J1,
    J2,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForwardClass {
    pub tag: ForwardTag,
    pub witness_y: Option<f64>,
    pub y_reached: f64,
    pub termination: Termination,
    pub diagnostics: Option<String>,
}

/// Classifies `alpha` by the first decisive event of the forward profile.
pub fn classify_forward(ctx: &ExponentContext, alpha: f64, controls: &IntegratorControls) -> Result<ForwardClass> {
    require_superquadratic(ctx)?;
    if !(alpha > 0.0) {
        return Err(invalid("alpha", format!("expected alpha > 0, got {alpha}")));
    }
    let decisive = |k: EventKind| {
        matches!(k, EventKind::PhiPrimePrimeNegative | EventKind::J2Threshold | EventKind::BlowUpGuard)
    };
    let traj = match integrate_until(&ProfileOde::forward(*ctx), alpha, controls, |e| decisive(e.kind)) {
        Ok(t) => t,
        Err(Error::Integration(msg)) => {
            return Ok(ForwardClass {
                tag: ForwardTag::Undetermined,
                witness_y: None,
                y_reached: f64::NAN,
                termination: Termination::StepUnderflow,
                diagnostics: Some(msg),
            })
        }
        Err(e) => return Err(e),
    };
    let first = traj.events.iter().find(|e| decisive(e.kind)).copied();
    let (tag, witness_y, diagnostics) = match first {
        Some(e) if e.kind == EventKind::PhiPrimePrimeNegative => (ForwardTag::J1, Some(e.y), None),
        Some(e) => (ForwardTag::J2, Some(e.y), None),
        None if traj.termination == Termination::StepUnderflow => (
            ForwardTag::Undetermined,
            None,
            Some(format!("step underflow at y = {}", traj.y_last())),
        ),
        None => (ForwardTag::Undetermined, None, None),
    };
    Ok(ForwardClass { tag, witness_y, y_reached: traj.y_last(), termination: traj.termination, diagnostics })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalAlphaResult {
    pub p: f64,
    pub alpha_star: f64,
    pub bracket: (f64, f64),
    pub iterations: usize,
    pub y_max_used: f64,
    /// Every probed slope with its class, in probe order.
    pub visited: Vec<(f64, ForwardTag)>,
}

/// Largest horizon tried when a probe stays undetermined.
pub const DEFAULT_Y_MAX_CAP: f64 = 800.0;

/// Bisection between `alpha1` (asserted `J1`) and the first of `1, 2, 4, ...`
/// classified `J2`. Stops when the bracket is narrower than `tol` or can no
/// longer be split in floating point.
pub fn critical_alpha(ctx: &ExponentContext, tol: f64, controls: &IntegratorControls) -> Result<CriticalAlphaResult> {
    critical_alpha_from(ctx, tol, controls, 1.0, DEFAULT_Y_MAX_CAP)
}

/// [`critical_alpha`] with an explicit first upper probe and horizon cap.
pub fn critical_alpha_from(
    ctx: &ExponentContext,
    tol: f64,
    controls: &IntegratorControls,
    first_hi: f64,
    y_max_cap: f64,
) -> Result<CriticalAlphaResult> {
    require_superquadratic(ctx)?;
    if !(tol > 0.0) {
        return Err(invalid("tol", format!("expected tol > 0, got {tol}")));
    }
    if !(first_hi > 0.0) {
        return Err(invalid("first_hi", "must be positive"));
    }
    let mut controls = *controls;
    let mut visited = Vec::new();
    let mut classify = |alpha: f64, controls: &mut IntegratorControls| -> Result<ForwardTag> {
        loop {
            let c = classify_forward(ctx, alpha, controls)?;
            if c.tag != ForwardTag::Undetermined {
                visited.push((alpha, c.tag));
                return Ok(c.tag);
            }
            if controls.y_max >= y_max_cap {
                return Err(Error::Shooting(format!(
                    "alpha = {alpha} undetermined up to y_max = {} ({})",
                    controls.y_max,
                    c.diagnostics.unwrap_or_else(|| "no event".into())
                )));
            }
            controls.y_max = (2.0 * controls.y_max).min(y_max_cap);
        }
    };

    let mut lo = forward_alpha1(ctx)?;
    if classify(lo, &mut controls)? != ForwardTag::J1 {
        return Err(Error::Shooting(format!("alpha1 = {lo} not classified J1")));
    }
    let mut hi = first_hi;
    let mut found = false;
    for _ in 0..12 {
        if hi > lo && classify(hi, &mut controls)? == ForwardTag::J2 {
            found = true;
            break;
        }
        hi *= 2.0;
    }
    if !found {
        return Err(Error::Shooting("no J2 slope found up to 2^12".into()));
    }

    let mut iterations = 0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        match classify(mid, &mut controls)? {
            ForwardTag::J1 => lo = mid,
            _ => hi = mid,
        }
    }
    Ok(CriticalAlphaResult {
        p: ctx.p,
        alpha_star: 0.5 * (lo + hi),
        bracket: (lo, hi),
        iterations,
        y_max_used: controls.y_max,
        visited,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalProfileReport {
    pub p: f64,
    pub alpha: f64,
    pub bracket: (f64, f64),
    /// Largest y up to which the bracket-endpoint trajectories agree to 1% in phi'.
    pub horizon: f64,
    pub slack: f64,
    /// `min (phi - alpha y)` on `(0, horizon]`.
    pub min_phi_minus_alpha_y: f64,
    /// `min (phi'^{p-1} - beta y / 2)` on `[1, horizon]`.
    pub min_lower_gap: f64,
    /// `min (y + 1 - phi'^{p-1})` on `[1, horizon]`.
    pub min_upper_gap: f64,
    pub max_lower_gap: f64,
    pub max_upper_gap: f64,
    pub min_phi_pp: f64,
    pub psi_at_horizon: f64,
    #[serde(rename = "L_limit")]
    pub l_limit: f64,
    pub psi_rel_error: f64,
    pub psi_fit: Option<TailFit>,
    pub checks_pass: bool,
}

/// Relative `phi'` gap that defines the bracket-divergence horizon.
pub const DIVERGENCE_THRESHOLD: f64 = 0.01;

/// Checks the bounds satisfied by the critical forward profile at the bracket
/// midpoint, only up to where the two bracket trajectories stay close.
pub fn critical_profile_report(
    ctx: &ExponentContext,
    critical: &CriticalAlphaResult,
    controls: &IntegratorControls,
    slack: f64,
) -> Result<CriticalProfileReport> {
    require_superquadratic(ctx)?;
    let (lo, hi) = critical.bracket;
    if !(lo < hi) {
        return Err(invalid("bracket", "empty bracket"));
    }
    let ode = ProfileOde::forward(*ctx);
    let alpha = 0.5 * (lo + hi);
    let mid = integrate(&ode, alpha, controls)?;
    let t_lo = integrate(&ode, lo, controls)?;
    let t_hi = integrate(&ode, hi, controls)?;

    // Walk the shared grid until the endpoint trajectories separate.
    let mut horizon = 0.0;
    let end = mid.y_last().min(t_lo.y_last()).min(t_hi.y_last());
    let step = controls.sample_spacing;
    let mut k = 1;
    loop {
        let y = k as f64 * step;
        if y > end {
            break;
        }
        let (_, a) = t_lo.interpolate(y)?;
        let (_, b) = t_hi.interpolate(y)?;
        if (a - b).abs() > DIVERGENCE_THRESHOLD * a.abs().max(b.abs()) {
            break;
        }
        horizon = y;
        k += 1;
    }
    if horizon < 1.0 {
        return Err(Error::Shooting(format!(
            "bracket [{lo}, {hi}] too wide to certify: trajectories diverge before y = 1"
        )));
    }

    let p = ctx.p;
    let beta = ctx.beta;
    let mut min_phi_minus_alpha_y = f64::INFINITY;
    let mut min_lower_gap = f64::INFINITY;
    let mut min_upper_gap = f64::INFINITY;
    let mut max_lower_gap = f64::NEG_INFINITY;
    let mut max_upper_gap = f64::NEG_INFINITY;
    let mut min_phi_pp = f64::INFINITY;
    for s in mid.samples.iter().filter(|s| s.y > 0.0 && s.y <= horizon) {
        min_phi_minus_alpha_y = min_phi_minus_alpha_y.min(s.phi - alpha * s.y);
        min_phi_pp = min_phi_pp.min(s.phi_pp);
        if s.y >= 1.0 {
            let w = pow_abs(s.phi_prime, p - 1.0);
            let lower = w - 0.5 * beta * s.y;
            let upper = s.y + 1.0 - w;
            min_lower_gap = min_lower_gap.min(lower);
            max_lower_gap = max_lower_gap.max(lower);
            min_upper_gap = min_upper_gap.min(upper);
            max_upper_gap = max_upper_gap.max(upper);
        }
    }
    let (phi_h, _) = mid.interpolate(horizon)?;
    let psi_at_horizon = phi_h / horizon.powf(beta + 1.0);
    let psi_rel_error = (psi_at_horizon / ctx.l_limit - 1.0).abs();
    let psi_fit = psi_ratio_upto(&mid, horizon).ok().map(|s| s.fit);
    let checks_pass = min_phi_minus_alpha_y >= -slack
        && min_lower_gap >= -slack
        && min_upper_gap >= -slack
        && min_phi_pp >= -slack;
    Ok(CriticalProfileReport {
        p,
        alpha,
        bracket: critical.bracket,
        horizon,
        slack,
        min_phi_minus_alpha_y,
        min_lower_gap,
        min_upper_gap,
        max_lower_gap,
        max_upper_gap,
        min_phi_pp,
        psi_at_horizon,
        l_limit: ctx.l_limit,
        psi_rel_error,
        psi_fit,
        checks_pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderingReport {
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    pub compared_samples: usize,
    pub y_shared: f64,
    pub min_phi_gap: f64,
    pub min_phi_prime_gap: f64,
    pub first_violation: Option<f64>,
    pub lo_termination: Termination,
    pub hi_termination: Termination,
    pub ordered: bool,
}

/// Compares two forward profiles on the shared sample grid: the larger slope
/// must dominate in both `phi` and `phi'` wherever both exist.
pub fn compare_profiles(
    ctx: &ExponentContext,
    alpha_lo: f64,
    alpha_hi: f64,
    controls: &IntegratorControls,
) -> Result<OrderingReport> {
    require_superquadratic(ctx)?;
    if !(alpha_lo > 0.0 && alpha_lo < alpha_hi) {
        return Err(invalid("alpha", format!("expected 0 < alpha_lo < alpha_hi, got ({alpha_lo}, {alpha_hi})")));
    }
    let ode = ProfileOde::forward(*ctx);
    let a = integrate(&ode, alpha_lo, controls)?;
    let b = integrate(&ode, alpha_hi, controls)?;
    let y_shared = a.y_last().min(b.y_last());
    let mut min_phi_gap = f64::INFINITY;
    let mut min_phi_prime_gap = f64::INFINITY;
    let mut first_violation = None;
    let mut compared = 0;
    let step = controls.sample_spacing;
    let mut k = 1;
    loop {
        let y = k as f64 * step;
        if y > y_shared {
            break;
        }
        let (pa, da) = a.interpolate(y)?;
        let (pb, db) = b.interpolate(y)?;
        let g0 = pb - pa;
        let g1 = db - da;
        min_phi_gap = min_phi_gap.min(g0);
        min_phi_prime_gap = min_phi_prime_gap.min(g1);
        if first_violation.is_none() && (g0 <= 0.0 || g1 <= 0.0) {
            first_violation = Some(y);
        }
        compared += 1;
        k += 1;
    }
    Ok(OrderingReport {
        alpha_lo,
        alpha_hi,
        compared_samples: compared,
        y_shared,
        min_phi_gap,
        min_phi_prime_gap,
        first_violation,
        lo_termination: a.termination,
        hi_termination: b.termination,
        ordered: first_violation.is_none() && compared > 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::make_context;

    fn ctx(p: f64) -> ExponentContext {
        make_context(p).unwrap()
    }

    #[test]
    fn alpha0_values() {
        assert!((backward_alpha0(&ctx(3.0)) - 0.125f64.sqrt()).abs() < 1e-15);
        assert!((backward_alpha0(&ctx(2.0)) - 0.25).abs() < 1e-15);
        assert!((backward_alpha0(&ctx(1.5)) - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn alpha1_values() {
        // p = 3: eps = 1/2, alpha2 = 1.5^{-1.5}, y1 = 0.5/1.375
        let y1: f64 = 0.5 / 1.375;
        let expect = (0.5 / 8.0 * y1 / 1.5f64.powi(3)).sqrt();
        let a1 = forward_alpha1(&ctx(3.0)).unwrap();
        assert!((a1 - expect).abs() < 1e-15);
        assert!((a1 - 0.082_060_994).abs() < 1e-8);
        // p = 4: eps = 1/4, beta = 1/3, gamma = 1/3
        let y1: f64 = 0.25 / (1.25 / 3.0 + 1.0);
        let alpha2 = 1.25f64.powf(-4.0 / 3.0);
        let second = (1.0 / 24.0 * y1 * 1.25f64.powi(-4)).powf(1.0 / 3.0);
        assert!((forward_alpha1(&ctx(4.0)).unwrap() - alpha2.min(second)).abs() < 1e-15);
        assert!(forward_alpha1(&ctx(2.0)).is_err());
    }

    #[test]
    fn alpha_formulas_are_smooth_in_p() {
        for p in [2.5, 3.0, 4.0] {
            let d0 = (backward_alpha0(&ctx(p + 1e-9)) - backward_alpha0(&ctx(p - 1e-9))).abs();
            let d1 = (forward_alpha1(&ctx(p + 1e-9)).unwrap() - forward_alpha1(&ctx(p - 1e-9)).unwrap()).abs();
            assert!(d0 < 1e-7 && d1 < 1e-7);
        }
    }

    #[test]
    fn backward_profile_shape() {
        let c = ctx(3.0);
        let (_, r) = backward_profile(&c, 0.1, &IntegratorControls::default().with_y_max(200.0)).unwrap();
        assert!(r.shape_ok, "{r:?}");
        assert!(r.psi_rel_error.unwrap() < 0.02);
        assert!(r.z_check);
        assert!(backward_profile(&c, 0.9, &IntegratorControls::default()).is_err());
    }

    #[test]
    fn backward_profile_p25() {
        let c = ctx(2.5);
        let alpha = 0.5 * backward_alpha0(&c);
        let (_, r) = backward_profile(&c, alpha, &IntegratorControls::default().with_y_max(200.0)).unwrap();
        assert!(r.shape_ok && r.z_check, "{r:?}");
    }

    #[test]
    fn classify_examples() {
        let c = ctx(3.0);
        let ctl = IntegratorControls::default();
        assert_eq!(classify_forward(&c, 0.05, &ctl).unwrap().tag, ForwardTag::J1);
        let j2 = classify_forward(&c, 2.0, &ctl).unwrap();
        assert_eq!(j2.tag, ForwardTag::J2);
        assert!(j2.witness_y.is_some());
        // Near the critical slope a short horizon cannot decide.
        let short = IntegratorControls::default().with_y_max(0.5);
        assert_eq!(classify_forward(&c, 0.5485, &short).unwrap().tag, ForwardTag::Undetermined);
        assert!(classify_forward(&ctx(2.0), 0.1, &ctl).is_err());
    }

    #[test]
    fn critical_alpha_p3() {
        let c = ctx(3.0);
        let ctl = IntegratorControls::default();
        let r = critical_alpha(&c, 1e-6, &ctl).unwrap();
        assert!(r.bracket.1 - r.bracket.0 <= 1e-6);
        assert!(r.bracket.0 >= forward_alpha1(&c).unwrap() && r.bracket.1 <= 1.0);
        assert_eq!(classify_forward(&c, r.bracket.0, &ctl).unwrap().tag, ForwardTag::J1);
        assert_eq!(classify_forward(&c, r.bracket.1, &ctl).unwrap().tag, ForwardTag::J2);
        // Self-generated reference value, see the golden files of the CLI.
        assert!((r.alpha_star - 0.548_513_89).abs() < 2e-6, "{}", r.alpha_star);
        // A different initial upper probe gives an overlapping bracket.
        let r2 = critical_alpha_from(&c, 1e-6, &ctl, 4.0, DEFAULT_Y_MAX_CAP).unwrap();
        assert!(r2.bracket.0 <= r.bracket.1 + 1e-6 && r.bracket.0 <= r2.bracket.1 + 1e-6);
    }

    #[test]
    fn compare_profiles_ordering() {
        let c = ctx(3.0);
        let ctl = IntegratorControls::default().with_y_max(20.0);
        let r = compare_profiles(&c, 0.05, 0.5, &ctl).unwrap();
        assert!(r.ordered && r.compared_samples > 100, "{r:?}");
        let r = compare_profiles(&c, 0.05, 2.0, &ctl).unwrap();
        assert!(r.ordered, "{r:?}");
        assert_ne!(r.hi_termination, Termination::ReachedYMax);
        assert!(compare_profiles(&c, 0.3, 0.3, &ctl).is_err());
    }
}
