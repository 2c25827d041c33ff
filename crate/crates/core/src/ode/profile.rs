//! Self-similar profile equation `sigma phi'' = y phi'/2 - gamma phi - |phi'|^p`.
//!
//! `sigma = +1` is the backward profile (ancient solutions on `t < 0`),
//! `sigma = -1` the forward profile of the absorbing equation. Both start from
//! `phi(0) = 0`, `phi'(0) = alpha > 0`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::integrator::{hermite, integrate as dopri, Finish, Step, StepControl, StepperOptions};
use crate::error::{invalid, Error, Result};
use crate::exponents::{pow_abs, ExponentContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Backward,
    Forward,
}

impl Direction {
    pub fn sigma(self) -> f64 {
        match self {
            Direction::Backward => 1.0,
            Direction::Forward => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileOde {
    pub context: ExponentContext,
    pub direction: Direction,
}

impl ProfileOde {
    pub fn new(context: ExponentContext, direction: Direction) -> Self {
        Self { context, direction }
    }

    pub fn backward(context: ExponentContext) -> Self {
        Self::new(context, Direction::Backward)
    }

    pub fn forward(context: ExponentContext) -> Self {
        Self::new(context, Direction::Forward)
    }

    pub fn sigma(&self) -> f64 {
        self.direction.sigma()
    }

    /// `phi''` from the equation itself.
    #[inline]
    pub fn second_derivative(&self, y: f64, phi: f64, phi_prime: f64) -> f64 {
        let c = &self.context;
        self.sigma() * (0.5 * y * phi_prime - c.gamma_ss * phi - pow_abs(phi_prime, c.p))
    }

    #[inline]
    fn rhs(&self, y: f64, s: &[f64; 2]) -> [f64; 2] {
        [s[1], self.second_derivative(y, s[0], s[1])]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorControls {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub y_max: f64,
    pub phi_prime_cap: f64,
    pub event_tol: f64,
    /// Spacing of the uniform y-grid that every trajectory samples exactly.
    pub sample_spacing: f64,
    /// Relative dead-band for the sign of `phi''`: `1e-10 (1 + |phi'|^p)` by default.
    pub event_deadband: f64,
}

impl Default for IntegratorControls {
    fn default() -> Self {
        Self {
            rel_tol: 1e-11,
            abs_tol: 1e-13,
            max_step: 0.1,
            y_max: 100.0,
            phi_prime_cap: 1e8,
            event_tol: 1e-10,
            sample_spacing: 0.1,
            event_deadband: 1e-10,
        }
    }
}

impl IntegratorControls {
    pub fn with_y_max(mut self, y_max: f64) -> Self {
        self.y_max = y_max;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("max_step", self.max_step),
            ("y_max", self.y_max),
            ("phi_prime_cap", self.phi_prime_cap),
            ("event_tol", self.event_tol),
            ("sample_spacing", self.sample_spacing),
            ("event_deadband", self.event_deadband),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || v.is_nan() {
                return Err(invalid(name, format!("must be positive, got {v}")));
            }
        }
        if self.rel_tol < 1e-13 {
            return Err(invalid("rel_tol", format!("must be >= 1e-13, got {}", self.rel_tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    PhiPrimePrimeNegative,
    PhiPrimePrimeUpcross,
    J2Threshold,
    BlowUpGuard,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::PhiPrimePrimeNegative => "PhiPrimePrimeNegative",
            EventKind::PhiPrimePrimeUpcross => "PhiPrimePrimeUpcross",
            EventKind::J2Threshold => "J2Threshold",
            EventKind::BlowUpGuard => "BlowUpGuard",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Event {
    pub kind: EventKind,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Termination {
    ReachedYMax,
    BlowUpGuard,
    StepUnderflow,
    /// Stopped on request at an event (used by the shooting classifier).
    StoppedAtEvent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileSample {
    pub y: f64,
    pub phi: f64,
    pub phi_prime: f64,
    pub phi_pp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileTrajectory {
    pub ode: ProfileOde,
    pub alpha: f64,
    pub samples: Vec<ProfileSample>,
    pub events: Vec<Event>,
    pub termination: Termination,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CurvatureSign {
    Negative,
    Positive,
}

impl ProfileTrajectory {
    pub fn y_last(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.y)
    }

    pub fn first_event(&self, kind: EventKind) -> Option<Event> {
        self.events.iter().copied().find(|e| e.kind == kind)
    }

    pub fn count_events(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    /// Index `i` with `samples[i].y <= y <= samples[i+1].y`.
    fn bracket(&self, y: f64) -> Result<usize> {
        let last = self.y_last();
        if !(0.0..=last).contains(&y) || self.samples.len() < 2 {
            return Err(Error::ProfileCoverage { y, y_last: last });
        }
        let idx = self.samples.partition_point(|s| s.y <= y);
        Ok(idx.saturating_sub(1).min(self.samples.len() - 2))
    }

    /// `(phi, phi')` at `y` by cubic Hermite interpolation of the samples.
    pub fn interpolate(&self, y: f64) -> Result<(f64, f64)> {
        let i = self.bracket(y)?;
        let a = &self.samples[i];
        let b = &self.samples[i + 1];
        let phi = hermite(a.y, a.phi, a.phi_prime, b.y, b.phi, b.phi_prime, y);
        let dphi = hermite(a.y, a.phi_prime, a.phi_pp, b.y, b.phi_prime, b.phi_pp, y);
        Ok((phi, dphi))
    }

    /// `(phi, phi', phi'')` at `y`; `phi''` comes from the equation, not from differencing.
    pub fn state_at(&self, y: f64) -> Result<(f64, f64, f64)> {
        let (phi, dphi) = self.interpolate(y)?;
        Ok((phi, dphi, self.ode.second_derivative(y, phi, dphi)))
    }

    /// CSV dump: `y,phi,phi_prime,phi_pp` rows followed by `# event,<kind>,<y>` lines.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("y,phi,phi_prime,phi_pp\n");
        for s in &self.samples {
            let _ = writeln!(out, "{},{},{},{}", s.y, s.phi, s.phi_prime, s.phi_pp);
        }
        for e in &self.events {
            let _ = writeln!(out, "# event,{},{}", e.kind.name(), e.y);
        }
        out
    }
}

/// Integrates the profile equation up to `controls.y_max`, the blow-up guard,
/// or step underflow.
pub fn integrate(ode: &ProfileOde, alpha: f64, controls: &IntegratorControls) -> Result<ProfileTrajectory> {
    integrate_until(ode, alpha, controls, |_| false)
}

/// Like [`integrate`] but stops after the first step on which `stop` accepts a
/// detected event. Events inside one step are reported in increasing `y`.
pub fn integrate_until<S>(
    ode: &ProfileOde,
    alpha: f64,
    controls: &IntegratorControls,
    stop: S,
) -> Result<ProfileTrajectory>
where
    S: Fn(&Event) -> bool,
{
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(invalid("alpha", format!("expected alpha > 0, got {alpha}")));
    }
    controls.validate()?;

    let p = ode.context.p;
    let forward = ode.direction == Direction::Forward;
    let deadband = |dphi: f64| controls.event_deadband * (1.0 + pow_abs(dphi, p));
    let pp0 = ode.second_derivative(0.0, 0.0, alpha);

    let mut samples = vec![ProfileSample { y: 0.0, phi: 0.0, phi_prime: alpha, phi_pp: pp0 }];
    let mut events: Vec<Event> = Vec::new();
    let mut sign = if pp0 < -deadband(alpha) {
        Some(CurvatureSign::Negative)
    } else if pp0 > deadband(alpha) {
        Some(CurvatureSign::Positive)
    } else {
        None
    };
    let mut j2_fired = forward && pow_abs(alpha, p - 1.0) > 1.0;
    if j2_fired {
        events.push(Event { kind: EventKind::J2Threshold, y: 0.0 });
    }
    let mut guard_hit = false;
    let mut stopped = j2_fired && stop(&events[0]);

    let opts = StepperOptions {
        rel_tol: controls.rel_tol,
        abs_tol: controls.abs_tol,
        max_step: controls.max_step,
        initial_step: Some(1e-3f64.min(controls.max_step)),
        grid: Some(controls.sample_spacing),
        ..Default::default()
    };

    let locate = |step: &Step<2>, g: &dyn Fn(f64, f64, f64) -> f64| -> f64 {
        let (mut lo, mut hi) = (step.t0, step.t1);
        while hi - lo > controls.event_tol {
            let mid = 0.5 * (lo + hi);
            let s = step.interpolate(mid);
            if g(mid, s[0], s[1]) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
            if mid == lo && mid == hi {
                break;
            }
        }
        0.5 * (lo + hi)
    };

    let outcome = if stopped {
        None
    } else {
        Some(dopri(
            |y, s| ode.rhs(y, s),
            0.0,
            [0.0, alpha],
            controls.y_max,
            &opts,
            |step| {
                let (y1, phi1, dphi1) = (step.t1, step.y1[0], step.y1[1]);
                let pp1 = step.f1[1];
                samples.push(ProfileSample { y: y1, phi: phi1, phi_prime: dphi1, phi_pp: pp1 });

                let mut found: Vec<Event> = Vec::new();
                let db1 = deadband(dphi1);
                if sign != Some(CurvatureSign::Negative) && pp1 < -db1 {
                    if sign.is_some() {
                        // g > 0 once phi'' has dropped below the dead-band
                        let g = |y: f64, phi: f64, dphi: f64| {
                            -(ode.second_derivative(y, phi, dphi) + deadband(dphi))
                        };
                        found.push(Event { kind: EventKind::PhiPrimePrimeNegative, y: locate(step, &g) });
                    }
                    sign = Some(CurvatureSign::Negative);
                } else if sign != Some(CurvatureSign::Positive) && pp1 > db1 {
                    if sign.is_some() {
                        let g = |y: f64, phi: f64, dphi: f64| {
                            ode.second_derivative(y, phi, dphi) - deadband(dphi)
                        };
                        found.push(Event { kind: EventKind::PhiPrimePrimeUpcross, y: locate(step, &g) });
                    }
                    sign = Some(CurvatureSign::Positive);
                }
                if forward && !j2_fired && pow_abs(dphi1, p - 1.0) > y1 + 1.0 {
                    let g = |y: f64, _phi: f64, dphi: f64| pow_abs(dphi, p - 1.0) - (y + 1.0);
                    found.push(Event { kind: EventKind::J2Threshold, y: locate(step, &g) });
                    j2_fired = true;
                }
                if dphi1.abs() > controls.phi_prime_cap {
                    found.push(Event { kind: EventKind::BlowUpGuard, y: y1 });
                    guard_hit = true;
                }
                found.sort_by(|a, b| a.y.total_cmp(&b.y));
                if found.len() > 1 && (found[1].y - found[0].y).abs() <= controls.event_tol {
                    log::warn!(
                        "events {} and {} coincide at y = {} within event_tol; keeping order {:?}",
                        found[0].kind.name(),
                        found[1].kind.name(),
                        found[0].y,
                        found.iter().map(|e| e.kind).collect::<Vec<_>>()
                    );
                }
                let want_stop = found.iter().any(&stop);
                events.extend(found);
                if guard_hit || want_stop {
                    stopped = want_stop;
                    StepControl::Stop
                } else {
                    StepControl::Continue
                }
            },
        ))
    };

    let termination = match outcome.map(|o| o.finish) {
        None => Termination::StoppedAtEvent,
        Some(_) if guard_hit => Termination::BlowUpGuard,
        Some(Finish::Stopped) if stopped => Termination::StoppedAtEvent,
        Some(Finish::ReachedEnd) => Termination::ReachedYMax,
        Some(Finish::StepUnderflow) => Termination::StepUnderflow,
        Some(Finish::MaxSteps) => {
            return Err(Error::Integration(format!(
                "step budget exhausted before y = {}",
                controls.y_max
            )))
        }
        Some(Finish::Stopped) => Termination::StoppedAtEvent,
    };

    Ok(ProfileTrajectory { ode: *ode, alpha, samples, events, termination })
}

/// Tail-limit estimate of `psi = phi / y^{beta+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailFit {
    /// Fitted asymptote `psi_inf` of `psi(y) = psi_inf + c y^{-q}`.
    pub psi_inf: f64,
    pub coeff: f64,
    /// Empirical decay exponent; reported, never asserted.
    pub q: f64,
    pub window: (f64, f64),
    pub last_psi: f64,
    pub rms_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsiSeries {
    pub series: Vec<(f64, f64)>,
    pub fit: TailFit,
}

/// Minimum trajectory length accepted by [`psi_ratio`].
pub const PSI_MIN_RANGE: f64 = 10.0;

/// Series of `psi = phi / y^{beta+1}` on `y >= 1` and a least-squares tail fit
/// over the last decade `[y_last / 10, y_last]`.
pub fn psi_ratio(traj: &ProfileTrajectory) -> Result<PsiSeries> {
    psi_ratio_upto(traj, traj.y_last())
}

/// [`psi_ratio`] restricted to `y <= y_end`.
pub fn psi_ratio_upto(traj: &ProfileTrajectory, y_end: f64) -> Result<PsiSeries> {
    let y_end = y_end.min(traj.y_last());
    if y_end < PSI_MIN_RANGE {
        return Err(Error::InsufficientRange(format!(
            "psi ratio needs y >= {PSI_MIN_RANGE}, trajectory reaches {y_end}"
        )));
    }
    let exp = traj.ode.context.beta + 1.0;
    let series: Vec<(f64, f64)> = traj
        .samples
        .iter()
        .filter(|s| s.y >= 1.0 && s.y <= y_end)
        .map(|s| (s.y, s.phi / s.y.powf(exp)))
        .collect();
    let window = (y_end / 10.0, y_end);
    let tail: Vec<(f64, f64)> = series.iter().copied().filter(|(y, _)| *y >= window.0).collect();
    let last_psi = series.last().map_or(f64::NAN, |s| s.1);
    let fit = fit_tail(&tail, window, last_psi);
    Ok(PsiSeries { series, fit })
}

fn fit_tail(tail: &[(f64, f64)], window: (f64, f64), last_psi: f64) -> TailFit {
    let n = tail.len() as f64;
    let mut best = TailFit {
        psi_inf: last_psi,
        coeff: 0.0,
        q: f64::NAN,
        window,
        last_psi,
        rms_residual: f64::INFINITY,
    };
    if tail.len() < 3 {
        return best;
    }
    // Profile the linear parameters over a grid of decay exponents.
    for k in 0..=156 {
        let q = 0.1 + 0.025 * k as f64;
        let xs: Vec<f64> = tail.iter().map(|(y, _)| y.powf(-q)).collect();
        let mx = xs.iter().sum::<f64>() / n;
        let my = tail.iter().map(|(_, v)| v).sum::<f64>() / n;
        let mut sxx = 0.0;
        let mut sxy = 0.0;
        for (x, (_, v)) in xs.iter().zip(tail) {
            sxx += (x - mx) * (x - mx);
            sxy += (x - mx) * (v - my);
        }
        if sxx <= 0.0 {
            continue;
        }
        let c = sxy / sxx;
        let a = my - c * mx;
        let ssr: f64 = xs.iter().zip(tail).map(|(x, (_, v))| (v - a - c * x).powi(2)).sum();
        let rms = (ssr / n).sqrt();
        if rms < best.rms_residual {
            best = TailFit { psi_inf: a, coeff: c, q, window, last_psi, rms_residual: rms };
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::make_context;

    fn ctx(p: f64) -> ExponentContext {
        make_context(p).unwrap()
    }

    #[test]
    fn second_derivative_at_origin() {
        let c = ctx(3.0);
        let b = ProfileOde::backward(c);
        let f = ProfileOde::forward(c);
        assert!((b.second_derivative(0.0, 0.0, 0.1) + 0.001).abs() < 1e-15);
        assert!((f.second_derivative(0.0, 0.0, 0.5) - 0.125).abs() < 1e-15);
        assert!((b.second_derivative(1.0, 1.0, 0.0) + 0.25).abs() < 1e-15);
    }

    #[test]
    fn trajectory_starts_at_initial_data() {
        let c = ctx(3.0);
        let traj = integrate(&ProfileOde::backward(c), 0.1, &IntegratorControls::default().with_y_max(5.0)).unwrap();
        let s0 = traj.samples[0];
        assert_eq!((s0.y, s0.phi, s0.phi_prime), (0.0, 0.0, 0.1));
        assert!((s0.phi_pp + 0.001).abs() < 1e-15);
        assert!(traj.samples.windows(2).all(|w| w[1].y > w[0].y));
        for s in &traj.samples {
            assert_eq!(s.phi_pp, traj.ode.second_derivative(s.y, s.phi, s.phi_prime));
        }
    }

    #[test]
    fn backward_single_upcross_and_positive() {
        let c = ctx(3.0);
        let traj = integrate(&ProfileOde::backward(c), 0.1, &IntegratorControls::default().with_y_max(50.0)).unwrap();
        assert_eq!(traj.termination, Termination::ReachedYMax);
        assert_eq!(traj.count_events(EventKind::PhiPrimePrimeUpcross), 1);
        assert_eq!(traj.count_events(EventKind::PhiPrimePrimeNegative), 0);
        assert!(traj.samples.iter().skip(1).all(|s| s.phi > 0.0 && s.phi_prime > 0.0));
    }

    #[test]
    fn grid_nodes_are_sampled() {
        let traj = integrate(&ProfileOde::backward(ctx(3.0)), 0.1, &IntegratorControls::default().with_y_max(3.0)).unwrap();
        for k in 1..=30 {
            let g = k as f64 * 0.1;
            assert!(traj.samples.iter().any(|s| s.y == g));
        }
    }

    #[test]
    fn backward_psi_limit() {
        let c = ctx(3.0);
        let traj = integrate(&ProfileOde::backward(c), 0.1, &IntegratorControls::default().with_y_max(200.0)).unwrap();
        let psi = psi_ratio(&traj).unwrap();
        assert!((psi.fit.psi_inf / c.l_limit - 1.0).abs() < 0.02, "{:?}", psi.fit);
    }

    #[test]
    fn psi_ratio_needs_range() {
        let traj = integrate(&ProfileOde::backward(ctx(3.0)), 0.1, &IntegratorControls::default().with_y_max(5.0)).unwrap();
        assert!(matches!(psi_ratio(&traj), Err(Error::InsufficientRange(_))));
    }

    #[test]
    fn forward_large_alpha_hits_j2() {
        let traj = integrate_until(
            &ProfileOde::forward(ctx(3.0)),
            2.0,
            &IntegratorControls::default(),
            |e| e.kind == EventKind::J2Threshold,
        )
        .unwrap();
        assert_eq!(traj.termination, Termination::StoppedAtEvent);
        assert_eq!(traj.events[0].kind, EventKind::J2Threshold);
    }

    #[test]
    fn forward_j1_negativity_is_absorbing() {
        let traj = integrate(&ProfileOde::forward(ctx(3.0)), 0.05, &IntegratorControls::default().with_y_max(30.0)).unwrap();
        let e = traj.first_event(EventKind::PhiPrimePrimeNegative).expect("J1 event");
        assert!(traj.samples.iter().filter(|s| s.y > e.y + 1e-6).all(|s| s.phi_pp < 0.0));
        assert_eq!(traj.count_events(EventKind::PhiPrimePrimeUpcross), 0);
    }

    #[test]
    fn interpolation_matches_samples_and_rejects_outside() {
        let traj = integrate(&ProfileOde::backward(ctx(2.5)), 0.1, &IntegratorControls::default().with_y_max(4.0)).unwrap();
        let s = traj.samples[7];
        let (phi, dphi) = traj.interpolate(s.y).unwrap();
        assert!((phi - s.phi).abs() < 1e-14 && (dphi - s.phi_prime).abs() < 1e-14);
        assert!(traj.interpolate(4.5).is_err());
        assert!(traj.interpolate(-0.1).is_err());
    }

    #[test]
    fn energy_growth_bound() {
        // (phi'^2 + phi^2)' <= (y + max(0, 1-gamma)) (phi'^2 + phi^2) along backward profiles.
        for p in [1.5, 2.5, 3.0, 4.0] {
            let c = ctx(p);
            let alpha0 = (0.5 - c.gamma_ss.max(0.0)) / 2.0;
            let alpha = 0.5 * alpha0.powf(c.beta);
            let traj = integrate(&ProfileOde::backward(c), alpha, &IntegratorControls::default().with_y_max(20.0)).unwrap();
            let gt = (1.0 - c.gamma_ss).max(0.0);
            let (phi1, dphi1) = traj.interpolate(1.0).unwrap();
            let log_c = (phi1 * phi1 + dphi1 * dphi1).ln() - (0.5 + gt);
            for s in traj.samples.iter().filter(|s| s.y >= 1.0) {
                let lhs = (s.phi * s.phi + s.phi_prime * s.phi_prime).ln();
                assert!(lhs <= log_c + 0.5 * s.y * s.y + gt * s.y + 1e-9, "p={p} y={}", s.y);
            }
        }
    }

    #[test]
    fn halving_tolerances_is_self_consistent() {
        let c = ctx(3.0);
        let ode = ProfileOde::backward(c);
        let base = IntegratorControls { rel_tol: 1e-9, abs_tol: 1e-11, ..IntegratorControls::default().with_y_max(50.0) };
        let half = IntegratorControls { rel_tol: 0.5e-9, abs_tol: 0.5e-11, ..base };
        let a = integrate(&ode, 0.1, &base).unwrap();
        let b = integrate(&ode, 0.1, &half).unwrap();
        let pa = a.samples.last().unwrap().phi;
        let pb = b.samples.last().unwrap().phi;
        assert!((pa - pb).abs() < 10.0 * base.rel_tol * pa.abs().max(1.0));
    }

    #[test]
    fn csv_layout() {
        let traj = integrate(&ProfileOde::backward(ctx(3.0)), 0.1, &IntegratorControls::default().with_y_max(2.0)).unwrap();
        let csv = traj.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("y,phi,phi_prime,phi_pp"));
        assert!(csv.lines().any(|l| l.starts_with("# event,PhiPrimePrimeUpcross,")));
    }

    #[test]
    fn rejects_bad_alpha_and_controls() {
        let ode = ProfileOde::backward(ctx(3.0));
        assert!(integrate(&ode, 0.0, &IntegratorControls::default()).is_err());
        let bad = IntegratorControls { rel_tol: 1e-15, ..Default::default() };
        assert!(integrate(&ode, 0.1, &bad).is_err());
    }
}
