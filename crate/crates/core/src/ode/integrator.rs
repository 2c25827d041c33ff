//! Embedded Dormand-Prince 5(4) integrator with per-step callbacks.
//!
//! The driver hands every accepted step to a callback together with the
//! endpoint slopes, which is enough for cubic Hermite dense output and for
//! locating sign changes of event functions inside the step.

/// Tolerances and step limits for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct StepperOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub initial_step: Option<f64>,
    /// When set, steps are shortened so that every multiple of this spacing
    /// is hit exactly.
    pub grid: Option<f64>,
    pub max_steps: usize,
}

impl Default for StepperOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: f64::INFINITY,
            initial_step: None,
            grid: None,
            max_steps: 5_000_000,
        }
    }
}

/// One accepted step `[t0, t1]` with endpoint states and slopes.
#[derive(Debug, Clone, Copy)]
pub struct Step<const N: usize> {
    pub t0: f64,
    pub y0: [f64; N],
    pub f0: [f64; N],
    pub t1: f64,
    pub y1: [f64; N],
    pub f1: [f64; N],
}

impl<const N: usize> Step<N> {
    /// Cubic Hermite interpolant of the state inside the step.
    pub fn interpolate(&self, t: f64) -> [f64; N] {
        let mut out = [0.0; N];
        for (i, o) in out.iter_mut().enumerate() {
            *o = hermite(
                self.t0, self.y0[i], self.f0[i], self.t1, self.y1[i], self.f1[i], t,
            );
        }
        out
    }
}

/// Cubic Hermite interpolation of a scalar with values `v0, v1` and
/// derivatives `d0, d1` at `t0, t1`.
#[inline]
pub fn hermite(t0: f64, v0: f64, d0: f64, t1: f64, v1: f64, d1: f64, t: f64) -> f64 {
    let h = t1 - t0;
    if h == 0.0 {
        return v0;
    }
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    h00 * v0 + h10 * h * d0 + h01 * v1 + h11 * h * d1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepControl {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Finish {
    ReachedEnd,
    Stopped,
    StepUnderflow,
    MaxSteps,
}

#[derive(Debug, Clone, Copy)]
pub struct Outcome<const N: usize> {
    pub finish: Finish,
    pub t: f64,
    pub y: [f64; N],
    pub accepted: usize,
    pub rejected: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[inline]
fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        *o += h * acc;
    }
    out
}

/// Integrates `y' = f(t, y)` from `t0` to `t_end > t0`.
///
/// `on_step` sees every accepted step and may stop the integration.
pub fn integrate<const N: usize, F, C>(
    f: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    opts: &StepperOptions,
    mut on_step: C,
) -> Outcome<N>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
    C: FnMut(&Step<N>) -> StepControl,
{
    let mut t = t0;
    let mut y = y0;
    let mut fy = f(t, &y);
    let span = t_end - t0;
    let mut h = opts
        .initial_step
        .unwrap_or_else(|| (1e-3 * span.abs().max(1e-300)).min(1e-2))
        .min(opts.max_step);
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let mut last_rejected = false;

    loop {
        if t >= t_end {
            return Outcome { finish: Finish::ReachedEnd, t, y, accepted, rejected };
        }
        if accepted + rejected >= opts.max_steps {
            return Outcome { finish: Finish::MaxSteps, t, y, accepted, rejected };
        }
        let underflow = 4.0 * f64::EPSILON * t.abs().max(1.0);
        if h < underflow {
            return Outcome { finish: Finish::StepUnderflow, t, y, accepted, rejected };
        }

        // Landing target: either t_end or the next grid node.
        let mut target = t_end;
        if let Some(dx) = opts.grid {
            let k = (t / dx + 1e-9).floor() + 1.0;
            let tg = k * dx;
            if tg < target {
                target = tg;
            }
        }
        let mut h_try = h.min(opts.max_step);
        let mut lands = false;
        if t + h_try >= target - 1e-12 * target.abs().max(1.0) {
            h_try = target - t;
            lands = true;
        }

        let k1 = fy;
        let k2 = f(t + C2 * h_try, &axpy(&y, h_try, &[(A21, &k1)]));
        let k3 = f(t + C3 * h_try, &axpy(&y, h_try, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(
            t + C4 * h_try,
            &axpy(&y, h_try, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
        );
        let k5 = f(
            t + C5 * h_try,
            &axpy(&y, h_try, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = f(
            t + h_try,
            &axpy(
                &y,
                h_try,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            ),
        );
        let y_new = axpy(
            &y,
            h_try,
            &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
        );
        let t_new = if lands { target } else { t + h_try };
        let k7 = f(t_new, &y_new);

        let mut err = 0.0;
        let mut finite = true;
        for i in 0..N {
            let e = h_try
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = opts.abs_tol + opts.rel_tol * y[i].abs().max(y_new[i].abs());
            let r = e / sc;
            err += r * r;
            if !y_new[i].is_finite() || !k7[i].is_finite() {
                finite = false;
            }
        }
        let err = if finite { (err / N as f64).sqrt() } else { f64::INFINITY };

        if err <= 1.0 {
            let step = Step { t0: t, y0: y, f0: k1, t1: t_new, y1: y_new, f1: k7 };
            accepted += 1;
            t = t_new;
            y = y_new;
            fy = k7;
            let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            let grow = if last_rejected { grow.min(1.0) } else { grow };
            // A landing step may be artificially short; do not shrink h because of it.
            h = if lands { h.max(h_try * grow) } else { h_try * grow };
            last_rejected = false;
            if on_step(&step) == StepControl::Stop {
                return Outcome { finish: Finish::Stopped, t, y, accepted, rejected };
            }
        } else {
            rejected += 1;
            let shrink = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.1 };
            h = h_try * shrink;
            last_rejected = true;
        }
    }
}
