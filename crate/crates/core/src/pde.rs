//! Method-of-lines solver for `u_t = u_xx + |u_x|^p` on an interval and for
//! radial solutions `u_t = u_rr + (n-1)/r u_r + |u_r|^p` on `[0, R]`.
//!
//! Central differences in space, three-stage SSP Runge-Kutta in time with
//! `dt <= cfl h^2` and a transport restriction driven by `max |u_x|`.

use serde::{Deserialize, Serialize};

use crate::closed_form::{ClosedFormSolution, SpaceTimePoint};
use crate::error::{invalid, Error, Result};
use crate::exponents::{pow_abs, ExponentContext};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    Line,
    Radial { n: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain1D {
    pub x_lo: f64,
    pub x_hi: f64,
    pub geometry: Geometry,
}

impl Domain1D {
    pub fn line(x_lo: f64, x_hi: f64) -> Self {
        Self { x_lo, x_hi, geometry: Geometry::Line }
    }

    pub fn radial(n: usize, r_max: f64) -> Self {
        Self { x_lo: 0.0, x_hi: r_max, geometry: Geometry::Radial { n } }
    }

    fn validate(&self) -> Result<()> {
        if !(self.x_lo < self.x_hi) || !self.x_lo.is_finite() || !self.x_hi.is_finite() {
            return Err(invalid("domain", format!("expected x_lo < x_hi, got [{}, {}]", self.x_lo, self.x_hi)));
        }
        if let Geometry::Radial { n } = self.geometry {
            if n == 0 {
                return Err(invalid("domain", "radial dimension must be at least 1"));
            }
            if self.x_lo != 0.0 {
                return Err(invalid("domain", "radial geometry requires x_lo = 0"));
            }
        }
        Ok(())
    }
}

/// Scalar data `u(x, t)` used for initial and boundary values.
#[derive(Debug, Clone)]
pub enum FieldData {
    /// A closed-form solution evaluated at `(0, ..., 0, x)`.
    Family(ClosedFormSolution),
    Gaussian { amp: f64, center: f64, width: f64 },
    Constant(f64),
    Sum(Box<FieldData>, Box<FieldData>),
    /// Piecewise-linear in `x`, constant in time.
    Tabulated { x: Vec<f64>, u: Vec<f64> },
}

impl FieldData {
    pub fn value(&self, x: f64, t: f64) -> Result<f64> {
        match self {
            FieldData::Family(sol) => {
                let mut pt = vec![0.0; sol.dim()];
                *pt.last_mut().unwrap() = x;
                Ok(sol.eval(&SpaceTimePoint::new(pt, t))?.u)
            }
            FieldData::Gaussian { amp, center, width } => {
                let z = (x - center) / width;
                Ok(amp * (-z * z).exp())
            }
            FieldData::Constant(c) => Ok(*c),
            FieldData::Sum(a, b) => Ok(a.value(x, t)? + b.value(x, t)?),
            FieldData::Tabulated { x: xs, u } => {
                if xs.len() != u.len() || xs.is_empty() {
                    return Err(invalid("tabulated", "x and u must be non-empty and of equal length"));
                }
                if x <= xs[0] {
                    return Ok(u[0]);
                }
                if x >= xs[xs.len() - 1] {
                    return Ok(u[u.len() - 1]);
                }
                let j = xs.partition_point(|v| *v <= x);
                let (x0, x1) = (xs[j - 1], xs[j]);
                let s = (x - x0) / (x1 - x0);
                Ok(u[j - 1] + s * (u[j] - u[j - 1]))
            }
        }
    }

    /// Data of the rescaled solution `λ^{β-1} u(λx, λ²t)`.
    pub fn rescale(&self, ctx: &ExponentContext, lambda: f64) -> Result<FieldData> {
        if !(lambda > 0.0) {
            return Err(invalid("lambda", format!("expected lambda > 0, got {lambda}")));
        }
        let su = lambda.powf(ctx.beta - 1.0);
        Ok(match self {
            FieldData::Family(sol) => FieldData::Family(sol.rescale(lambda)?),
            FieldData::Gaussian { amp, center, width } => {
                FieldData::Gaussian { amp: su * amp, center: center / lambda, width: width / lambda }
            }
            FieldData::Constant(c) => FieldData::Constant(su * c),
            FieldData::Sum(a, b) => FieldData::Sum(Box::new(a.rescale(ctx, lambda)?), Box::new(b.rescale(ctx, lambda)?)),
            FieldData::Tabulated { x, u } => FieldData::Tabulated {
                x: x.iter().map(|v| v / lambda).collect(),
                u: u.iter().map(|v| su * v).collect(),
            },
        })
    }
}

#[derive(Debug, Clone)]
pub enum BoundaryCondition {
    Dirichlet(FieldData),
    /// Zero flux at the origin of a radial domain.
    Symmetry,
}

#[derive(Debug, Clone)]
pub struct BoundarySpec {
    pub lo: BoundaryCondition,
    pub hi: BoundaryCondition,
}

impl BoundarySpec {
    /// Dirichlet values taken from the same data at both ends.
    pub fn dirichlet_from(data: &FieldData) -> Self {
        Self { lo: BoundaryCondition::Dirichlet(data.clone()), hi: BoundaryCondition::Dirichlet(data.clone()) }
    }

    pub fn radial(outer: FieldData) -> Self {
        Self { lo: BoundaryCondition::Symmetry, hi: BoundaryCondition::Dirichlet(outer) }
    }
}

#[derive(Debug, Clone)]
pub struct PdeProblem {
    pub domain: Domain1D,
    pub h: f64,
    pub initial: FieldData,
    pub boundary: BoundarySpec,
    pub t_end: f64,
    /// Extra output times in `(0, t_end)`; `0` and `t_end` are always stored.
    pub snapshots: Vec<f64>,
}

impl PdeProblem {
    /// The problem whose solution is `λ^{β-1} u(λx, λ²t)`.
    pub fn rescale(&self, ctx: &ExponentContext, lambda: f64) -> Result<Self> {
        let bc = |b: &BoundaryCondition| -> Result<BoundaryCondition> {
            Ok(match b {
                BoundaryCondition::Dirichlet(d) => BoundaryCondition::Dirichlet(d.rescale(ctx, lambda)?),
                BoundaryCondition::Symmetry => BoundaryCondition::Symmetry,
            })
        };
        let l2 = lambda * lambda;
        Ok(Self {
            domain: Domain1D { x_lo: self.domain.x_lo / lambda, x_hi: self.domain.x_hi / lambda, ..self.domain },
            h: self.h / lambda,
            initial: self.initial.rescale(ctx, lambda)?,
            boundary: BoundarySpec { lo: bc(&self.boundary.lo)?, hi: bc(&self.boundary.hi)? },
            t_end: self.t_end / l2,
            snapshots: self.snapshots.iter().map(|t| t / l2).collect(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdeControls {
    pub cfl: f64,
    pub grad_cfl: f64,
    pub grad_cap: f64,
    pub corner_tol: f64,
    /// Abort when `max |u|` exceeds this multiple of its initial size.
    pub growth_cap: f64,
    pub max_steps: usize,
}

impl Default for PdeControls {
    fn default() -> Self {
        Self { cfl: 0.4, grad_cfl: 0.5, grad_cap: 1e6, corner_tol: 1e-8, growth_cap: 1e12, max_steps: 50_000_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PdeTermination {
    Completed,
    BlowUpDetected { t: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub t: f64,
    pub u: Vec<f64>,
    pub max_grad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PdeDiagnostics {
    pub steps: usize,
    pub dt_min: f64,
    pub dt_max: f64,
    /// `cfl h^2` scaled for the radial origin stencil; every dt respects it.
    pub dt_diffusive: f64,
    pub max_grad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PdeRun {
    pub p: f64,
    pub domain: Domain1D,
    pub h: f64,
    pub x: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub diagnostics: PdeDiagnostics,
    pub termination: PdeTermination,
}

impl PdeRun {
    pub fn snapshot_csv(&self, k: usize) -> Option<String> {
        let s = self.snapshots.get(k)?;
        let mut out = String::from("x,u\n");
        for (x, u) in self.x.iter().zip(&s.u) {
            out.push_str(&format!("{x},{u}\n"));
        }
        Some(out)
    }

    /// Index of the first node where the evolution equation is discretized.
    pub fn first_unknown(&self) -> usize {
        match self.domain.geometry {
            Geometry::Line => 1,
            Geometry::Radial { .. } => 0,
        }
    }

    /// `(u_x, Δu)` at node `i` of snapshot `k`, using the solver's stencils.
    /// Dirichlet ends use one-sided second-order slopes and no Laplacian.
    pub fn node_derivatives(&self, k: usize, i: usize) -> Option<(f64, Option<f64>)> {
        let u = &self.snapshots.get(k)?.u;
        let last = u.len() - 1;
        if i > last {
            return None;
        }
        let h = self.h;
        Some(match (self.domain.geometry, i) {
            (Geometry::Radial { n }, 0) => (0.0, Some(2.0 * n as f64 * (u[1] - u[0]) / (h * h))),
            (_, 0) => ((-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h), None),
            (_, i) if i == last => ((3.0 * u[i] - 4.0 * u[i - 1] + u[i - 2]) / (2.0 * h), None),
            (geom, i) => {
                let ux = (u[i + 1] - u[i - 1]) / (2.0 * h);
                let mut lap = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (h * h);
                if let Geometry::Radial { n } = geom {
                    lap += (n as f64 - 1.0) / self.x[i] * ux;
                }
                (ux, Some(lap))
            }
        })
    }
}

/// `u_t` recovered from the spatial operator on a stored snapshot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UtField {
    pub t: f64,
    pub x: Vec<f64>,
    pub ut: Vec<f64>,
}

pub fn ut_field(run: &PdeRun, k: usize) -> Result<UtField> {
    let snap = run
        .snapshots
        .get(k)
        .ok_or_else(|| invalid("snapshot", format!("index {k} out of range ({} stored)", run.snapshots.len())))?;
    let mut x = Vec::new();
    let mut ut = Vec::new();
    for i in run.first_unknown()..run.x.len() - 1 {
        let (ux, lap) = run.node_derivatives(k, i).expect("node in range");
        x.push(run.x[i]);
        ut.push(lap.expect("interior node") + pow_abs(ux, run.p));
    }
    Ok(UtField { t: snap.t, x, ut })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub ordered: bool,
    pub tolerance: f64,
    pub min_gap: f64,
    pub max_gap: f64,
    /// `(t, x)` of the most negative `hi - lo`.
    pub worst_node: (f64, f64),
}

/// Checks `run_lo <= run_hi` at every stored node within `1e-8` times the
/// solution scale.
pub fn comparison_probe(run_lo: &PdeRun, run_hi: &PdeRun) -> Result<ComparisonReport> {
    if run_lo.x != run_hi.x
        || run_lo.snapshots.len() != run_hi.snapshots.len()
        || run_lo.snapshots.iter().zip(&run_hi.snapshots).any(|(a, b)| a.t != b.t)
    {
        return Err(invalid("runs", "comparison requires identical grids and snapshot times"));
    }
    let scale = run_lo
        .snapshots
        .iter()
        .chain(&run_hi.snapshots)
        .flat_map(|s| s.u.iter())
        .fold(1.0f64, |m, v| m.max(v.abs()));
    let tolerance = 1e-8 * scale;
    let mut min_gap = f64::INFINITY;
    let mut max_gap = f64::NEG_INFINITY;
    let mut worst_node = (0.0, 0.0);
    for (a, b) in run_lo.snapshots.iter().zip(&run_hi.snapshots) {
        for (i, (ua, ub)) in a.u.iter().zip(&b.u).enumerate() {
            let g = ub - ua;
            if g < min_gap {
                min_gap = g;
                worst_node = (a.t, run_lo.x[i]);
            }
            max_gap = max_gap.max(g);
        }
    }
    Ok(ComparisonReport { ordered: min_gap >= -tolerance, tolerance, min_gap, max_gap, worst_node })
}

struct Operator {
    p: f64,
    h: f64,
    x: Vec<f64>,
    radial_n: Option<f64>,
}

impl Operator {
    fn first(&self) -> usize {
        if self.radial_n.is_some() {
            0
        } else {
            1
        }
    }

    /// Writes `Δu + |u_x|^p` at the unknown nodes and returns `max |u_x|` there.
    fn apply(&self, u: &[f64], out: &mut [f64]) -> f64 {
        let h = self.h;
        let h2 = h * h;
        let last = u.len() - 1;
        let mut gmax = 0.0f64;
        let start = self.first();
        if let Some(n) = self.radial_n {
            out[0] = 2.0 * n * (u[1] - u[0]) / h2;
        }
        for i in start.max(1)..last {
            let ux = (u[i + 1] - u[i - 1]) / (2.0 * h);
            let mut lap = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / h2;
            if let Some(n) = self.radial_n {
                lap += (n - 1.0) / self.x[i] * ux;
            }
            out[i] = lap + pow_abs(ux, self.p);
            gmax = gmax.max(ux.abs());
        }
        gmax
    }
}

fn boundary_value(bc: &BoundaryCondition, x: f64, t: f64) -> Result<Option<f64>> {
    match bc {
        BoundaryCondition::Dirichlet(d) => d.value(x, t).map(Some),
        BoundaryCondition::Symmetry => Ok(None),
    }
}

fn max_abs_grad(u: &[f64], h: f64, radial: bool) -> f64 {
    let last = u.len() - 1;
    let mut g = 0.0f64;
    for i in 1..last {
        g = g.max(((u[i + 1] - u[i - 1]) / (2.0 * h)).abs());
    }
    if !radial {
        g = g.max(((-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h)).abs());
    }
    g.max(((3.0 * u[last] - 4.0 * u[last - 1] + u[last - 2]) / (2.0 * h)).abs())
}

pub fn solve(ctx: &ExponentContext, problem: &PdeProblem, controls: &PdeControls) -> Result<PdeRun> {
    let dom = problem.domain;
    dom.validate()?;
    let h = problem.h;
    if !(h > 0.0) {
        return Err(invalid("h", format!("expected h > 0, got {h}")));
    }
    let cells_f = (dom.x_hi - dom.x_lo) / h;
    let cells = cells_f.round();
    if (cells_f - cells).abs() > 1e-9 * cells.max(1.0) || cells < 2.0 {
        return Err(invalid("h", format!("h = {h} does not divide [{}, {}] into at least two cells", dom.x_lo, dom.x_hi)));
    }
    let cells = cells as usize;
    if !(problem.t_end > 0.0) || !problem.t_end.is_finite() {
        return Err(invalid("t_end", format!("expected t_end > 0, got {}", problem.t_end)));
    }
    if !(controls.cfl > 0.0 && controls.grad_cfl > 0.0 && controls.grad_cap > 0.0) {
        return Err(invalid("controls", "cfl, grad_cfl and grad_cap must be positive"));
    }
    let radial_n = match dom.geometry {
        Geometry::Radial { n } => {
            if !matches!(problem.boundary.lo, BoundaryCondition::Symmetry) {
                return Err(invalid("boundary", "radial geometry requires the symmetry condition at r = 0"));
            }
            Some(n as f64)
        }
        Geometry::Line => {
            if matches!(problem.boundary.lo, BoundaryCondition::Symmetry) {
                return Err(invalid("boundary", "symmetry is only allowed at the origin of a radial domain"));
            }
            None
        }
    };
    if matches!(problem.boundary.hi, BoundaryCondition::Symmetry) {
        return Err(invalid("boundary", "symmetry is only allowed at the origin of a radial domain"));
    }

    let x: Vec<f64> = (0..=cells).map(|i| dom.x_lo + i as f64 * h).collect();
    let mut x = x;
    x[cells] = dom.x_hi;
    let mut u = x.iter().map(|&xi| problem.initial.value(xi, 0.0)).collect::<Result<Vec<_>>>()?;

    for (bc, i) in [(&problem.boundary.lo, 0), (&problem.boundary.hi, cells)] {
        if let Some(g) = boundary_value(bc, x[i], 0.0)? {
            if (g - u[i]).abs() > controls.corner_tol * g.abs().max(1.0) {
                return Err(Error::CornerIncompatibility { x: x[i], initial: u[i], boundary: g });
            }
            u[i] = g;
        }
    }

    let mut stops: Vec<f64> = problem.snapshots.iter().copied().filter(|t| *t > 0.0 && *t < problem.t_end).collect();
    stops.sort_by(|a, b| a.partial_cmp(b).unwrap());
    stops.dedup();
    stops.push(problem.t_end);

    let op = Operator { p: ctx.p, h, x: x.clone(), radial_n };
    let origin_factor = radial_n.map_or(1.0, |n| (2.0 / n).min(1.0));
    let dt_diffusive = controls.cfl * h * h * origin_factor;
    let scale0 = u.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let radial = radial_n.is_some();

    let set_bc = |v: &mut [f64], t: f64| -> Result<()> {
        if let Some(g) = boundary_value(&problem.boundary.lo, x[0], t)? {
            v[0] = g;
        }
        if let Some(g) = boundary_value(&problem.boundary.hi, x[cells], t)? {
            v[cells] = g;
        }
        Ok(())
    };

    let g0 = max_abs_grad(&u, h, radial);
    let mut snapshots = vec![Snapshot { t: 0.0, u: u.clone(), max_grad: g0 }];
    let mut diag = PdeDiagnostics { steps: 0, dt_min: f64::INFINITY, dt_max: 0.0, dt_diffusive, max_grad: g0 };
    let mut termination = PdeTermination::Completed;
    let first = op.first();
    let mut t = 0.0;
    let mut k1 = vec![0.0; cells + 1];
    let mut s1 = u.clone();
    let mut s2 = u.clone();
    let mut grad = g0;

    'outer: for &stop in &stops {
        while t < stop {
            if diag.steps >= controls.max_steps {
                return Err(Error::Instability { t, reason: "step budget exhausted".into() });
            }
            let mut dt = dt_diffusive;
            if grad > 0.0 && ctx.p > 1.0 {
                dt = dt.min(controls.grad_cfl * h / (ctx.p * pow_abs(grad, ctx.p - 1.0)));
            }
            let lands = t + dt >= stop * (1.0 - 1e-14);
            if lands {
                dt = stop - t;
            }

            op.apply(&u, &mut k1);
            s1.copy_from_slice(&u);
            for i in first..cells {
                s1[i] = u[i] + dt * k1[i];
            }
            set_bc(&mut s1, t + dt)?;
            op.apply(&s1, &mut k1);
            s2.copy_from_slice(&u);
            for i in first..cells {
                s2[i] = 0.75 * u[i] + 0.25 * (s1[i] + dt * k1[i]);
            }
            set_bc(&mut s2, t + 0.5 * dt)?;
            op.apply(&s2, &mut k1);
            for i in first..cells {
                u[i] = u[i] / 3.0 + 2.0 / 3.0 * (s2[i] + dt * k1[i]);
            }
            t = if lands { stop } else { t + dt };
            set_bc(&mut u, t)?;

            diag.steps += 1;
            diag.dt_min = diag.dt_min.min(dt);
            diag.dt_max = diag.dt_max.max(dt);
            if u.iter().any(|v| !v.is_finite()) {
                return Err(Error::Instability { t, reason: "non-finite values".into() });
            }
            let size = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if size > controls.growth_cap * scale0 {
                return Err(Error::Instability { t, reason: format!("max |u| = {size:e} exceeded growth cap") });
            }
            grad = max_abs_grad(&u, h, radial);
            diag.max_grad = diag.max_grad.max(grad);
            if grad > controls.grad_cap {
                termination = PdeTermination::BlowUpDetected { t };
                snapshots.push(Snapshot { t, u: u.clone(), max_grad: grad });
                break 'outer;
            }
        }
        snapshots.push(Snapshot { t, u: u.clone(), max_grad: grad });
    }
    if diag.steps == 0 {
        diag.dt_min = 0.0;
    }
    Ok(PdeRun { p: ctx.p, domain: dom, h, x, snapshots, diagnostics: diag, termination })
}

/// Largest nodal deviation of the final snapshot from `exact`.
pub fn max_error_vs(run: &PdeRun, exact: &FieldData) -> Result<f64> {
    let last = run.snapshots.last().expect("at least the initial snapshot");
    let mut e = 0.0f64;
    for (x, u) in run.x.iter().zip(&last.u) {
        e = e.max((u - exact.value(*x, last.t)?).abs());
    }
    Ok(e)
}
