use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use dhj_core::estimates::{
    bernstein_ratio, bernstein_terms_at, halfspace_growth_ratio, li_yau_failure_probe, li_yau_optimality_probe,
    li_yau_pointwise_ratio, li_yau_two_point, ode_inequality_bound_check, scale_stability, BernsteinTerms, Checker,
    Cylinder, SolutionSource, Verdict,
};
use dhj_core::ode::{integrate, IntegratorControls, ProfileOde};
use dhj_core::pde::{max_error_vs, solve, Snapshot};
use dhj_core::shooting::{
    backward_alpha0, backward_profile, classify_forward, critical_alpha as bisect, critical_profile_report,
    forward_alpha1, CriticalProfileReport, ForwardClass, ForwardTag,
};
use dhj_core::{ClosedFormSolution, ExponentContext, SpaceTimePoint};

use crate::config::{read_json, BoundarySpecConfig, DataSpec, PdeConfig, SweepConfig, VerifyConfig};
use crate::{render, write_file, CliError, Outcome, Status};

/// Tolerance on scale tables of closed forms, where rescaling is exact.
const EXACT_SCALE_TOL: f64 = 1e-6;
const TWO_POINT_SCALE_TOL: f64 = 0.2;

fn context_of(p: f64) -> Result<ExponentContext, CliError> {
    Ok(ExponentContext::new(p)?)
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable report")
}

pub fn context(p: f64, ts: bool) -> Result<Outcome, CliError> {
    let ctx = context_of(p)?;
    Ok(Outcome { text: render("context", json!({ "p": p }), ctx, ts)?, status: Status::Ok })
}

fn controls_with(y_max: f64) -> Result<IntegratorControls, CliError> {
    let c = IntegratorControls::default().with_y_max(y_max);
    c.validate()?;
    Ok(c)
}

#[derive(Serialize)]
struct ForwardProfileOutput {
    p: f64,
    alpha: f64,
    alpha1: f64,
    class: ForwardClass,
}

pub fn profile(args: &crate::ProfileArgs, ts: bool) -> Result<Outcome, CliError> {
    let ctx = context_of(args.p)?;
    if args.backward {
        let y_max = args.y_max.unwrap_or(200.0);
        let (traj, report) = backward_profile(&ctx, args.alpha, &controls_with(y_max)?)?;
        if let Some(path) = &args.csv {
            write_file(path, &traj.to_csv())?;
        }
        let status = if report.shape_ok { Status::Ok } else { Status::VerificationFailed };
        let params = json!({ "direction": "backward", "p": args.p, "alpha": args.alpha, "y_max": y_max });
        Ok(Outcome { text: render("profile", params, report, ts)?, status })
    } else {
        let y_max = args.y_max.unwrap_or(100.0);
        let controls = controls_with(y_max)?;
        let class = classify_forward(&ctx, args.alpha, &controls)?;
        if let Some(path) = &args.csv {
            let traj = integrate(&ProfileOde::forward(ctx), args.alpha, &controls)?;
            write_file(path, &traj.to_csv())?;
        }
        let out = ForwardProfileOutput { p: args.p, alpha: args.alpha, alpha1: forward_alpha1(&ctx)?, class };
        let params = json!({ "direction": "forward", "p": args.p, "alpha": args.alpha, "y_max": y_max });
        Ok(Outcome { text: render("profile", params, out, ts)?, status: Status::Ok })
    }
}

#[derive(Serialize)]
struct CriticalChecks {
    lo_class: ForwardTag,
    hi_class: ForwardTag,
    bracket_width: f64,
    width_within_tol: bool,
    visited_monotone: bool,
    critical_profile: Option<CriticalProfileReport>,
    critical_profile_error: Option<String>,
}

#[derive(Serialize)]
struct CriticalOutput {
    p: f64,
    alpha_star: f64,
    bracket: [f64; 2],
    iterations: usize,
    y_max_used: f64,
    checks: CriticalChecks,
}

fn critical_job(p: f64, tol: f64, y_max: f64, slack: f64) -> Result<CriticalOutput, CliError> {
    let ctx = context_of(p)?;
    let controls = controls_with(y_max)?;
    let r = bisect(&ctx, tol, &controls)?;
    let used = controls.with_y_max(r.y_max_used);
    let lo_class = classify_forward(&ctx, r.bracket.0, &used)?.tag;
    let hi_class = classify_forward(&ctx, r.bracket.1, &used)?.tag;
    let mut visited = r.visited.clone();
    visited.sort_by(|a, b| a.0.total_cmp(&b.0));
    let visited_monotone = visited.windows(2).all(|w| !(w[0].1 == ForwardTag::J2 && w[1].1 == ForwardTag::J1));
    let (critical_profile, critical_profile_error) = match critical_profile_report(&ctx, &r, &used, slack) {
        Ok(rep) => (Some(rep), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let width = r.bracket.1 - r.bracket.0;
    Ok(CriticalOutput {
        p,
        alpha_star: r.alpha_star,
        bracket: [r.bracket.0, r.bracket.1],
        iterations: r.iterations,
        y_max_used: r.y_max_used,
        checks: CriticalChecks {
            lo_class,
            hi_class,
            bracket_width: width,
            width_within_tol: width <= tol,
            visited_monotone,
            critical_profile,
            critical_profile_error,
        },
    })
}

pub fn critical_alpha(p: f64, tol: f64, y_max: Option<f64>, slack: f64, ts: bool) -> Result<Outcome, CliError> {
    let y_max = y_max.unwrap_or(100.0);
    let out = critical_job(p, tol, y_max, slack)?;
    let params = json!({ "p": p, "tol": tol, "y_max": y_max, "slack": slack });
    Ok(Outcome { text: render("critical-alpha", params, out, ts)?, status: Status::Ok })
}

#[derive(Serialize)]
struct PdeOutput {
    p: f64,
    h: f64,
    nodes: usize,
    termination: dhj_core::pde::PdeTermination,
    diagnostics: dhj_core::pde::PdeDiagnostics,
    snapshot_times: Vec<f64>,
    /// Final-time deviation from the initial family when it is an exact solution.
    max_error_vs_exact: Option<f64>,
    snapshot_files: Vec<String>,
    snapshots: Option<Vec<Snapshot>>,
}

pub fn pde(config: &Path, out: Option<&Path>, ts: bool) -> Result<Outcome, CliError> {
    let cfg: PdeConfig = read_json(config)?;
    let ctx = context_of(cfg.p)?;
    let problem = cfg.build(&ctx)?;
    let run = solve(&ctx, &problem, &cfg.controls)?;
    let exact = matches!(cfg.initial, DataSpec::Family { .. }) && cfg.boundary == BoundarySpecConfig::FromInitial;
    let max_error_vs_exact = if exact { Some(max_error_vs(&run, &problem.initial)?) } else { None };
    let mut snapshot_files = Vec::new();
    if let Some(path) = out {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("pde");
        let dir = path.parent().unwrap_or_else(|| Path::new(""));
        for k in 0..run.snapshots.len() {
            let name = format!("{stem}_snapshot_{k:03}.csv");
            write_file(&dir.join(&name), &run.snapshot_csv(k).expect("snapshot exists"))?;
            snapshot_files.push(name);
        }
    }
    let output = PdeOutput {
        p: cfg.p,
        h: run.h,
        nodes: run.x.len(),
        termination: run.termination,
        diagnostics: run.diagnostics.clone(),
        snapshot_times: run.snapshots.iter().map(|s| s.t).collect(),
        max_error_vs_exact,
        snapshot_files,
        snapshots: if out.is_none() { Some(run.snapshots.clone()) } else { None },
    };
    Ok(Outcome { text: render("pde", to_value(&cfg), output, ts)?, status: Status::Ok })
}

#[derive(Serialize)]
struct BernsteinOptimalityOutput {
    p: f64,
    eps: f64,
    terms: BernsteinTerms,
    grad_rel_error: f64,
    m_minus_u_rel_error: f64,
    /// `((M - u)/t)^{1/p}` at the probe point.
    t_term: f64,
    domination_factor: f64,
    verdict: Verdict,
}

#[derive(Serialize)]
struct VerifyOutput {
    verdict: Verdict,
    report: Value,
}

fn scale_check(
    checker: Checker,
    src: &SolutionSource,
    cyl: &Cylinder,
    sampling: &dhj_core::estimates::Sampling,
    lambdas: &Option<Vec<f64>>,
    tol: f64,
) -> Result<Option<(Value, bool)>, CliError> {
    let Some(l) = lambdas else { return Ok(None) };
    let st = scale_stability(&checker, src, cyl, sampling, l)?;
    let ok = st.max_rel_deviation <= tol;
    Ok(Some((to_value(&st), ok)))
}

fn combine(base: Verdict, extra_ok: bool) -> Verdict {
    match (base, extra_ok) {
        (Verdict::Fail, _) | (_, false) => Verdict::Fail,
        (v, true) => v,
    }
}

pub fn run_verify(cfg: &VerifyConfig) -> Result<(Value, Verdict), CliError> {
    match cfg {
        VerifyConfig::Bernstein { p, source, cylinder, sampling, scale_lambdas } => {
            let ctx = context_of(*p)?;
            let src = SolutionSource::Closed(source.build(&ctx)?);
            let mut rep = bernstein_ratio(&src, cylinder, sampling)?;
            let scale = scale_check(Checker::Bernstein, &src, cylinder, sampling, scale_lambdas, EXACT_SCALE_TOL)?;
            let ok = scale.as_ref().is_none_or(|s| s.1);
            if let Some((v, _)) = &scale {
                rep.scale_table = table_pairs(v);
            }
            let verdict = combine(rep.verdict, ok);
            Ok((json!({ "estimate": rep, "scale_stability": scale.map(|s| s.0) }), verdict))
        }
        VerifyConfig::LiYauPointwise { p, source, cylinder, a, sampling, scale_lambdas } => {
            let ctx = context_of(*p)?;
            let src = SolutionSource::Closed(source.build(&ctx)?);
            let mut rep = li_yau_pointwise_ratio(&src, cylinder, *a, sampling)?;
            let scale =
                scale_check(Checker::LiYauPointwise { a: *a }, &src, cylinder, sampling, scale_lambdas, EXACT_SCALE_TOL)?;
            let ok = scale.as_ref().is_none_or(|s| s.1);
            if let Some((v, _)) = &scale {
                rep.scale_table = table_pairs(v);
            }
            let verdict = combine(rep.verdict, ok);
            Ok((json!({ "estimate": rep, "scale_stability": scale.map(|s| s.0) }), verdict))
        }
        VerifyConfig::LiYauTwoPoint { p, source, cylinder, sampling, scale_lambdas } => {
            let ctx = context_of(*p)?;
            let src = SolutionSource::Closed(source.build(&ctx)?);
            let rep = li_yau_two_point(&src, cylinder, sampling)?;
            let scale = scale_check(Checker::LiYauTwoPoint, &src, cylinder, sampling, scale_lambdas, TWO_POINT_SCALE_TOL)?;
            let ok = scale.as_ref().is_none_or(|s| s.1);
            let verdict = combine(rep.verdict, ok);
            Ok((json!({ "estimate": rep, "scale_stability": scale.map(|s| s.0) }), verdict))
        }
        VerifyConfig::BernsteinOptimality { p, eps, dim } => {
            let ctx = context_of(*p)?;
            let sol = ClosedFormSolution::linear_optimality(ctx, *eps, *dim)?;
            let src = SolutionSource::Closed(sol);
            let cyl = Cylinder { center: vec![0.0; *dim], radius: 2.0, t_max: 1.0 };
            let mut e1 = vec![0.0; *dim];
            e1[0] = 1.0;
            let pt = SpaceTimePoint::new(e1, 1.0);
            let terms = bernstein_terms_at(&src, &cyl, &Default::default(), &pt)?;
            let inv = 1.0 / eps;
            let grad_rel_error = (terms.grad_norm / inv - 1.0).abs();
            let m_minus_u_rel_error = (terms.m_minus_u / inv - 1.0).abs();
            let t_term = (terms.m_minus_u / pt.t).powf(1.0 / p);
            let domination_factor = terms.grad_norm / t_term;
            // M and u are both of size ε^{-p}; their difference carries that rounding.
            let ok = grad_rel_error <= 1e-12 && m_minus_u_rel_error <= 1e-6 && domination_factor > 1e2;
            let verdict = if ok { Verdict::Pass } else { Verdict::Fail };
            let out = BernsteinOptimalityOutput {
                p: *p,
                eps: *eps,
                terms,
                grad_rel_error,
                m_minus_u_rel_error,
                t_term,
                domination_factor,
                verdict,
            };
            Ok((to_value(&out), verdict))
        }
        VerifyConfig::HalfspaceGrowth { p, alpha, y_max, grid, lambdas } => {
            let ctx = context_of(*p)?;
            let alpha = alpha.unwrap_or_else(|| 0.5 * backward_alpha0(&ctx));
            let (traj, _) = backward_profile(&ctx, alpha, &controls_with(*y_max)?)?;
            let sol = ClosedFormSolution::self_similar(Arc::new(traj), 1)?;
            let rep = halfspace_growth_ratio(&sol, grid, lambdas)?;
            let ok = rep.u_ratio.verdict == Verdict::Pass
                && rep.grad_ratio.verdict == Verdict::Pass
                && rep.slope_rel_error <= 0.02
                && rep.amplitude_rel_error <= 0.05
                && rep.scale_rel_deviation <= 0.2;
            let verdict = if ok { Verdict::Pass } else { Verdict::Fail };
            Ok((to_value(&rep), verdict))
        }
        VerifyConfig::LiYauFailure { p, n, controls } => {
            let ctx = context_of(*p)?;
            let rep = li_yau_failure_probe(&ctx, *n, controls)?;
            let v = rep.verdict;
            Ok((to_value(&rep), v))
        }
        VerifyConfig::LiYauOptimality { p, alpha, a, y_max } => {
            let ctx = context_of(*p)?;
            let rep = li_yau_optimality_probe(&ctx, *alpha, *a, &controls_with(y_max.unwrap_or(100.0))?)?;
            let v = rep.verdict;
            Ok((to_value(&rep), v))
        }
        VerifyConfig::OdeInequality(params) => {
            let rep = ode_inequality_bound_check(params)?;
            let v = rep.verdict;
            Ok((to_value(&rep), v))
        }
        VerifyConfig::CriticalProfile { p, tol, slack } => {
            let out = critical_job(*p, *tol, 100.0, *slack)?;
            let ok = out
                .checks
                .critical_profile
                .as_ref()
                .is_some_and(|r| r.checks_pass && r.psi_rel_error <= 0.05);
            let verdict = if ok { Verdict::Pass } else { Verdict::Fail };
            Ok((to_value(&out), verdict))
        }
    }
}

fn table_pairs(v: &Value) -> Option<Vec<(f64, f64)>> {
    v.get("table")?
        .as_array()?
        .iter()
        .map(|e| Some((e.get("lambda")?.as_f64()?, e.get("value")?.as_f64()?)))
        .collect()
}

pub fn verify(config: &Path, ts: bool) -> Result<Outcome, CliError> {
    let cfg: VerifyConfig = read_json(config)?;
    let (report, verdict) = run_verify(&cfg)?;
    let status = if verdict == Verdict::Fail { Status::VerificationFailed } else { Status::Ok };
    Ok(Outcome { text: render("verify", to_value(&cfg), VerifyOutput { verdict, report }, ts)?, status })
}

#[derive(Serialize)]
struct SweepOutput {
    count: usize,
    reports: Vec<Value>,
}

pub fn sweep(config: &Path, ts: bool) -> Result<Outcome, CliError> {
    let cfg: SweepConfig = read_json(config)?;
    let mut failed = false;
    let reports: Vec<Value> = match &cfg {
        SweepConfig::BackwardProfile { p, alpha_factor, y_max } => {
            let mut rows: Vec<(f64, Value, bool)> = p
                .par_iter()
                .map(|&p| -> Result<_, CliError> {
                    let ctx = context_of(p)?;
                    let alpha = alpha_factor * backward_alpha0(&ctx);
                    let (_, rep) = backward_profile(&ctx, alpha, &controls_with(*y_max)?)?;
                    let ok = rep.shape_ok;
                    Ok((p, to_value(&rep), ok))
                })
                .collect::<Result<_, _>>()?;
            rows.sort_by(|a, b| a.0.total_cmp(&b.0));
            failed = rows.iter().any(|r| !r.2);
            rows.into_iter().map(|r| r.1).collect()
        }
        SweepConfig::CriticalAlpha { p, tol } => {
            let mut rows: Vec<(f64, Value)> = p
                .par_iter()
                .map(|&p| Ok((p, to_value(&critical_job(p, *tol, 100.0, 1e-3)?))))
                .collect::<Result<_, CliError>>()?;
            rows.sort_by(|a, b| a.0.total_cmp(&b.0));
            rows.into_iter().map(|r| r.1).collect()
        }
        SweepConfig::Verify { jobs } => {
            // Ties on (check, p) fall back to the canonical job JSON.
            let mut rows: Vec<((String, f64), String, Value, Verdict)> = jobs
                .par_iter()
                .map(|job| {
                    let (rep, v) = run_verify(job)?;
                    Ok((job.key(), to_value(job).to_string(), json!({ "job": job, "verdict": v, "report": rep }), v))
                })
                .collect::<Result<_, CliError>>()?;
            rows.sort_by(|a, b| a.0 .0.cmp(&b.0 .0).then(a.0 .1.total_cmp(&b.0 .1)).then(a.1.cmp(&b.1)));
            failed = rows.iter().any(|r| r.3 == Verdict::Fail);
            rows.into_iter().map(|r| r.2).collect()
        }
    };
    let status = if failed { Status::VerificationFailed } else { Status::Ok };
    let out = SweepOutput { count: reports.len(), reports };
    Ok(Outcome { text: render("sweep", to_value(&cfg), out, ts)?, status })
}
