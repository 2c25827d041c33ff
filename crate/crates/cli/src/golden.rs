//! Stored reference values. A golden file names a command line, the
//! parameter hash its report must carry and a list of JSON-pointer fields
//! with tolerances.

use std::path::{Path, PathBuf};

use clap::Parser;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::{execute, render, Cli, CliError, Command, Outcome, Status};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProvenanceKind {
    /// Closed-form value computed by hand or with an independent script.
    Analytic,
    /// Produced by this program and frozen as a regression guard.
    SelfGenerated,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub kind: ProvenanceKind,
    pub note: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldenField {
    /// JSON pointer into the job report, e.g. `/result/alpha_star`.
    pub pointer: String,
    pub expected: Value,
    #[serde(default)]
    pub abs_tol: Option<f64>,
    #[serde(default)]
    pub rel_tol: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldenRecord {
    pub job_id: String,
    /// Command line without the program name.
    pub args: Vec<String>,
    #[serde(default)]
    pub parameter_hash: Option<String>,
    pub provenance: Provenance,
    pub fields: Vec<GoldenField>,
}

#[derive(Debug, Serialize)]
pub struct FieldCheck {
    pub pointer: String,
    pub expected: Value,
    pub actual: Value,
    pub error: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
pub struct GoldenResult {
    pub file: String,
    pub job_id: String,
    pub exit_code: i32,
    pub hash_match: Option<bool>,
    pub fields: Vec<FieldCheck>,
    pub pass: bool,
}

fn parse_job(args: &[String]) -> Result<Cli, CliError> {
    let argv = std::iter::once("dhj".to_string())
        .chain(args.iter().cloned())
        .chain(std::iter::once("--no-timestamp".to_string()));
    let cli = Cli::try_parse_from(argv).map_err(|e| CliError::Usage(e.to_string()))?;
    if cli.out.is_some() || matches!(cli.command, Command::Golden { .. }) {
        return Err(CliError::Usage("golden jobs may not use --out or nest golden".into()));
    }
    Ok(cli)
}

fn run_job(args: &[String]) -> Result<(i32, Value), CliError> {
    let cli = parse_job(args)?;
    let Outcome { text, status } = execute(&cli)?;
    let v = serde_json::from_str(&text).map_err(|e| CliError::Numeric(e.to_string()))?;
    Ok((status.exit_code(), v))
}

fn compare(field: &GoldenField, report: &Value) -> FieldCheck {
    let actual = report.pointer(&field.pointer).cloned().unwrap_or(Value::Null);
    let (error, pass) = match (field.expected.as_f64(), actual.as_f64()) {
        (Some(e), Some(a)) => {
            let err = (a - e).abs();
            let tol = field.abs_tol.unwrap_or(0.0).max(field.rel_tol.unwrap_or(0.0) * e.abs());
            (Some(err), err <= tol)
        }
        _ => (None, actual == field.expected),
    };
    FieldCheck { pointer: field.pointer.clone(), expected: field.expected.clone(), actual, error, pass }
}

/// Relative `--config` paths are taken relative to the golden file.
fn resolve_args(file: &Path, args: &[String]) -> Vec<String> {
    let base = file.parent().unwrap_or_else(|| Path::new(""));
    let mut out = Vec::with_capacity(args.len());
    let mut after_config = false;
    for a in args {
        if after_config && Path::new(a).is_relative() {
            out.push(base.join(a).to_string_lossy().into_owned());
        } else {
            out.push(a.clone());
        }
        after_config = a == "--config";
    }
    out
}

pub fn check_record(file: &Path, rec: &GoldenRecord) -> Result<GoldenResult, CliError> {
    let (exit_code, report) = run_job(&resolve_args(file, &rec.args))?;
    let hash_match = rec
        .parameter_hash
        .as_ref()
        .map(|h| report.get("parameter_hash").and_then(Value::as_str) == Some(h.as_str()));
    let fields: Vec<FieldCheck> = rec.fields.iter().map(|f| compare(f, &report)).collect();
    let pass = hash_match != Some(false) && fields.iter().all(|f| f.pass);
    Ok(GoldenResult {
        file: file.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        job_id: rec.job_id.clone(),
        exit_code,
        hash_match,
        fields,
        pass,
    })
}

fn golden_files(path: &Path) -> Result<Vec<PathBuf>, CliError> {
    if path.is_dir() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        Ok(files)
    } else {
        Ok(vec![path.to_path_buf()])
    }
}

pub fn check(path: &Path, ts: bool) -> Result<Outcome, CliError> {
    let mut results = Vec::new();
    for file in golden_files(path)? {
        let rec: GoldenRecord = crate::config::read_json(&file)?;
        results.push(check_record(&file, &rec)?);
    }
    let pass = results.iter().all(|r| r.pass);
    let status = if pass { Status::Ok } else { Status::VerificationFailed };
    let params = json!({ "path": path.display().to_string() });
    let text = render("golden-check", params, json!({ "pass": pass, "records": results }), ts)?;
    Ok(Outcome { text, status })
}

/// Runs the command line and prints the parameter hash its report carries.
pub fn hash(args: &[String]) -> Result<Outcome, CliError> {
    let (_, report) = run_job(args)?;
    let h = report
        .get("parameter_hash")
        .and_then(Value::as_str)
        .ok_or_else(|| CliError::Numeric("report without parameter hash".into()))?;
    Ok(Outcome { text: format!("{h}\n"), status: Status::Ok })
}
