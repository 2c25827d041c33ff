//! Batch front end: every job prints one JSON document (or writes it to
//! `--out`). Outputs are deterministic; the only wall-clock field is an
//! optional timestamp, removed with `--no-timestamp`.

// `!(x > 0.0)` is used on purpose so NaN is rejected with the bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod golden;
pub mod jobs;

use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Parser)]
#[command(name = "dhj", version, about = "Profiles, shooting, PDE runs and estimate checks for u_t - Δu = |∇u|^p")]
pub struct Cli {
    /// Write the JSON report to this path instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Omit the timestamp field so repeated runs are byte-identical.
    #[arg(long, global = true)]
    pub no_timestamp: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exponents and constants for a given p.
    Context {
        #[arg(long)]
        p: f64,
    },
    /// Integrate one self-similar profile.
    Profile(ProfileArgs),
    /// Bisect for the critical forward slope.
    CriticalAlpha {
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long)]
        y_max: Option<f64>,
        /// Slack allowed in the critical profile bound checks.
        #[arg(long, default_value_t = 1e-3)]
        slack: f64,
    },
    /// Run the finite-difference solver from a JSON config.
    Pde {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run one estimate check from a JSON config.
    Verify {
        #[arg(long)]
        config: PathBuf,
    },
    /// Fan a job out over a parameter list.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Regression against stored reference values.
    Golden {
        #[command(subcommand)]
        action: GoldenAction,
    },
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("direction").required(true).args(["backward", "forward"])))]
pub struct ProfileArgs {
    #[arg(long)]
    pub backward: bool,
    #[arg(long)]
    pub forward: bool,
    #[arg(long)]
    pub p: f64,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub y_max: Option<f64>,
    /// Also write the trajectory as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum GoldenAction {
    /// Re-run the job of a golden file (or every file in a directory) and compare.
    Check {
        #[arg(long)]
        file: PathBuf,
    },
    /// Print the parameter hash of a command line.
    Hash {
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        args: Vec<String>,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numeric(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Numeric(m) => write!(f, "job failed: {m}"),
        }
    }
}

impl From<dhj_core::Error> for CliError {
    fn from(e: dhj_core::Error) -> Self {
        use dhj_core::Error as E;
        match e {
            E::InvalidParameter { .. } | E::Precondition(_) | E::OutsideDomain { .. } | E::CornerIncompatibility { .. } => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numeric(_) => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    VerificationFailed,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::VerificationFailed => 3,
        }
    }
}

#[derive(Debug)]
pub struct Outcome {
    pub text: String,
    pub status: Status,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    command: &'a str,
    parameters: &'a serde_json::Value,
    parameter_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    timestamp_unix: Option<u64>,
    result: T,
}

/// SHA-256 of the compact JSON of `{command, parameters}`.
pub fn parameter_hash(command: &str, parameters: &serde_json::Value) -> String {
    let canon = serde_json::json!({ "command": command, "parameters": parameters });
    hex::encode(Sha256::digest(canon.to_string().as_bytes()))
}

pub(crate) fn render<T: Serialize>(
    command: &str,
    parameters: serde_json::Value,
    result: T,
    timestamp: bool,
) -> Result<String, CliError> {
    let timestamp_unix = timestamp.then(|| {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
    });
    let env = Envelope {
        command,
        parameter_hash: parameter_hash(command, &parameters),
        parameters: &parameters,
        timestamp_unix,
        result,
    };
    let mut s = serde_json::to_string_pretty(&env).map_err(|e| CliError::Numeric(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub(crate) fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Numeric(format!("cannot write {}: {e}", path.display())))
}

/// Runs a parsed command line. Files named by `--out`/`--csv` are written here;
/// the returned text is what goes to stdout when `--out` is absent.
pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    let ts = !cli.no_timestamp;
    let out = cli.out.as_deref();
    let outcome = match &cli.command {
        Command::Context { p } => jobs::context(*p, ts)?,
        Command::Profile(args) => jobs::profile(args, ts)?,
        Command::CriticalAlpha { p, tol, y_max, slack } => jobs::critical_alpha(*p, *tol, *y_max, *slack, ts)?,
        Command::Pde { config } => jobs::pde(config, out, ts)?,
        Command::Verify { config } => jobs::verify(config, ts)?,
        Command::Sweep { config } => jobs::sweep(config, ts)?,
        Command::Golden { action } => match action {
            GoldenAction::Check { file } => golden::check(file, ts)?,
            GoldenAction::Hash { args } => golden::hash(args)?,
        },
    };
    if let Some(path) = out {
        write_file(path, &outcome.text)?;
    }
    Ok(outcome)
}

/// Parses `args` (including the program name) and runs them, returning the
/// exit code and the stdout text.
pub fn run_args<I, S>(args: I) -> (i32, String)
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            return (code, e.to_string());
        }
    };
    match execute(&cli) {
        Ok(o) => (o.status.exit_code(), if cli.out.is_some() { String::new() } else { o.text }),
        Err(e) => (e.exit_code(), format!("{e}\n")),
    }
}
