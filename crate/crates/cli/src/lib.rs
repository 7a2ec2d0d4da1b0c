//! Command-line front end: parses a [`RunConfig`], runs one experiment and
//! renders a deterministic CSV or JSON report.
//!
//! Exit codes: 0 when every audit passes, 1 when an audit fails, 2 for
//! configuration errors (including exhausted piece or orbit caps).

mod args;
mod commands;
mod report;

use std::path::Path;

use ergodic_towers::Error;

pub use args::{
    CounterexampleArgs, EstimateArgs, Format, InflateArgs, IntrinsicArgs, KakutaniArgs, RokhlinArgs, RunConfig,
    SystemSpec,
};
pub use report::Report;

/// Environment variable overriding the default piece cap.
pub const PIECE_CAP_ENV: &str = "ERGODIC_TOWERS_PIECE_CAP";

pub const EXIT_OK: i32 = 0;
pub const EXIT_AUDIT: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// The rendered outputs of one run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Execution {
    pub code: i32,
    pub report: String,
    pub tower: Option<String>,
}

fn piece_cap() -> Result<usize, Error> {
    match std::env::var(PIECE_CAP_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| Error::Parse {
            input: v,
            reason: format!("{PIECE_CAP_ENV} must be a positive integer"),
        }),
        Err(_) => Ok(ergodic_towers::towers::DEFAULT_PIECE_CAP),
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::AuditFailed(_) => EXIT_AUDIT,
        _ => EXIT_CONFIG,
    }
}

/// Runs the configured command without touching the filesystem.
pub fn execute(cfg: &RunConfig) -> Execution {
    let name = commands::name(&cfg.command);
    let outcome = piece_cap().and_then(|cap| commands::dispatch(&cfg.command, cap));
    match outcome {
        Ok((report, tower)) => Execution {
            code: if report.ok() { EXIT_OK } else { EXIT_AUDIT },
            report: report.render(cfg.format),
            tower: tower.map(|t| report::to_json(&t)),
        },
        Err(e) => Execution {
            code: exit_code(&e),
            report: Report::failure(name, &e, exit_code(&e) == EXIT_AUDIT).render(cfg.format),
            tower: None,
        },
    }
}

fn write(path: &Path, contents: &str) -> Result<(), String> {
    std::fs::write(path, contents).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

/// Runs the configured command, writes the report (and tower dump) and
/// returns the exit code.
pub fn run(cfg: &RunConfig) -> i32 {
    let exec = execute(cfg);
    let mut code = exec.code;
    let mut emit = |path: Option<&Path>, text: &str| match path {
        Some(p) => {
            if let Err(e) = write(p, text) {
                eprintln!("{e}");
                code = EXIT_CONFIG;
            }
        }
        None => print!("{text}"),
    };
    emit(cfg.out.as_deref(), &exec.report);
    if let (Some(path), Some(tower)) = (cfg.dump_tower.as_deref(), exec.tower.as_deref()) {
        emit(Some(path), tower);
    }
    code
}
