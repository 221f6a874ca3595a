//! Command-line surface for the policy-learning toolkit.
//!
//! Subcommands map one-to-one onto library operations: `gen` (synthetic
//! data), `ewm` (fit one rule), `eval` (welfare evaluation over sample
//! splits), `design` (budget-constrained design evaluation), `plan` (the
//! closed-form design optimizer), `bounds` (the four regret bounds plus the
//! class comparison), `rate` (regret-rate experiments), and `export`
//! (long-format plot data). Every report embeds the resolved configuration,
//! outputs are written atomically, and failures print a machine-readable
//! error object on stderr with a distinct exit code per failure class.

pub mod args;
pub mod dispatch;
pub mod plotdata;

use std::io::Write as _;

pub use args::{Cli, Command};

/// Exit codes: 0 success, 2 usage (from clap), then per failure class.
pub const EXIT_IO: i32 = 3;
pub const EXIT_PARSE: i32 = 4;
pub const EXIT_INVALID: i32 = 5;

/// A dispatch failure carrying its exit code and a short kind tag.
#[derive(Debug)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
    pub exit_code: i32,
}

impl CliError {
    pub fn io(message: impl Into<String>) -> Self {
        Self {
            kind: "io",
            message: message.into(),
            exit_code: EXIT_IO,
        }
    }

    pub fn parse(message: impl Into<String>) -> Self {
        Self {
            kind: "parse",
            message: message.into(),
            exit_code: EXIT_PARSE,
        }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Self {
            kind: "invalid",
            message: message.into(),
            exit_code: EXIT_INVALID,
        }
    }
}

impl From<policylab_core::Error> for CliError {
    fn from(e: policylab_core::Error) -> Self {
        use policylab_core::Error;
        match &e {
            Error::Io(_) => CliError::io(e.to_string()),
            Error::Csv { .. } => CliError::parse(e.to_string()),
            _ => CliError::invalid(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::parse(e.to_string())
    }
}

/// Parse argv, configure the worker pool, dispatch, and map failures to
/// exit codes with a JSON error object on stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match <Cli as clap::Parser>::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints its own usage text; keep its exit code (2 for
            // usage errors, 0 for --help/--version).
            let _ = e.print();
            return e.exit_code();
        }
    };
    init_threads(cli.threads);
    match dispatch::dispatch(&cli.command) {
        Ok(()) => 0,
        Err(err) => {
            let obj = serde_json::json!({ "error": err.kind, "message": err.message });
            let mut stderr = std::io::stderr();
            let _ = writeln!(stderr, "{obj}");
            err.exit_code
        }
    }
}

/// Worker-pool width: the `--threads` flag, else `POLICYLAB_THREADS`, else
/// one worker per core. Ignored by sequential builds.
#[cfg(feature = "parallel")]
fn resolve_threads(flag: Option<usize>) -> usize {
    flag.or_else(|| {
        std::env::var("POLICYLAB_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    })
    .unwrap_or(0)
}

#[cfg(feature = "parallel")]
fn init_threads(flag: Option<usize>) {
    let n = resolve_threads(flag);
    if n > 0 {
        // Errors only if a global pool already exists, which is fine.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

#[cfg(not(feature = "parallel"))]
fn init_threads(_flag: Option<usize>) {}

/// Write `content` to `path` atomically (temp file + rename).
pub fn write_atomic(path: &std::path::Path, content: &str) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, content)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
