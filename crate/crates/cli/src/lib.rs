//! Batch front end for `errvar`.
//!
//! Each subcommand reads one JSON job file and writes a report, either as
//! aligned text (`--format human`, the default) or as canonical JSON
//! (`--format machine`). Exit status is 0 on success, 1 for invalid input
//! and 2 when the computation itself fails (rank deficiency, a covariance
//! that is not positive semidefinite).

pub mod commands;
pub mod error;
pub mod job;
pub mod number;
pub mod report;

use std::ffi::OsString;
use std::io::Read;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use error::CliError;
pub use job::{Format, Job, Kind};
pub use report::{Node, Report};

use number::{DEFAULT_PRECISION, MAX_PRECISION};

#[derive(Debug, Parser)]
#[command(name = "errvar", version, about = "Measurement adjustment and error covariance propagation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Job file, or `-` for standard input.
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Significant digits in the report.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=MAX_PRECISION as i64))]
    precision: Option<u32>,
    /// Also write the report to this file.
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Least-squares adjustment of an observation system.
    Adjust {
        #[command(flatten)]
        common: Common,
        /// Warn when n - t is below this.
        #[arg(long, value_name = "N")]
        dof_warn: Option<usize>,
    },
    /// Propagate a covariance matrix through a linear map.
    Propagate {
        #[command(flatten)]
        common: Common,
    },
    /// Combine Type A and Type B uncertainties.
    Synthesize {
        #[command(flatten)]
        common: Common,
    },
    /// Simulate measurement campaigns and compare with the analytic covariance.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Moments and density of a regular-error distribution.
    Dist {
        #[command(flatten)]
        common: Common,
    },
}

/// What a run printed and how it ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub status: u8,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn failure(err: &CliError) -> Self {
        Outcome {
            status: err.exit_code(),
            stdout: String::new(),
            stderr: format!("error: {err}\n"),
        }
    }
}

/// Runs one command line; `args` includes the program name.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                Outcome {
                    status: 1,
                    stdout: String::new(),
                    stderr: text,
                }
            } else {
                Outcome {
                    status: 0,
                    stdout: text,
                    stderr: String::new(),
                }
            };
        }
    };
    match execute(cli) {
        Ok(stdout) => Outcome {
            status: 0,
            stdout,
            stderr: String::new(),
        },
        Err(e) => Outcome::failure(&e),
    }
}

fn read_input(path: &PathBuf) -> Result<String, CliError> {
    let mut text = String::new();
    let result = if path.as_os_str() == "-" {
        std::io::stdin().read_to_string(&mut text).map(|_| ())
    } else {
        std::fs::read_to_string(path).map(|t| text = t)
    };
    result.map_err(|e| CliError::validation("input", None, format!("cannot read {}: {e}", path.display())))?;
    Ok(text)
}

fn execute(cli: Cli) -> Result<String, CliError> {
    let (common, kind) = match &cli.command {
        Command::Adjust { common, .. } => (common, Kind::Adjust),
        Command::Propagate { common } => (common, Kind::Propagate),
        Command::Synthesize { common } => (common, Kind::Synthesize),
        Command::Simulate { common, .. } => (common, Kind::Simulate),
        Command::Dist { common } => (common, Kind::Dist),
    };
    let text = read_input(&common.input)?;
    let job = job::parse(&text, kind)?;
    let options = job.output().cloned().unwrap_or_default();
    let precision = match common.precision {
        Some(p) => p as usize,
        None => options.precision.unwrap_or(DEFAULT_PRECISION),
    };
    if !(1..=MAX_PRECISION).contains(&precision) {
        return Err(CliError::validation(
            "output.precision",
            error::locate_key(&text, "precision"),
            format!("must be between 1 and {MAX_PRECISION}, got {precision}"),
        ));
    }
    let format = common.format.or(options.format).unwrap_or(Format::Human);

    let report = match (&job, &cli.command) {
        (Job::Adjust(j), Command::Adjust { dof_warn, .. }) => commands::adjust(j, *dof_warn, precision),
        (Job::Propagate(j), _) => commands::propagate_job(j, precision),
        (Job::Synthesize(j), _) => commands::synthesize_job(j, precision),
        (Job::Simulate(j), Command::Simulate { seed, .. }) => commands::simulate_job(j, *seed, precision),
        (Job::Dist(j), _) => commands::dist(j, precision),
        _ => unreachable!("job kind is checked against the subcommand"),
    }
    .map_err(|e| CliError::from_core(e, &text))?;

    let rendered = match format {
        Format::Human => report.to_human(),
        Format::Machine => report.to_machine(),
    };
    if let Some(path) = &common.output {
        std::fs::write(path, &rendered)
            .map_err(|e| CliError::validation("output", None, format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(rendered)
}
