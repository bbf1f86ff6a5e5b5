//! Command-line front end for `lopt-core`: every computation is a subcommand
//! that writes a CSV table.

pub mod args;
pub mod commands;
pub mod config;
pub mod grid;
pub mod table;
pub mod verify;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};

use clap::error::ErrorKind;
use clap::Parser;

use crate::args::{Cli, Command};
use crate::config::{CliError, RunConfig, EXIT_CHECKS_FAILED, EXIT_OK, EXIT_USAGE, PRECISION_ENV};
use crate::table::Table;

/// Parses `argv`, runs the subcommand and returns the process exit code.
/// CSV goes to `--output` or `stdout`; diagnostics go to `stderr`.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{}", e.render());
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{}", e.render());
                    EXIT_USAGE
                }
            };
        }
    };
    match execute(&cli, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, CliError> {
    let env = std::env::var(PRECISION_ENV).ok();
    let cfg = RunConfig::new(cli.potential.as_deref(), cli.precision, env.as_deref(), cli.output.clone())?;
    let (table, code) = match &cli.command {
        Command::Series(a) => (commands::run_series(&cfg, a)?, EXIT_OK),
        Command::CurveA(a) => (commands::run_curve_a(&cfg, a)?, EXIT_OK),
        Command::CurveM(a) => (commands::run_curve_m(&cfg, a)?, EXIT_OK),
        Command::FixedX(a) => (commands::run_fixed_x(&cfg, a)?, EXIT_OK),
        Command::EigenRatio(a) => (commands::run_eigen_ratio(&cfg, a)?, EXIT_OK),
        Command::Matelem(a) => (commands::run_matelem(&cfg, a)?, EXIT_OK),
        Command::Density(a) => (commands::run_density(&cfg, a)?, EXIT_OK),
        Command::Trajectories(a) => (commands::run_trajectories(&cfg, a)?, EXIT_OK),
        Command::Verify => {
            let checks = verify::run_suite(&cfg.potential, cfg.precision)?;
            for c in &checks {
                let _ = writeln!(stderr, "[{}] {:>2} {} ({:.2} s)", c.status.as_str(), c.id, c.name, c.elapsed.as_secs_f64());
            }
            let mut t = verify::report(&checks);
            t.comment = cfg.comment("verify", "");
            let code = if verify::all_passed(&checks) { EXIT_OK } else { EXIT_CHECKS_FAILED };
            (t, code)
        }
    };
    emit(&table, cfg.output.as_deref(), stdout)?;
    Ok(code)
}

fn emit(table: &Table, path: Option<&std::path::Path>, stdout: &mut dyn Write) -> Result<(), CliError> {
    let io_err = |e: io::Error| CliError::Io(e.to_string());
    match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            let mut w = BufWriter::new(file);
            table.write_to(&mut w).map_err(io_err)?;
            w.flush().map_err(io_err)
        }
        None => table.write_to(stdout).map_err(io_err),
    }
}
