//! Command-line entry point, separated from `main` so it can be driven in tests.

use std::fmt::Display;
use std::io::Write;
use std::path::PathBuf;

use clap::Parser;

use crate::{parse_config, run};

/// Run one experiment described by a configuration file.
#[derive(Debug, Parser)]
#[command(name = "geomech", version)]
pub struct Args {
    pub config: PathBuf,
    /// Directory for the CSV output.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Overrides the `seed` key of the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Exit status for unreadable or invalid configurations.
pub const EXIT_CONFIG: u8 = 2;
/// Exit status for failures while running or writing output.
pub const EXIT_RUN: u8 = 1;

fn fail(err: &mut impl Write, kind: &str, msg: impl Display, code: u8) -> u8 {
    let msg = msg.to_string().replace('\n', " ");
    let _ = writeln!(err, "error: {kind}: {msg}");
    code
}

/// Runs the experiment, printing the summary to `out` or a single
/// `error: <kind>: <message>` line to `err`. Returns the exit status.
pub fn execute(args: &Args, out: &mut impl Write, err: &mut impl Write) -> u8 {
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => return fail(err, "io", format_args!("{}: {e}", args.config.display()), EXIT_CONFIG),
    };
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => return fail(err, e.kind(), &e, EXIT_CONFIG),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Err(e) = std::fs::create_dir_all(&args.out) {
        return fail(err, "io", format_args!("{}: {e}", args.out.display()), EXIT_RUN);
    }
    match run(&cfg, &args.out) {
        Ok(summary) => {
            let _ = write!(out, "{summary}");
            0
        }
        Err(e) => fail(err, e.kind(), &e, EXIT_RUN),
    }
}
