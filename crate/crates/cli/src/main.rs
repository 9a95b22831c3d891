use std::process::ExitCode;

use clap::Parser;
use geomech_cli::app::{execute, Args};

fn main() -> ExitCode {
    let args = Args::parse();
    let code = execute(&args, &mut std::io::stdout().lock(), &mut std::io::stderr().lock());
    ExitCode::from(code)
}
