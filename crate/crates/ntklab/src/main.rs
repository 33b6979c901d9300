use clap::Parser;
use ntklab::cli::{run, CliArgs};
use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(run(CliArgs::parse()) as u8)
}
