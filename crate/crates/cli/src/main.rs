use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use osm_cli::{run, Cli};

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(output) => {
            let _ = std::io::stdout().write_all(output.text.as_bytes());
            ExitCode::from(output.code)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
