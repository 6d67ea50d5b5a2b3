use std::io::{self, ErrorKind};
use std::process::ExitCode;

use clap::Parser;
use overrun_cli::{run, Cli, CliError};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(&cli, &mut io::stdout().lock()) {
        Ok(code) => code,
        // A closed pipe (`| head`) is the reader's choice, not a failure.
        Err(CliError::Io(e)) if e.kind() == ErrorKind::BrokenPipe => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
