use std::io;
use std::panic;
use std::process::ExitCode;

fn main() -> ExitCode {
    let status = panic::catch_unwind(|| sag_cli::run(std::env::args_os(), &mut io::stdout(), &mut io::stderr()));
    ExitCode::from(status.map_or(1, |s| s as u8))
}
