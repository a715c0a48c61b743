use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = match mrnet_cli::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match mrnet_cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mrnet: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
