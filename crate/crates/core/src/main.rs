use std::process::ExitCode;

use pdikit::cli::{parse_args, run_pipeline};

fn main() -> ExitCode {
    let config = match parse_args(std::env::args_os()) {
        Ok(c) => c,
        Err(e) if e.is_informational() => {
            print!("{}", e.0);
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("pdikit: error: {}", e.message());
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    ExitCode::from(run_pipeline(&config) as u8)
}
