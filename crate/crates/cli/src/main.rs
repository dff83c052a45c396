use std::process::ExitCode;

use nhtopo_cli::{env_threads, parse, Parsed};

fn main() -> ExitCode {
    let outcome = parse(std::env::args_os(), env_threads()).and_then(|parsed| match parsed {
        Parsed::Info(text) => {
            print!("{text}");
            Ok(())
        }
        Parsed::Run(invocation) => invocation.run_to(&mut std::io::stdout().lock()),
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
