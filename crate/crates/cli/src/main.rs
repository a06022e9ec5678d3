use std::process::ExitCode;

use rod_sqp_cli::{parse_run_spec, run_and_emit, CliError, EXIT_CONVERGED};

fn main() -> ExitCode {
    let spec = match parse_run_spec(std::env::args_os()) {
        Ok(spec) => spec,
        Err(e) => {
            match &e {
                CliError::Args(clap_err) => {
                    let _ = clap_err.print();
                }
                other => eprintln!("error: {other}"),
            }
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let outcome = run_and_emit(&spec);
    if outcome.exit_code == EXIT_CONVERGED {
        println!("{}", outcome.message);
    } else {
        eprintln!("{}", outcome.message);
    }
    ExitCode::from(outcome.exit_code as u8)
}
