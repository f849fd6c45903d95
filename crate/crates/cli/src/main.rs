use std::process::ExitCode;

use clap::Parser;
use graspkit_cli::{run, threads_from_env, Cli, CliError, EXIT_INTERNAL};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = threads_from_env().and_then(|threads| {
        if let Some(n) = threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::new(EXIT_INTERNAL, e.to_string()))?;
        }
        run(cli)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("graspkit: {e}");
            ExitCode::from(e.code)
        }
    }
}
