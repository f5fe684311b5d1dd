use std::process::ExitCode;

use clap::Parser;
use mdq_cli::{exit, run_experiment, Cli, CliError, ExperimentSpec};

/// Caps the rayon pool at `MDQ_THREADS` workers when set.
fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("MDQ_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Usage(format!("MDQ_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::CONFIG as u8 } else { 0 });
        }
    };
    let result = configure_threads()
        .and_then(|()| ExperimentSpec::from_cli(cli))
        .and_then(|spec| run_experiment(&spec));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mdq: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
