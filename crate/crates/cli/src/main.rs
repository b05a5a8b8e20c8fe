use std::process::ExitCode;

use minimax_lab::app::{run_cli, threads_from_env, EXIT_VALIDATION};

fn main() -> ExitCode {
    match threads_from_env() {
        Ok(Some(n)) => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                eprintln!("error: cannot start {n} worker threads: {e}");
                return ExitCode::from(EXIT_VALIDATION);
            }
        }
        Ok(None) => {}
        Err(e) => {
            eprintln!("invalid configuration:\n  {e}");
            return ExitCode::from(EXIT_VALIDATION);
        }
    }
    let mut out = std::io::stdout().lock();
    let mut err = std::io::stderr().lock();
    ExitCode::from(run_cli(std::env::args_os(), &mut out, &mut err))
}
