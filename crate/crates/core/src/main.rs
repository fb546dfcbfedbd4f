use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(qfilter::cli::run(std::env::args_os()))
}
