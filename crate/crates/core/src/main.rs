use std::process::ExitCode;

fn main() -> ExitCode {
    qbsd::cli::run()
}
