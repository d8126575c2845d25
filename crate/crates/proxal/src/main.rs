use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(proxal::cli::run())
}
