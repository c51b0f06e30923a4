use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(nof1::cli::main_with_args(std::env::args_os()))
}
