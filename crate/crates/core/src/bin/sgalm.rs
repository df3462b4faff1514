use std::process::ExitCode;

fn main() -> ExitCode {
    sgalm::cli::main_with_args(std::env::args_os())
}
