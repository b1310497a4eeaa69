use std::process::ExitCode;

fn main() -> ExitCode {
    van_cli::commands::main_with(std::env::args_os())
}
