use std::process::ExitCode;

fn main() -> ExitCode {
    cernn_cli::main_impl()
}
