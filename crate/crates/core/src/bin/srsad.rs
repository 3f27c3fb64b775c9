use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(srsad_core::cli::main_with(std::env::args().collect()) as u8)
}
