use std::process::ExitCode;

fn main() -> ExitCode {
    ruinsim::cli::main()
}
