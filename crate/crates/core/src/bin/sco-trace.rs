use std::process::ExitCode;

fn main() -> ExitCode {
    sco_trace::harness::run_cli(std::env::args_os()).into()
}
