fn main() -> std::process::ExitCode {
    teleop_gateway::cli::main_with_args(std::env::args_os())
}
