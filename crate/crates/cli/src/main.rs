fn main() -> std::process::ExitCode {
    std::process::ExitCode::from(sceneqa_cli::run_args(std::env::args_os()))
}
