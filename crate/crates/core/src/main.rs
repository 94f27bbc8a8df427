fn main() -> std::process::ExitCode {
    async_barycenter::cli::main_with(std::env::args_os())
}
