fn main() -> std::process::ExitCode {
    lexnorm::cli::main_with_env()
}
