fn main() -> std::process::ExitCode {
    fairtoss::cli::main()
}
