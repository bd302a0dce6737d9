fn main() -> std::process::ExitCode {
    cpabe_dss::cli::main()
}
