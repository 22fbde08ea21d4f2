fn main() -> std::process::ExitCode {
    driftstab::cli::main_entry()
}
