fn main() -> std::process::ExitCode {
    pan_core::cli::main_entry()
}
