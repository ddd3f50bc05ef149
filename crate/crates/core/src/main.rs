fn main() -> std::process::ExitCode {
    recsample::cli::main_entry()
}
