fn main() {
    std::process::exit(goalsight_cli::main_entry());
}
