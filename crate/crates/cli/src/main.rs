fn main() {
    std::process::exit(frictions_cli::main_entry());
}
