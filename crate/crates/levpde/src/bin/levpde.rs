fn main() {
    std::process::exit(levpde::cli::main_entry());
}
