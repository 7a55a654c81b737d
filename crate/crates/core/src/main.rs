fn main() {
    std::process::exit(densedex::cli::main());
}
