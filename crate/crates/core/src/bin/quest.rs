fn main() {
    std::process::exit(quest_core::cli::main());
}
