fn main() {
    std::process::exit(finitekey_cli::run());
}
