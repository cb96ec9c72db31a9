fn main() { std::process::exit(kinlv_cli::run()) }
