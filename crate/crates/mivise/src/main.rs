fn main() { std::process::exit(mivise::cli::run()); }
