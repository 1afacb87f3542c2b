fn main() { std::process::exit(voatrace::cli::run()); }
