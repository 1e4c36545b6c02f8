fn main() {
    std::process::exit(turnangle::cli::run(std::env::args_os()).code());
}
