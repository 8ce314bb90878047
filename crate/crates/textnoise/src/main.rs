fn main() {
    std::process::exit(textnoise::cli::run(std::env::args_os()));
}
