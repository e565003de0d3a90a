fn main() {
    std::process::exit(gibbsbd::cli::main_with(std::env::args_os()));
}
