fn main() {
    std::process::exit(phasespace::cli::main_with(std::env::args_os()));
}
