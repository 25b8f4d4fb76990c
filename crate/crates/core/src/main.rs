fn main() {
    std::process::exit(kch::cli::main_run(std::env::args_os()));
}
