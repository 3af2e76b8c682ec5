fn main() {
    std::process::exit(rmt_lab::cli::main_with(std::env::args_os()));
}
