fn main() {
    std::process::exit(ctrnn_trader::cli::run(std::env::args_os()));
}
