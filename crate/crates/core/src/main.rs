fn main() {
    std::process::exit(ergodic_cdf::harness::cli_main(std::env::args_os()));
}
