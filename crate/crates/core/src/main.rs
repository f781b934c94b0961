fn main() {
    let code = impact_hedger::cli::cli_main(std::env::args().collect());
    std::process::exit(code);
}
