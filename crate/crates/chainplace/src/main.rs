fn main() {
    let argv: Vec<String> = std::env::args().collect();
    std::process::exit(chainplace::harness::cli_main(&argv));
}
