fn main() {
    std::process::exit(ostrowski_bounds::harness::cli_main(std::env::args_os()));
}
