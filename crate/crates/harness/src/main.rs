fn main() {
    std::process::exit(rrsr_harness::cli_main(std::env::args_os()));
}
