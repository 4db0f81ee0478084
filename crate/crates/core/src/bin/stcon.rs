fn main() {
    std::process::exit(stcon::harness::main_with(std::env::args_os()));
}
