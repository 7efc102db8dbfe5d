fn main() {
    std::process::exit(sdc_core::cli::main());
}
