fn main() {
    std::process::exit(reportlabel::cli::main_with_args(std::env::args_os()));
}
