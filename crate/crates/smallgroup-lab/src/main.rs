fn main() {
    std::process::exit(smallgroup_lab::cli::main_with(std::env::args_os()));
}
