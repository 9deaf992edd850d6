fn main() {
    std::process::exit(grasp_sentinel::cli::run(std::env::args_os()));
}
