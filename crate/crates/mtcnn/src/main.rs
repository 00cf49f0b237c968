fn main() {
    std::process::exit(mtcnn::cli::main_with_args(std::env::args_os()));
}
