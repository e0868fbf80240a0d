fn main() {
    std::process::exit(convpca::run(std::env::args_os()));
}
