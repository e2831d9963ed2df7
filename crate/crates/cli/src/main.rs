fn main() {
    std::process::exit(qtomo::run(std::env::args_os()));
}
