fn main() {
    std::process::exit(stressdetect::main_with(std::env::args_os()));
}
