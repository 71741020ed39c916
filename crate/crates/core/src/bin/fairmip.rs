fn main() {
    std::process::exit(fairmip::cli::run(std::env::args_os()));
}
