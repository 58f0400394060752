fn main() {
    std::process::exit(stm_rec::cli::run_command(std::env::args()));
}
