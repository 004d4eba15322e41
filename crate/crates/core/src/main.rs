fn main() {
    std::process::exit(edit_planner::cli::run(std::env::args_os()));
}
