use clearnet::cli_io;

fn main() {
    std::process::exit(cli_io::run_cli(std::env::args_os()));
}
