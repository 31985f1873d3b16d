use clap::Parser;

fn main() {
    std::process::exit(sindy_cli::run(sindy_cli::Cli::parse()));
}
