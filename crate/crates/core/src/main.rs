use clap::Parser;

fn main() {
    let cli = bslab::cli::Cli::parse();
    std::process::exit(bslab::cli::run(cli));
}
