use clap::Parser;

fn main() {
    let cli = ptcure::cli::Cli::parse();
    std::process::exit(ptcure::cli::run(cli));
}
