use clap::Parser;

fn main() {
    let cli = magcath::cli::Cli::parse();
    std::process::exit(magcath::cli::run(cli));
}
