use clap::Parser;

fn main() {
    let cli = protcoord::cli::Cli::parse();
    std::process::exit(protcoord::cli::run(&cli));
}
