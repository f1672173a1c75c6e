use clap::Parser;

fn main() {
    let cli = pmcgraph_cli::Cli::parse();
    std::process::exit(pmcgraph_cli::run(&cli));
}
