use clap::Parser;
use fbms_cli::{run, Cli, RunConfig};

fn main() {
    let cli = Cli::parse();
    std::process::exit(run(&RunConfig::from(&cli)));
}
