use clap::Parser;
use timeorder_cli::error::EXIT_NUMERICAL;
use timeorder_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => {}
        Ok(false) => std::process::exit(EXIT_NUMERICAL),
        Err(e) => {
            eprintln!("{}", e.record());
            std::process::exit(e.exit_code());
        }
    }
}
