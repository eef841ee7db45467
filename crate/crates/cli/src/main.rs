use clap::Parser;

fn main() {
    let cli = betalink_cli::Cli::parse();
    if let Err(e) = betalink_cli::run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
