use clap::Parser;

fn main() {
    let cli = igeoflow::Cli::parse();
    if let Err(e) = igeoflow::run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
