use clap::Parser;

fn main() {
    let cli = enif_lab::cli::Cli::parse();
    if let Err(e) = enif_lab::cli::execute(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
