use clap::Parser;

fn main() {
    if let Err(e) = frwkv_cli::run(frwkv_cli::Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
