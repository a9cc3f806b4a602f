use clap::Parser;

fn main() {
    let cli = deltaiss_cli::Cli::parse();
    match deltaiss_cli::run(cli) {
        Ok(msg) => println!("{msg}"),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
