use clap::Parser;
use ssacpd_cli::args::Cli;

fn main() {
    let cli = Cli::parse();
    match ssacpd_cli::run(cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
