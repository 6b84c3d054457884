use clap::Parser;
use ehdwaves_cli::{exit, load_config, run, Cli};

fn main() {
    let cli = Cli::parse();
    let code = match load_config(&cli) {
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
        Ok(report) => {
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            match run(&cli, &report.config) {
                Ok(outcome) => {
                    println!("{}", outcome.dir.display());
                    exit::OK
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    e.exit_code()
                }
            }
        }
    };
    std::process::exit(code);
}
