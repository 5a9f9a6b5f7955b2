use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use snlab::cli::{error_code, run, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            print!("{}", out.text);
            let _ = std::io::stdout().flush();
            if out.code == snlab::cli::EXIT_OPEN {
                eprintln!("open case");
            }
            ExitCode::from(out.code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_code(&e) as u8)
        }
    }
}
