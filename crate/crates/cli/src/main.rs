use std::process::ExitCode;

use clap::Parser;
use dragon_cli::{init_threads, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = std::env::var("DRAGON_THREADS").ok();
    let result = init_threads(threads.as_deref()).and_then(|()| run(&cli));
    match result {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("dragon: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
