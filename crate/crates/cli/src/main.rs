mod args;
mod error;
mod run;

use clap::Parser;

use args::Cli;
use error::CliError;

/// `SKYFALL_THREADS`: 1 (default) trains serially, more uses that many
/// workers with identical results.
fn threads() -> Result<usize, CliError> {
    match std::env::var("SKYFALL_THREADS") {
        Err(_) => Ok(1),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(CliError::Usage(format!("SKYFALL_THREADS must be a positive integer, got {v:?}"))),
        },
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = threads().and_then(|t| {
        let mut ann = run::Announcer::new(&cli.command, t);
        let r = run::run(&cli.command, t, &mut ann);
        ann.announce(&[]);
        r
    });
    if let Err(e) = result {
        eprintln!("error: {}", e.message());
        std::process::exit(e.code());
    }
}
