use std::process::ExitCode;

use ckdr_cli::{run, Cli};
use clap::error::ErrorKind;
use clap::Parser;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let summary = text.split("\n\n").next().unwrap_or("invalid arguments");
            let summary: Vec<&str> = summary.split_whitespace().collect();
            eprintln!("ERROR Usage: {}", summary.join(" ").trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    let stdout = std::io::stdout();
    match run(cli, &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = e.to_string().replace('\n', " ");
            eprintln!("ERROR {}: {message}", e.code());
            ExitCode::FAILURE
        }
    }
}
