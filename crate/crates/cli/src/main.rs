mod args;
mod commands;
mod error;
mod settings;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use error::CliError;

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Train(a) => commands::run_train(a),
        Command::Generate(a) => commands::run_generate(a),
        Command::Eval(a) => commands::run_eval(a),
        Command::Encode(a) => commands::run_encode(a),
        Command::Grid(a) => commands::run_grid(a),
        Command::Optimize(a) => commands::run_optimize(a),
        Command::Sweep(a) => commands::run_sweep(a),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            std::process::exit(0);
        }
        Err(e) => {
            let _ = e.print();
            let first = e.to_string();
            let first = first.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("{}", CliError::usage(first));
            std::process::exit(1);
        }
    };
    if let Err(e) = run(&cli) {
        eprintln!("{e}");
        std::process::exit(e.kind.exit_code());
    }
}
