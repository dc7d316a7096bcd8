mod args;
mod commands;
mod config;
mod manifest;

use std::process::ExitCode;

use clap::{CommandFactory, Parser};

use args::Cli;

fn long_names(cmd: &clap::Command) -> Vec<String> {
    let mut out = Vec::new();
    for a in cmd.get_arguments() {
        out.extend(a.get_long().map(str::to_string));
        out.extend(
            a.get_all_aliases()
                .into_iter()
                .flatten()
                .map(str::to_string),
        );
    }
    out
}

fn accepted(sub: &str) -> config::Accepted {
    let cli = Cli::command();
    let here = cli.find_subcommand(sub).map(long_names).unwrap_or_default();
    let anywhere = cli.get_subcommands().flat_map(long_names).collect();
    config::Accepted { here, anywhere }
}

fn main() -> ExitCode {
    let raw: Vec<String> = std::env::args().collect();
    let argv = match config::expand(raw, accepted) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match commands::execute(&cli, &argv[1..], true) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
