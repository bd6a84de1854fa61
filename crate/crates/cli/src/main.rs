//! `zorro`: generate data, train models, explain predictions and evaluate
//! explanations from the command line.

mod args;
mod commands;
mod error;
mod manifest;
mod nodes;

use std::process::ExitCode;

use clap::Parser;

use crate::args::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let result = match &cli.command {
        Command::SynthGen(a) => commands::synth_gen::run(a, &argv),
        Command::Train(a) => commands::train::run(a, &argv),
        Command::Explain(a) => commands::explain::run(a, &argv, false),
        Command::MultiExplain(a) => commands::explain::run(a, &argv, true),
        Command::Evaluate(a) => commands::evaluate::run(a, &argv),
        Command::Roar(a) => commands::roar::run(a, &argv),
        Command::GtEval(a) => commands::gt_eval::run(a, &argv),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
