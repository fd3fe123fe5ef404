//! Command-line front end: dataset simulation, walk sampling, training,
//! generation, evaluation and plotting. Every command writes a JSON
//! manifest beside its primary output.

pub mod args;
pub mod commands;
pub mod config;
pub mod manifest;
pub mod plot;

pub use args::{Cli, Command};

pub fn run(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Sample(a) => commands::sample(a),
        Command::Train(a) => commands::train(a),
        Command::Generate(a) => commands::generate(a),
        Command::Evaluate(a) => commands::evaluate_cmd(a),
        Command::Plot(a) => commands::plot(a),
    }
}

/// Machine-readable form of a failure, printed to stderr.
pub fn error_json(e: &anyhow::Error) -> String {
    let chain: Vec<String> = e.chain().map(|c| c.to_string()).collect();
    serde_json::json!({ "error": { "message": e.to_string(), "causes": chain } }).to_string()
}
