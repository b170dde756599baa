//! Command-line front end for the `ssacpd` library.

pub mod args;
pub mod commands;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod plot;

use std::path::PathBuf;

use args::{Cli, Command};
use commands::Context;
pub use error::{CliError, CliResult};

/// Executes one parsed invocation and returns the files it wrote.
pub fn run(cli: Cli) -> CliResult<Vec<PathBuf>> {
    let ctx = Context { seed: cli.seed, out: cli.out, config: cli.config };
    let work = move || match &cli.command {
        Command::Generate(a) => commands::cmd_generate(&ctx, a),
        Command::FitSsa(a) => commands::cmd_fit_ssa(&ctx, a),
        Command::SelectOrder(a) => commands::cmd_select_order(&ctx, a),
        Command::Bnise(a) => commands::cmd_bnise(&ctx, a),
        Command::Detect(a) => commands::cmd_detect(&ctx, a),
        Command::Evaluate(a) => commands::cmd_evaluate(&ctx, a),
        Command::Plot(a) => commands::cmd_plot(&ctx, a),
        Command::Experiment => {
            let summary = commands::cmd_experiment(&ctx)?;
            for (stage, c) in &summary.stages {
                eprintln!("{stage}: {} computed, {} reused", c.computed, c.reused);
            }
            Ok(summary.outputs)
        }
    };
    match cli.jobs {
        Some(0) => Err(CliError::Validation("--jobs must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Runtime(e.to_string()))?
            .install(work),
        None => work(),
    }
}
