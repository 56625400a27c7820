use std::process::ExitCode;

use clap::Parser;
use trustgraph::cli::{run, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!(
                "trustgraph: error[{}]: {}",
                e.kind(),
                e.to_string().replace('\n', " ")
            );
            ExitCode::FAILURE
        }
    }
}
