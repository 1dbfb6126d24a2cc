mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;

use config::{Cli, Command, ConfigError, RunConfig};

/// Failure classes, each with its own exit status.
fn classify(err: &anyhow::Error) -> (&'static str, u8) {
    for cause in err.chain() {
        if cause.downcast_ref::<ConfigError>().is_some() {
            return ("config", 2);
        }
        if let Some(e) = cause.downcast_ref::<stressdg::Error>() {
            use stressdg::Error::*;
            let mut e = e;
            while let Level { source, .. } = e {
                e = source;
            }
            return match e {
                Config(_) | Degree { .. } | Quadrature(_) => ("config", 2),
                Mesh(_) | Parse { .. } => ("mesh", 3),
                NotConverged { .. } | Singular(_) => ("solver", 4),
                Io(_) => ("io", 5),
                Level { .. } => unreachable!(),
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return ("io", 5);
        }
    }
    ("error", 1)
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let cfg = RunConfig::resolve(cli.command, cli.options)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build_global()
        .map_err(|e| ConfigError(format!("thread pool: {e}")))?;
    log::debug!("{cfg:?}");
    match cfg.command {
        Command::Solve => commands::solve_command(&cfg).map(|_| true),
        Command::Convergence => commands::convergence_command(&cfg).map(|_| true),
        Command::Verify => commands::verify_command(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            let (class, code) = classify(&err);
            // Library errors already embed their source's message.
            let mut msg = String::new();
            for cause in err.chain().map(|c| c.to_string()) {
                if !msg.ends_with(&cause) {
                    if !msg.is_empty() {
                        msg.push_str(": ");
                    }
                    msg.push_str(&cause);
                }
            }
            eprintln!("error[{class}]: {msg}");
            ExitCode::from(code)
        }
    }
}
