use std::process::ExitCode;

use clap::Parser;

mod args;
mod commands;
mod config;

use args::{Cli, Command};
use commands::ComponentMissing;
use config::FileConfig;

const EXIT_PIPELINE: u8 = 1;
const EXIT_MISSING_COMPONENT: u8 = 3;

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let jobs = config.jobs(cli.jobs);
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
        log::debug!("thread pool already set up: {e}");
    }

    match &cli.command {
        Command::Disasm { input } => commands::disasm(input),
        Command::Cfg { input, format, split_calls, out } => commands::cfg(input, *format, *split_calls, out.as_deref()),
        Command::Selectors { input } => commands::selectors(input),
        Command::Connect { caller, callee, swap, format, out } => {
            commands::connect(caller, callee, *swap, *format, out.as_deref())
        }
        Command::Paths(args) => commands::paths(args, &config),
        Command::Features(args) => commands::features(args, &config, jobs),
        Command::Detect(args) => commands::detect(args, &config),
        Command::Manifest { csv, out } => commands::manifest(csv, out.as_deref()),
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ComponentMissing>().is_some() {
                ExitCode::from(EXIT_MISSING_COMPONENT)
            } else {
                ExitCode::from(EXIT_PIPELINE)
            }
        }
    }
}
