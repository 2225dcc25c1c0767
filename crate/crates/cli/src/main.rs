mod args;
mod run;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = configure_workers(cli.global.workers) {
        eprintln!("error[config]: {e}");
        return ExitCode::FAILURE;
    }
    let ctx = run::Ctx::new(cli.global);
    match run::dispatch(&ctx, cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = format!("{e:#}").replace('\n', " ");
            eprintln!("error[{}]: {message}", error_class(&e));
            ExitCode::FAILURE
        }
    }
}

#[cfg(feature = "parallel")]
fn configure_workers(workers: usize) -> anyhow::Result<()> {
    if workers > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(workers).build_global()?;
    }
    Ok(())
}

#[cfg(not(feature = "parallel"))]
fn configure_workers(_workers: usize) -> anyhow::Result<()> {
    Ok(())
}

fn error_class(e: &anyhow::Error) -> &'static str {
    for cause in e.chain() {
        if let Some(core) = cause.downcast_ref::<brie_core::Error>() {
            return core.class();
        }
        if cause.is::<std::io::Error>() {
            return "io";
        }
        if cause.is::<serde_json::Error>() {
            return "format";
        }
    }
    "config"
}
