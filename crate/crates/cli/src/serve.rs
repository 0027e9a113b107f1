use std::path::PathBuf;
use std::sync::atomic::Ordering;
use std::sync::Arc;

use clap::Args;
use depthnav::harness::build_paths;
use depthnav::PipelineConfig;
use depthnav_service::{Pacing, Server, ServiceContext, ServiceError, TrialLog};

use crate::error::CliResult;

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Address to bind.
    #[arg(long, default_value = "127.0.0.1")]
    bind: String,
    #[arg(long, default_value_t = 8765)]
    port: u16,
    /// Never send pose or goal to clients.
    #[arg(long)]
    blindfold: bool,
    /// Seed for the four generated paths.
    #[arg(long, default_value_t = 0)]
    paths_seed: u64,
    /// CSV log of finished trials (appended).
    #[arg(long, value_name = "FILE", default_value = "sessions.csv")]
    log: PathBuf,
    /// Advance one tick per client input instead of every trial.dt seconds.
    #[arg(long)]
    lockstep: bool,
}

pub fn run(args: &ServeArgs, config: &PipelineConfig) -> CliResult<()> {
    let scenes = build_paths(args.paths_seed, config.agent.radius)?;
    let mut ctx = ServiceContext::new(scenes, config.clone());
    ctx.blindfold = args.blindfold;
    ctx.pacing = if args.lockstep { Pacing::Lockstep } else { Pacing::Realtime };
    ctx.log = Some(Arc::new(TrialLog::open(&args.log)?));
    let shutdown = Arc::clone(&ctx.shutdown);
    let addr = format!("{}:{}", args.bind, args.port);
    let server = Server::bind(&addr, ctx)?;
    ctrlc::set_handler(move || shutdown.store(true, Ordering::SeqCst))
        .map_err(|e| ServiceError::Io(std::io::Error::other(e.to_string())))?;
    let local = server.local_addr().map_err(ServiceError::Io)?;
    // Scripts wait for this line before connecting.
    println!("listening on {local}");
    eprintln!("logging trials to {}", args.log.display());
    server.run()?;
    eprintln!("shut down");
    Ok(())
}
