use std::fs::File;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use depthnav::harness::{
    build_paths, run_trial, summarize, write_csv, Pilot, RandomWalkPilot, ScriptedPilot, TrialRecord, TrialResult,
};
use depthnav::{Error, Modality, PipelineConfig};

use crate::error::CliResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModalityArg {
    Audio,
    Tactile,
    Both,
}

impl ModalityArg {
    fn modalities(self) -> Vec<Modality> {
        match self {
            ModalityArg::Audio => vec![Modality::Audio],
            ModalityArg::Tactile => vec![Modality::Tactile],
            ModalityArg::Both => vec![Modality::Audio, Modality::Tactile],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    /// Reactive walker steering on the feedback.
    Scripted,
    /// Feedback-blind baseline: seeded random walk, 70% forward.
    Random,
}

#[derive(Debug, Args)]
pub struct TrialArgs {
    /// Seed for the four generated paths.
    #[arg(long, default_value_t = 0)]
    paths_seed: u64,
    /// Artifact seeds per path: artifact.seed, artifact.seed + 1, ...
    #[arg(long, default_value_t = 1, value_name = "N")]
    artifact_seeds: u64,
    #[arg(long, value_enum, default_value_t = ModalityArg::Both)]
    modality: ModalityArg,
    #[arg(long, value_enum, default_value_t = PolicyArg::Scripted)]
    policy: PolicyArg,
    /// Per-trial CSV (modality, path, seed, trial_index, tt_s, noc, reached_goal).
    #[arg(long, value_name = "FILE", default_value = "trials.csv")]
    csv: PathBuf,
    /// Also write the summary cells as JSON.
    #[arg(long, value_name = "FILE")]
    summary_json: Option<PathBuf>,
    /// Write each trial's trace (t, x, y, heading) as CSV into this directory.
    #[arg(long, value_name = "DIR")]
    traces: Option<PathBuf>,
}

pub fn run(args: &TrialArgs, config: &PipelineConfig) -> CliResult<()> {
    let scenes = build_paths(args.paths_seed, config.agent.radius)?;
    if let Some(dir) = &args.traces {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.clone(), source })?;
    }
    let mut records = Vec::new();
    for modality in args.modality.modalities() {
        for (path, scene) in scenes.iter().enumerate() {
            for k in 0..args.artifact_seeds {
                let seed = config.artifact.seed.wrapping_add(k);
                let mut pilot: Box<dyn Pilot> = match args.policy {
                    PolicyArg::Scripted => Box::new(ScriptedPilot::new(config.policy.clone())),
                    PolicyArg::Random => Box::new(RandomWalkPilot::new(seed)),
                };
                let result = run_trial(scene, pilot.as_mut(), config, modality, seed)?;
                if let Some(dir) = &args.traces {
                    let file = dir.join(format!("{}_path{path}_seed{seed}.csv", modality.name()));
                    write_trace(&file, &result)?;
                }
                records.push(TrialRecord::new(modality, path, seed, path + 1, &result));
            }
        }
    }
    let file = File::create(&args.csv).map_err(|source| Error::Io { path: args.csv.clone(), source })?;
    write_csv(file, &records, true)?;
    let summary = summarize(&records);
    print!("{}", summary.render_table());
    let reached = records.iter().filter(|r| r.reached_goal).count();
    let mean_noc = records.iter().map(|r| r.noc as f64).sum::<f64>() / records.len().max(1) as f64;
    println!("runs {}\treached goal {reached}\tmean NoC {mean_noc:.3}", records.len());
    if let Some(path) = &args.summary_json {
        std::fs::write(path, summary.to_json()).map_err(|source| Error::Io { path: path.clone(), source })?;
    }
    Ok(())
}

fn write_trace(path: &Path, result: &TrialResult) -> CliResult<()> {
    let io = |source| Error::Io { path: path.to_path_buf(), source };
    let mut text = String::from("t,x,y,heading\n");
    for s in &result.trace {
        text.push_str(&format!("{},{},{},{}\n", s.t, s.x, s.y, s.heading));
    }
    std::fs::write(path, text).map_err(io)?;
    Ok(())
}
