use std::path::{Path, PathBuf};

use clap::Args;
use depthnav::frameio::{write_stream, FrameStream};
use depthnav::harness::build_paths;
use depthnav::pipeline::sense;
use depthnav::simsensor::render;
use depthnav::{Error, PipelineConfig, Pose, Scene};

use crate::error::{CliError, CliResult};

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["scene", "path"])))]
pub struct RenderArgs {
    /// Scene file (TOML).
    #[arg(long, value_name = "FILE")]
    scene: Option<PathBuf>,
    /// Render generated path I instead of a scene file.
    #[arg(long, value_name = "I")]
    path: Option<usize>,
    /// Seed for the generated paths (with --path).
    #[arg(long, default_value_t = 0)]
    paths_seed: u64,
    /// CSV with x, y, heading columns (radians), one frame per row; a trial
    /// trace works as is. Defaults to the scene's start pose.
    #[arg(long, value_name = "FILE")]
    poses: Option<PathBuf>,
    /// Output depth stream.
    #[arg(long, value_name = "FILE")]
    depth_out: PathBuf,
    /// Output guidance (color) stream.
    #[arg(long, value_name = "FILE")]
    guidance_out: Option<PathBuf>,
    /// Apply the configured sensor artifacts (seeded per frame from artifact.seed).
    #[arg(long)]
    degrade: bool,
    /// With --degrade, also write the clean depth stream here.
    #[arg(long, value_name = "FILE", requires = "degrade")]
    clean_out: Option<PathBuf>,
}

pub fn run(args: &RenderArgs, config: &PipelineConfig) -> CliResult<()> {
    let scene = match (&args.scene, args.path) {
        (Some(file), _) => Scene::load(file)?,
        (None, Some(i)) => {
            let mut paths = build_paths(args.paths_seed, config.agent.radius)?;
            if i >= paths.len() {
                return Err(CliError::Usage(format!("--path {i} out of range (0..{})", paths.len())));
            }
            paths.swap_remove(i)
        }
        (None, None) => unreachable!("clap requires a source"),
    };
    let poses = match &args.poses {
        Some(file) => read_poses(file)?,
        None => vec![scene.start],
    };
    let (mut depth, mut guidance, mut clean) = (Vec::new(), Vec::new(), Vec::new());
    for (i, &pose) in poses.iter().enumerate() {
        let truth = render(&scene, pose, &config.sensor)?;
        if args.degrade {
            let (degraded, _) = sense(&scene, pose, config, config.artifact.seed, i as u64)?;
            depth.push(degraded);
            clean.push(truth.depth);
        } else {
            depth.push(truth.depth);
        }
        guidance.push(truth.guidance);
    }
    let bytes = write_stream(&FrameStream::Depth(depth), &args.depth_out)?;
    println!("{}\t{} frame(s)\t{bytes} bytes", args.depth_out.display(), poses.len());
    if let Some(out) = &args.guidance_out {
        let bytes = write_stream(&FrameStream::Guidance(guidance), out)?;
        println!("{}\t{} frame(s)\t{bytes} bytes", out.display(), poses.len());
    }
    if let Some(out) = &args.clean_out {
        let bytes = write_stream(&FrameStream::Depth(clean), out)?;
        println!("{}\t{} frame(s)\t{bytes} bytes", out.display(), poses.len());
    }
    Ok(())
}

/// Reads poses from a CSV with a header naming `x`, `y` and `heading`.
pub fn read_poses(path: &Path) -> CliResult<Vec<Pose>> {
    let parse_err = |message: String| Error::Parse { what: path.display().to_string(), message };
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| parse_err(e.to_string()))?.clone();
    let column = |name: &str| {
        headers.iter().position(|h| h.trim() == name).ok_or_else(|| parse_err(format!("missing column {name:?}")))
    };
    let (cx, cy, ch) = (column("x")?, column("y")?, column("heading")?);
    let mut poses = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_err(e.to_string()))?;
        let field = |c: usize| -> Result<f64, Error> {
            record
                .get(c)
                .and_then(|v| v.trim().parse::<f64>().ok())
                .ok_or_else(|| parse_err(format!("row {}: column {} is not a number", row + 2, headers[c].trim())))
        };
        poses.push(Pose::new(field(cx)?, field(cy)?, field(ch)?));
    }
    if poses.is_empty() {
        return Err(parse_err("no poses".into()).into());
    }
    Ok(poses)
}
