use std::path::PathBuf;

use clap::Args;
use depthnav::correction::fill_metrics;
use depthnav::frameio::{read_stream, write_stream, FrameStream};
use depthnav::pipeline::Chain;
use depthnav::{Error, Modality, PipelineConfig};

use crate::error::CliResult;

#[derive(Debug, Args)]
pub struct FillArgs {
    /// Degraded depth stream.
    #[arg(long, value_name = "FILE")]
    depth: PathBuf,
    /// Guidance stream aligned with the depth stream; without it the color
    /// term is dropped (dark mode).
    #[arg(long, value_name = "FILE")]
    guidance: Option<PathBuf>,
    /// Corrected output stream.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Clean depth stream for the mean absolute error of filled pixels.
    #[arg(long, value_name = "FILE")]
    reference: Option<PathBuf>,
}

pub fn run(args: &FillArgs, config: &PipelineConfig) -> CliResult<()> {
    let depth = read_stream(&args.depth)?.into_depth()?;
    let guidance = match &args.guidance {
        Some(p) => Some(read_stream(p)?.into_guidance()?),
        None => None,
    };
    let reference = match &args.reference {
        Some(p) => Some(read_stream(p)?.into_depth()?),
        None => None,
    };
    for (name, len) in [("guidance", guidance.as_ref().map(Vec::len)), ("reference", reference.as_ref().map(Vec::len))]
    {
        if let Some(len) = len.filter(|&n| n != depth.len()) {
            return Err(
                Error::Dimension(format!("{name} stream has {len} frames, depth stream {}", depth.len())).into()
            );
        }
    }
    // Only the correction stage runs; the modality is irrelevant here.
    let mut chain = Chain::new(config, Modality::Tactile)?;
    let mut corrected = Vec::with_capacity(depth.len());
    println!("frame\tholes\trecovered\tcoverage_pct\tmae_mm");
    let (mut coverage_sum, mut mae_sum, mut mae_n) = (0.0, 0.0, 0usize);
    for (i, raw) in depth.iter().enumerate() {
        let g = guidance.as_ref().map(|g| &g[i]);
        let out = chain.correct(raw, g)?;
        let m = fill_metrics(raw, &out, reference.as_ref().map(|r| &r[i]))?;
        let mae = m.mae_mm.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"));
        println!("{i}\t{}\t{}\t{:.2}\t{mae}", m.holes, m.recovered, 100.0 * m.coverage());
        coverage_sum += m.coverage();
        if let Some(v) = m.mae_mm {
            mae_sum += v;
            mae_n += 1;
        }
        corrected.push(out);
    }
    let n = depth.len().max(1) as f64;
    let mean_mae = if mae_n > 0 { format!("{:.2}", mae_sum / mae_n as f64) } else { "-".into() };
    println!("mean\t-\t-\t{:.2}\t{mean_mae}", 100.0 * coverage_sum / n);
    write_stream(&FrameStream::Depth(corrected), &args.out)?;
    Ok(())
}
