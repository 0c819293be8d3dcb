use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use dynmap::depth_io::write_depth_image;
use dynmap::sim::{
    bench, compare_predictors, evaluate, load_overrides, read_records, run_scenario, write_records, PipelineConfig,
    RecordsHeader, Scenario, Simulation,
};

#[derive(Parser)]
#[command(name = "dynmap", version, about = "Dynamic obstacle tracking and mapping on synthetic depth scenes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write records, metrics and a summary.
    Run {
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Pipeline settings merged over the scenario's own.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Score a records directory written by `run`.
    Evaluate { records_dir: PathBuf },
    /// Failure ratios of the Markov and linear predictors on one scenario.
    ComparePredictors {
        scenario: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Render one frame to a 16-bit PGM with an intrinsics sidecar.
    RenderPreview {
        scenario: PathBuf,
        #[arg(long)]
        frame: usize,
        #[arg(long, default_value = "preview.pgm")]
        out: PathBuf,
    },
    /// Time the pipeline stages.
    Bench {
        scenario: PathBuf,
        #[arg(long, default_value_t = 1)]
        repeat: usize,
        /// Image size as WIDTHxHEIGHT, e.g. 640x480.
        #[arg(long, value_parser = parse_size)]
        size: Option<(usize, usize)>,
        /// Only the first N frames.
        #[arg(long)]
        frames: Option<usize>,
    },
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected WIDTHxHEIGHT")?;
    let w = w.parse().map_err(|_| format!("bad width in {s}"))?;
    let h = h.parse().map_err(|_| format!("bad height in {s}"))?;
    Ok((w, h))
}

fn load(path: &Path, config: Option<&Path>) -> Result<(Scenario, PipelineConfig)> {
    let scenario = Scenario::load(path)?;
    let overrides = config.map(load_overrides).transpose()?;
    let cfg = scenario.pipeline_config(overrides.as_ref())?;
    Ok((scenario, cfg))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { scenario, out, seed, config } => {
            let (mut s, cfg) = load(&scenario, config.as_deref())?;
            if let Some(seed) = seed {
                s.seed = seed;
            }
            let records = run_scenario(&s, &cfg)?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let header = RecordsHeader::new(&s.name, s.seed, cfg.predictor_kind);
            write_records(&out.join("records.jsonl"), &header, &records)?;
            let report = evaluate(&records);
            write(&out.join("metrics.csv"), &report.to_csv())?;
            write(&out.join("runtime.csv"), &report.runtime_csv())?;
            write(&out.join("summary.txt"), &report.summary())?;
            print!("{}", report.summary());
        }
        Command::Evaluate { records_dir } => {
            let (_, records) = read_records(&records_dir.join("records.jsonl"))?;
            if records.is_empty() {
                bail!("no frame records in {}", records_dir.display());
            }
            let report = evaluate(&records);
            write(&records_dir.join("metrics.csv"), &report.to_csv())?;
            write(&records_dir.join("runtime.csv"), &report.runtime_csv())?;
            print!("{}", report.summary());
        }
        Command::ComparePredictors { scenario, config } => {
            let (s, cfg) = load(&scenario, config.as_deref())?;
            let c = compare_predictors(&s, &cfg)?;
            println!("predictor,predictions,failed,failure_ratio");
            println!("markov,{},{},{:.6}", c.markov_predictions, c.markov_failed, c.markov_failure_ratio);
            println!("linear,{},{},{:.6}", c.linear_predictions, c.linear_failed, c.linear_failure_ratio);
        }
        Command::RenderPreview { scenario, frame, out } => {
            let s = Scenario::load(&scenario)?;
            if frame >= s.frame_count() {
                bail!("frame {frame} out of range (scenario has {} frames)", s.frame_count());
            }
            let sim = Simulation::new(&s, s.pipeline_config(None)?)?;
            let (img, _) = sim.render(frame);
            write_depth_image(&img, &out)?;
            println!("wrote {} ({} valid pixels)", out.display(), img.valid_count());
        }
        Command::Bench { scenario, repeat, size, frames } => {
            let (s, cfg) = load(&scenario, None)?;
            let b = bench(&s, &cfg, repeat, size, frames)?;
            let r = &b.runtime;
            let [pd, pt, pp] = r.portions();
            println!("{}x{}, {} frames x {} repeats", b.width, b.height, b.frames, b.repeats);
            println!("module,mean_ms,portion_pct");
            println!("region_proposal_detection,{:.3},{pd:.2}", r.detection_ms);
            println!("identification_tracking,{:.3},{pt:.2}", r.tracking_ms);
            println!("trajectory_prediction,{:.3},{pp:.2}", r.prediction_ms);
            println!("system_total,{:.3},100.00", r.total_ms());
            println!("render_excluded,{:.3},", r.render_ms);
        }
    }
    Ok(())
}
