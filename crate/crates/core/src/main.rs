use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use perturbscope::detection::ReconstructorKind;
use perturbscope::occlusion::OverlapMode;
use perturbscope::pipeline::{
    cmd_analyze_pair, cmd_batch, cmd_detect, cmd_purify, cmd_report, cmd_synth, ImageRequest,
    InputSpec, PairJob, RunConfig,
};
use perturbscope::synthesis::{MaskKind, NoiseKind};
use perturbscope::Error;

#[derive(Parser)]
#[command(name = "perturbscope", version, about = "Forensics for protective image perturbations")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand. They override the config file.
#[derive(Args)]
struct Common {
    /// JSON run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, env = "PERTURBSCOPE_WORKERS")]
    workers: Option<usize>,
    /// Detection threshold in bits
    #[arg(long, global = true)]
    threshold: Option<f64>,
    /// oracle | paired | highpass | external:CMD
    #[arg(long, global = true)]
    reconstructor: Option<ReconstructorKind>,
    #[arg(long, global = true)]
    window: Option<usize>,
    #[arg(long, global = true)]
    stride: Option<usize>,
    #[arg(long, global = true, value_enum)]
    overlap: Option<Overlap>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Overlap {
    Overwrite,
    Average,
}

#[derive(Args)]
struct GridArgs {
    /// Base image (defaults to the bundled photograph)
    #[arg(long)]
    base: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    masks: Vec<MaskKind>,
    #[arg(long, value_delimiter = ',')]
    noises: Vec<NoiseKind>,
    #[arg(long, value_delimiter = ',')]
    lightness: Vec<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Render the mask x noise x lightness grid
    Synth(GridArgs),
    /// Run every analysis stage on one clean/perturbed pair
    AnalyzePair {
        #[arg(long)]
        clean: PathBuf,
        #[arg(long)]
        perturbed: PathBuf,
        /// Pair identifier (defaults to the perturbed file stem)
        #[arg(long)]
        id: Option<String>,
        /// Ground-truth perturbation PMAP for the oracle reconstructor
        #[arg(long)]
        delta: Option<PathBuf>,
    },
    /// Analyze a pairs directory or a synthesized grid end to end
    Batch {
        /// Directory with clean/ and one folder per protection label
        #[arg(long, conflicts_with = "base")]
        pairs: Option<PathBuf>,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Write report.html for a finished run
    Report {
        /// Run directory (defaults to --out or the config's output_dir)
        run_dir: Option<PathBuf>,
    },
    /// Entropy detection on a single image; prints the result as JSON
    Detect {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        clean: Option<PathBuf>,
        #[arg(long)]
        delta: Option<PathBuf>,
        /// Also save the reconstructed perturbation as PMAP
        #[arg(long)]
        residual_out: Option<PathBuf>,
    },
    /// Subtract the reconstructed perturbation and save the result
    Purify {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        clean: Option<PathBuf>,
        #[arg(long)]
        delta: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
}

fn apply_common(cfg: &mut RunConfig, c: &Common) {
    if let Some(s) = c.seed {
        cfg.master_seed = s;
    }
    if let Some(o) = &c.out {
        cfg.output_dir = o.clone();
    }
    if c.workers.is_some() {
        cfg.workers = c.workers;
    }
    if c.threshold.is_some() {
        cfg.detection.threshold = c.threshold;
    }
    if let Some(r) = &c.reconstructor {
        cfg.detection.reconstructor = Some(r.clone());
    }
    if let Some(w) = c.window {
        cfg.occlusion.window = w;
    }
    if let Some(s) = c.stride {
        cfg.occlusion.stride = s;
    }
    if let Some(o) = c.overlap {
        cfg.occlusion.overlap_mode = match o {
            Overlap::Overwrite => OverlapMode::Overwrite,
            Overlap::Average => OverlapMode::Average,
        };
    }
}

fn apply_grid(cfg: &mut RunConfig, g: GridArgs) {
    if g.base.is_some() {
        cfg.input = InputSpec::Grid { base: g.base };
    }
    let grid = &mut cfg.synthesis.grid;
    if !g.masks.is_empty() {
        grid.masks = g.masks;
    }
    if !g.noises.is_empty() {
        grid.noises = g.noises;
    }
    if !g.lightness.is_empty() {
        grid.lightness = g.lightness;
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    let mut cfg = match &cli.common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    apply_common(&mut cfg, &cli.common);

    match cli.command {
        Command::Synth(g) => {
            apply_grid(&mut cfg, g);
            let m = cmd_synth(&cfg)?;
            println!("wrote {} artifacts to {}", m.artifacts.len(), cfg.output_dir.display());
        }
        Command::AnalyzePair {
            clean,
            perturbed,
            id,
            delta,
        } => {
            let id = id.unwrap_or_else(|| {
                perturbed
                    .file_stem()
                    .map_or("pair".into(), |s| s.to_string_lossy().into_owned())
            });
            let mut job = PairJob::new(id, clean, perturbed);
            job.oracle = delta;
            let (outcome, _) = cmd_analyze_pair(&job, &cfg)?;
            println!("{}", serde_json::to_string_pretty(&outcome.detection).expect("plain struct"));
        }
        Command::Batch { pairs, grid } => {
            if let Some(dir) = pairs {
                cfg.input = InputSpec::Pairs { dir };
            }
            apply_grid(&mut cfg, grid);
            let run = cmd_batch(&cfg)?;
            println!(
                "{} pairs analyzed, {} failed, {} artifacts in {}",
                run.detections.len() - run.failures.len(),
                run.failures.len(),
                run.manifest.artifacts.len(),
                cfg.output_dir.display()
            );
            if !run.failures.is_empty() {
                for (id, e) in &run.failures {
                    eprintln!("failed: {id}: {e}");
                }
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Report { run_dir } => {
            let p = cmd_report(&run_dir.unwrap_or(cfg.output_dir))?;
            println!("{}", p.display());
        }
        Command::Detect {
            image,
            clean,
            delta,
            residual_out,
        } => {
            let req = ImageRequest {
                image,
                clean,
                oracle: delta,
            };
            let r = cmd_detect(&req, &cfg, residual_out.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&r).expect("plain struct"));
        }
        Command::Purify {
            image,
            clean,
            delta,
            output,
        } => {
            let req = ImageRequest {
                image,
                clean,
                oracle: delta,
            };
            cmd_purify(&req, &cfg, &output)?;
            println!("{}", output.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Adapter { diagnostics, .. } = &e {
                eprintln!("{diagnostics}");
            }
            ExitCode::FAILURE
        }
    }
}
