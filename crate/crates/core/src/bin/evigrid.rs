use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use evigrid::config::PipelineConfig;
use evigrid::evaluation::{evaluate, GroundTruth, Roi};
use evigrid::objects::ObjectSet;
use evigrid::simulator::{emit_dataset, Scenario};
use evigrid::{io, pipeline, render};

#[derive(Parser)]
#[command(name = "evigrid", version, about = "Evidential occupancy grids from multi-agent LiDAR")]
struct Cli {
    #[command(flatten)]
    opts: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Cell size in meters.
    #[arg(long, global = true)]
    resolution: Option<f64>,
    /// Free-run threshold of the background map.
    #[arg(long, global = true)]
    tf: Option<u32>,
    /// Occupied-run threshold of the background map.
    #[arg(long, global = true)]
    to: Option<u32>,
    /// DBSCAN radius in meters.
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// DBSCAN minimum neighborhood size.
    #[arg(long, global = true)]
    min_pts: Option<usize>,
    /// Association gate in meters.
    #[arg(long, global = true)]
    gate: Option<f64>,
    /// Worker threads.
    #[arg(long, global = true, env = "EVIGRID_THREADS")]
    threads: Option<usize>,
    /// Overrides the scenario seed when simulating.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset; SCENARIO may be `reference`.
    Simulate { scenario: String, out: PathBuf },
    /// Background map, filtered grids and objects from a dataset.
    Pipeline { dataset: PathBuf, out: PathBuf },
    /// Background map only.
    Map { dataset: PathBuf, out: PathBuf },
    /// Filtered grids and objects against an existing background map.
    Fuse { dataset: PathBuf, background: PathBuf, out: PathBuf },
    /// Score objects against reference tracks.
    Evaluate { objects: PathBuf, truth: PathBuf, roi: PathBuf, out: PathBuf },
    /// Render a grid file as a PPM image.
    Render { grid: PathBuf, image: PathBuf },
    /// Print the effective configuration.
    Config,
}

impl Overrides {
    fn config(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(v) = self.resolution {
            cfg.resolution = v;
        }
        if let Some(v) = self.tf {
            cfg.background.t_f = v;
        }
        if let Some(v) = self.to {
            cfg.background.t_o = v;
        }
        if let Some(v) = self.eps {
            cfg.dbscan.eps = Some(v);
        }
        if let Some(v) = self.min_pts {
            cfg.dbscan.min_pts = v;
        }
        if let Some(v) = self.gate {
            cfg.evaluation.gate = v;
        }
        if self.threads.is_some() {
            cfg.threads = self.threads;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    let cfg = cli.opts.config()?;
    match cli.command {
        Command::Simulate { scenario, out } => {
            let mut s = if scenario == "reference" {
                Scenario::reference()
            } else {
                Scenario::load(Path::new(&scenario))?
            };
            if let Some(seed) = cli.opts.seed {
                s.seed = seed;
            }
            let summary = evigrid::config::with_threads(cfg.threads, || emit_dataset(&s, &out))??;
            println!(
                "wrote {} frames of {} agents and {} truth rows to {}",
                summary.frames,
                summary.agents,
                summary.truth_rows,
                out.display()
            );
        }
        Command::Pipeline { dataset, out } => {
            let s = pipeline::run_pipeline(&dataset, &cfg, &out)?;
            println!(
                "{} frames in {} time steps from {} agents; map {}x{} cells; {} static and {} dynamic objects; {} filtered grids",
                s.frames,
                s.time_steps,
                s.agents,
                s.geometry.width,
                s.geometry.height,
                s.static_objects,
                s.dynamic_objects,
                s.filtered_grids
            );
        }
        Command::Map { dataset, out } => {
            let map = pipeline::run_map(&dataset, &cfg, &out)?;
            let g = map.geometry();
            println!("background map {}x{} cells written to {}", g.width, g.height, out.display());
        }
        Command::Fuse { dataset, background, out } => {
            let objects = pipeline::run_fuse(&dataset, &background, &cfg, &out)?;
            println!("{} objects written to {}", objects.len(), out.display());
        }
        Command::Evaluate { objects, truth, roi, out } => {
            let objects = ObjectSet::read_csv(open(&objects)?, &objects)?;
            let truth = GroundTruth::read_csv(open(&truth)?, &truth)?;
            let roi = Roi::read_csv(open(&roi)?, &roi)?;
            let report = evaluate(&objects, &truth, &roi, &cfg.evaluation)?;
            fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
            let json = out.join("report.json");
            fs::write(&json, serde_json::to_string_pretty(&report)?)
                .with_context(|| format!("cannot write {}", json.display()))?;
            let text = report.to_text();
            let txt = out.join("report.txt");
            fs::write(&txt, &text).with_context(|| format!("cannot write {}", txt.display()))?;
            print!("{text}");
        }
        Command::Render { grid, image } => {
            let g = io::read_grid(&grid)?;
            fs::write(&image, render::render_ppm(&g))
                .with_context(|| format!("cannot write {}", image.display()))?;
        }
        Command::Config => print!("{}", cfg.to_toml()),
    }
    Ok(())
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
