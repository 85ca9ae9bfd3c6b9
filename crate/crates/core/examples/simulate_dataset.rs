//! Writing a synthetic multi-agent dataset to disk.
//!
//! Run with `cargo run --release --example simulate_dataset -- <out_dir> [scenario.json]`.
//! Without a scenario file the built-in reference scenario is used.

use std::path::PathBuf;

use anyhow::{Context, Result};
use evigrid::simulator::{emit_dataset, Scenario};

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let out: PathBuf = args.next().context("usage: simulate_dataset <out_dir> [scenario.json]")?.into();
    let scenario = match args.next() {
        Some(path) => Scenario::load(path.as_ref())?,
        None => Scenario::reference(),
    };
    println!(
        "{} agents, {} actors, {} parked objects, {} frames per agent",
        scenario.agents.len(),
        scenario.actors.len(),
        scenario.parked.len(),
        scenario.frame_count()
    );
    for a in &scenario.agents {
        println!(
            "  {}: {} channels x {} azimuths",
            a.id,
            a.lidar.channels(),
            a.lidar.azimuth_count()
        );
    }
    let summary = emit_dataset(&scenario, &out)?;
    println!("wrote {} frames and {} truth rows to {}", summary.frames, summary.truth_rows, out.display());
    Ok(())
}
