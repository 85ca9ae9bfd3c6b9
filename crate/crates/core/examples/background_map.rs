//! Building the background map of a short recording and rendering it.
//!
//! Run with `cargo run --release --example background_map [image.ppm]`.

use std::collections::BTreeMap;

use anyhow::Result;
use evigrid::config::PipelineConfig;
use evigrid::pipeline::{self, Dataset};
use evigrid::render::render_ppm;
use evigrid::simulator::{emit_dataset, Scenario};

fn main() -> Result<()> {
    let image = std::env::args().nth(1).unwrap_or_else(|| "background.ppm".into());
    let mut scenario = Scenario::reference();
    scenario.duration = 15.0;
    let dir = tempfile::tempdir()?;
    emit_dataset(&scenario, dir.path())?;

    let config = PipelineConfig::default();
    let dataset = Dataset::open(dir.path())?;
    let geometry = pipeline::deduce_geometry(&dataset, &config)?;
    let observations = pipeline::observe(&dataset, &geometry, &config)?;
    let builder = pipeline::accumulate(&observations, &geometry, &config)?;

    // Stricter thresholds leave more of the map unknown.
    for (t_f, t_o) in [(10, 2), (30, 5), (60, 10)] {
        let mut params = config.background.clone();
        params.t_f = t_f;
        params.t_o = t_o;
        let map = builder.classify(&params)?;
        let mut counts = BTreeMap::new();
        for m in map.cells() {
            *counts.entry(m.dominant_label().to_string()).or_insert(0usize) += 1;
        }
        println!("t_f={t_f:<3} t_o={t_o:<3} {counts:?}");
    }

    let map = builder.classify(&config.background)?;
    std::fs::write(&image, render_ppm(&map))?;
    println!("{}x{} map written to {image}", geometry.width, geometry.height);
    Ok(())
}
