//! Turning one simulated LiDAR sweep into an observation grid.
//!
//! Run with `cargo run --release --example ground_segmentation`.

use std::collections::BTreeMap;

use anyhow::Result;
use evigrid::grid::{Extent, GridGeometry};
use evigrid::observation::{
    build_observation_grid, refine_labels, segment_ground, ObservationParams, SegmentationParams,
};
use evigrid::simulator::{raycast_frame, Scenario};

fn main() -> Result<()> {
    let scenario = Scenario::reference();
    let agent = 0;
    let t = 12.0;
    let frame = raycast_frame(&scenario, agent, t)?;
    println!("{} at t={t}: {} points", frame.agent_id, frame.points.len());

    let labels = segment_ground(&frame, &SegmentationParams::default())?;
    let refined = refine_labels(&labels, frame.classes.as_deref())?;
    let mut counts = BTreeMap::new();
    for l in &refined {
        *counts.entry(format!("{l:?}")).or_insert(0usize) += 1;
    }
    for (label, n) in &counts {
        println!("  {label:<18} {n}");
    }

    let world = frame.world_points();
    let extent = Extent::of_points(&world).expect("sweep has points").padded(1.0);
    let geometry = GridGeometry::covering(&extent, 0.2)?;
    let grid = build_observation_grid(&frame, &refined, &geometry, &ObservationParams::default())?;
    let mut cells = BTreeMap::new();
    for (_, m) in grid.informative_cells() {
        *cells.entry(m.dominant_label().to_string()).or_insert(0usize) += 1;
    }
    println!("{}x{} grid, informative cells by label:", geometry.width, geometry.height);
    for (label, n) in &cells {
        println!("  {label:<4} {n}");
    }
    Ok(())
}
