//! Simulate, map, filter, extract and score in one go.
//!
//! Run with `cargo run --release --example full_pipeline [seconds]`. The
//! reference scenario runs for its full 50 s unless a shorter duration is
//! given.

use anyhow::Result;
use evigrid::config::PipelineConfig;
use evigrid::evaluation::evaluate;
use evigrid::objects::{ObjectKind, ObjectSet};
use evigrid::pipeline::{run_pipeline, OBJECTS_FILE};
use evigrid::simulator::{emit_dataset, Scenario};

fn main() -> Result<()> {
    let mut scenario = Scenario::reference();
    if let Some(seconds) = std::env::args().nth(1) {
        scenario.duration = seconds.parse()?;
    }
    let dir = tempfile::tempdir()?;
    let (data, out) = (dir.path().join("data"), dir.path().join("out"));
    emit_dataset(&scenario, &data)?;

    let config = PipelineConfig::default();
    let summary = run_pipeline(&data, &config, &out)?;
    println!(
        "{} frames, {} time steps, map {}x{}, {} static and {} dynamic objects",
        summary.frames,
        summary.time_steps,
        summary.geometry.width,
        summary.geometry.height,
        summary.static_objects,
        summary.dynamic_objects
    );

    let objects = ObjectSet::read_csv(std::fs::File::open(out.join(OBJECTS_FILE))?, &out.join(OBJECTS_FILE))?;
    for d in objects.of_kind(ObjectKind::Static) {
        println!("static object at ({:.1}, {:.1})", d.centroid_east, d.centroid_north);
    }
    let report = evaluate(&objects, &scenario.ground_truth(), &scenario.region_of_interest()?, &config.evaluation)?;
    print!("{}", report.to_text());
    Ok(())
}
