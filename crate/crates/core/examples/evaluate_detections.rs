//! Scoring detections against reference tracks inside a region of interest.
//!
//! Run with `cargo run --example evaluate_detections`.

use anyhow::Result;
use evigrid::evaluation::{associate, evaluate, EvalParams, GroundTruth, Roi, TruthEntry};
use evigrid::objects::{ObjectDetection, ObjectKind, ObjectSet};

fn main() -> Result<()> {
    // Optimal one-to-one association with a 2 m gate.
    let detections = [[0.2, 0.1], [5.0, 5.0], [9.0, 0.0]];
    let truths = [[0.0, 0.0], [5.5, 4.5], [20.0, 0.0]];
    let a = associate(&detections, &truths, 2.0)?;
    for (d, t, dist) in &a.matches {
        println!("detection {d} <-> truth {t} at {dist:.2} m");
    }
    println!("unmatched detections {:?}, truths {:?}", a.unmatched_detections, a.unmatched_truths);

    // Two tracks over three frames; one leaves the region of interest.
    let mut entries = Vec::new();
    for k in 0..3 {
        let t = k as f64 * 0.1;
        entries.push(TruthEntry { timestamp: t, track_id: "car".into(), x: 2.0 + k as f64, y: 1.0, is_static: false });
        entries.push(TruthEntry { timestamp: t, track_id: "bike".into(), x: 8.0 + 2.0 * k as f64, y: 3.0, is_static: false });
    }
    let truth = GroundTruth::new(entries);
    let det = |t: f64, x: f64, y: f64| ObjectDetection {
        timestamp: Some(t),
        kind: ObjectKind::Dynamic,
        centroid_east: x,
        centroid_north: y,
        cell_count: 12,
    };
    let objects = ObjectSet::new(vec![
        det(0.0, 2.1, 1.2),
        det(0.0, 8.3, 2.9),
        det(0.1, 3.0, 0.8),
        det(0.2, 4.1, 1.0),
        det(0.2, 6.0, 6.0),
    ]);
    let roi = Roi::new(vec![[0.0, 0.0], [10.0, 0.0], [10.0, 8.0], [0.0, 8.0]])?;
    let report = evaluate(&objects, &truth, &roi, &EvalParams::default())?;
    print!("{}", report.to_text());
    Ok(())
}
