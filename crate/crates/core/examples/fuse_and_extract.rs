//! Fusing observations with a background map to reveal dynamic cells, then
//! clustering them into objects.
//!
//! Run with `cargo run --example fuse_and_extract`.

use anyhow::Result;
use evigrid::evidential::{Hypothesis, MassFunction};
use evigrid::fusion::{fuse_frame, Provenance};
use evigrid::grid::{CellIndex, EvidentialGrid, GridGeometry};
use evigrid::objects::{extract_objects, ObjectKind};

fn main() -> Result<()> {
    let g = GridGeometry::new(0.0, 0.0, 0.2, 40, 20)?;
    let cat = |h| MassFunction::categorical(h);

    // A road (P) with a parked car (S) and a wall (I) along the top.
    let mut map = EvidentialGrid::from_cells(g, vec![cat(Hypothesis::P)?; g.cell_count()], None)?;
    for col in 0..40 {
        map.set(CellIndex { col, row: 19 }, cat(Hypothesis::I)?);
    }
    for col in 30..38 {
        for row in 2..6 {
            map.set(CellIndex { col, row }, cat(Hypothesis::S)?);
        }
    }

    // The sensor sees two occupied blobs, one on the road and one on the
    // parked car, free space elsewhere in front of it, and free space where
    // the map has a wall.
    let mut obs = EvidentialGrid::vacuous(g, Some(4.2));
    for col in 0..28 {
        for row in 0..19 {
            obs.set(CellIndex { col, row }, cat(Hypothesis::F)?);
        }
    }
    for col in 8..12 {
        for row in 8..11 {
            obs.set(CellIndex { col, row }, cat(Hypothesis::O)?);
        }
    }
    for col in 31..34 {
        obs.set(CellIndex { col, row: 2 }, cat(Hypothesis::O)?);
    }
    obs.set(CellIndex { col: 3, row: 19 }, cat(Hypothesis::F)?);

    let filtered = fuse_frame(&map, &obs)?;
    println!(
        "cells: {} passed through, {} observed, {} conflicts resolved by the map",
        filtered.count(Provenance::MapOnly),
        filtered.count(Provenance::Observed),
        filtered.count(Provenance::ConflictResolved)
    );
    for (col, row) in [(9, 9), (32, 2), (3, 19), (20, 15)] {
        let m = filtered.grid.get(CellIndex { col, row });
        println!("cell ({col:>2},{row:>2}) -> {}", m.dominant_label());
    }

    for kind in [ObjectKind::Dynamic, ObjectKind::Static] {
        for d in extract_objects(&filtered.grid, kind, 0.6, 4)? {
            println!(
                "{kind:?} object at ({:.2}, {:.2}) from {} cells",
                d.centroid_east, d.centroid_north, d.cell_count
            );
        }
    }
    Ok(())
}
