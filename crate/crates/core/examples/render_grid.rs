//! Rendering a grid file as a color image.
//!
//! Run with `cargo run --example render_grid -- <grid.evgr> <image.ppm>`.
//! Without arguments a small demonstration grid is rendered to `legend.ppm`.

use anyhow::{Context, Result};
use evigrid::evidential::{Hypothesis, MassFunction};
use evigrid::grid::{CellIndex, EvidentialGrid, GridGeometry};
use evigrid::{io, render};

fn legend() -> Result<EvidentialGrid> {
    let labels = [
        Hypothesis::THETA,
        Hypothesis::F,
        Hypothesis::I,
        Hypothesis::S,
        Hypothesis::D,
        Hypothesis::P,
        Hypothesis::O,
        Hypothesis::M,
    ];
    let g = GridGeometry::new(0.0, 0.0, 1.0, 8 * 4 + 4, 4)?;
    let mut grid = EvidentialGrid::vacuous(g, None);
    for (k, h) in labels.iter().enumerate() {
        for col in 0..4 {
            for row in 0..4 {
                grid.set(CellIndex { col: (k * 4 + col) as u32, row }, MassFunction::categorical(*h)?);
            }
        }
    }
    for col in 32..36 {
        for row in 0..4 {
            grid.set(CellIndex { col, row }, MassFunction::total_conflict());
        }
    }
    Ok(grid)
}

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (grid, image) = match args.as_slice() {
        [grid, image] => (io::read_grid(grid.as_ref())?, image.clone()),
        [] => (legend()?, "legend.ppm".to_string()),
        _ => anyhow::bail!("usage: render_grid [<grid.evgr> <image.ppm>]"),
    };
    std::fs::write(&image, render::render_ppm(&grid)).with_context(|| format!("writing {image}"))?;
    let g = grid.geometry();
    println!("{}x{} cells rendered to {image}", g.width, g.height);
    Ok(())
}
