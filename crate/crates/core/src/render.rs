//! Color rendering of evidential grids as binary PPM images.

use crate::evidential::{Decision, Hypothesis, MassFunction};
use crate::grid::EvidentialGrid;

pub const WHITE: [u8; 3] = [255, 255, 255];
pub const RED: [u8; 3] = [220, 30, 30];
pub const ORANGE: [u8; 3] = [255, 150, 0];
pub const CYAN: [u8; 3] = [0, 200, 220];
pub const GREEN: [u8; 3] = [40, 180, 60];
pub const BLUE: [u8; 3] = [30, 60, 230];
pub const BLACK: [u8; 3] = [0, 0, 0];
pub const MAGENTA: [u8; 3] = [200, 60, 200];
pub const GRAY: [u8; 3] = [128, 128, 128];
pub const LIGHT_GRAY: [u8; 3] = [200, 200, 200];

/// Color of the cell's decision: `Θ` white, `I` red, `S` orange, `P` cyan,
/// `F` green, `D` blue, conflict black. `O` is gray, `M` magenta and any
/// other composite light gray.
pub fn cell_color(m: &MassFunction) -> [u8; 3] {
    match m.decide() {
        Decision::Conflict => BLACK,
        Decision::Label(h) => match h {
            Hypothesis::THETA => WHITE,
            Hypothesis::I => RED,
            Hypothesis::S => ORANGE,
            Hypothesis::P => CYAN,
            Hypothesis::F => GREEN,
            Hypothesis::D => BLUE,
            Hypothesis::O => GRAY,
            Hypothesis::M => MAGENTA,
            _ => LIGHT_GRAY,
        },
    }
}

/// P6 image, one pixel per cell, north up.
pub fn render_ppm(grid: &EvidentialGrid) -> Vec<u8> {
    let g = grid.geometry();
    let (w, h) = (g.width as usize, g.height as usize);
    let header = format!("P6\n{w} {h}\n255\n");
    let mut out = Vec::with_capacity(header.len() + w * h * 3);
    out.extend_from_slice(header.as_bytes());
    let cells = grid.cells();
    for row in (0..h).rev() {
        for m in &cells[row * w..(row + 1) * w] {
            out.extend_from_slice(&cell_color(m));
        }
    }
    out
}
