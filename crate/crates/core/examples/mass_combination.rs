//! Combining evidence on the {F, I, S, D} frame.
//!
//! Run with `cargo run --example mass_combination`.

use anyhow::Result;
use evigrid::evidential::{Decision, Hypothesis, MassFunction};

fn show(name: &str, m: &MassFunction) {
    let focal: Vec<String> = m.focal_elements().map(|(h, v)| format!("{h}={v:.3}")).collect();
    let decision = match m.decide() {
        Decision::Label(h) => h.to_string(),
        Decision::Conflict => "conflict".to_string(),
    };
    println!("{name:<28} {:<40} -> {decision}", focal.join(" "));
}

fn main() -> Result<()> {
    // A lidar return says "something is there" without knowing what.
    let occupied = MassFunction::from_focal(&[(Hypothesis::O, 0.8), (Hypothesis::THETA, 0.2)])?;
    // The map says this is road: free or traversed by moving objects.
    let passable = MassFunction::categorical(Hypothesis::P)?;
    show("observation", &occupied);
    show("map", &passable);
    show("map + observation", &passable.combine_conjunctive(&occupied));

    // Two sensors that disagree: one sees free space, one sees a wall.
    let free = MassFunction::from_focal(&[(Hypothesis::F, 0.9), (Hypothesis::THETA, 0.1)])?;
    let wall = MassFunction::from_focal(&[(Hypothesis::I, 0.7), (Hypothesis::THETA, 0.3)])?;
    let both = free.combine_conjunctive(&wall);
    show("free + wall", &both);
    println!("conflict mass {:.3}", both.conflict());
    show("conflict given to I", &both.reassign_conflict_to(Hypothesis::I)?);

    // Ignorance changes nothing.
    show("wall + vacuous", &wall.combine_conjunctive(&MassFunction::vacuous()));
    Ok(())
}
