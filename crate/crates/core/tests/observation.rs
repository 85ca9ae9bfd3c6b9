mod common;

use evigrid::evidential::Hypothesis;
use evigrid::grid::{CellIndex, GridGeometry};
use evigrid::observation::{
    build_observation_grid, refine_labels, segment_ground, ObservationParams, SegmentationParams,
};
use evigrid::simulator::{raycast_frame, LidarSpec, Shape};

use common::{street, wp};

const BOX_MIN: [f64; 2] = [5.1, -0.9];
const BOX_MAX: [f64; 2] = [7.1, 1.1];

/// Observation grid of one noiseless sweep from the origin at a 1 m high
/// box on flat ground, with the class-refined labels.
fn box_scene() -> (evigrid::EvidentialGrid, GridGeometry) {
    let mut s = street(1.0, 1, 0.0);
    s.world = vec![Shape::Rect { min: BOX_MIN, max: BOX_MAX, height: 1.0 }];
    s.parked.clear();
    s.actors.clear();
    s.agents[0].mount_height = 2.0;
    s.agents[0].waypoints = vec![wp(0.0, 0.0, 0.0), wp(1.0, 0.0, 0.0)];
    s.agents[0].lidar = LidarSpec {
        vertical_angles: (0..=260).map(|k| -(2.0f64 / (2.0 + 0.05 * k as f64)).atan()).collect(),
        azimuth_step: 0.25f64.to_radians(),
        max_range: 30.0,
        noise_sigma: 0.0,
    };
    let frame = raycast_frame(&s, 0, 0.0).unwrap();
    let labels = segment_ground(&frame, &SegmentationParams::default()).unwrap();
    let labels = refine_labels(&labels, frame.classes.as_deref()).unwrap();
    let g = GridGeometry::new(-2.0, -4.0, 0.2, 90, 40).unwrap();
    let grid = build_observation_grid(&frame, &labels, &g, &ObservationParams::default()).unwrap();
    (grid, g)
}

fn cell_bounds(g: &GridGeometry, c: CellIndex) -> ([f64; 2], [f64; 2]) {
    let (e, n) = g.cell_center(c);
    let h = g.resolution / 2.0;
    ([e - h, n - h], [e + h, n + h])
}

#[test]
fn occupancy_matches_the_box_footprint() {
    let (grid, g) = box_scene();
    let mut occupied = 0;
    let mut interior = 0;
    for (k, m) in grid.cells().iter().enumerate() {
        let c = g.cell_at(k);
        let (lo, hi) = cell_bounds(&g, c);
        let touches = lo[0] < BOX_MAX[0] && hi[0] > BOX_MIN[0] && lo[1] < BOX_MAX[1] && hi[1] > BOX_MIN[1];
        let inside = lo[0] >= BOX_MIN[0] && hi[0] <= BOX_MAX[0] && lo[1] >= BOX_MIN[1] && hi[1] <= BOX_MAX[1];
        let label = m.as_categorical();
        if label == Some(Hypothesis::I) {
            occupied += 1;
            assert!(touches, "occupancy outside the footprint at {c:?}");
        }
        assert_ne!(label, Some(Hypothesis::O), "unrefined occupancy at {c:?}");
        if inside {
            interior += 1;
            assert_eq!(label, Some(Hypothesis::I), "interior cell {c:?} not occupied");
        }
    }
    assert_eq!(interior, 9 * 9);
    assert!(occupied >= interior);
}

#[test]
fn visible_ground_around_the_box_is_free() {
    let (grid, g) = box_scene();
    // Strip between the sensor and the front face, and a strip beside the
    // box that no ray to it crosses the box for.
    let front = (0..9).map(|r| g.world_to_cell(4.3 + 0.2 * (r % 4) as f64, -0.7 + 0.2 * r as f64).unwrap());
    let side = (0..8).map(|r| g.world_to_cell(5.3 + 0.2 * (r % 2) as f64, -1.1 - 0.2 * (r / 2) as f64).unwrap());
    for c in front.chain(side) {
        assert_eq!(grid.get(c).as_categorical(), Some(Hypothesis::F), "{c:?}");
    }
    // Directly behind the box the ground is hidden.
    let shadow = g.world_to_cell(8.0, 0.1).unwrap();
    assert!(grid.get(shadow).is_vacuous());
}
