#![allow(dead_code)]

use evigrid::observation::SemanticClass;
use evigrid::simulator::{Actor, Agent, LidarSpec, ParkedObject, Scenario, Shape, Waypoint};

pub fn wp(t: f64, x: f64, y: f64) -> Waypoint {
    Waypoint { t, x, y, yaw: None }
}

pub fn lidar(mount_height: f64, noise_sigma: f64) -> LidarSpec {
    // Ground rings every 0.25 m from 3 to 15 m plus two level channels.
    let mut vertical_angles: Vec<f64> = (0..=48).map(|k| -(mount_height / (3.0 + 0.25 * k as f64)).atan()).collect();
    vertical_angles.extend([-0.02, 0.0]);
    LidarSpec {
        vertical_angles,
        azimuth_step: 0.5f64.to_radians(),
        max_range: 40.0,
        noise_sigma,
    }
}

/// A street between two walls with one parked car, a passing car, a
/// pedestrian and `agents` sensors driving along it.
pub fn street(duration: f64, agents: usize, noise_sigma: f64) -> Scenario {
    let agents = (0..agents)
        .map(|k| Agent {
            id: format!("agent_{k}"),
            mount_height: 1.8,
            lidar: lidar(1.8, noise_sigma),
            waypoints: vec![wp(0.0, -10.0 + 3.0 * k as f64, -1.5), wp(duration, 5.0 + 3.0 * k as f64, -1.5)],
        })
        .collect();
    Scenario {
        duration,
        frame_rate: 10.0,
        seed: 11,
        world: vec![
            Shape::Segment { from: [-30.0, -6.1], to: [30.0, -6.1], height: 3.0 },
            Shape::Rect { min: [-30.0, 6.1], max: [30.0, 12.0], height: 8.0 },
        ],
        parked: vec![ParkedObject {
            center: [6.0, -4.9],
            length: 4.4,
            width: 1.8,
            height: 1.5,
            yaw: 0.0,
            class: SemanticClass::Car,
        }],
        actors: vec![
            Actor {
                id: "car".into(),
                class: SemanticClass::Car,
                length: 4.4,
                width: 1.8,
                height: 1.5,
                waypoints: vec![wp(0.0, 20.0, 2.0), wp(duration, 20.0 - 5.0 * duration, 2.0)],
            },
            Actor {
                id: "walker".into(),
                class: SemanticClass::Pedestrian,
                length: 0.7,
                width: 0.7,
                height: 1.75,
                waypoints: vec![wp(0.0, 0.0, 5.0), wp(duration, 0.0 + 1.2 * duration, 5.0)],
            },
        ],
        agents,
        roi: None,
    }
}
