//! Deterministic synthetic scenarios observed by ray-cast LiDAR.
//!
//! The world is flat ground at `z = 0` carrying vertical prisms: static
//! shapes (rectangles and segments), parked boxes and moving actors. Each
//! sensor casts a vertical fan of rays at every azimuth step and keeps the
//! nearest hit. Sensors themselves are not physical and cast no shadow.
//!
//! A scenario is a JSON document:
//!
//! ```json
//! {
//!   "duration": 10.0, "frame_rate": 10.0, "seed": 1,
//!   "world":  [{"type": "rect", "min": [0, 0], "max": [4, 4], "height": 8},
//!              {"type": "segment", "from": [0, 10], "to": [20, 10], "height": 2}],
//!   "parked": [{"center": [5, 5], "length": 4, "width": 1.8, "height": 1.5, "yaw": 0, "class": "car"}],
//!   "actors": [{"id": "car_1", "class": "car", "length": 4, "width": 1.8, "height": 1.5,
//!               "waypoints": [{"t": 0, "x": 0, "y": 0}, {"t": 10, "x": 50, "y": 0}]}],
//!   "agents": [{"id": "ego", "mount_height": 1.9,
//!               "lidar": {"vertical_angles": [-0.1, 0.0], "azimuth_step": 0.0087,
//!                         "max_range": 80, "noise_sigma": 0.02},
//!               "waypoints": [{"t": 0, "x": -10, "y": -5}, {"t": 10, "x": 40, "y": -5}]}],
//!   "roi": [[0, -10], [50, -10], [50, 10], [0, 10]]
//! }
//! ```
//!
//! Angles are radians. A waypoint's `yaw` is optional; when absent the
//! heading of the current trajectory segment is used. Actors exist only
//! between their first and last waypoint. `roi` is optional and defaults to
//! the padded bounding box of all actor waypoints.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{GroundTruth, Roi, TruthEntry};
use crate::grid::{Point3, Pose};
use crate::io::{self, PointFrame};
use crate::observation::{FrameBundle, SemanticClass};

const REFERENCE_SCENARIO: &str = include_str!("../scenarios/reference.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub yaw: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    /// Axis-aligned rectangle footprint.
    Rect {
        min: [f64; 2],
        max: [f64; 2],
        height: f64,
    },
    /// Zero-thickness wall.
    Segment {
        from: [f64; 2],
        to: [f64; 2],
        height: f64,
    },
}

fn default_class() -> SemanticClass {
    SemanticClass::Car
}

/// Oriented box standing on the ground.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParkedObject {
    pub center: [f64; 2],
    pub length: f64,
    pub width: f64,
    pub height: f64,
    #[serde(default)]
    pub yaw: f64,
    #[serde(default = "default_class")]
    pub class: SemanticClass,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Actor {
    pub id: String,
    pub class: SemanticClass,
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub waypoints: Vec<Waypoint>,
}

fn default_noise() -> f64 {
    0.02
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LidarSpec {
    /// One elevation angle per channel.
    pub vertical_angles: Vec<f64>,
    pub azimuth_step: f64,
    pub max_range: f64,
    /// Standard deviation of the Gaussian range noise (m).
    #[serde(default = "default_noise")]
    pub noise_sigma: f64,
}

impl LidarSpec {
    pub fn channels(&self) -> usize {
        self.vertical_angles.len()
    }

    pub fn azimuth_count(&self) -> usize {
        (std::f64::consts::TAU / self.azimuth_step).round().max(1.0) as usize
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Agent {
    pub id: String,
    /// Sensor height above the ground (m).
    pub mount_height: f64,
    pub lidar: LidarSpec,
    pub waypoints: Vec<Waypoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub duration: f64,
    pub frame_rate: f64,
    pub seed: u64,
    #[serde(default)]
    pub world: Vec<Shape>,
    #[serde(default)]
    pub parked: Vec<ParkedObject>,
    #[serde(default)]
    pub actors: Vec<Actor>,
    pub agents: Vec<Agent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roi: Option<Vec<[f64; 2]>>,
}

fn validate_waypoints(owner: &str, waypoints: &[Waypoint]) -> Result<()> {
    if waypoints.is_empty() {
        return Err(Error::InvalidParameter(format!("{owner} has no waypoints")));
    }
    for w in waypoints {
        if ![w.t, w.x, w.y, w.yaw.unwrap_or(0.0)].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter(format!("{owner} has a non-finite waypoint")));
        }
    }
    for pair in waypoints.windows(2) {
        if pair[1].t <= pair[0].t {
            return Err(Error::InvalidParameter(format!(
                "{owner}: waypoint times must strictly increase ({} then {})",
                pair[0].t, pair[1].t
            )));
        }
    }
    Ok(())
}

fn positive(what: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{what} must be positive, got {v}")))
    }
}

impl Scenario {
    /// The bundled reference scenario: a ring road around a central
    /// building, three moving agents and a roadside sensor.
    pub fn reference() -> Scenario {
        serde_json::from_str(REFERENCE_SCENARIO).expect("bundled scenario parses")
    }

    pub fn from_json(text: &str, source: &Path) -> Result<Scenario> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| Error::parse(source, e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Scenario> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Scenario::from_json(&text, path)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        positive("duration", self.duration)?;
        positive("frame_rate", self.frame_rate)?;
        if self.agents.is_empty() {
            return Err(Error::InvalidParameter("scenario has no agents".into()));
        }
        let mut ids = std::collections::BTreeSet::new();
        for a in &self.agents {
            if !ids.insert(a.id.as_str()) {
                return Err(Error::InvalidParameter(format!("duplicate id {}", a.id)));
            }
            if a.id.is_empty() || a.id.contains(['/', '\\', '.']) {
                return Err(Error::InvalidParameter(format!("agent id {:?} is not a valid directory name", a.id)));
            }
            validate_waypoints(&a.id, &a.waypoints)?;
            positive("mount_height", a.mount_height)?;
            positive("azimuth_step", a.lidar.azimuth_step)?;
            positive("max_range", a.lidar.max_range)?;
            if !(a.lidar.noise_sigma >= 0.0) {
                return Err(Error::InvalidParameter("noise_sigma must be non-negative".into()));
            }
            if a.lidar.vertical_angles.iter().any(|v| !v.is_finite() || v.abs() >= std::f64::consts::FRAC_PI_2) {
                return Err(Error::InvalidParameter(format!("{}: vertical angles must lie in (-pi/2, pi/2)", a.id)));
            }
        }
        for actor in &self.actors {
            if !ids.insert(actor.id.as_str()) {
                return Err(Error::InvalidParameter(format!("duplicate id {}", actor.id)));
            }
            validate_waypoints(&actor.id, &actor.waypoints)?;
            positive("actor length", actor.length)?;
            positive("actor width", actor.width)?;
            positive("actor height", actor.height)?;
        }
        for p in &self.parked {
            positive("parked length", p.length)?;
            positive("parked width", p.width)?;
            positive("parked height", p.height)?;
        }
        for s in &self.world {
            match s {
                Shape::Rect { min, max, height } => {
                    positive("shape height", *height)?;
                    if !(min[0] < max[0] && min[1] < max[1]) {
                        return Err(Error::InvalidParameter("rect min must be below max".into()));
                    }
                }
                Shape::Segment { from, to, height } => {
                    positive("shape height", *height)?;
                    if from == to {
                        return Err(Error::InvalidParameter("segment has zero length".into()));
                    }
                }
            }
        }
        if let Some(roi) = &self.roi {
            Roi::new(roi.clone())?;
        }
        Ok(())
    }

    pub fn frame_count(&self) -> usize {
        (self.duration * self.frame_rate).round() as usize
    }

    pub fn frame_times(&self) -> Vec<f64> {
        (0..self.frame_count()).map(|k| k as f64 / self.frame_rate).collect()
    }

    /// Pose of an agent's sensor at `t`, if its trajectory covers `t`.
    pub fn agent_pose(&self, agent: usize, t: f64) -> Option<Pose> {
        let a = &self.agents[agent];
        let (x, y, yaw) = trajectory_at(&a.waypoints, t)?;
        Some(Pose {
            timestamp: t,
            east: x,
            north: y,
            up: a.mount_height,
            yaw,
            pitch: 0.0,
            roll: 0.0,
        })
    }

    /// The region of interest, explicit or derived from actor waypoints.
    pub fn region_of_interest(&self) -> Result<Roi> {
        if let Some(v) = &self.roi {
            return Roi::new(v.clone());
        }
        let mut pts = self.actors.iter().flat_map(|a| a.waypoints.iter().map(|w| (w.x, w.y)));
        let (x0, y0) = pts
            .next()
            .ok_or_else(|| Error::EmptyInput("scenario has no actors and no roi".into()))?;
        let (mut lo, mut hi) = ([x0, y0], [x0, y0]);
        for (x, y) in pts {
            lo = [lo[0].min(x), lo[1].min(y)];
            hi = [hi[0].max(x), hi[1].max(y)];
        }
        let m = 2.0;
        Roi::new(vec![
            [lo[0] - m, lo[1] - m],
            [hi[0] + m, lo[1] - m],
            [hi[0] + m, hi[1] + m],
            [lo[0] - m, hi[1] + m],
        ])
    }

    /// Reference positions of every actor and parked object at every frame.
    /// Parked objects and actors that never move while present for the whole
    /// sequence are flagged static.
    pub fn ground_truth(&self) -> GroundTruth {
        let times = self.frame_times();
        let last = times.last().copied().unwrap_or(0.0);
        let mut entries = Vec::new();
        for &t in &times {
            for (i, p) in self.parked.iter().enumerate() {
                entries.push(TruthEntry {
                    timestamp: t,
                    track_id: format!("parked_{i}"),
                    x: p.center[0],
                    y: p.center[1],
                    is_static: true,
                });
            }
            for a in &self.actors {
                if let Some((x, y, _)) = trajectory_at(&a.waypoints, t) {
                    entries.push(TruthEntry {
                        timestamp: t,
                        track_id: a.id.clone(),
                        x,
                        y,
                        is_static: actor_is_static(a, last),
                    });
                }
            }
        }
        GroundTruth::new(entries)
    }
}

fn actor_is_static(a: &Actor, last_frame: f64) -> bool {
    let w0 = &a.waypoints[0];
    let wn = &a.waypoints[a.waypoints.len() - 1];
    w0.t <= 1e-9 && wn.t >= last_frame - 1e-9 && a.waypoints.iter().all(|w| w.x == w0.x && w.y == w0.y)
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = a % std::f64::consts::TAU;
    if a > std::f64::consts::PI {
        a -= std::f64::consts::TAU;
    } else if a < -std::f64::consts::PI {
        a += std::f64::consts::TAU;
    }
    a
}

fn segment_heading(waypoints: &[Waypoint], k: usize) -> f64 {
    // Nearest non-degenerate segment, searching backwards first.
    let moving = |i: usize| {
        let (a, b) = (&waypoints[i], &waypoints[i + 1]);
        ((b.x - a.x).hypot(b.y - a.y) > 1e-12).then(|| (b.y - a.y).atan2(b.x - a.x))
    };
    let n = waypoints.len().saturating_sub(1);
    (0..=k.min(n.saturating_sub(1)))
        .rev()
        .chain(k + 1..n)
        .filter(|&i| i < n)
        .find_map(moving)
        .unwrap_or(0.0)
}

/// Position and heading at `t` along a piecewise-linear trajectory.
pub fn trajectory_at(waypoints: &[Waypoint], t: f64) -> Option<(f64, f64, f64)> {
    let first = waypoints.first()?;
    let last = waypoints.last()?;
    if t < first.t - 1e-9 || t > last.t + 1e-9 {
        return None;
    }
    if waypoints.len() == 1 {
        return Some((first.x, first.y, first.yaw.unwrap_or(0.0)));
    }
    let k = waypoints
        .partition_point(|w| w.t <= t)
        .saturating_sub(1)
        .min(waypoints.len() - 2);
    let (a, b) = (&waypoints[k], &waypoints[k + 1]);
    let w = ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
    let x = a.x + w * (b.x - a.x);
    let y = a.y + w * (b.y - a.y);
    let yaw = match (a.yaw, b.yaw) {
        (Some(ya), Some(yb)) => ya + w * wrap_angle(yb - ya),
        (Some(ya), None) if w == 0.0 => ya,
        _ => segment_heading(waypoints, k),
    };
    Some((x, y, yaw))
}

/// A vertical prism in the sensor's horizontal plane.
#[derive(Clone, Copy, Debug)]
enum Footprint {
    /// Oriented rectangle: center, half extents, heading cos/sin.
    Box {
        center: [f64; 2],
        half: [f64; 2],
        cos: f64,
        sin: f64,
    },
    Segment {
        from: [f64; 2],
        to: [f64; 2],
    },
}

#[derive(Clone, Copy, Debug)]
struct Obstacle {
    footprint: Footprint,
    height: f64,
    class: SemanticClass,
}

impl Footprint {
    /// Horizontal distances `[enter, exit]` along the ray from `o` in
    /// direction `u`, if the ray crosses the footprint ahead.
    fn interval(&self, o: [f64; 2], u: [f64; 2]) -> Option<(f64, f64)> {
        match *self {
            Footprint::Box { center, half, cos, sin } => {
                let d = [o[0] - center[0], o[1] - center[1]];
                let lo = [cos * d[0] + sin * d[1], -sin * d[0] + cos * d[1]];
                let lu = [cos * u[0] + sin * u[1], -sin * u[0] + cos * u[1]];
                let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
                for k in 0..2 {
                    if lu[k].abs() < 1e-15 {
                        if lo[k].abs() > half[k] {
                            return None;
                        }
                    } else {
                        let a = (-half[k] - lo[k]) / lu[k];
                        let b = (half[k] - lo[k]) / lu[k];
                        t0 = t0.max(a.min(b));
                        t1 = t1.min(a.max(b));
                    }
                }
                (t0 <= t1 && t0 >= 0.0).then_some((t0, t1))
            }
            Footprint::Segment { from, to } => {
                let e = [to[0] - from[0], to[1] - from[1]];
                let denom = u[0] * e[1] - u[1] * e[0];
                if denom.abs() < 1e-15 {
                    return None;
                }
                let w = [from[0] - o[0], from[1] - o[1]];
                let s = (w[0] * e[1] - w[1] * e[0]) / denom;
                let v = (w[0] * u[1] - w[1] * u[0]) / denom;
                (s >= 0.0 && (0.0..=1.0).contains(&v)).then_some((s, s))
            }
        }
    }

    fn distance_to(&self, p: [f64; 2]) -> f64 {
        let seg = |a: [f64; 2], b: [f64; 2]| {
            let e = [b[0] - a[0], b[1] - a[1]];
            let w = [p[0] - a[0], p[1] - a[1]];
            let s = ((w[0] * e[0] + w[1] * e[1]) / (e[0] * e[0] + e[1] * e[1])).clamp(0.0, 1.0);
            (w[0] - s * e[0]).hypot(w[1] - s * e[1])
        };
        match *self {
            Footprint::Box { .. } => {
                let c = self.corners();
                (0..4).map(|i| seg(c[i], c[(i + 1) % 4])).fold(f64::INFINITY, f64::min)
            }
            Footprint::Segment { from, to } => seg(from, to),
        }
    }

    fn corners(&self) -> [[f64; 2]; 4] {
        match *self {
            Footprint::Box { center, half, cos, sin } => {
                let at = |a: f64, b: f64| [center[0] + cos * a - sin * b, center[1] + sin * a + cos * b];
                [
                    at(-half[0], -half[1]),
                    at(half[0], -half[1]),
                    at(half[0], half[1]),
                    at(-half[0], half[1]),
                ]
            }
            Footprint::Segment { from, to } => [from, to, to, from],
        }
    }

    fn contains(&self, p: [f64; 2]) -> bool {
        match *self {
            Footprint::Box { center, half, cos, sin } => {
                let d = [p[0] - center[0], p[1] - center[1]];
                (cos * d[0] + sin * d[1]).abs() < half[0] && (-sin * d[0] + cos * d[1]).abs() < half[1]
            }
            Footprint::Segment { .. } => false,
        }
    }
}

fn oriented_box(center: [f64; 2], length: f64, width: f64, yaw: f64) -> Footprint {
    let (sin, cos) = yaw.sin_cos();
    Footprint::Box {
        center,
        half: [length / 2.0, width / 2.0],
        cos,
        sin,
    }
}

impl Scenario {
    /// Every obstacle present at `t`.
    fn obstacles_at(&self, t: f64) -> Vec<Obstacle> {
        let mut out = Vec::new();
        for s in &self.world {
            let (footprint, height) = match s {
                Shape::Rect { min, max, height } => (
                    oriented_box(
                        [(min[0] + max[0]) / 2.0, (min[1] + max[1]) / 2.0],
                        max[0] - min[0],
                        max[1] - min[1],
                        0.0,
                    ),
                    *height,
                ),
                Shape::Segment { from, to, height } => (Footprint::Segment { from: *from, to: *to }, *height),
            };
            out.push(Obstacle {
                footprint,
                height,
                class: SemanticClass::Building,
            });
        }
        for p in &self.parked {
            out.push(Obstacle {
                footprint: oriented_box(p.center, p.length, p.width, p.yaw),
                height: p.height,
                class: p.class,
            });
        }
        for a in &self.actors {
            if let Some((x, y, yaw)) = trajectory_at(&a.waypoints, t) {
                out.push(Obstacle {
                    footprint: oriented_box([x, y], a.length, a.width, yaw),
                    height: a.height,
                    class: a.class,
                });
            }
        }
        out
    }
}

/// Per-frame generator seed, independent of rendering order.
fn frame_seed(master: u64, agent: usize, frame: usize) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix(splitmix(splitmix(master) ^ agent as u64) ^ frame as u64)
}

/// Casts one sensor sweep of `agent` at time `t`.
///
/// Fails when the agent's trajectory does not cover `t`.
pub fn raycast_frame(scenario: &Scenario, agent: usize, t: f64) -> Result<FrameBundle> {
    let frame = (t * scenario.frame_rate).round().max(0.0) as usize;
    raycast_with_seed(scenario, agent, t, frame_seed(scenario.seed, agent, frame))
}

fn raycast_with_seed(scenario: &Scenario, agent: usize, t: f64, seed: u64) -> Result<FrameBundle> {
    let a = scenario
        .agents
        .get(agent)
        .ok_or_else(|| Error::InvalidParameter(format!("no agent with index {agent}")))?;
    let pose = scenario.agent_pose(agent, t).ok_or_else(|| {
        Error::InvalidParameter(format!("agent {} has no pose at t={t}", a.id))
    })?;
    let lidar = &a.lidar;
    let origin = [pose.east, pose.north];
    let h = pose.up;

    // Obstacles out of reach or enclosing the sensor are skipped.
    let obstacles: Vec<Obstacle> = scenario
        .obstacles_at(t)
        .into_iter()
        .filter(|o| !o.footprint.contains(origin) && o.footprint.distance_to(origin) <= lidar.max_range)
        .collect();

    let channels: Vec<(f64, f64, f64)> = lidar
        .vertical_angles
        .iter()
        .map(|&el| (el.tan(), el.cos(), el.sin()))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, lidar.noise_sigma.max(0.0)).expect("valid sigma");

    let n_az = lidar.azimuth_count();
    let mut points = Vec::new();
    let mut classes = Vec::new();
    let mut crossings: Vec<(f64, f64, f64, SemanticClass)> = Vec::new();
    for j in 0..n_az {
        let local_az = (j as f64 + 0.5) * lidar.azimuth_step;
        let az = pose.yaw + local_az;
        let u = [az.cos(), az.sin()];
        crossings.clear();
        for o in &obstacles {
            if let Some((s0, s1)) = o.footprint.interval(origin, u) {
                crossings.push((s0, s1, o.height, o.class));
            }
        }
        let (sin_l, cos_l) = local_az.sin_cos();
        for &(tan_el, cos_el, sin_el) in &channels {
            let s_max = lidar.max_range * cos_el;
            let mut best = f64::INFINITY;
            let mut class = SemanticClass::Ground;
            if tan_el < 0.0 {
                best = h / -tan_el;
            }
            for &(s0, s1, height, c) in &crossings {
                // Horizontal distances where the ray height lies in [0, height].
                let (mut lo, mut hi) = (s0, s1);
                if tan_el > 0.0 {
                    hi = hi.min((height - h) / tan_el);
                } else if tan_el < 0.0 {
                    hi = hi.min(h / -tan_el);
                    if h > height {
                        lo = lo.max((height - h) / tan_el);
                    }
                } else if h > height {
                    continue;
                }
                if lo <= hi && lo < best {
                    best = lo;
                    class = c;
                }
            }
            if !(best <= s_max) {
                continue;
            }
            let mut range = best / cos_el;
            if lidar.noise_sigma > 0.0 {
                range += noise.sample(&mut rng);
            }
            let horizontal = range * cos_el;
            points.push([horizontal * cos_l, horizontal * sin_l, range * sin_el]);
            classes.push(class);
        }
    }
    Ok(FrameBundle {
        agent_id: a.id.clone(),
        timestamp: t,
        pose,
        points,
        classes: Some(classes),
    })
}

/// Distance from an ENU point to the nearest obstacle surface or the ground
/// present at `t`. Used to check geometric soundness of zero-noise sweeps.
pub fn distance_to_surface(scenario: &Scenario, t: f64, p: &Point3) -> f64 {
    let mut best = p[2].abs();
    for o in scenario.obstacles_at(t) {
        let xy = [p[0], p[1]];
        let inside = o.footprint.contains(xy);
        let lateral = o.footprint.distance_to(xy);
        let d = if p[2] > o.height {
            // Above the top face.
            let over = if inside { 0.0 } else { lateral };
            over.hypot(p[2] - o.height)
        } else if inside {
            lateral.min(o.height - p[2])
        } else {
            lateral
        };
        best = best.min(d);
    }
    best
}

/// Summary of an emitted dataset.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetSummary {
    pub agents: usize,
    pub frames: usize,
    pub truth_rows: usize,
}

/// File name of the frame at time `t`.
pub fn frame_file_name(t: f64) -> String {
    format!("frame_{:012}.evpc", (t * 1e9).round() as u64)
}

/// Writes the whole dataset below `out_dir`:
///
/// ```text
/// scenario.json
/// truth.csv
/// roi.csv
/// agents/<id>/poses.csv
/// agents/<id>/frame_<nanoseconds>.evpc
/// ```
pub fn emit_dataset(scenario: &Scenario, out_dir: &Path) -> Result<DatasetSummary> {
    scenario.validate()?;
    let mkdir = |p: &Path| fs::create_dir_all(p).map_err(|e| Error::io(p, e));
    mkdir(out_dir)?;
    let write = |p: &Path, bytes: &[u8]| fs::write(p, bytes).map_err(|e| Error::io(p, e));

    write(&out_dir.join("scenario.json"), scenario.to_json().as_bytes())?;

    let times = scenario.frame_times();
    let mut jobs = Vec::new();
    for (ai, agent) in scenario.agents.iter().enumerate() {
        let dir = out_dir.join("agents").join(&agent.id);
        mkdir(&dir)?;
        let mut poses = Vec::new();
        for (k, &t) in times.iter().enumerate() {
            if let Some(p) = scenario.agent_pose(ai, t) {
                poses.push(p);
                jobs.push((ai, k, t, dir.join(frame_file_name(t))));
            }
        }
        let mut buf = Vec::new();
        io::write_poses(&mut buf, &poses)?;
        write(&dir.join("poses.csv"), &buf)?;
    }

    jobs.par_iter().try_for_each(|(ai, k, t, path)| -> Result<()> {
        let bundle = raycast_with_seed(scenario, *ai, *t, frame_seed(scenario.seed, *ai, *k))?;
        let frame = PointFrame {
            timestamp: *t,
            points: bundle.points,
            classes: bundle.classes,
        };
        io::write_frame(path, &frame)
    })?;

    let truth = scenario.ground_truth();
    let mut buf = Vec::new();
    truth.write_csv(&mut buf)?;
    write(&out_dir.join("truth.csv"), &buf)?;

    let mut buf = Vec::new();
    scenario
        .region_of_interest()?
        .write_csv(&mut buf)
        .map_err(|e| Error::io(out_dir.join("roi.csv"), e))?;
    write(&out_dir.join("roi.csv"), &buf)?;

    Ok(DatasetSummary {
        agents: scenario.agents.len(),
        frames: jobs.len(),
        truth_rows: truth.entries.len(),
    })
}
