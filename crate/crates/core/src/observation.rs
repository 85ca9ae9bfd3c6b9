//! Per-agent observation grids.
//!
//! A frame's points are first split into ground and obstacle points by a
//! two-criterion heuristic (height above the local ground estimate and the
//! gradient to the previous ground return along the same azimuth). Optional
//! semantic classes refine obstacle points into immovable and movable ones.
//! Projection into the grid then yields `F` for cells holding ground returns
//! and `I`, `M` or `O` for cells holding obstacle returns.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evidential::{Hypothesis, MassFunction};
use crate::grid::{grid_combine, EvidentialGrid, GridGeometry, Point3, Pose};

/// Semantic class attached to a point, either simulated or produced by an
/// external segmentation network. Stored as one byte in point-cloud files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SemanticClass {
    Unknown = 0,
    Ground = 1,
    Building = 2,
    Fence = 3,
    Vegetation = 4,
    Pole = 5,
    Car = 6,
    Truck = 7,
    Pedestrian = 8,
    Cyclist = 9,
}

impl SemanticClass {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        use SemanticClass::*;
        Some(match code {
            0 => Unknown,
            1 => Ground,
            2 => Building,
            3 => Fence,
            4 => Vegetation,
            5 => Pole,
            6 => Car,
            7 => Truck,
            8 => Pedestrian,
            9 => Cyclist,
            _ => return None,
        })
    }

    pub fn is_immovable(self) -> bool {
        use SemanticClass::*;
        matches!(self, Building | Fence | Vegetation | Pole)
    }

    pub fn is_movable(self) -> bool {
        use SemanticClass::*;
        matches!(self, Car | Truck | Pedestrian | Cyclist)
    }
}

/// Outcome of ground segmentation and class refinement for one point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PointLabel {
    Ground,
    Obstacle,
    ImmovableObstacle,
    MovableObstacle,
    /// Out of range or implausibly far below the ground.
    Discarded,
}

impl PointLabel {
    pub fn is_obstacle(self) -> bool {
        matches!(
            self,
            PointLabel::Obstacle | PointLabel::ImmovableObstacle | PointLabel::MovableObstacle
        )
    }
}

/// One agent's time-stamped scan.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameBundle {
    pub agent_id: String,
    pub timestamp: f64,
    pub pose: Pose,
    /// Sensor-frame coordinates in meters.
    pub points: Vec<Point3>,
    pub classes: Option<Vec<SemanticClass>>,
}

impl FrameBundle {
    pub fn validate(&self, sync_tolerance: f64) -> Result<()> {
        if (self.timestamp - self.pose.timestamp).abs() > sync_tolerance {
            return Err(Error::TimestampMismatch(format!(
                "agent {} frame at t={} has pose at t={}",
                self.agent_id, self.timestamp, self.pose.timestamp
            )));
        }
        if let Some(i) = self
            .points
            .iter()
            .position(|p| !p.iter().all(|v| v.is_finite()))
        {
            return Err(Error::InvalidParameter(format!(
                "agent {} frame at t={}: point {i} is not finite",
                self.agent_id, self.timestamp
            )));
        }
        if let Some(classes) = &self.classes {
            if classes.len() != self.points.len() {
                return Err(Error::LengthMismatch {
                    what: "class labels",
                    got: classes.len(),
                    expected: self.points.len(),
                });
            }
        }
        Ok(())
    }

    /// ENU coordinates of every point.
    pub fn world_points(&self) -> Vec<Point3> {
        self.points.iter().map(|p| self.pose.apply(p)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentationParams {
    /// Maximum height above the local ground estimate for a ground return (m).
    pub h_ground: f64,
    /// Maximum gradient to the previous ground return along the azimuth (rad).
    pub s_max: f64,
    /// Returns farther than this horizontal range are discarded (m).
    pub max_range: f64,
    /// Returns lower than this height relative to the nominal ground are
    /// discarded (m).
    pub min_relative_height: f64,
    /// Number of azimuth sectors. Sectors should be no wider than the
    /// sensor's azimuth step: returns of two columns sharing a sector can lie
    /// at almost equal range, where range noise alone gives a steep gradient.
    pub sectors: usize,
    /// Sensor height above the ground (m). Taken from the pose's `up` when
    /// absent.
    pub sensor_height: Option<f64>,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        SegmentationParams {
            h_ground: 0.20,
            s_max: 0.25,
            max_range: 80.0,
            min_relative_height: -2.0,
            sectors: 3600,
            sensor_height: None,
        }
    }
}

impl SegmentationParams {
    pub fn validate(&self) -> Result<()> {
        if self.sectors == 0 {
            return Err(Error::InvalidParameter("sectors must be at least 1".into()));
        }
        if !(self.max_range > 0.0) || !(self.h_ground > 0.0) || !(self.s_max > 0.0) {
            return Err(Error::InvalidParameter(
                "h_ground, s_max and max_range must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Labels every point of `frame` as ground, obstacle or discarded.
pub fn segment_ground(frame: &FrameBundle, params: &SegmentationParams) -> Result<Vec<PointLabel>> {
    params.validate()?;
    let sensor_height = params.sensor_height.unwrap_or(frame.pose.up);
    // Remove pitch and roll so that z measures height.
    let level = Pose {
        pitch: frame.pose.pitch,
        roll: frame.pose.roll,
        ..Pose::default()
    };
    let leveled = level.pitch != 0.0 || level.roll != 0.0;

    let mut labels = vec![PointLabel::Discarded; frame.points.len()];
    // (sector, range, z, index)
    let mut kept: Vec<(u32, f64, f64, u32)> = Vec::with_capacity(frame.points.len());
    let sectors = params.sectors as f64;
    for (i, p) in frame.points.iter().enumerate() {
        let p = if leveled { level.apply(p) } else { *p };
        let range = p[0].hypot(p[1]);
        if !range.is_finite() || range > params.max_range {
            continue;
        }
        if p[2] + sensor_height < params.min_relative_height {
            continue;
        }
        let turn = (p[1].atan2(p[0]) + std::f64::consts::PI) / std::f64::consts::TAU;
        let sector = ((turn * sectors) as u32).min(params.sectors as u32 - 1);
        kept.push((sector, range, p[2], i as u32));
    }
    kept.sort_unstable_by(|a, b| {
        a.0.cmp(&b.0)
            .then(a.1.total_cmp(&b.1))
            .then(a.3.cmp(&b.3))
    });

    let mut current_sector = u32::MAX;
    let mut ground_ref = (0.0, -sensor_height);
    for &(sector, range, z, idx) in &kept {
        if sector != current_sector {
            current_sector = sector;
            ground_ref = (0.0, -sensor_height);
        }
        let dz = z - ground_ref.1;
        let dr = range - ground_ref.0;
        let slope = dz.abs().atan2(dr.max(0.0));
        let is_ground = dz < params.h_ground && slope < params.s_max;
        labels[idx as usize] = if is_ground {
            ground_ref = (range, z);
            PointLabel::Ground
        } else {
            PointLabel::Obstacle
        };
    }
    Ok(labels)
}

/// Refines obstacle labels with semantic classes. Ground and discarded
/// labels are never overridden.
pub fn refine_labels(
    labels: &[PointLabel],
    classes: Option<&[SemanticClass]>,
) -> Result<Vec<PointLabel>> {
    let Some(classes) = classes else {
        return Ok(labels.to_vec());
    };
    if classes.len() != labels.len() {
        return Err(Error::LengthMismatch {
            what: "class labels",
            got: classes.len(),
            expected: labels.len(),
        });
    }
    Ok(labels
        .iter()
        .zip(classes)
        .map(|(&label, &class)| match label {
            PointLabel::Obstacle if class.is_immovable() => PointLabel::ImmovableObstacle,
            PointLabel::Obstacle if class.is_movable() => PointLabel::MovableObstacle,
            other => other,
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObservationParams {
    /// Ground returns needed in a cell before it is declared free.
    pub n_free: usize,
    /// Mass put on the observed hypothesis; the remainder goes to `Θ`.
    /// `1.0` gives binary (categorical) masses.
    pub confidence: f64,
}

impl Default for ObservationParams {
    fn default() -> Self {
        ObservationParams {
            n_free: 1,
            confidence: 1.0,
        }
    }
}

impl ObservationParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_free == 0 {
            return Err(Error::InvalidParameter("n_free must be at least 1".into()));
        }
        if !(self.confidence > 0.0 && self.confidence <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "confidence must lie in (0, 1], got {}",
                self.confidence
            )));
        }
        Ok(())
    }

    pub fn mass_for(&self, h: Hypothesis) -> MassFunction {
        if self.confidence >= 1.0 {
            MassFunction::categorical_unchecked(h)
        } else {
            let mut mass = [0.0; 16];
            mass[h.index()] += self.confidence;
            mass[Hypothesis::THETA.index()] += 1.0 - self.confidence;
            MassFunction::new(mass).expect("confidence checked by validate")
        }
    }
}

/// Sparse per-cell evidence of one scan: the hypothesis each informative cell
/// supports, sorted by flat cell index.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CellEvidence {
    pub cells: Vec<(u32, Hypothesis)>,
    /// Non-discarded points that fell outside the grid.
    pub dropped: usize,
}

impl CellEvidence {
    pub fn to_grid(
        &self,
        geometry: GridGeometry,
        timestamp: Option<f64>,
        params: &ObservationParams,
    ) -> EvidentialGrid {
        let mut grid = EvidentialGrid::vacuous(geometry, timestamp);
        let cells = grid.cells_mut();
        for &(idx, h) in &self.cells {
            cells[idx as usize] = params.mass_for(h);
        }
        grid
    }

    /// Conjunctively combines this evidence into `grid`. Cells without
    /// evidence are vacuous and leave `grid` untouched, so this equals
    /// `grid_combine(grid, self.to_grid(..))`.
    pub fn combine_into(&self, grid: &mut EvidentialGrid, params: &ObservationParams) {
        let cells = grid.cells_mut();
        for &(idx, h) in &self.cells {
            let cell = &mut cells[idx as usize];
            *cell = cell.combine_conjunctive(&params.mass_for(h));
        }
    }
}

#[derive(Clone, Copy, Default)]
struct CellTally {
    ground: usize,
    obstacle: bool,
    immovable: bool,
    movable: bool,
}

/// Projects labeled points into `geometry` and derives one hypothesis per
/// informative cell. Obstacle returns override ground returns in a cell.
pub fn project_evidence(
    world_points: &[Point3],
    labels: &[PointLabel],
    geometry: &GridGeometry,
    params: &ObservationParams,
) -> Result<CellEvidence> {
    if world_points.len() != labels.len() {
        return Err(Error::LengthMismatch {
            what: "point labels",
            got: labels.len(),
            expected: world_points.len(),
        });
    }
    let mut hits: Vec<(u32, PointLabel)> = Vec::with_capacity(world_points.len());
    let mut dropped = 0;
    for (p, &label) in world_points.iter().zip(labels) {
        if label == PointLabel::Discarded {
            continue;
        }
        match geometry.world_to_index(p[0], p[1]) {
            Some(idx) => hits.push((idx as u32, label)),
            None => dropped += 1,
        }
    }
    hits.sort_unstable_by_key(|h| h.0);

    let mut cells = Vec::new();
    let mut i = 0;
    while i < hits.len() {
        let idx = hits[i].0;
        let mut tally = CellTally::default();
        while i < hits.len() && hits[i].0 == idx {
            match hits[i].1 {
                PointLabel::Ground => tally.ground += 1,
                PointLabel::Obstacle => tally.obstacle = true,
                PointLabel::ImmovableObstacle => tally.immovable = true,
                PointLabel::MovableObstacle => tally.movable = true,
                PointLabel::Discarded => {}
            }
            i += 1;
        }
        let h = if tally.obstacle || (tally.immovable && tally.movable) {
            Some(Hypothesis::O)
        } else if tally.immovable {
            Some(Hypothesis::I)
        } else if tally.movable {
            Some(Hypothesis::M)
        } else if tally.ground >= params.n_free {
            Some(Hypothesis::F)
        } else {
            None
        };
        if let Some(h) = h {
            cells.push((idx, h));
        }
    }
    Ok(CellEvidence { cells, dropped })
}

/// Builds the evidential observation grid of one frame.
pub fn build_observation_grid(
    frame: &FrameBundle,
    labels: &[PointLabel],
    geometry: &GridGeometry,
    params: &ObservationParams,
) -> Result<EvidentialGrid> {
    params.validate()?;
    let evidence = project_evidence(&frame.world_points(), labels, geometry, params)?;
    Ok(evidence.to_grid(*geometry, Some(frame.timestamp), params))
}

/// Fuses simultaneous observation grids of several agents. Conflict between
/// points of view stays on the empty set.
pub fn fuse_observations_at_time(
    grids: &[EvidentialGrid],
    sync_tolerance: f64,
) -> Result<EvidentialGrid> {
    let (first, rest) = grids
        .split_first()
        .ok_or_else(|| Error::EmptyInput("no observation grids to fuse".into()))?;
    let mut fused = first.clone();
    for g in rest {
        if let (Some(a), Some(b)) = (first.timestamp, g.timestamp) {
            if (a - b).abs() > sync_tolerance {
                return Err(Error::TimestampMismatch(format!(
                    "grids at t={a} and t={b} are not simultaneous"
                )));
            }
        }
        fused = grid_combine(&fused, g)?;
    }
    fused.timestamp = first.timestamp;
    Ok(fused)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::CellIndex;

    const H: f64 = 1.8;

    fn frame(points: Vec<Point3>) -> FrameBundle {
        FrameBundle {
            agent_id: "a".into(),
            timestamp: 0.0,
            pose: Pose {
                up: H,
                ..Pose::default()
            },
            points,
            classes: None,
        }
    }

    #[test]
    fn flat_ground_is_all_ground() {
        let mut pts = Vec::new();
        for k in 0..72 {
            let az = k as f64 * 5f64.to_radians() + 0.01;
            for r in [3.0, 5.0, 8.0, 12.0, 20.0, 35.0] {
                pts.push([r * az.cos(), r * az.sin(), -H]);
            }
        }
        let labels = segment_ground(&frame(pts), &SegmentationParams::default()).unwrap();
        assert!(labels.iter().all(|&l| l == PointLabel::Ground));
    }

    #[test]
    fn vertical_wall_is_all_obstacle() {
        // Wall at x = 10 m, heights 0.5..2.0 m above the ground, seen along
        // with ground returns in front of it.
        let mut pts = Vec::new();
        for k in 0..20 {
            let y = -2.0 + k as f64 * 0.2;
            for r in [4.0, 7.0] {
                pts.push([r, y * r / 10.0, -H]);
            }
            for j in 0..7 {
                let h = 0.5 + j as f64 * 0.25;
                pts.push([10.0, y, h - H]);
            }
        }
        let f = frame(pts);
        let labels = segment_ground(&f, &SegmentationParams::default()).unwrap();
        for (p, l) in f.points.iter().zip(&labels) {
            if p[0] == 10.0 {
                assert_eq!(*l, PointLabel::Obstacle, "{p:?}");
            } else {
                assert_eq!(*l, PointLabel::Ground, "{p:?}");
            }
        }
    }

    #[test]
    fn ground_behind_an_obstacle_stays_ground() {
        let pts = vec![[5.0, 0.01, -H], [8.0, 0.01, -H + 1.2], [8.0, 0.01, -H + 1.4], [12.0, 0.01, -H]];
        let labels = segment_ground(&frame(pts), &SegmentationParams::default()).unwrap();
        assert_eq!(
            labels,
            vec![PointLabel::Ground, PointLabel::Obstacle, PointLabel::Obstacle, PointLabel::Ground]
        );
    }

    #[test]
    fn range_and_depth_gates() {
        let pts = vec![[120.0, 0.0, -H], [10.0, 0.0, -H - 2.5], [10.0, 0.0, -H]];
        let labels = segment_ground(&frame(pts), &SegmentationParams::default()).unwrap();
        assert_eq!(
            labels,
            vec![PointLabel::Discarded, PointLabel::Discarded, PointLabel::Ground]
        );
        assert!(segment_ground(&frame(vec![]), &SegmentationParams::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn steep_ramp_is_obstacle() {
        // 0.15 m rise over 0.3 m: under h_ground but above s_max.
        let pts = vec![[5.0, 0.01, -H], [5.3, 0.01, -H + 0.15]];
        let labels = segment_ground(&frame(pts), &SegmentationParams::default()).unwrap();
        assert_eq!(labels, vec![PointLabel::Ground, PointLabel::Obstacle]);
    }

    #[test]
    fn neighbouring_columns_do_not_share_a_sector() {
        // Ground returns of two columns 0.2 degrees apart at almost equal
        // range; range noise would make them look like a step.
        let at = |deg: f64, r: f64, z: f64| {
            let a = deg.to_radians();
            [r * a.cos(), r * a.sin(), z]
        };
        let pts = vec![at(0.1, 8.0, -H), at(0.3, 8.01, -H + 0.03)];
        let labels = segment_ground(&frame(pts.clone()), &SegmentationParams::default()).unwrap();
        assert_eq!(labels, vec![PointLabel::Ground, PointLabel::Ground]);
        let coarse = SegmentationParams { sectors: 360, ..SegmentationParams::default() };
        let labels = segment_ground(&frame(pts), &coarse).unwrap();
        assert_eq!(labels, vec![PointLabel::Ground, PointLabel::Obstacle]);
    }

    #[test]
    fn refinement_rules() {
        let labels = [PointLabel::Obstacle, PointLabel::Obstacle, PointLabel::Ground, PointLabel::Obstacle];
        let classes = [
            SemanticClass::Building,
            SemanticClass::Car,
            SemanticClass::Car,
            SemanticClass::Unknown,
        ];
        let out = refine_labels(&labels, Some(&classes)).unwrap();
        assert_eq!(
            out,
            vec![
                PointLabel::ImmovableObstacle,
                PointLabel::MovableObstacle,
                PointLabel::Ground,
                PointLabel::Obstacle
            ]
        );
        assert!(refine_labels(&labels, Some(&classes[..2])).is_err());
        assert_eq!(refine_labels(&labels, None).unwrap(), labels.to_vec());
    }

    fn geom() -> GridGeometry {
        GridGeometry::new(0.0, 0.0, 1.0, 4, 4).unwrap()
    }

    #[test]
    fn projection_rules() {
        let g = geom();
        let pts = vec![
            // cell (0,0): 3 ground
            [0.1, 0.1, 0.0],
            [0.2, 0.2, 0.0],
            [0.3, 0.3, 0.0],
            // cell (1,0): 1 obstacle + 5 ground
            [1.5, 0.5, 1.0],
            [1.1, 0.1, 0.0],
            [1.2, 0.1, 0.0],
            [1.3, 0.1, 0.0],
            [1.4, 0.1, 0.0],
            [1.6, 0.1, 0.0],
            // cell (2,0): immovable only
            [2.5, 0.5, 1.0],
            // cell (3,0): movable only
            [3.5, 0.5, 1.0],
            // cell (0,1): immovable + movable
            [0.5, 1.5, 1.0],
            [0.6, 1.5, 1.0],
            // outside
            [9.0, 9.0, 0.0],
        ];
        use PointLabel::*;
        let labels = vec![
            Ground, Ground, Ground, Obstacle, Ground, Ground, Ground, Ground, Ground,
            ImmovableObstacle, MovableObstacle, ImmovableObstacle, MovableObstacle, Ground,
        ];
        let f = FrameBundle {
            points: pts,
            pose: Pose::default(),
            ..frame(vec![])
        };
        let grid = build_observation_grid(&f, &labels, &g, &ObservationParams::default()).unwrap();
        let at = |col, row| grid.get(CellIndex { col, row }).as_categorical().unwrap();
        assert_eq!(at(0, 0), Hypothesis::F);
        assert_eq!(at(1, 0), Hypothesis::O);
        assert_eq!(at(2, 0), Hypothesis::I);
        assert_eq!(at(3, 0), Hypothesis::M);
        assert_eq!(at(0, 1), Hypothesis::O);
        assert_eq!(at(3, 3), Hypothesis::THETA);
        let ev = project_evidence(&f.world_points(), &labels, &g, &ObservationParams::default())
            .unwrap();
        assert_eq!(ev.dropped, 1);
    }

    #[test]
    fn n_free_threshold() {
        let g = geom();
        let params = ObservationParams {
            n_free: 2,
            ..Default::default()
        };
        let ev = project_evidence(&[[0.5, 0.5, 0.0]], &[PointLabel::Ground], &g, &params).unwrap();
        assert!(ev.cells.is_empty());
    }

    #[test]
    fn graded_confidence() {
        let params = ObservationParams {
            n_free: 1,
            confidence: 0.8,
        };
        let m = params.mass_for(Hypothesis::F);
        assert_eq!(m.get(Hypothesis::F), 0.8);
        assert!((m.get(Hypothesis::THETA) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn fusion_of_points_of_view() {
        let g = geom();
        let c = CellIndex { col: 1, row: 1 };
        let mut a = EvidentialGrid::vacuous(g, Some(1.0));
        let mut b = EvidentialGrid::vacuous(g, Some(1.001));
        a.set(c, MassFunction::categorical(Hypothesis::F).unwrap());
        b.set(c, MassFunction::categorical(Hypothesis::O).unwrap());
        let single = fuse_observations_at_time(std::slice::from_ref(&a), 0.005).unwrap();
        assert_eq!(single, a);
        let fused = fuse_observations_at_time(&[a.clone(), b.clone()], 0.005).unwrap();
        assert_eq!(fused.get(c).conflict(), 1.0);

        let vac = EvidentialGrid::vacuous(g, Some(1.0));
        let fused = fuse_observations_at_time(&[b.clone(), vac], 0.005).unwrap();
        assert_eq!(fused.get(c).as_categorical(), Some(Hypothesis::O));

        let late = EvidentialGrid::vacuous(g, Some(2.0));
        assert!(fuse_observations_at_time(&[a, late], 0.005).is_err());
        assert!(fuse_observations_at_time(&[], 0.005).is_err());
    }

    #[test]
    fn sparse_combination_matches_dense() {
        let g = geom();
        let params = ObservationParams::default();
        let ev1 = CellEvidence {
            cells: vec![(0, Hypothesis::F), (5, Hypothesis::M), (9, Hypothesis::I)],
            dropped: 0,
        };
        let ev2 = CellEvidence {
            cells: vec![(0, Hypothesis::O), (5, Hypothesis::O), (7, Hypothesis::F)],
            dropped: 0,
        };
        let dense = grid_combine(
            &ev1.to_grid(g, Some(0.0), &params),
            &ev2.to_grid(g, Some(0.0), &params),
        )
        .unwrap();
        let mut sparse = ev1.to_grid(g, Some(0.0), &params);
        ev2.combine_into(&mut sparse, &params);
        assert_eq!(dense, sparse);
    }

    use proptest::prelude::*;

    fn point() -> impl Strategy<Value = Point3> {
        (-60.0f64..60.0, -60.0f64..60.0, -4.0f64..3.0).prop_map(|(x, y, z)| [x, y, z])
    }

    fn label() -> impl Strategy<Value = PointLabel> {
        prop_oneof![
            Just(PointLabel::Ground),
            Just(PointLabel::Obstacle),
            Just(PointLabel::ImmovableObstacle),
            Just(PointLabel::MovableObstacle),
            Just(PointLabel::Discarded),
        ]
    }

    proptest! {
        #[test]
        fn every_point_gets_a_label(pts in proptest::collection::vec(point(), 0..300)) {
            let n = pts.len();
            prop_assert_eq!(segment_ground(&frame(pts), &SegmentationParams::default()).unwrap().len(), n);
        }

        #[test]
        fn binary_cells_are_categorical(
            hits in proptest::collection::vec((0.0f64..4.0, 0.0f64..4.0, label()), 0..200),
        ) {
            let g = GridGeometry::new(0.0, 0.0, 0.5, 8, 8).unwrap();
            let pts: Vec<Point3> = hits.iter().map(|h| [h.0, h.1, 0.0]).collect();
            let labels: Vec<PointLabel> = hits.iter().map(|h| h.2).collect();
            let mut f = frame(pts);
            f.pose = Pose::default();
            let grid = build_observation_grid(&f, &labels, &g, &ObservationParams::default()).unwrap();
            let allowed = [Hypothesis::F, Hypothesis::I, Hypothesis::M, Hypothesis::O, Hypothesis::THETA];
            for m in grid.cells() {
                let h = m.as_categorical();
                prop_assert!(h.is_some_and(|h| allowed.contains(&h)), "{:?}", m);
            }
        }

        #[test]
        fn fusing_points_of_view_ignores_order(
            views in proptest::collection::vec(proptest::collection::vec(0u8..5, 16), 1..5),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let g = GridGeometry::new(0.0, 0.0, 1.0, 4, 4).unwrap();
            let choices = [Hypothesis::THETA, Hypothesis::F, Hypothesis::I, Hypothesis::M, Hypothesis::O];
            let grids: Vec<EvidentialGrid> = views
                .iter()
                .map(|v| {
                    let cells = v.iter().map(|&k| MassFunction::categorical(choices[k as usize]).unwrap()).collect();
                    EvidentialGrid::from_cells(g, cells, Some(2.0)).unwrap()
                })
                .collect();
            let mut shuffled = grids.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(
                fuse_observations_at_time(&grids, 0.01).unwrap(),
                fuse_observations_at_time(&shuffled, 0.01).unwrap()
            );
        }
    }
}
