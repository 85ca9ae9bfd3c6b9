//! Geo-referenced evidential grids and sensor-to-ENU pose transforms.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evidential::MassFunction;

/// Default cell size in meters.
pub const DEFAULT_RESOLUTION: f64 = 0.2;

/// A point in meters; `[east, north, up]` in the ENU frame or `[x, y, z]` in
/// a sensor frame.
pub type Point3 = [f64; 3];

/// Axis-aligned rectangle in ENU meters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Extent {
    pub min_east: f64,
    pub min_north: f64,
    pub max_east: f64,
    pub max_north: f64,
}

impl Extent {
    pub fn new(min_east: f64, min_north: f64, max_east: f64, max_north: f64) -> Self {
        Extent {
            min_east,
            min_north,
            max_east,
            max_north,
        }
    }

    /// Smallest extent containing both.
    pub fn union(&self, other: &Extent) -> Extent {
        Extent {
            min_east: self.min_east.min(other.min_east),
            min_north: self.min_north.min(other.min_north),
            max_east: self.max_east.max(other.max_east),
            max_north: self.max_north.max(other.max_north),
        }
    }

    pub fn padded(&self, margin: f64) -> Extent {
        Extent {
            min_east: self.min_east - margin,
            min_north: self.min_north - margin,
            max_east: self.max_east + margin,
            max_north: self.max_north + margin,
        }
    }

    pub fn contains(&self, other: &Extent) -> bool {
        self.min_east <= other.min_east
            && self.min_north <= other.min_north
            && self.max_east >= other.max_east
            && self.max_north >= other.max_north
    }

    /// Grows the extent to include a point.
    pub fn include(&mut self, east: f64, north: f64) {
        self.min_east = self.min_east.min(east);
        self.min_north = self.min_north.min(north);
        self.max_east = self.max_east.max(east);
        self.max_north = self.max_north.max(north);
    }

    /// Bounding box of a set of points, or `None` when empty.
    pub fn of_points<'a>(points: impl IntoIterator<Item = &'a Point3>) -> Option<Extent> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut ext = Extent::new(first[0], first[1], first[0], first[1]);
        for p in it {
            ext.include(p[0], p[1]);
        }
        Some(ext)
    }
}

/// Column/row of a grid cell. Row 0 is the southernmost row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellIndex {
    pub col: u32,
    pub row: u32,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridGeometry {
    pub origin_east: f64,
    pub origin_north: f64,
    pub resolution: f64,
    pub width: u32,
    pub height: u32,
}

impl GridGeometry {
    pub fn new(
        origin_east: f64,
        origin_north: f64,
        resolution: f64,
        width: u32,
        height: u32,
    ) -> Result<Self> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::InvalidGeometry(format!(
                "resolution must be positive, got {resolution}"
            )));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidGeometry(format!(
                "grid must have at least one cell, got {width}x{height}"
            )));
        }
        if !origin_east.is_finite() || !origin_north.is_finite() {
            return Err(Error::InvalidGeometry("non-finite origin".into()));
        }
        Ok(GridGeometry {
            origin_east,
            origin_north,
            resolution,
            width,
            height,
        })
    }

    /// Smallest geometry at `resolution` covering `extent`. The origin is
    /// snapped to a multiple of the resolution so that grids deduced from
    /// different extents share cell boundaries.
    pub fn covering(extent: &Extent, resolution: f64) -> Result<Self> {
        if !(resolution > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "resolution must be positive, got {resolution}"
            )));
        }
        let axis = |min: f64, max: f64| {
            let mut origin = (min / resolution + 1e-9).floor() * resolution;
            if origin > min {
                origin -= resolution;
            }
            let mut cells = ((max - origin) / resolution - 1e-9).ceil().max(1.0) as u32;
            while origin + cells as f64 * resolution < max {
                cells += 1;
            }
            (origin, cells)
        };
        let (origin_east, width) = axis(extent.min_east, extent.max_east);
        let (origin_north, height) = axis(extent.min_north, extent.max_north);
        Self::new(origin_east, origin_north, resolution, width, height)
    }

    pub fn cell_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn extent(&self) -> Extent {
        Extent::new(
            self.origin_east,
            self.origin_north,
            self.origin_east + self.width as f64 * self.resolution,
            self.origin_north + self.height as f64 * self.resolution,
        )
    }

    /// Floor-based world-to-cell mapping; `None` when outside the grid.
    pub fn world_to_cell(&self, east: f64, north: f64) -> Option<CellIndex> {
        let col = ((east - self.origin_east) / self.resolution).floor();
        let row = ((north - self.origin_north) / self.resolution).floor();
        if col < 0.0 || row < 0.0 || col >= self.width as f64 || row >= self.height as f64 {
            return None;
        }
        Some(CellIndex {
            col: col as u32,
            row: row as u32,
        })
    }

    /// Flat row-major index of a world point.
    pub fn world_to_index(&self, east: f64, north: f64) -> Option<usize> {
        self.world_to_cell(east, north).map(|c| self.index(c))
    }

    pub fn index(&self, cell: CellIndex) -> usize {
        cell.row as usize * self.width as usize + cell.col as usize
    }

    pub fn cell_at(&self, index: usize) -> CellIndex {
        CellIndex {
            col: (index % self.width as usize) as u32,
            row: (index / self.width as usize) as u32,
        }
    }

    /// World coordinates of a cell's center.
    pub fn cell_center(&self, cell: CellIndex) -> (f64, f64) {
        (
            self.origin_east + (cell.col as f64 + 0.5) * self.resolution,
            self.origin_north + (cell.row as f64 + 0.5) * self.resolution,
        )
    }
}

/// Dense row-major grid of mass functions.
#[derive(Clone, Debug, PartialEq)]
pub struct EvidentialGrid {
    geometry: GridGeometry,
    cells: Vec<MassFunction>,
    /// GNSS time in seconds; `None` for time-independent grids such as the
    /// background map.
    pub timestamp: Option<f64>,
}

impl EvidentialGrid {
    pub fn vacuous(geometry: GridGeometry, timestamp: Option<f64>) -> Self {
        EvidentialGrid {
            geometry,
            cells: vec![MassFunction::vacuous(); geometry.cell_count()],
            timestamp,
        }
    }

    pub fn from_cells(
        geometry: GridGeometry,
        cells: Vec<MassFunction>,
        timestamp: Option<f64>,
    ) -> Result<Self> {
        if cells.len() != geometry.cell_count() {
            return Err(Error::LengthMismatch {
                what: "grid cells",
                got: cells.len(),
                expected: geometry.cell_count(),
            });
        }
        Ok(EvidentialGrid {
            geometry,
            cells,
            timestamp,
        })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn cells(&self) -> &[MassFunction] {
        &self.cells
    }

    pub fn cells_mut(&mut self) -> &mut [MassFunction] {
        &mut self.cells
    }

    pub fn get(&self, cell: CellIndex) -> &MassFunction {
        &self.cells[self.geometry.index(cell)]
    }

    pub fn set(&mut self, cell: CellIndex, mass: MassFunction) {
        let i = self.geometry.index(cell);
        self.cells[i] = mass;
    }

    /// Iterator over `(flat index, mass)` of cells that are not vacuous.
    pub fn informative_cells(&self) -> impl Iterator<Item = (usize, &MassFunction)> {
        self.cells.iter().enumerate().filter(|(_, m)| !m.is_vacuous())
    }
}

/// Per-cell conjunctive combination. The result carries `b`'s timestamp when
/// it has one, `a`'s otherwise.
pub fn grid_combine(a: &EvidentialGrid, b: &EvidentialGrid) -> Result<EvidentialGrid> {
    if a.geometry != b.geometry {
        return Err(Error::GeometryMismatch);
    }
    let cells = a
        .cells
        .par_iter()
        .zip(b.cells.par_iter())
        .map(|(x, y)| x.combine_conjunctive(y))
        .collect();
    Ok(EvidentialGrid {
        geometry: a.geometry,
        cells,
        timestamp: b.timestamp.or(a.timestamp),
    })
}

/// Sensor pose in the ENU frame. Angles in radians; yaw is measured from east,
/// counterclockwise.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Pose {
    pub timestamp: f64,
    pub east: f64,
    pub north: f64,
    pub up: f64,
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

impl Pose {
    /// Rotation matrix `Rz(yaw) · Ry(pitch) · Rx(roll)`.
    pub fn rotation(&self) -> [[f64; 3]; 3] {
        let (sy, cy) = self.yaw.sin_cos();
        let (sp, cp) = self.pitch.sin_cos();
        let (sr, cr) = self.roll.sin_cos();
        [
            [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
            [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
            [-sp, cp * sr, cp * cr],
        ]
    }

    /// Sensor frame to ENU.
    pub fn apply(&self, p: &Point3) -> Point3 {
        if self.pitch == 0.0 && self.roll == 0.0 {
            let (s, c) = self.yaw.sin_cos();
            return [
                c * p[0] - s * p[1] + self.east,
                s * p[0] + c * p[1] + self.north,
                p[2] + self.up,
            ];
        }
        let r = self.rotation();
        [
            r[0][0] * p[0] + r[0][1] * p[1] + r[0][2] * p[2] + self.east,
            r[1][0] * p[0] + r[1][1] * p[1] + r[1][2] * p[2] + self.north,
            r[2][0] * p[0] + r[2][1] * p[1] + r[2][2] * p[2] + self.up,
        ]
    }

    /// ENU to sensor frame.
    pub fn apply_inverse(&self, p: &Point3) -> Point3 {
        let d = [p[0] - self.east, p[1] - self.north, p[2] - self.up];
        let r = self.rotation();
        [
            r[0][0] * d[0] + r[1][0] * d[1] + r[2][0] * d[2],
            r[0][1] * d[0] + r[1][1] * d[1] + r[2][1] * d[2],
            r[0][2] * d[0] + r[1][2] * d[1] + r[2][2] * d[2],
        ]
    }

    fn is_finite(&self) -> bool {
        [self.east, self.north, self.up, self.yaw, self.pitch, self.roll]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// Result of [`transform_points`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TransformedCloud {
    pub points: Vec<Point3>,
    /// Input points skipped because a coordinate was not finite.
    pub dropped: usize,
}

/// Rigid transform of a sensor-frame cloud into ENU.
pub fn transform_points(cloud: &[Point3], pose: &Pose) -> Result<TransformedCloud> {
    if !pose.is_finite() {
        return Err(Error::InvalidParameter("pose has non-finite fields".into()));
    }
    let mut out = TransformedCloud {
        points: Vec::with_capacity(cloud.len()),
        dropped: 0,
    };
    for p in cloud {
        if p.iter().all(|v| v.is_finite()) {
            out.points.push(pose.apply(p));
        } else {
            out.dropped += 1;
        }
    }
    Ok(out)
}
