//! On-disk formats: evidential grids (EVGR), point-cloud frames (EVPC) and
//! pose tracks (CSV). All binary formats are little-endian.
//!
//! EVGR layout, 64-byte header then payload:
//!
//! | offset | type     | field                              |
//! |--------|----------|------------------------------------|
//! | 0      | [u8; 4]  | magic `EVGR`                       |
//! | 4      | u32      | version (1)                        |
//! | 8      | 5 × f64  | origin east, origin north, resolution, span east, span north |
//! | 48     | 2 × u32  | width, height                      |
//! | 56     | f64      | timestamp, NaN for a background map |
//! | 64     | f32 …    | width × height × 16 masses, row-major from the south-west cell, indexed by hypothesis bitmask |
//!
//! EVPC layout, 24-byte header: magic `EVPC`, version u32, timestamp f64,
//! point count u32, flags u32 (bit 0: class codes present), then
//! count × 3 f32 sensor-frame coordinates and optionally count × u8 codes.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::evidential::{MassFunction, POWER_SET_SIZE};
use crate::grid::{EvidentialGrid, GridGeometry, Point3, Pose};
use crate::observation::SemanticClass;

pub const GRID_MAGIC: &[u8; 4] = b"EVGR";
pub const GRID_VERSION: u32 = 1;
pub const GRID_HEADER_LEN: usize = 64;
pub const FRAME_MAGIC: &[u8; 4] = b"EVPC";
pub const FRAME_VERSION: u32 = 1;
pub const FRAME_HEADER_LEN: usize = 24;
const FLAG_CLASSES: u32 = 1;

/// Stored masses are single precision; sums within this of one are accepted
/// and renormalized on load.
pub const STORED_MASS_TOLERANCE: f64 = 1e-4;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn fail(&self, offset: usize, message: impl Into<String>) -> Error {
        Error::Format {
            path: self.path.to_path_buf(),
            offset: offset as u64,
            message: message.into(),
        }
    }

    fn take<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let end = self.pos + N;
        if end > self.bytes.len() {
            return Err(self.fail(self.pos, format!("truncated while reading {what}")));
        }
        let mut out = [0u8; N];
        out.copy_from_slice(&self.bytes[self.pos..end]);
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        self.take::<4>(what).map(u32::from_le_bytes)
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        self.take::<8>(what).map(f64::from_le_bytes)
    }

    fn f32(&mut self, what: &str) -> Result<f32> {
        self.take::<4>(what).map(f32::from_le_bytes)
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

pub fn encode_grid(grid: &EvidentialGrid) -> Vec<u8> {
    let g = grid.geometry();
    let mut out = Vec::with_capacity(GRID_HEADER_LEN + g.cell_count() * POWER_SET_SIZE * 4);
    out.extend_from_slice(GRID_MAGIC);
    out.extend_from_slice(&GRID_VERSION.to_le_bytes());
    for v in [
        g.origin_east,
        g.origin_north,
        g.resolution,
        g.width as f64 * g.resolution,
        g.height as f64 * g.resolution,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&g.width.to_le_bytes());
    out.extend_from_slice(&g.height.to_le_bytes());
    out.extend_from_slice(&grid.timestamp.unwrap_or(f64::NAN).to_le_bytes());
    for cell in grid.cells() {
        for &m in cell.masses() {
            out.extend_from_slice(&(m as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_grid(bytes: &[u8], path: &Path) -> Result<EvidentialGrid> {
    let mut c = Cursor { bytes, pos: 0, path };
    let magic = c.take::<4>("magic")?;
    if &magic != GRID_MAGIC {
        return Err(c.fail(0, "not an EVGR grid (bad magic)"));
    }
    let version = c.u32("version")?;
    if version != GRID_VERSION {
        return Err(c.fail(4, format!("unsupported EVGR version {version}")));
    }
    let origin_east = c.f64("origin")?;
    let origin_north = c.f64("origin")?;
    let resolution = c.f64("resolution")?;
    let _span_east = c.f64("span")?;
    let _span_north = c.f64("span")?;
    let width = c.u32("width")?;
    let height = c.u32("height")?;
    let geometry = GridGeometry::new(origin_east, origin_north, resolution, width, height)
        .map_err(|e| c.fail(8, e.to_string()))?;
    let ts = c.f64("timestamp")?;
    let timestamp = if ts.is_nan() { None } else { Some(ts) };

    let n = geometry.cell_count();
    let expected = GRID_HEADER_LEN + n * POWER_SET_SIZE * 4;
    if bytes.len() != expected {
        return Err(c.fail(
            bytes.len().min(expected),
            format!("payload size {} does not match {width}x{height} grid", bytes.len() - GRID_HEADER_LEN),
        ));
    }
    let mut cells = Vec::with_capacity(n);
    for i in 0..n {
        let start = c.pos;
        let mut mass = [0.0f64; POWER_SET_SIZE];
        let mut sum = 0.0;
        for m in mass.iter_mut() {
            let v = c.f32("mass")? as f64;
            if !v.is_finite() || v < 0.0 {
                return Err(c.fail(start, format!("cell {i} has invalid mass {v}")));
            }
            *m = v;
            sum += v;
        }
        if (sum - 1.0).abs() > STORED_MASS_TOLERANCE {
            return Err(c.fail(start, format!("cell {i} masses sum to {sum}")));
        }
        if (sum - 1.0).abs() > 1e-12 {
            for m in mass.iter_mut() {
                *m /= sum;
            }
        }
        let mf = MassFunction::new(mass).map_err(|e| c.fail(start, e.to_string()))?;
        cells.push(mf);
    }
    EvidentialGrid::from_cells(geometry, cells, timestamp)
}

pub fn write_grid(path: &Path, grid: &EvidentialGrid) -> Result<()> {
    write_file(path, &encode_grid(grid))
}

pub fn read_grid(path: &Path) -> Result<EvidentialGrid> {
    decode_grid(&read_file(path)?, path)
}

/// Contents of one EVPC file.
#[derive(Clone, Debug, PartialEq)]
pub struct PointFrame {
    pub timestamp: f64,
    /// Sensor-frame coordinates.
    pub points: Vec<Point3>,
    pub classes: Option<Vec<SemanticClass>>,
}

pub fn encode_frame(frame: &PointFrame) -> Result<Vec<u8>> {
    if let Some(classes) = &frame.classes {
        if classes.len() != frame.points.len() {
            return Err(Error::LengthMismatch {
                what: "class labels",
                got: classes.len(),
                expected: frame.points.len(),
            });
        }
    }
    let n = frame.points.len();
    let mut out = Vec::with_capacity(FRAME_HEADER_LEN + n * 13);
    out.extend_from_slice(FRAME_MAGIC);
    out.extend_from_slice(&FRAME_VERSION.to_le_bytes());
    out.extend_from_slice(&frame.timestamp.to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    let flags = if frame.classes.is_some() { FLAG_CLASSES } else { 0 };
    out.extend_from_slice(&flags.to_le_bytes());
    for p in &frame.points {
        for v in p {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    if let Some(classes) = &frame.classes {
        out.extend(classes.iter().map(|c| c.code()));
    }
    Ok(out)
}

pub fn decode_frame(bytes: &[u8], path: &Path) -> Result<PointFrame> {
    let mut c = Cursor { bytes, pos: 0, path };
    let magic = c.take::<4>("magic")?;
    if &magic != FRAME_MAGIC {
        return Err(c.fail(0, "not an EVPC frame (bad magic)"));
    }
    let version = c.u32("version")?;
    if version != FRAME_VERSION {
        return Err(c.fail(4, format!("unsupported EVPC version {version}")));
    }
    let timestamp = c.f64("timestamp")?;
    if !timestamp.is_finite() {
        return Err(c.fail(8, "timestamp is not finite"));
    }
    let n = c.u32("point count")? as usize;
    let flags = c.u32("flags")?;
    if flags & !FLAG_CLASSES != 0 {
        return Err(c.fail(20, format!("unknown flags {flags:#x}")));
    }
    let has_classes = flags & FLAG_CLASSES != 0;
    let expected = FRAME_HEADER_LEN + n * 12 + if has_classes { n } else { 0 };
    if bytes.len() != expected {
        return Err(c.fail(
            bytes.len().min(expected),
            format!("file is {} bytes, header announces {expected}", bytes.len()),
        ));
    }
    let mut points = Vec::with_capacity(n);
    for i in 0..n {
        let start = c.pos;
        let p = [c.f32("x")? as f64, c.f32("y")? as f64, c.f32("z")? as f64];
        if !p.iter().all(|v| v.is_finite()) {
            return Err(c.fail(start, format!("point {i} has a non-finite coordinate")));
        }
        points.push(p);
    }
    let classes = if has_classes {
        let mut classes = Vec::with_capacity(n);
        for i in 0..n {
            let code = bytes[c.pos];
            let class = SemanticClass::from_code(code)
                .ok_or_else(|| c.fail(c.pos, format!("point {i} has unknown class code {code}")))?;
            classes.push(class);
            c.pos += 1;
        }
        Some(classes)
    } else {
        None
    };
    Ok(PointFrame {
        timestamp,
        points,
        classes,
    })
}

pub fn write_frame(path: &Path, frame: &PointFrame) -> Result<()> {
    write_file(path, &encode_frame(frame)?)
}

pub fn read_frame(path: &Path) -> Result<PointFrame> {
    decode_frame(&read_file(path)?, path)
}

pub const POSE_HEADER: [&str; 7] = ["timestamp", "east", "north", "up", "yaw", "pitch", "roll"];

pub fn write_poses<W: Write>(writer: W, poses: &[Pose]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let fail = |e: csv::Error| Error::parse("poses.csv", e.to_string());
    w.write_record(POSE_HEADER).map_err(fail)?;
    for p in poses {
        w.write_record(
            [p.timestamp, p.east, p.north, p.up, p.yaw, p.pitch, p.roll].map(|v| v.to_string()),
        )
        .map_err(fail)?;
    }
    w.flush().map_err(|e| Error::io("poses.csv", e))
}

/// Reads a pose track; timestamps must strictly increase.
pub fn read_poses<R: std::io::Read>(reader: R, source: &Path) -> Result<Vec<Pose>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = r.headers().map_err(|e| Error::parse(source, e.to_string()))?;
    if headers.iter().ne(POSE_HEADER.iter().copied()) {
        return Err(Error::parse(
            source,
            format!("expected header {}", POSE_HEADER.join(",")),
        ));
    }
    let mut poses: Vec<Pose> = Vec::new();
    for (row, record) in r.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| Error::parse(source, e.to_string()))?;
        let mut v = [0.0f64; 7];
        for (k, field) in record.iter().enumerate().take(7) {
            v[k] = field
                .parse()
                .map_err(|e| Error::parse(source, format!("line {line}, column {}: {e}", POSE_HEADER[k])))?;
        }
        if !v.iter().all(|x| x.is_finite()) {
            return Err(Error::parse(source, format!("line {line}: non-finite value")));
        }
        let pose = Pose {
            timestamp: v[0],
            east: v[1],
            north: v[2],
            up: v[3],
            yaw: v[4],
            pitch: v[5],
            roll: v[6],
        };
        if let Some(prev) = poses.last() {
            if pose.timestamp <= prev.timestamp {
                return Err(Error::parse(
                    source,
                    format!("line {line}: timestamp {} does not increase", pose.timestamp),
                ));
            }
        }
        poses.push(pose);
    }
    Ok(poses)
}
