//! Object-existence scoring against reference tracks.
//!
//! At each time step, detections and reference positions inside the region
//! of interest are paired by a minimum-cost assignment on Euclidean distance.
//! Pairs farther apart than the gate count as one false positive and one
//! false negative.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objects::{ObjectDetection, ObjectKind, ObjectSet};

/// Timestamps closer than this are treated as the same frame.
pub const TIME_EPSILON: f64 = 1e-6;

/// Minimum-cost assignment on a rectangular cost matrix (Kuhn-Munkres with
/// potentials). Returns, for every row, the assigned column; when there are
/// more rows than columns some rows stay unassigned.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<Option<usize>> {
    let rows = cost.len();
    if rows == 0 {
        return Vec::new();
    }
    let cols = cost[0].len();
    if cols == 0 {
        return vec![None; rows];
    }
    if rows > cols {
        let transposed: Vec<Vec<f64>> = (0..cols)
            .map(|c| (0..rows).map(|r| cost[r][c]).collect())
            .collect();
        let col_to_row = hungarian(&transposed);
        let mut out = vec![None; rows];
        for (c, r) in col_to_row.into_iter().enumerate() {
            if let Some(r) = r {
                out[r] = Some(c);
            }
        }
        return out;
    }

    // 1-based potentials; column 0 is a virtual column.
    let (n, m) = (rows, cols);
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![None; n];
    for j in 1..=m {
        if owner[j] != 0 {
            out[owner[j] - 1] = Some(j - 1);
        }
    }
    out
}

/// Outcome of associating one frame.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Association {
    /// `(detection, truth, distance)` pairs within the gate.
    pub matches: Vec<(usize, usize, f64)>,
    pub unmatched_detections: Vec<usize>,
    pub unmatched_truths: Vec<usize>,
}

/// Pairs detections with reference positions of the same time step.
pub fn associate(detections: &[[f64; 2]], truths: &[[f64; 2]], gate: f64) -> Result<Association> {
    if !(gate > 0.0) {
        return Err(Error::InvalidParameter(format!("gate must be positive, got {gate}")));
    }
    let dist = |a: &[f64; 2], b: &[f64; 2]| (a[0] - b[0]).hypot(a[1] - b[1]);
    let cost: Vec<Vec<f64>> = detections
        .iter()
        .map(|d| truths.iter().map(|t| dist(d, t)).collect())
        .collect();
    let assignment = hungarian(&cost);
    let mut out = Association::default();
    let mut truth_used = vec![false; truths.len()];
    for (d, t) in assignment.iter().enumerate() {
        match t {
            Some(t) if cost[d][*t] <= gate => {
                out.matches.push((d, *t, cost[d][*t]));
                truth_used[*t] = true;
            }
            _ => out.unmatched_detections.push(d),
        }
    }
    out.unmatched_truths = (0..truths.len()).filter(|&t| !truth_used[t]).collect();
    Ok(out)
}

/// Simple polygon in ENU meters.
#[derive(Clone, Debug, PartialEq)]
pub struct Roi {
    vertices: Vec<[f64; 2]>,
}

impl Roi {
    pub fn new(vertices: Vec<[f64; 2]>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidParameter(format!(
                "region of interest needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        Ok(Roi { vertices })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    /// Even-odd rule; points on an edge count as inside.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let n = self.vertices.len();
        let mut inside = false;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            if on_segment(a, b, x, y) {
                return true;
            }
            if (a[1] > y) != (b[1] > y) {
                let cross_x = a[0] + (y - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                if x < cross_x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn read_csv<R: Read>(reader: R, source: &Path) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut vertices = Vec::new();
        for (line, record) in r.records().enumerate() {
            let record = record.map_err(|e| Error::parse(source, e.to_string()))?;
            if line == 0 && record.get(0) == Some("x") {
                continue;
            }
            if record.len() != 2 {
                return Err(Error::parse(
                    source,
                    format!("line {}: expected x,y", line + 1),
                ));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::parse(source, format!("line {}: {e}", line + 1)))
            };
            vertices.push([parse(&record[0])?, parse(&record[1])?]);
        }
        Roi::new(vertices).map_err(|e| Error::parse(source, e.to_string()))
    }

    pub fn write_csv<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        writeln!(writer, "x,y")?;
        for v in &self.vertices {
            writeln!(writer, "{},{}", v[0], v[1])?;
        }
        Ok(())
    }
}

fn on_segment(a: [f64; 2], b: [f64; 2], x: f64, y: f64) -> bool {
    let cross = (b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0]);
    let len = (b[0] - a[0]).hypot(b[1] - a[1]);
    if cross.abs() > 1e-9 * len.max(1.0) {
        return false;
    }
    x >= a[0].min(b[0]) - 1e-12
        && x <= a[0].max(b[0]) + 1e-12
        && y >= a[1].min(b[1]) - 1e-12
        && y <= a[1].max(b[1]) + 1e-12
}

/// Keeps detections whose centroid lies in the region.
pub fn filter_roi(objects: &ObjectSet, roi: &Roi) -> ObjectSet {
    ObjectSet::new(
        objects
            .detections()
            .iter()
            .filter(|d| roi.contains(d.centroid_east, d.centroid_north))
            .cloned()
            .collect(),
    )
}

/// One reference position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthEntry {
    pub timestamp: f64,
    pub track_id: String,
    pub x: f64,
    pub y: f64,
    /// The object never moves during the sequence.
    #[serde(rename = "static", default)]
    pub is_static: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GroundTruth {
    pub entries: Vec<TruthEntry>,
}

impl GroundTruth {
    pub fn new(entries: Vec<TruthEntry>) -> Self {
        GroundTruth { entries }
    }

    /// Keyframes grouped by track, each sorted by time.
    pub fn tracks(&self) -> BTreeMap<&str, Vec<&TruthEntry>> {
        let mut tracks: BTreeMap<&str, Vec<&TruthEntry>> = BTreeMap::new();
        for e in &self.entries {
            tracks.entry(e.track_id.as_str()).or_default().push(e);
        }
        for keys in tracks.values_mut() {
            keys.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        }
        tracks
    }

    pub fn time_span(&self) -> Option<(f64, f64)> {
        let mut it = self.entries.iter().map(|e| e.timestamp);
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), t| (lo.min(t), hi.max(t))))
    }

    /// Reads `timestamp,track_id,x,y` with an optional trailing `static`
    /// column.
    pub fn read_csv<R: Read>(reader: R, source: &Path) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = r
            .headers()
            .map_err(|e| Error::parse(source, e.to_string()))?
            .clone();
        let names: Vec<&str> = headers.iter().collect();
        if names.len() < 4 || names[..4] != ["timestamp", "track_id", "x", "y"] {
            return Err(Error::parse(
                source,
                format!("expected header timestamp,track_id,x,y[,static], got {}", names.join(",")),
            ));
        }
        let mut entries = Vec::new();
        for (line, row) in r.deserialize().enumerate() {
            let e: TruthEntry =
                row.map_err(|e| Error::parse(source, format!("row {}: {e}", line + 1)))?;
            entries.push(e);
        }
        Ok(GroundTruth { entries })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for e in &self.entries {
            w.serialize(e).map_err(|e| Error::parse("truth.csv", e.to_string()))?;
        }
        w.flush().map_err(|e| Error::io("truth.csv", e))?;
        Ok(())
    }
}

/// Linear interpolation of every track at the query timestamps. Queries
/// outside a track's keyframe span yield nothing for that track.
pub fn interpolate_ground_truth(keyframes: &GroundTruth, timestamps: &[f64]) -> GroundTruth {
    let mut entries = Vec::new();
    for &t in timestamps {
        for (id, keys) in keyframes.tracks() {
            let first = keys[0];
            let last = keys[keys.len() - 1];
            if t < first.timestamp - TIME_EPSILON || t > last.timestamp + TIME_EPSILON {
                continue;
            }
            // First keyframe at or after t.
            let k = keys.partition_point(|e| e.timestamp < t - TIME_EPSILON);
            let (x, y) = if k < keys.len() && (keys[k].timestamp - t).abs() <= TIME_EPSILON {
                (keys[k].x, keys[k].y)
            } else if k == 0 {
                (first.x, first.y)
            } else {
                let a = keys[k - 1];
                let b = keys[k.min(keys.len() - 1)];
                let span = b.timestamp - a.timestamp;
                let w = if span > 0.0 { (t - a.timestamp) / span } else { 0.0 };
                (a.x + w * (b.x - a.x), a.y + w * (b.y - a.y))
            };
            entries.push(TruthEntry {
                timestamp: t,
                track_id: id.to_string(),
                x,
                y,
                is_static: first.is_static,
            });
        }
    }
    GroundTruth { entries }
}

/// Value reported for a ratio whose denominator is zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroDenominator {
    #[default]
    One,
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalParams {
    /// Maximum matching distance (m).
    pub gate: f64,
    pub zero_denominator: ZeroDenominator,
    /// Also score static map objects against static reference tracks.
    pub include_static: bool,
}

impl Default for EvalParams {
    fn default() -> Self {
        EvalParams {
            gate: 2.0,
            zero_denominator: ZeroDenominator::One,
            include_static: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameCounts {
    pub timestamp: f64,
    pub detections: usize,
    pub truths: usize,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

/// A ratio with a flag telling whether its denominator was non-zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ratio {
    pub value: f64,
    pub defined: bool,
}

impl Ratio {
    fn of(num: f64, den: f64, policy: ZeroDenominator) -> Ratio {
        if den > 0.0 {
            Ratio {
                value: num / den,
                defined: true,
            }
        } else {
            Ratio {
                value: match policy {
                    ZeroDenominator::One => 1.0,
                    ZeroDenominator::Zero => 0.0,
                },
                defined: false,
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: Ratio,
    pub recall: Ratio,
    pub f1: Ratio,
    pub gate: f64,
    pub include_static: bool,
    pub frames: Vec<FrameCounts>,
}

impl EvalReport {
    pub fn from_counts(
        tp: usize,
        fp: usize,
        fn_: usize,
        policy: ZeroDenominator,
    ) -> (Ratio, Ratio, Ratio) {
        let (tp, fp, fn_) = (tp as f64, fp as f64, fn_ as f64);
        (
            Ratio::of(tp, tp + fp, policy),
            Ratio::of(tp, tp + fn_, policy),
            Ratio::of(2.0 * tp, 2.0 * tp + fp + fn_, policy),
        )
    }

    pub fn to_text(&self) -> String {
        let flag = |r: &Ratio| if r.defined { "" } else { " (undefined)" };
        format!(
            "frames     {}\n\
             tp         {}\n\
             fp         {}\n\
             fn         {}\n\
             precision  {:.4}{}\n\
             recall     {:.4}{}\n\
             f1         {:.4}{}\n\
             gate       {} m\n\
             static     {}\n",
            self.frames.len(),
            self.tp,
            self.fp,
            self.fn_,
            self.precision.value,
            flag(&self.precision),
            self.recall.value,
            flag(&self.recall),
            self.f1.value,
            flag(&self.f1),
            self.gate,
            if self.include_static { "included" } else { "excluded" },
        )
    }
}

fn unique_sorted(mut ts: Vec<f64>) -> Vec<f64> {
    ts.sort_by(f64::total_cmp);
    ts.dedup_by(|a, b| (*a - *b).abs() <= TIME_EPSILON);
    ts
}

/// Scores detections against reference tracks over all time steps.
///
/// Frames are the union of detection timestamps and reference keyframe
/// timestamps. References are interpolated at every frame; a detection
/// timestamp outside the reference span is an error.
pub fn evaluate(
    objects: &ObjectSet,
    truth: &GroundTruth,
    roi: &Roi,
    params: &EvalParams,
) -> Result<EvalReport> {
    if !(params.gate > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gate must be positive, got {}",
            params.gate
        )));
    }
    let (lo, hi) = truth
        .time_span()
        .ok_or_else(|| Error::EmptyInput("ground truth has no entries".into()))?;

    let objects = filter_roi(objects, roi);
    let timed: Vec<&ObjectDetection> = objects
        .detections()
        .iter()
        .filter(|d| d.timestamp.is_some())
        .filter(|d| params.include_static || d.kind == ObjectKind::Dynamic)
        .collect();
    let untimed: Vec<&ObjectDetection> = if params.include_static {
        objects
            .detections()
            .iter()
            .filter(|d| d.timestamp.is_none())
            .collect()
    } else {
        Vec::new()
    };

    let object_times = unique_sorted(timed.iter().filter_map(|d| d.timestamp).collect());
    if let Some(&t) = object_times
        .iter()
        .find(|&&t| t < lo - TIME_EPSILON || t > hi + TIME_EPSILON)
    {
        return Err(Error::TimestampMismatch(format!(
            "detections at t={t} fall outside the ground-truth span [{lo}, {hi}]"
        )));
    }
    if object_times.is_empty() {
        return Err(Error::TimestampMismatch(format!(
            "no detection timestamps overlap the ground-truth span [{lo}, {hi}]"
        )));
    }

    let frames = unique_sorted(
        object_times
            .iter()
            .copied()
            .chain(truth.entries.iter().map(|e| e.timestamp))
            .collect(),
    );
    let relevant = GroundTruth::new(
        truth
            .entries
            .iter()
            .filter(|e| params.include_static || !e.is_static)
            .cloned()
            .collect(),
    );
    let interpolated = interpolate_ground_truth(&relevant, &frames);

    let mut report = EvalReport {
        tp: 0,
        fp: 0,
        fn_: 0,
        precision: Ratio { value: 0.0, defined: false },
        recall: Ratio { value: 0.0, defined: false },
        f1: Ratio { value: 0.0, defined: false },
        gate: params.gate,
        include_static: params.include_static,
        frames: Vec::with_capacity(frames.len()),
    };
    let mut det_cursor = 0;
    let mut truth_cursor = 0;
    for &t in &frames {
        while det_cursor < timed.len() && timed[det_cursor].timestamp.unwrap() < t - TIME_EPSILON {
            det_cursor += 1;
        }
        let mut dets: Vec<[f64; 2]> = Vec::new();
        while det_cursor < timed.len()
            && (timed[det_cursor].timestamp.unwrap() - t).abs() <= TIME_EPSILON
        {
            let d = timed[det_cursor];
            dets.push([d.centroid_east, d.centroid_north]);
            det_cursor += 1;
        }
        dets.extend(untimed.iter().map(|d| [d.centroid_east, d.centroid_north]));

        let mut truths: Vec<[f64; 2]> = Vec::new();
        while truth_cursor < interpolated.entries.len()
            && (interpolated.entries[truth_cursor].timestamp - t).abs() <= TIME_EPSILON
        {
            let e = &interpolated.entries[truth_cursor];
            if roi.contains(e.x, e.y) {
                truths.push([e.x, e.y]);
            }
            truth_cursor += 1;
        }

        let assoc = associate(&dets, &truths, params.gate)?;
        let counts = FrameCounts {
            timestamp: t,
            detections: dets.len(),
            truths: truths.len(),
            tp: assoc.matches.len(),
            fp: assoc.unmatched_detections.len(),
            fn_: assoc.unmatched_truths.len(),
        };
        report.tp += counts.tp;
        report.fp += counts.fp;
        report.fn_ += counts.fn_;
        report.frames.push(counts);
    }
    let (p, r, f) = EvalReport::from_counts(report.tp, report.fp, report.fn_, params.zero_denominator);
    report.precision = p;
    report.recall = r;
    report.f1 = f;
    Ok(report)
}
