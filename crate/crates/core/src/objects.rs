//! Object extraction: DBSCAN over static cells of the background map or
//! dynamic cells of a filtered grid.

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evidential::Hypothesis;
use crate::grid::{CellIndex, EvidentialGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectKind {
    Static,
    Dynamic,
}

impl ObjectKind {
    fn label(self) -> Hypothesis {
        match self {
            ObjectKind::Static => Hypothesis::S,
            ObjectKind::Dynamic => Hypothesis::D,
        }
    }
}

/// Cells whose dominant label is `S` (static) or `D` (dynamic).
pub fn select_cells(grid: &EvidentialGrid, kind: ObjectKind) -> Vec<CellIndex> {
    let target = kind.label();
    let geometry = grid.geometry();
    grid.cells()
        .iter()
        .enumerate()
        .filter(|(_, m)| !m.is_vacuous() && m.dominant_label() == target)
        .map(|(i, _)| geometry.cell_at(i))
        .collect()
}

/// DBSCAN output. `labels[i]` is the cluster of point `i`, `None` for noise.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Clustering {
    pub labels: Vec<Option<usize>>,
    pub clusters: Vec<Vec<usize>>,
    pub noise: Vec<usize>,
}

/// Density-based clustering of 2D points.
///
/// A point is core when at least `min_pts` points (itself included) lie
/// within `eps`. Clusters are numbered in scan order of their first core
/// point. A border point reachable from several clusters joins the first one
/// to reach it, i.e. the lowest-numbered cluster.
pub fn dbscan(points: &[[f64; 2]], eps: f64, min_pts: usize) -> Result<Clustering> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    if min_pts == 0 {
        return Err(Error::InvalidParameter("min_pts must be at least 1".into()));
    }
    let eps2 = eps * eps;
    let bucket = |p: &[f64; 2]| ((p[0] / eps).floor() as i64, (p[1] / eps).floor() as i64);
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        buckets.entry(bucket(p)).or_default().push(i);
    }
    let neighbors = |i: usize, out: &mut Vec<usize>| {
        out.clear();
        let p = points[i];
        let (bx, by) = bucket(&p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(members) = buckets.get(&(bx + dx, by + dy)) {
                    for &j in members {
                        let q = points[j];
                        let d2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
                        if d2 <= eps2 {
                            out.push(j);
                        }
                    }
                }
            }
        }
    };

    let n = points.len();
    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut visited = vec![false; n];
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut hood = Vec::new();
    let mut queue = std::collections::VecDeque::new();
    for i in 0..n {
        if visited[i] {
            continue;
        }
        neighbors(i, &mut hood);
        if hood.len() < min_pts {
            // Tentatively noise; may become a border point later.
            continue;
        }
        let c = clusters.len();
        clusters.push(Vec::new());
        visited[i] = true;
        labels[i] = Some(c);
        queue.extend(hood.iter().copied());
        while let Some(q) = queue.pop_front() {
            if labels[q].is_none() {
                labels[q] = Some(c);
            }
            if visited[q] {
                continue;
            }
            visited[q] = true;
            neighbors(q, &mut hood);
            if hood.len() >= min_pts {
                queue.extend(hood.iter().copied().filter(|&r| !visited[r]));
            }
        }
    }
    let mut noise = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        match l {
            Some(c) => clusters[*c].push(i),
            None => noise.push(i),
        }
    }
    Ok(Clustering {
        labels,
        clusters,
        noise,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectDetection {
    /// `None` for objects of the time-independent background map.
    pub timestamp: Option<f64>,
    pub kind: ObjectKind,
    pub centroid_east: f64,
    pub centroid_north: f64,
    pub cell_count: usize,
}

/// Clusters the selected cells of `grid` and returns one detection per
/// cluster, ordered by centroid `(east, north)`.
pub fn extract_objects(
    grid: &EvidentialGrid,
    kind: ObjectKind,
    eps: f64,
    min_pts: usize,
) -> Result<Vec<ObjectDetection>> {
    let geometry = grid.geometry();
    let centers: Vec<[f64; 2]> = select_cells(grid, kind)
        .into_iter()
        .map(|c| {
            let (e, n) = geometry.cell_center(c);
            [e, n]
        })
        .collect();
    let clustering = dbscan(&centers, eps, min_pts)?;
    let mut detections: Vec<ObjectDetection> = clustering
        .clusters
        .iter()
        .map(|members| {
            let k = members.len() as f64;
            let (se, sn) = members
                .iter()
                .fold((0.0, 0.0), |(e, n), &i| (e + centers[i][0], n + centers[i][1]));
            ObjectDetection {
                timestamp: grid.timestamp,
                kind,
                centroid_east: se / k,
                centroid_north: sn / k,
                cell_count: members.len(),
            }
        })
        .collect();
    detections.sort_by(|a, b| {
        a.centroid_east
            .total_cmp(&b.centroid_east)
            .then(a.centroid_north.total_cmp(&b.centroid_north))
    });
    Ok(detections)
}

const OBJECTS_HEADER: [&str; 5] = ["timestamp", "kind", "centroid_east", "centroid_north", "cell_count"];

/// Detections grouped by timestamp; time-independent detections first.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ObjectSet {
    detections: Vec<ObjectDetection>,
}

impl ObjectSet {
    pub fn new(mut detections: Vec<ObjectDetection>) -> Self {
        detections.sort_by(|a, b| match (a.timestamp, b.timestamp) {
            (None, None) => std::cmp::Ordering::Equal,
            (None, Some(_)) => std::cmp::Ordering::Less,
            (Some(_), None) => std::cmp::Ordering::Greater,
            (Some(x), Some(y)) => x.total_cmp(&y),
        });
        ObjectSet { detections }
    }

    pub fn detections(&self) -> &[ObjectDetection] {
        &self.detections
    }

    pub fn len(&self) -> usize {
        self.detections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detections.is_empty()
    }

    pub fn of_kind(&self, kind: ObjectKind) -> impl Iterator<Item = &ObjectDetection> {
        self.detections.iter().filter(move |d| d.kind == kind)
    }

    /// Writes `timestamp,kind,centroid_east,centroid_north,cell_count`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        w.write_record(OBJECTS_HEADER)
            .map_err(|e| Error::parse("objects.csv", e.to_string()))?;
        for d in &self.detections {
            w.serialize(d).map_err(|e| Error::parse("objects.csv", e.to_string()))?;
        }
        w.flush().map_err(|e| Error::io("objects.csv", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, source: &std::path::Path) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let expected = OBJECTS_HEADER;
        let headers = r
            .headers()
            .map_err(|e| Error::parse(source, e.to_string()))?
            .clone();
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::parse(
                source,
                format!("expected header {}, got {}", expected.join(","), headers.iter().collect::<Vec<_>>().join(",")),
            ));
        }
        let mut detections = Vec::new();
        for row in r.deserialize() {
            let d: ObjectDetection = row.map_err(|e| Error::parse(source, e.to_string()))?;
            detections.push(d);
        }
        Ok(ObjectSet::new(detections))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evidential::MassFunction;
    use crate::grid::GridGeometry;

    #[test]
    fn block_is_one_cluster() {
        let pts: Vec<[f64; 2]> = (0..10)
            .map(|k| [(k % 5) as f64 * 0.2, (k / 5) as f64 * 0.2])
            .collect();
        let c = dbscan(&pts, 0.5, 3).unwrap();
        assert_eq!(c.clusters.len(), 1);
        assert_eq!(c.clusters[0].len(), 10);
        assert!(c.noise.is_empty());
    }

    #[test]
    fn distant_blocks_are_separate() {
        let mut pts: Vec<[f64; 2]> = (0..10)
            .map(|k| [(k % 5) as f64 * 0.2, (k / 5) as f64 * 0.2])
            .collect();
        pts.extend((0..10).map(|k| [5.0 + (k % 5) as f64 * 0.2, (k / 5) as f64 * 0.2]));
        let c = dbscan(&pts, 0.5, 3).unwrap();
        assert_eq!(c.clusters.len(), 2);
        assert_eq!(c.labels[0], Some(0));
        assert_eq!(c.labels[10], Some(1));
    }

    #[test]
    fn isolated_point_is_noise() {
        let c = dbscan(&[[0.0, 0.0]], 0.5, 3).unwrap();
        assert!(c.clusters.is_empty());
        assert_eq!(c.noise, vec![0]);
        assert!(dbscan(&[[0.0, 0.0]], 0.0, 3).is_err());
        assert!(dbscan(&[[0.0, 0.0]], 1.0, 0).is_err());
    }

    #[test]
    fn border_point_goes_to_first_cluster() {
        // Two dense groups sharing a border point in the middle.
        let pts = vec![
            [0.0, 0.0], [0.1, 0.0], [0.2, 0.0],
            [0.7, 0.0],
            [1.2, 0.0], [1.3, 0.0], [1.4, 0.0],
        ];
        let c = dbscan(&pts, 0.5, 4).unwrap();
        assert_eq!(c.clusters.len(), 2);
        assert_eq!(c.labels[3], Some(0));
    }

    fn grid_with(cells: &[(u32, u32, Hypothesis)], t: Option<f64>) -> EvidentialGrid {
        let g = GridGeometry::new(10.0, 2.1, 0.2, 100, 50).unwrap();
        let mut grid = EvidentialGrid::vacuous(g, t);
        for &(col, row, h) in cells {
            grid.set(CellIndex { col, row }, MassFunction::categorical(h).unwrap());
        }
        grid
    }

    #[test]
    fn extraction_centroid_and_order() {
        let mut cells = Vec::new();
        // 5x2 block with centers averaging (12.3, 4.5): cols 9..14, rows 11..13
        for col in 9..14 {
            for row in 11..13 {
                cells.push((col, row, Hypothesis::D));
            }
        }
        // second block further west
        for col in 0..3 {
            for row in 0..2 {
                cells.push((col, row, Hypothesis::D));
            }
        }
        let grid = grid_with(&cells, Some(1.5));
        let dets = extract_objects(&grid, ObjectKind::Dynamic, 0.6, 4).unwrap();
        assert_eq!(dets.len(), 2);
        assert!(dets[0].centroid_east < dets[1].centroid_east);
        let d = &dets[1];
        assert!((d.centroid_east - 12.3).abs() < 1e-9, "{}", d.centroid_east);
        assert!((d.centroid_north - 4.5).abs() < 1e-9, "{}", d.centroid_north);
        assert_eq!(d.cell_count, 10);
        assert_eq!(d.timestamp, Some(1.5));
        assert!(extract_objects(&grid, ObjectKind::Static, 0.6, 4).unwrap().is_empty());
    }

    #[test]
    fn selection_modes() {
        let grid = grid_with(&[(1, 1, Hypothesis::S), (2, 2, Hypothesis::D), (3, 3, Hypothesis::P)], None);
        assert_eq!(select_cells(&grid, ObjectKind::Static), vec![CellIndex { col: 1, row: 1 }]);
        assert_eq!(select_cells(&grid, ObjectKind::Dynamic), vec![CellIndex { col: 2, row: 2 }]);
        assert!(select_cells(&grid_with(&[], None), ObjectKind::Dynamic).is_empty());
    }

    #[test]
    fn csv_round_trip() {
        let set = ObjectSet::new(vec![
            ObjectDetection {
                timestamp: Some(0.1),
                kind: ObjectKind::Dynamic,
                centroid_east: 1.5,
                centroid_north: -2.25,
                cell_count: 7,
            },
            ObjectDetection {
                timestamp: None,
                kind: ObjectKind::Static,
                centroid_east: 3.0,
                centroid_north: 4.0,
                cell_count: 12,
            },
        ]);
        let mut buf = Vec::new();
        set.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("timestamp,kind,centroid_east,centroid_north,cell_count\n,static,"));
        let back = ObjectSet::read_csv(buf.as_slice(), std::path::Path::new("x")).unwrap();
        assert_eq!(back, set);
    }

    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn lattice_points() -> impl Strategy<Value = Vec<[f64; 2]>> {
        proptest::collection::vec((0..20i32, 0..20i32), 0..60)
            .prop_map(|v| v.into_iter().map(|(x, y)| [x as f64 * 0.2, y as f64 * 0.2]).collect())
    }

    fn core_flags(pts: &[[f64; 2]], eps: f64, min_pts: usize) -> Vec<bool> {
        pts.iter()
            .map(|p| {
                pts.iter()
                    .filter(|q| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt() <= eps)
                    .count()
                    >= min_pts
            })
            .collect()
    }

    proptest! {
        #[test]
        fn clusters_and_noise_partition_the_input(pts in lattice_points(), min_pts in 1usize..6) {
            let c = dbscan(&pts, 0.6, min_pts).unwrap();
            let mut seen = vec![0; pts.len()];
            for (k, members) in c.clusters.iter().enumerate() {
                prop_assert!(!members.is_empty());
                for &i in members {
                    seen[i] += 1;
                    prop_assert_eq!(c.labels[i], Some(k));
                }
            }
            for &i in &c.noise {
                seen[i] += 1;
                prop_assert_eq!(c.labels[i], None);
            }
            prop_assert!(seen.iter().all(|&n| n == 1));
        }

        #[test]
        fn core_partition_ignores_input_order(pts in lattice_points(), min_pts in 1usize..6, seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut order: Vec<usize> = (0..pts.len()).collect();
            order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let shuffled: Vec<[f64; 2]> = order.iter().map(|&i| pts[i]).collect();
            let core = core_flags(&pts, 0.6, min_pts);
            let partition = |labels: &[Option<usize>], index: &dyn Fn(usize) -> usize| {
                let mut groups: std::collections::BTreeMap<usize, BTreeSet<usize>> = Default::default();
                for (i, l) in labels.iter().enumerate() {
                    if let Some(l) = l {
                        if core[index(i)] {
                            groups.entry(*l).or_default().insert(index(i));
                        }
                    }
                }
                groups.into_values().collect::<BTreeSet<_>>()
            };
            let a = dbscan(&pts, 0.6, min_pts).unwrap();
            let b = dbscan(&shuffled, 0.6, min_pts).unwrap();
            prop_assert_eq!(partition(&a.labels, &|i| i), partition(&b.labels, &|i| order[i]));
            // Noise does not depend on order either.
            let noise_a: BTreeSet<usize> = a.noise.iter().copied().collect();
            let noise_b: BTreeSet<usize> = b.noise.iter().map(|&i| order[i]).collect();
            prop_assert_eq!(noise_a, noise_b);
        }

        #[test]
        fn centroids_lie_in_member_bounding_boxes(cells in proptest::collection::btree_set((0u32..15, 0u32..15), 0..80)) {
            let g = GridGeometry::new(0.0, 0.0, 0.2, 15, 15).unwrap();
            let mut grid = EvidentialGrid::vacuous(g, Some(1.0));
            for &(col, row) in &cells {
                grid.set(CellIndex { col, row }, MassFunction::categorical(Hypothesis::D).unwrap());
            }
            let detections = extract_objects(&grid, ObjectKind::Dynamic, 0.6, 3).unwrap();
            let centers: Vec<[f64; 2]> = select_cells(&grid, ObjectKind::Dynamic)
                .into_iter()
                .map(|c| { let (e, n) = g.cell_center(c); [e, n] })
                .collect();
            let clusters = dbscan(&centers, 0.6, 3).unwrap().clusters;
            prop_assert_eq!(detections.len(), clusters.len());
            for d in &detections {
                let inside = clusters.iter().filter(|m| m.len() == d.cell_count).any(|m| {
                    let xs = m.iter().map(|&i| centers[i][0]);
                    let ys = m.iter().map(|&i| centers[i][1]);
                    let (x0, x1) = xs.fold((f64::MAX, f64::MIN), |(a, b), x| (a.min(x), b.max(x)));
                    let (y0, y1) = ys.fold((f64::MAX, f64::MIN), |(a, b), y| (a.min(y), b.max(y)));
                    (x0 - 1e-9..=x1 + 1e-9).contains(&d.centroid_east) && (y0 - 1e-9..=y1 + 1e-9).contains(&d.centroid_north)
                });
                prop_assert!(inside, "{:?}", d);
            }
        }
    }
}
