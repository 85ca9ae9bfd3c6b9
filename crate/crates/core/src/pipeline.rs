//! Dataset ingestion and the three-pass pipeline.
//!
//! 1. Every frame is read once to find the observed area and fix the map
//!    geometry.
//! 2. Frames are segmented and projected into per-agent evidence; the
//!    evidence of each time step is accumulated into the cell histories and
//!    the background map is classified.
//! 3. Each time step's fused observation is combined with the map and
//!    dynamic objects are extracted from the filtered grid.
//!
//! A dataset directory holds `agents/<id>/poses.csv` and
//! `agents/<id>/*.evpc` for each agent, and optionally `truth.csv` and
//! `roi.csv`.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::background::{deduce_extent, BackgroundBuilder};
use crate::config::{Accumulation, PipelineConfig};
use crate::error::{Error, Result};
use crate::evidential::MassFunction;
use crate::fusion::{fuse_frame, FilteredGrid};
use crate::grid::{EvidentialGrid, Extent, GridGeometry, Pose};
use crate::io;
use crate::objects::{extract_objects, ObjectDetection, ObjectKind, ObjectSet};
use crate::observation::{project_evidence, refine_labels, segment_ground, CellEvidence, FrameBundle};

pub const BACKGROUND_FILE: &str = "background.evgr";
pub const OBJECTS_FILE: &str = "objects.csv";
pub const FILTERED_DIR: &str = "filtered";

/// File name of the filtered grid at time `t`.
pub fn filtered_file_name(t: f64) -> String {
    format!("filtered_{:012}.evgr", (t * 1e9).round() as u64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameRef {
    pub timestamp: f64,
    pub path: PathBuf,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgentTrack {
    pub id: String,
    pub poses: Vec<Pose>,
    /// Sorted by timestamp.
    pub frames: Vec<FrameRef>,
}

/// Frames of several agents sharing one time step.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeStep {
    /// Earliest frame timestamp of the step.
    pub timestamp: f64,
    /// `(agent index, frame index)` pairs in agent order.
    pub members: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub root: PathBuf,
    /// Sorted by id.
    pub agents: Vec<AgentTrack>,
}

fn read_frame_timestamp(path: &Path) -> Result<f64> {
    use std::io::Read;
    let mut header = [0u8; io::FRAME_HEADER_LEN];
    let mut f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    f.read_exact(&mut header).map_err(|_| Error::Format {
        path: path.to_path_buf(),
        offset: 0,
        message: "file shorter than the EVPC header".into(),
    })?;
    if &header[0..4] != io::FRAME_MAGIC {
        return Err(Error::Format {
            path: path.to_path_buf(),
            offset: 0,
            message: "not an EVPC frame (bad magic)".into(),
        });
    }
    Ok(f64::from_le_bytes(header[8..16].try_into().expect("8 bytes")))
}

impl Dataset {
    pub fn open(root: &Path) -> Result<Dataset> {
        let agents_dir = root.join("agents");
        let entries = fs::read_dir(&agents_dir).map_err(|e| Error::io(&agents_dir, e))?;
        let mut dirs: Vec<PathBuf> = Vec::new();
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(&agents_dir, e))?;
            if entry.path().is_dir() {
                dirs.push(entry.path());
            }
        }
        dirs.sort();
        let mut agents = Vec::new();
        for dir in dirs {
            let id = dir.file_name().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            let pose_path = dir.join("poses.csv");
            let file = fs::File::open(&pose_path).map_err(|e| Error::io(&pose_path, e))?;
            let poses = io::read_poses(std::io::BufReader::new(file), &pose_path)?;
            let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
                .map_err(|e| Error::io(&dir, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "evpc"))
                .collect();
            paths.sort();
            let mut frames = paths
                .into_iter()
                .map(|path| Ok(FrameRef { timestamp: read_frame_timestamp(&path)?, path }))
                .collect::<Result<Vec<_>>>()?;
            frames.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
            if !frames.is_empty() {
                agents.push(AgentTrack { id, poses, frames });
            }
        }
        if agents.is_empty() {
            return Err(Error::EmptyInput(format!(
                "{}: dataset contains no agent frames",
                root.display()
            )));
        }
        Ok(Dataset {
            root: root.to_path_buf(),
            agents,
        })
    }

    pub fn frame_count(&self) -> usize {
        self.agents.iter().map(|a| a.frames.len()).sum()
    }

    /// Groups frames whose timestamps lie within `tolerance` of the first
    /// frame of the group.
    pub fn time_steps(&self, tolerance: f64) -> Vec<TimeStep> {
        let mut all: Vec<(f64, usize, usize)> = self
            .agents
            .iter()
            .enumerate()
            .flat_map(|(a, track)| track.frames.iter().enumerate().map(move |(f, fr)| (fr.timestamp, a, f)))
            .collect();
        all.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        let mut steps: Vec<TimeStep> = Vec::new();
        for (t, a, f) in all {
            match steps.last_mut() {
                Some(step) if t - step.timestamp <= tolerance => step.members.push((a, f)),
                _ => steps.push(TimeStep {
                    timestamp: t,
                    members: vec![(a, f)],
                }),
            }
        }
        for step in &mut steps {
            step.members.sort();
        }
        steps
    }

    /// Reads a frame and attaches the agent's pose at the frame time.
    pub fn load_frame(&self, agent: usize, frame: usize, sync_tolerance: f64) -> Result<FrameBundle> {
        let track = &self.agents[agent];
        let fr = &track.frames[frame];
        let data = io::read_frame(&fr.path)?;
        let i = track.poses.partition_point(|p| p.timestamp < data.timestamp);
        let nearest = [i.checked_sub(1), Some(i)]
            .into_iter()
            .flatten()
            .filter_map(|k| track.poses.get(k))
            .min_by(|a, b| {
                (a.timestamp - data.timestamp)
                    .abs()
                    .total_cmp(&(b.timestamp - data.timestamp).abs())
            })
            .copied()
            .ok_or_else(|| Error::TimestampMismatch(format!("agent {} has no poses", track.id)))?;
        let bundle = FrameBundle {
            agent_id: track.id.clone(),
            timestamp: data.timestamp,
            pose: nearest,
            points: data.points,
            classes: data.classes,
        };
        bundle.validate(sync_tolerance).map_err(|e| match e {
            Error::TimestampMismatch(m) => Error::TimestampMismatch(format!("{}: {m}", fr.path.display())),
            other => other,
        })?;
        Ok(bundle)
    }
}

/// First pass: the map geometry covering every in-range return.
pub fn deduce_geometry(dataset: &Dataset, config: &PipelineConfig) -> Result<GridGeometry> {
    let jobs: Vec<(usize, usize)> = dataset
        .agents
        .iter()
        .enumerate()
        .flat_map(|(a, t)| (0..t.frames.len()).map(move |f| (a, f)))
        .collect();
    let seg = &config.segmentation;
    let extents: Vec<Option<Extent>> = jobs
        .par_iter()
        .map(|&(a, f)| {
            let frame = dataset.load_frame(a, f, config.sync_tolerance)?;
            let height = seg.sensor_height.unwrap_or(frame.pose.up);
            let mut extent: Option<Extent> = None;
            for p in &frame.points {
                if p[0].hypot(p[1]) > seg.max_range || p[2] + height < seg.min_relative_height {
                    continue;
                }
                let w = frame.pose.apply(p);
                match &mut extent {
                    Some(e) => e.include(w[0], w[1]),
                    None => extent = Some(Extent::new(w[0], w[1], w[0], w[1])),
                }
            }
            Ok(extent)
        })
        .collect::<Result<_>>()?;
    deduce_extent(extents.into_iter().flatten(), config.margin, config.resolution)
}

/// Sparse per-agent evidence of every time step.
#[derive(Clone, Debug, Default)]
pub struct Observations {
    pub steps: Vec<ObservedStep>,
}

#[derive(Clone, Debug)]
pub struct ObservedStep {
    pub timestamp: f64,
    /// One entry per agent frame, in agent order.
    pub evidence: Vec<CellEvidence>,
}

/// Segments and projects every frame of the dataset.
pub fn observe(dataset: &Dataset, geometry: &GridGeometry, config: &PipelineConfig) -> Result<Observations> {
    config.validate()?;
    let steps = dataset.time_steps(config.sync_tolerance);
    let observed = steps
        .par_iter()
        .map(|step| {
            let evidence = step
                .members
                .iter()
                .map(|&(a, f)| {
                    let frame = dataset.load_frame(a, f, config.sync_tolerance)?;
                    let labels = segment_ground(&frame, &config.segmentation)?;
                    let labels = if config.refine_with_classes {
                        refine_labels(&labels, frame.classes.as_deref())?
                    } else {
                        labels
                    };
                    project_evidence(&frame.world_points(), &labels, geometry, &config.observation)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(ObservedStep {
                timestamp: step.timestamp,
                evidence,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Observations { steps: observed })
}

/// Reusable dense grid holding one time step's fused observation.
struct Scratch {
    grid: EvidentialGrid,
    touched: Vec<u32>,
}

impl Scratch {
    fn new(geometry: GridGeometry) -> Self {
        Scratch {
            grid: EvidentialGrid::vacuous(geometry, None),
            touched: Vec::new(),
        }
    }

    fn load<'a>(
        &mut self,
        timestamp: f64,
        evidence: impl IntoIterator<Item = &'a CellEvidence>,
        config: &PipelineConfig,
    ) -> &EvidentialGrid {
        let cells = self.grid.cells_mut();
        for &i in &self.touched {
            cells[i as usize] = MassFunction::vacuous();
        }
        self.touched.clear();
        for e in evidence {
            e.combine_into(&mut self.grid, &config.observation);
            self.touched.extend(e.cells.iter().map(|c| c.0));
        }
        self.grid.timestamp = Some(timestamp);
        &self.grid
    }
}

/// Second pass: accumulates every time step into the cell histories.
pub fn accumulate(
    observations: &Observations,
    geometry: &GridGeometry,
    config: &PipelineConfig,
) -> Result<BackgroundBuilder> {
    let mut builder = BackgroundBuilder::new(*geometry, config.background.vacuous_breaks_runs);
    let mut scratch = Scratch::new(*geometry);
    for step in &observations.steps {
        match config.accumulation {
            Accumulation::Fused => builder.push(scratch.load(step.timestamp, &step.evidence, config))?,
            Accumulation::PerAgent => {
                for e in &step.evidence {
                    builder.push(scratch.load(step.timestamp, [e], config))?;
                }
            }
        }
    }
    Ok(builder)
}

/// Third pass for one time step.
fn filter_step(
    step: &ObservedStep,
    background: &EvidentialGrid,
    config: &PipelineConfig,
    scratch: &mut Scratch,
) -> Result<(FilteredGrid, Vec<ObjectDetection>)> {
    let obs = scratch.load(step.timestamp, &step.evidence, config);
    let filtered = fuse_frame(background, obs)?;
    let objects = extract_objects(&filtered.grid, ObjectKind::Dynamic, config.eps(), config.dbscan.min_pts)?;
    Ok((filtered, objects))
}

/// Third pass: fuses every time step with the map and extracts objects.
/// `sink` receives the filtered grid of every `filtered_stride`-th step.
pub fn fuse_and_extract(
    observations: &Observations,
    background: &EvidentialGrid,
    config: &PipelineConfig,
    sink: impl Fn(usize, &FilteredGrid) -> Result<()> + Sync,
) -> Result<ObjectSet> {
    let geometry = *background.geometry();
    let mut detections = extract_objects(background, ObjectKind::Static, config.eps(), config.dbscan.min_pts)?;
    let stride = config.filtered_stride;
    let per_step: Vec<Vec<ObjectDetection>> = observations
        .steps
        .par_iter()
        .enumerate()
        .map_init(
            || Scratch::new(geometry),
            |scratch, (k, step)| {
                let (filtered, objects) = filter_step(step, background, config, scratch)?;
                if stride > 0 && k % stride == 0 {
                    sink(k, &filtered)?;
                }
                Ok(objects)
            },
        )
        .collect::<Result<_>>()?;
    detections.extend(per_step.into_iter().flatten());
    Ok(ObjectSet::new(detections))
}

/// Counts reported by [`run_pipeline`].
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineSummary {
    pub geometry: GridGeometry,
    pub agents: usize,
    pub frames: usize,
    pub time_steps: usize,
    pub static_objects: usize,
    pub dynamic_objects: usize,
    pub filtered_grids: usize,
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_objects(path: &Path, objects: &ObjectSet) -> Result<()> {
    let mut buf = Vec::new();
    objects.write_csv(&mut buf)?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

fn write_filtered(out_dir: &Path, observations: &Observations, background: &EvidentialGrid, config: &PipelineConfig) -> Result<(ObjectSet, usize)> {
    let filtered_dir = out_dir.join(FILTERED_DIR);
    if config.filtered_stride > 0 {
        create_dir(&filtered_dir)?;
    }
    let objects = fuse_and_extract(observations, background, config, |_, f| {
        let t = f.timestamp().unwrap_or_default();
        io::write_grid(&filtered_dir.join(filtered_file_name(t)), &f.grid)
    })?;
    let written = match config.filtered_stride {
        0 => 0,
        s => observations.steps.len().div_ceil(s),
    };
    write_objects(&out_dir.join(OBJECTS_FILE), &objects)?;
    Ok((objects, written))
}

/// Runs all three passes on a dataset directory and writes
/// `background.evgr`, `filtered/filtered_<ns>.evgr` and `objects.csv`.
pub fn run_pipeline(dataset_dir: &Path, config: &PipelineConfig, out_dir: &Path) -> Result<PipelineSummary> {
    config.validate()?;
    crate::config::with_threads(config.threads, || {
        let dataset = Dataset::open(dataset_dir)?;
        let geometry = deduce_geometry(&dataset, config)?;
        let observations = observe(&dataset, &geometry, config)?;
        let builder = accumulate(&observations, &geometry, config)?;
        let background = builder.classify(&config.background)?;
        drop(builder);
        create_dir(out_dir)?;
        io::write_grid(&out_dir.join(BACKGROUND_FILE), &background)?;
        let (objects, filtered_grids) = write_filtered(out_dir, &observations, &background, config)?;
        Ok(PipelineSummary {
            geometry,
            agents: dataset.agents.len(),
            frames: dataset.frame_count(),
            time_steps: observations.steps.len(),
            static_objects: objects.of_kind(ObjectKind::Static).count(),
            dynamic_objects: objects.of_kind(ObjectKind::Dynamic).count(),
            filtered_grids,
        })
    })?
}

/// First and second pass only; writes `background.evgr`.
pub fn run_map(dataset_dir: &Path, config: &PipelineConfig, out_dir: &Path) -> Result<EvidentialGrid> {
    config.validate()?;
    crate::config::with_threads(config.threads, || {
        let dataset = Dataset::open(dataset_dir)?;
        let geometry = deduce_geometry(&dataset, config)?;
        let observations = observe(&dataset, &geometry, config)?;
        let background = accumulate(&observations, &geometry, config)?.classify(&config.background)?;
        create_dir(out_dir)?;
        io::write_grid(&out_dir.join(BACKGROUND_FILE), &background)?;
        Ok(background)
    })?
}

/// Third pass against an existing background map; writes the filtered
/// grids and `objects.csv`.
pub fn run_fuse(dataset_dir: &Path, background_path: &Path, config: &PipelineConfig, out_dir: &Path) -> Result<ObjectSet> {
    config.validate()?;
    crate::config::with_threads(config.threads, || {
        let dataset = Dataset::open(dataset_dir)?;
        let background = io::read_grid(background_path)?;
        let observations = observe(&dataset, background.geometry(), config)?;
        create_dir(out_dir)?;
        Ok(write_filtered(out_dir, &observations, &background, config)?.0)
    })?
}
