//! Sequence-wide background map.
//!
//! Construction takes two passes over the recording. The first deduces a map
//! extent wide enough for every observation. The second discretizes each
//! cell's non-vacuous observations into a [`CellHistory`], measures the
//! longest consecutive runs of free, immovable and static-candidate labels and
//! classifies the cell as passable `P`, immovable `I`, static `S` or unknown
//! `Θ`:
//!
//! ```text
//! P  if w_f >= t_f
//! I  else if w_occ >= t_o and w_i >= w_s
//! S  else if w_occ >= t_o and w_s >  w_i
//! Θ  otherwise
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evidential::{Decision, Hypothesis, MassFunction};
use crate::grid::{EvidentialGrid, Extent, GridGeometry};

/// Discretized observation stored in a [`CellHistory`], one byte each.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum ObservedLabel {
    Free = 0,
    Immovable = 1,
    /// Movable or unclassified occupancy.
    StaticCandidate = 2,
    /// Run separator, only recorded when vacuous observations break runs.
    Gap = 3,
}

impl ObservedLabel {
    /// Label recorded for an observed mass, or `None` when the observation is
    /// not appendable (vacuous, conflicting, or a composite such as `P`).
    pub fn from_mass(m: &MassFunction) -> Option<ObservedLabel> {
        if m.is_vacuous() {
            return None;
        }
        match m.decide() {
            Decision::Conflict => None,
            Decision::Label(h) => match h {
                Hypothesis::F => Some(ObservedLabel::Free),
                Hypothesis::I => Some(ObservedLabel::Immovable),
                Hypothesis::M | Hypothesis::O => Some(ObservedLabel::StaticCandidate),
                _ => None,
            },
        }
    }
}

/// Time-ordered labels observed in one cell.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CellHistory {
    labels: Vec<ObservedLabel>,
}

impl CellHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_labels(labels: Vec<ObservedLabel>) -> Self {
        CellHistory { labels }
    }

    pub fn labels(&self) -> &[ObservedLabel] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn push(&mut self, label: ObservedLabel) {
        self.labels.push(label);
    }

    /// Appends the label of `obs`. Vacuous and non-appendable observations
    /// leave the history unchanged.
    pub fn accumulate(&mut self, obs: &MassFunction) {
        if let Some(label) = ObservedLabel::from_mass(obs) {
            self.labels.push(label);
        }
    }

    /// Majority filter over a centered odd window; ties and gaps keep the
    /// original label.
    pub fn smoothed(&self, window: usize) -> CellHistory {
        if window <= 1 || self.labels.len() < 2 {
            return self.clone();
        }
        let half = window / 2;
        let n = self.labels.len();
        let labels = (0..n)
            .map(|i| {
                let own = self.labels[i];
                if own == ObservedLabel::Gap {
                    return own;
                }
                let lo = i.saturating_sub(half);
                let hi = (i + half + 1).min(n);
                let mut counts = [0usize; 3];
                for l in &self.labels[lo..hi] {
                    if *l != ObservedLabel::Gap {
                        counts[*l as usize] += 1;
                    }
                }
                let max = *counts.iter().max().unwrap();
                let winners: Vec<usize> = (0..3).filter(|&k| counts[k] == max).collect();
                match winners.as_slice() {
                    [only] => match only {
                        0 => ObservedLabel::Free,
                        1 => ObservedLabel::Immovable,
                        _ => ObservedLabel::StaticCandidate,
                    },
                    _ => own,
                }
            })
            .collect();
        CellHistory { labels }
    }
}

/// Pure form of [`CellHistory::accumulate`].
pub fn accumulate(history: &CellHistory, obs: &MassFunction) -> CellHistory {
    let mut out = history.clone();
    out.accumulate(obs);
    out
}

/// Longest consecutive runs in a [`CellHistory`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct RunLengths {
    pub w_f: u32,
    pub w_i: u32,
    pub w_s: u32,
    /// Longest run of occupied labels of either kind.
    pub w_occ: u32,
}

pub fn run_lengths(history: &CellHistory) -> RunLengths {
    let mut best = RunLengths::default();
    let (mut f, mut i, mut s, mut occ) = (0u32, 0u32, 0u32, 0u32);
    for label in history.labels() {
        match label {
            ObservedLabel::Free => {
                f += 1;
                i = 0;
                s = 0;
                occ = 0;
            }
            ObservedLabel::Immovable => {
                f = 0;
                i += 1;
                s = 0;
                occ += 1;
            }
            ObservedLabel::StaticCandidate => {
                f = 0;
                i = 0;
                s += 1;
                occ += 1;
            }
            ObservedLabel::Gap => {
                f = 0;
                i = 0;
                s = 0;
                occ = 0;
            }
        }
        best.w_f = best.w_f.max(f);
        best.w_i = best.w_i.max(i);
        best.w_s = best.w_s.max(s);
        best.w_occ = best.w_occ.max(occ);
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapThresholds {
    /// Minimum consecutive free observations for a passable cell.
    pub t_f: u32,
    /// Minimum consecutive occupied observations for an occupied cell.
    pub t_o: u32,
}

impl Default for MapThresholds {
    fn default() -> Self {
        MapThresholds { t_f: 30, t_o: 5 }
    }
}

impl MapThresholds {
    pub fn new(t_f: u32, t_o: u32) -> Result<Self> {
        let t = MapThresholds { t_f, t_o };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_f == 0 || self.t_o == 0 {
            return Err(Error::InvalidParameter(format!(
                "thresholds must be at least 1, got t_f={} t_o={}",
                self.t_f, self.t_o
            )));
        }
        Ok(())
    }
}

/// How the occupancy run compared against `t_o` is measured.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    /// Longest run over merged immovable and static-candidate labels.
    #[default]
    Merged,
    /// Sum of the longest immovable run and the longest static run.
    Sum,
}

/// Classification with the merged occupancy run.
pub fn classify_cell(runs: &RunLengths, thresholds: &MapThresholds) -> Hypothesis {
    classify_cell_with(runs, thresholds, RunMode::Merged)
}

pub fn classify_cell_with(
    runs: &RunLengths,
    thresholds: &MapThresholds,
    mode: RunMode,
) -> Hypothesis {
    let occupied = match mode {
        RunMode::Merged => runs.w_occ,
        RunMode::Sum => runs.w_i + runs.w_s,
    };
    if runs.w_f >= thresholds.t_f {
        Hypothesis::P
    } else if occupied >= thresholds.t_o && runs.w_i >= runs.w_s {
        Hypothesis::I
    } else if occupied >= thresholds.t_o && runs.w_s > runs.w_i {
        Hypothesis::S
    } else {
        Hypothesis::THETA
    }
}

/// Smallest geometry containing every observation extent plus `margin`.
pub fn deduce_extent(
    extents: impl IntoIterator<Item = Extent>,
    margin: f64,
    resolution: f64,
) -> Result<GridGeometry> {
    let union = extents
        .into_iter()
        .reduce(|a, b| a.union(&b))
        .ok_or_else(|| Error::EmptyInput("cannot deduce a map extent from no observations".into()))?;
    GridGeometry::covering(&union.padded(margin), resolution)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackgroundParams {
    pub t_f: u32,
    pub t_o: u32,
    pub run_mode: RunMode,
    /// Odd majority-filter window applied to histories; 1 disables it.
    pub smoothing_window: usize,
    /// When set, an unobserved time step interrupts all runs of a cell.
    pub vacuous_breaks_runs: bool,
}

impl Default for BackgroundParams {
    fn default() -> Self {
        let t = MapThresholds::default();
        BackgroundParams {
            t_f: t.t_f,
            t_o: t.t_o,
            run_mode: RunMode::Merged,
            smoothing_window: 1,
            vacuous_breaks_runs: false,
        }
    }
}

impl BackgroundParams {
    pub fn thresholds(&self) -> MapThresholds {
        MapThresholds {
            t_f: self.t_f,
            t_o: self.t_o,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.thresholds().validate()?;
        if self.smoothing_window == 0 || self.smoothing_window % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "smoothing_window must be odd, got {}",
                self.smoothing_window
            )));
        }
        Ok(())
    }
}

/// Streaming second pass of the background-map construction.
pub struct BackgroundBuilder {
    geometry: GridGeometry,
    vacuous_breaks_runs: bool,
    histories: Vec<CellHistory>,
    last_timestamp: Option<f64>,
    observations: usize,
}

impl BackgroundBuilder {
    pub fn new(geometry: GridGeometry, vacuous_breaks_runs: bool) -> Self {
        BackgroundBuilder {
            geometry,
            vacuous_breaks_runs,
            histories: vec![CellHistory::new(); geometry.cell_count()],
            last_timestamp: None,
            observations: 0,
        }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn histories(&self) -> &[CellHistory] {
        &self.histories
    }

    pub fn observation_count(&self) -> usize {
        self.observations
    }

    /// Accumulates one observation grid. Timestamps must not decrease.
    pub fn push(&mut self, obs: &EvidentialGrid) -> Result<()> {
        if obs.geometry() != &self.geometry {
            return Err(Error::GeometryMismatch);
        }
        if let Some(t) = obs.timestamp {
            if let Some(prev) = self.last_timestamp {
                if t < prev {
                    return Err(Error::UnsortedTimestamps { previous: prev, got: t });
                }
            }
            self.last_timestamp = Some(t);
        }
        for (history, cell) in self.histories.iter_mut().zip(obs.cells()) {
            if cell.is_vacuous() {
                if self.vacuous_breaks_runs
                    && history.labels.last().is_some_and(|l| *l != ObservedLabel::Gap)
                {
                    history.push(ObservedLabel::Gap);
                }
            } else {
                history.accumulate(cell);
            }
        }
        self.observations += 1;
        Ok(())
    }

    /// Per-cell run lengths after optional smoothing.
    pub fn run_lengths(&self, smoothing_window: usize) -> Vec<RunLengths> {
        self.histories
            .iter()
            .map(|h| {
                if smoothing_window > 1 {
                    run_lengths(&h.smoothed(smoothing_window))
                } else {
                    run_lengths(h)
                }
            })
            .collect()
    }

    /// Classifies every cell into the map frame.
    pub fn classify(&self, params: &BackgroundParams) -> Result<EvidentialGrid> {
        params.validate()?;
        let thresholds = params.thresholds();
        let cells = self
            .run_lengths(params.smoothing_window)
            .iter()
            .map(|runs| {
                let h = classify_cell_with(runs, &thresholds, params.run_mode);
                MassFunction::categorical_unchecked(h)
            })
            .collect();
        EvidentialGrid::from_cells(self.geometry, cells, None)
    }
}

/// Builds the background map from a time-sorted stream of observation grids.
pub fn build_background_map<'a>(
    observations: impl IntoIterator<Item = &'a EvidentialGrid>,
    params: &BackgroundParams,
    geometry: GridGeometry,
) -> Result<EvidentialGrid> {
    params.validate()?;
    let mut builder = BackgroundBuilder::new(geometry, params.vacuous_breaks_runs);
    for obs in observations {
        builder.push(obs)?;
    }
    builder.classify(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::CellIndex;
    use proptest::prelude::*;
    use ObservedLabel::*;

    fn cat(h: Hypothesis) -> MassFunction {
        MassFunction::categorical(h).unwrap()
    }

    fn history(s: &str) -> CellHistory {
        CellHistory::from_labels(
            s.chars()
                .map(|c| match c {
                    'F' => Free,
                    'I' => Immovable,
                    'S' => StaticCandidate,
                    _ => Gap,
                })
                .collect(),
        )
    }

    #[test]
    fn accumulate_examples() {
        let h = accumulate(&CellHistory::new(), &cat(Hypothesis::F));
        assert_eq!(h.labels(), &[Free]);
        let h2 = accumulate(&h, &MassFunction::vacuous());
        assert_eq!(h2.labels(), &[Free]);
        let h3 = accumulate(&h, &cat(Hypothesis::O));
        assert_eq!(h3.labels(), &[Free, StaticCandidate]);
        let h4 = accumulate(&h3, &cat(Hypothesis::M));
        assert_eq!(h4.labels(), &[Free, StaticCandidate, StaticCandidate]);
        assert_eq!(accumulate(&h, &cat(Hypothesis::I)).labels(), &[Free, Immovable]);
        // Composites and conflict are skipped.
        for m in [cat(Hypothesis::D), cat(Hypothesis::P), MassFunction::total_conflict()] {
            assert_eq!(accumulate(&h, &m), h);
        }
    }

    #[test]
    fn run_length_examples() {
        let r = run_lengths(&history(&"F".repeat(30)));
        assert_eq!(r, RunLengths { w_f: 30, w_i: 0, w_s: 0, w_occ: 0 });
        let r = run_lengths(&history("FFSFFF"));
        assert_eq!((r.w_f, r.w_occ), (3, 1));
        let r = run_lengths(&history("IISSS"));
        assert_eq!(r, RunLengths { w_f: 0, w_i: 2, w_s: 3, w_occ: 5 });
        let r = run_lengths(&history("FFF-FF"));
        assert_eq!(r.w_f, 3);
    }

    #[test]
    fn classify_examples() {
        let t = MapThresholds::default();
        assert_eq!((t.t_f, t.t_o), (30, 5));
        let p = RunLengths { w_f: 30, ..Default::default() };
        assert_eq!(classify_cell(&p, &t), Hypothesis::P);
        let tie = RunLengths { w_f: 0, w_i: 3, w_s: 3, w_occ: 6 };
        assert_eq!(classify_cell(&tie, &t), Hypothesis::I);
        let s = RunLengths { w_f: 10, w_i: 4, w_s: 16, w_occ: 20 };
        assert_eq!(classify_cell(&s, &t), Hypothesis::S);
        let i = RunLengths { w_f: 10, w_i: 16, w_s: 4, w_occ: 20 };
        assert_eq!(classify_cell(&i, &t), Hypothesis::I);
        let low = RunLengths { w_f: 29, w_i: 2, w_s: 2, w_occ: 4 };
        assert_eq!(classify_cell(&low, &t), Hypothesis::THETA);
    }

    #[test]
    fn sum_mode_adds_runs() {
        let t = MapThresholds::default();
        let r = run_lengths(&history("SSFSSS"));
        assert_eq!(r.w_occ, 3);
        assert_eq!(classify_cell(&r, &t), Hypothesis::THETA);
        let r2 = run_lengths(&history("IIFSSS"));
        assert_eq!(classify_cell_with(&r2, &t, RunMode::Sum), Hypothesis::S);
    }

    #[test]
    fn smoothing_removes_isolated_labels() {
        let h = history("FFFSFFF");
        assert_eq!(h.smoothed(3).labels(), history("FFFFFFF").labels());
        assert_eq!(h.smoothed(1), h);
    }

    #[test]
    fn thresholds_reject_zero() {
        assert!(MapThresholds::new(0, 5).is_err());
        assert!(MapThresholds::new(30, 0).is_err());
    }

    #[test]
    fn deduce_extent_examples() {
        let g = deduce_extent([Extent::new(0.0, 0.0, 100.0, 50.0)], 5.0, 0.2).unwrap();
        let e = g.extent();
        assert!((e.min_east + 5.0).abs() < 1e-9 && (e.min_north + 5.0).abs() < 1e-9);
        assert!((e.max_east - 105.0).abs() < 1e-9 && (e.max_north - 55.0).abs() < 1e-9);

        let g = deduce_extent(
            [Extent::new(0.0, 0.0, 10.0, 10.0), Extent::new(50.0, 60.0, 70.0, 80.0)],
            5.0,
            0.2,
        )
        .unwrap();
        assert!(g.extent().contains(&Extent::new(-5.0, -5.0, 75.0, 85.0)));
        assert!(deduce_extent(std::iter::empty(), 5.0, 0.2).is_err());
    }

    fn geom() -> GridGeometry {
        GridGeometry::new(0.0, 0.0, 1.0, 3, 1).unwrap()
    }

    fn obs(t: f64, cells: [Hypothesis; 3]) -> EvidentialGrid {
        EvidentialGrid::from_cells(geom(), cells.iter().map(|&h| cat(h)).collect(), Some(t))
            .unwrap()
    }

    #[test]
    fn background_map_examples() {
        use Hypothesis as H;
        let mut grids = Vec::new();
        for k in 0..40 {
            // cell 0 always free; cell 1 a parked car; cell 2 never observed
            grids.push(obs(k as f64, [H::F, H::M, H::THETA]));
        }
        let map = build_background_map(&grids, &BackgroundParams::default(), geom()).unwrap();
        let at = |c| map.get(CellIndex { col: c, row: 0 }).as_categorical().unwrap();
        assert_eq!(at(0), H::P);
        assert_eq!(at(1), H::S);
        assert_eq!(at(2), H::THETA);
        assert_eq!(map.timestamp, None);

        let mut swapped = grids.clone();
        swapped.swap(3, 4);
        assert!(matches!(
            build_background_map(&swapped, &BackgroundParams::default(), geom()),
            Err(Error::UnsortedTimestamps { .. })
        ));
    }

    #[test]
    fn vacuous_breaks_runs_flag() {
        use Hypothesis as H;
        let mut grids = Vec::new();
        for k in 0..40 {
            let c0 = if k == 20 { H::THETA } else { H::F };
            grids.push(obs(k as f64, [c0, H::THETA, H::THETA]));
        }
        let params = BackgroundParams::default();
        let map = build_background_map(&grids, &params, geom()).unwrap();
        assert_eq!(map.cells()[0].as_categorical(), Some(H::P));
        let strict = BackgroundParams {
            vacuous_breaks_runs: true,
            ..params
        };
        let map = build_background_map(&grids, &strict, geom()).unwrap();
        assert_eq!(map.cells()[0].as_categorical(), Some(H::THETA));
    }

    fn label_strategy() -> impl Strategy<Value = CellHistory> {
        prop::collection::vec(0u8..3, 0..80).prop_map(|v| {
            CellHistory::from_labels(
                v.into_iter()
                    .map(|b| match b {
                        0 => Free,
                        1 => Immovable,
                        _ => StaticCandidate,
                    })
                    .collect(),
            )
        })
    }

    proptest! {
        #[test]
        fn run_lengths_are_bounded(h in label_strategy()) {
            let r = run_lengths(&h);
            let n = h.len() as u32;
            prop_assert!(r.w_f <= n && r.w_i <= n && r.w_s <= n && r.w_occ <= n);
            prop_assert!(r.w_occ >= r.w_i.max(r.w_s));
        }

        #[test]
        fn raising_thresholds_only_adds_unknown(
            h in label_strategy(),
            tf in 1u32..50, to in 1u32..20, dtf in 0u32..20, dto in 0u32..10,
        ) {
            let r = run_lengths(&h);
            let low = classify_cell(&r, &MapThresholds { t_f: tf, t_o: to });
            let high = classify_cell(&r, &MapThresholds { t_f: tf + dtf, t_o: to + dto });
            if low == Hypothesis::THETA {
                prop_assert_eq!(high, Hypothesis::THETA);
            }
        }
    }

    #[test]
    fn identical_streams_give_identical_maps() {
        let g = GridGeometry::new(0.0, 0.0, 1.0, 3, 3).unwrap();
        let labels = [Hypothesis::F, Hypothesis::I, Hypothesis::M, Hypothesis::O, Hypothesis::THETA];
        let stream: Vec<EvidentialGrid> = (0..60)
            .map(|t| {
                let cells = (0..9).map(|c| cat(labels[(t * 7 + c * 3) % 5])).collect();
                EvidentialGrid::from_cells(g, cells, Some(t as f64)).unwrap()
            })
            .collect();
        let params = BackgroundParams::default();
        let a = build_background_map(&stream, &params, g).unwrap();
        let b = build_background_map(&stream, &params, g).unwrap();
        let bits = |m: &EvidentialGrid| -> Vec<u64> {
            m.cells().iter().flat_map(|c| c.masses().iter().map(|v| v.to_bits())).collect()
        };
        assert_eq!(bits(&a), bits(&b));
    }
}
