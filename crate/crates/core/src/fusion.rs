//! Per-timestamp fusion of the background map with observations.
//!
//! Occupancy observed over a passable cell becomes dynamic (`O ∩ P = D`),
//! occupancy over a static cell stays static, and free space refines passable
//! cells. When the two disagree outright, the map is kept: it aggregates the
//! whole sequence and is less noisy than a single scan.

use crate::error::{Error, Result};
use crate::evidential::MassFunction;
use crate::grid::EvidentialGrid;

/// Diagnostic origin of a filtered cell; carries no evidential weight.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Provenance {
    /// Not observed at this time step; the map cell is passed through.
    MapOnly = 0,
    /// Observed and coherent with the map.
    Observed = 1,
    /// Observation contradicted the map; conflict went to the map's label.
    ConflictResolved = 2,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilteredGrid {
    pub grid: EvidentialGrid,
    pub provenance: Vec<Provenance>,
}

impl FilteredGrid {
    pub fn timestamp(&self) -> Option<f64> {
        self.grid.timestamp
    }

    pub fn count(&self, p: Provenance) -> usize {
        self.provenance.iter().filter(|&&q| q == p).count()
    }
}

/// Fuses one cell; see [`fuse_frame`].
pub fn fuse_cell(map: &MassFunction, obs: &MassFunction) -> (MassFunction, Provenance) {
    if obs.is_vacuous() {
        return (*map, Provenance::MapOnly);
    }
    let combined = map.combine_conjunctive(obs);
    if combined.conflict() > 0.0 {
        let resolved = combined
            .reassign_conflict_to(map.dominant_label())
            .expect("dominant label is never empty");
        (resolved, Provenance::ConflictResolved)
    } else {
        (combined, Provenance::Observed)
    }
}

/// Conjunctive fusion of the background map with one observation grid, with
/// residual conflict reassigned to the map cell's dominant label.
pub fn fuse_frame(map: &EvidentialGrid, obs: &EvidentialGrid) -> Result<FilteredGrid> {
    if map.geometry() != obs.geometry() {
        return Err(Error::GeometryMismatch);
    }
    let n = map.cells().len();
    let mut cells = Vec::with_capacity(n);
    let mut provenance = Vec::with_capacity(n);
    for (m, o) in map.cells().iter().zip(obs.cells()) {
        let (c, p) = fuse_cell(m, o);
        cells.push(c);
        provenance.push(p);
    }
    Ok(FilteredGrid {
        grid: EvidentialGrid::from_cells(*map.geometry(), cells, obs.timestamp)?,
        provenance,
    })
}

/// Lazily fuses every observation of a stream with the map, in order.
pub fn run_sequence<'a, I>(
    map: &'a EvidentialGrid,
    observations: I,
) -> impl Iterator<Item = Result<FilteredGrid>> + 'a
where
    I: IntoIterator + 'a,
    I::Item: std::borrow::Borrow<EvidentialGrid>,
{
    use std::borrow::Borrow;
    observations
        .into_iter()
        .map(move |obs| fuse_frame(map, obs.borrow()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evidential::Hypothesis as H;
    use crate::grid::GridGeometry;

    fn cat(h: H) -> MassFunction {
        MassFunction::categorical(h).unwrap()
    }

    #[test]
    fn semantics_examples() {
        let cases = [
            (H::P, H::O, H::D),
            (H::S, H::O, H::S),
            (H::P, H::F, H::F),
            (H::I, H::F, H::I),
            (H::THETA, H::O, H::O),
            (H::P, H::M, H::D),
            (H::I, H::M, H::I),
        ];
        for (map, obs, expected) in cases {
            let (out, _) = fuse_cell(&cat(map), &cat(obs));
            assert_eq!(out, cat(expected), "{map} ⊕ {obs}");
        }
        let (_, p) = fuse_cell(&cat(H::I), &cat(H::F));
        assert_eq!(p, Provenance::ConflictResolved);
        let (out, p) = fuse_cell(&cat(H::S), &MassFunction::vacuous());
        assert_eq!((out, p), (cat(H::S), Provenance::MapOnly));
    }

    #[test]
    fn graded_conflict_goes_to_map_label() {
        let obs = MassFunction::from_focal(&[(H::F, 0.7), (H::THETA, 0.3)]).unwrap();
        let (out, p) = fuse_cell(&cat(H::I), &obs);
        assert_eq!(p, Provenance::ConflictResolved);
        assert!((out.get(H::I) - 1.0).abs() < 1e-12);
        assert_eq!(out.conflict(), 0.0);
    }

    fn geom() -> GridGeometry {
        GridGeometry::new(0.0, 0.0, 1.0, 2, 2).unwrap()
    }

    #[test]
    fn sequence_preserves_order_and_count() {
        let map = EvidentialGrid::from_cells(
            geom(),
            vec![cat(H::P), cat(H::I), cat(H::S), MassFunction::vacuous()],
            None,
        )
        .unwrap();
        let obs: Vec<EvidentialGrid> = (0..5)
            .map(|k| EvidentialGrid::vacuous(geom(), Some(k as f64 * 0.1)))
            .collect();
        let out: Vec<FilteredGrid> = run_sequence(&map, &obs).collect::<Result<_>>().unwrap();
        assert_eq!(out.len(), 5);
        for (k, f) in out.iter().enumerate() {
            assert_eq!(f.timestamp(), Some(k as f64 * 0.1));
            assert_eq!(f.grid.cells(), map.cells());
            assert_eq!(f.count(Provenance::MapOnly), 4);
        }
        assert_eq!(run_sequence(&map, Vec::<EvidentialGrid>::new()).count(), 0);
    }

    #[test]
    fn geometry_mismatch_is_an_error() {
        let map = EvidentialGrid::vacuous(geom(), None);
        let obs = EvidentialGrid::vacuous(GridGeometry::new(0.0, 0.0, 1.0, 3, 2).unwrap(), Some(0.0));
        assert!(fuse_frame(&map, &obs).is_err());
    }

    fn random_mass(subsets: &'static [H]) -> impl Strategy<Value = MassFunction> {
        proptest::collection::vec((0..subsets.len(), 0.01f64..1.0), 1..4).prop_map(move |focal| {
            let total: f64 = focal.iter().map(|f| f.1).sum();
            let mut mass = [0.0; 16];
            for (k, w) in focal {
                mass[subsets[k].index()] += w / total;
            }
            MassFunction::new(mass).unwrap()
        })
    }

    const MAP_SETS: &[H] = &[H::P, H::I, H::S, H::THETA];
    const OBS_SETS: &[H] = &[H::F, H::I, H::M, H::O, H::D, H::S, H::P, H::THETA];

    fn is_superset_of_d(h: H) -> bool {
        h.bits() & H::D.bits() != 0
    }

    use proptest::prelude::*;

    proptest! {
        #[test]
        fn no_conflict_survives(map in random_mass(MAP_SETS), obs in random_mass(OBS_SETS)) {
            let (out, _) = fuse_cell(&map, &obs);
            prop_assert_eq!(out.conflict(), 0.0);
            prop_assert!((out.sum() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn dynamic_mass_needs_passable_map_and_occupancy(map in random_mass(MAP_SETS), obs in random_mass(OBS_SETS)) {
            let (out, _) = fuse_cell(&map, &obs);
            if out.get(H::D) > 0.0 {
                prop_assert!(map.focal_elements().any(|(h, _)| is_superset_of_d(h)));
                prop_assert!(obs.focal_elements().any(|(h, _)| is_superset_of_d(h)));
            }
        }

        #[test]
        fn unobserved_cells_copy_the_map(map in random_mass(MAP_SETS)) {
            let (out, p) = fuse_cell(&map, &MassFunction::vacuous());
            prop_assert_eq!(out, map);
            prop_assert_eq!(p, Provenance::MapOnly);
        }

        #[test]
        fn disjoint_categoricals_keep_the_map(a in 0usize..4, b in 1u8..16) {
            let (a, b) = (MAP_SETS[a], H::from_bits(b).unwrap());
            prop_assume!(a.bits() & b.bits() == 0);
            let (out, p) = fuse_cell(&cat(a), &cat(b));
            prop_assert_eq!(out, cat(a));
            prop_assert_eq!(p, Provenance::ConflictResolved);
        }
    }
}
