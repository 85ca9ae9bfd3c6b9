//! Mass-function algebra over the frame of discernment `{F, I, S, D}`.
//!
//! Hypotheses are subsets of the frame encoded as 4-bit sets (`F` = bit 0,
//! `I` = bit 1, `S` = bit 2, `D` = bit 3). A [`MassFunction`] stores one mass
//! per subset in a dense 16-entry array. The conjunctive rule keeps conflict on
//! the empty set; callers decide how to resolve it (see
//! [`MassFunction::reassign_conflict_to`]).

use std::fmt;

use crate::error::{Error, Result};

/// Tolerance on the sum of a mass function.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Number of subsets of the frame.
pub const POWER_SET_SIZE: usize = 16;

/// A subset of `{F, I, S, D}`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Hypothesis(u8);

impl Hypothesis {
    pub const EMPTY: Hypothesis = Hypothesis(0);
    /// Free space.
    pub const F: Hypothesis = Hypothesis(0b0001);
    /// Immovable occupancy (buildings, trees, poles).
    pub const I: Hypothesis = Hypothesis(0b0010);
    /// Static object: movable but never moved during the sequence.
    pub const S: Hypothesis = Hypothesis(0b0100);
    /// Dynamic object.
    pub const D: Hypothesis = Hypothesis(0b1000);
    /// Movable object `{S, D}`.
    pub const M: Hypothesis = Hypothesis(0b1100);
    /// Unclassified occupancy `{I, S, D}`.
    pub const O: Hypothesis = Hypothesis(0b1110);
    /// Passable `{F, D}`.
    pub const P: Hypothesis = Hypothesis(0b1001);
    /// The whole frame.
    pub const THETA: Hypothesis = Hypothesis(0b1111);

    /// Builds a hypothesis from its bitmask. Bits above the fourth are rejected.
    pub fn from_bits(bits: u8) -> Result<Self> {
        if bits > 0b1111 {
            return Err(Error::InvalidHypothesis(bits));
        }
        Ok(Hypothesis(bits))
    }

    pub const fn bits(self) -> u8 {
        self.0
    }

    pub const fn index(self) -> usize {
        self.0 as usize
    }

    pub const fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub const fn cardinality(self) -> u32 {
        self.0.count_ones()
    }

    pub const fn intersection(self, other: Hypothesis) -> Hypothesis {
        Hypothesis(self.0 & other.0)
    }

    pub const fn union(self, other: Hypothesis) -> Hypothesis {
        Hypothesis(self.0 | other.0)
    }

    /// True when `other` is a subset of `self`.
    pub const fn contains(self, other: Hypothesis) -> bool {
        self.0 & other.0 == other.0
    }

    /// All 16 subsets in bitmask order.
    pub fn all() -> impl Iterator<Item = Hypothesis> {
        (0..POWER_SET_SIZE as u8).map(Hypothesis)
    }

    /// The 15 non-empty subsets in bitmask order.
    pub fn non_empty() -> impl Iterator<Item = Hypothesis> {
        (1..POWER_SET_SIZE as u8).map(Hypothesis)
    }

    fn alias(self) -> Option<&'static str> {
        match self {
            Hypothesis::EMPTY => Some("∅"),
            Hypothesis::F => Some("F"),
            Hypothesis::I => Some("I"),
            Hypothesis::S => Some("S"),
            Hypothesis::D => Some("D"),
            Hypothesis::M => Some("M"),
            Hypothesis::O => Some("O"),
            Hypothesis::P => Some("P"),
            Hypothesis::THETA => Some("Θ"),
            _ => None,
        }
    }
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(name) = self.alias() {
            return f.write_str(name);
        }
        let names = ["F", "I", "S", "D"];
        let members: Vec<&str> = (0..4)
            .filter(|b| self.0 & (1 << b) != 0)
            .map(|b| names[b])
            .collect();
        write!(f, "{{{}}}", members.join(","))
    }
}

impl fmt::Debug for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Hypotheses in decision tie-break order: smaller cardinality first, then
/// bitmask order.
const TIE_BREAK_ORDER: [u8; 15] = [
    0b0001, 0b0010, 0b0100, 0b1000, // singletons
    0b0011, 0b0101, 0b0110, 0b1001, 0b1010, 0b1100, // pairs
    0b0111, 0b1011, 0b1101, 0b1110, // triples
    0b1111,
];

/// Outcome of discretizing a mass function.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    /// The empty set outweighs every non-empty hypothesis.
    Conflict,
    Label(Hypothesis),
}

/// Mass assignment over the 16 subsets of the frame.
#[derive(Clone, Copy, PartialEq)]
pub struct MassFunction {
    mass: [f64; POWER_SET_SIZE],
}

impl MassFunction {
    /// Validates and wraps a dense mass vector indexed by hypothesis bitmask.
    pub fn new(mass: [f64; POWER_SET_SIZE]) -> Result<Self> {
        let mut sum = 0.0;
        for (i, &m) in mass.iter().enumerate() {
            if !m.is_finite() || m < 0.0 {
                return Err(Error::InvalidMass(format!(
                    "entry {} is {m}",
                    Hypothesis(i as u8)
                )));
            }
            sum += m;
        }
        if (sum - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidMass(format!("masses sum to {sum}")));
        }
        Ok(MassFunction { mass })
    }

    /// Builds a mass function from `(hypothesis, mass)` pairs. Repeated
    /// hypotheses accumulate.
    pub fn from_focal(focal: &[(Hypothesis, f64)]) -> Result<Self> {
        let mut mass = [0.0; POWER_SET_SIZE];
        for &(h, m) in focal {
            mass[h.index()] += m;
        }
        Self::new(mass)
    }

    /// Total ignorance: all mass on `Θ`.
    pub const fn vacuous() -> Self {
        let mut mass = [0.0; POWER_SET_SIZE];
        mass[Hypothesis::THETA.index()] = 1.0;
        MassFunction { mass }
    }

    /// All mass on a single non-empty hypothesis.
    pub fn categorical(h: Hypothesis) -> Result<Self> {
        if h.is_empty() {
            return Err(Error::EmptyHypothesis);
        }
        Ok(Self::categorical_unchecked(h))
    }

    /// All mass on the empty set.
    pub const fn total_conflict() -> Self {
        Self::categorical_unchecked(Hypothesis::EMPTY)
    }

    pub(crate) const fn categorical_unchecked(h: Hypothesis) -> Self {
        let mut mass = [0.0; POWER_SET_SIZE];
        mass[h.index()] = 1.0;
        MassFunction { mass }
    }

    pub fn get(&self, h: Hypothesis) -> f64 {
        self.mass[h.index()]
    }

    pub fn masses(&self) -> &[f64; POWER_SET_SIZE] {
        &self.mass
    }

    pub fn sum(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// Mass on the empty set.
    pub fn conflict(&self) -> f64 {
        self.mass[0]
    }

    pub fn is_vacuous(&self) -> bool {
        self.mass[Hypothesis::THETA.index()] == 1.0
    }

    /// Returns the hypothesis holding all the mass, if any.
    pub fn as_categorical(&self) -> Option<Hypothesis> {
        self.mass
            .iter()
            .position(|&m| m == 1.0)
            .map(|i| Hypothesis(i as u8))
    }

    /// Hypotheses carrying strictly positive mass.
    pub fn focal_elements(&self) -> impl Iterator<Item = (Hypothesis, f64)> + '_ {
        self.mass
            .iter()
            .enumerate()
            .filter(|(_, &m)| m > 0.0)
            .map(|(i, &m)| (Hypothesis(i as u8), m))
    }

    /// Unnormalized conjunctive combination; conflict accumulates on `∅`.
    pub fn combine_conjunctive(&self, other: &MassFunction) -> MassFunction {
        // Categorical and vacuous operands dominate grid workloads.
        if other.is_vacuous() {
            return *self;
        }
        if self.is_vacuous() {
            return *other;
        }
        let mut out = [0.0; POWER_SET_SIZE];
        for (b, &mb) in self.mass.iter().enumerate() {
            if mb == 0.0 {
                continue;
            }
            for (c, &mc) in other.mass.iter().enumerate() {
                if mc != 0.0 {
                    out[b & c] += mb * mc;
                }
            }
        }
        MassFunction { mass: out }
    }

    /// Moves the empty-set mass onto `h`.
    pub fn reassign_conflict_to(&self, h: Hypothesis) -> Result<MassFunction> {
        if h.is_empty() {
            return Err(Error::EmptyHypothesis);
        }
        let mut mass = self.mass;
        mass[h.index()] += mass[0];
        mass[0] = 0.0;
        Ok(MassFunction { mass })
    }

    /// The non-empty hypothesis with maximal mass. Ties go to the smaller
    /// cardinality, then to the smaller bitmask.
    pub fn dominant_label(&self) -> Hypothesis {
        let mut best = Hypothesis(TIE_BREAK_ORDER[0]);
        let mut best_mass = self.mass[TIE_BREAK_ORDER[0] as usize];
        for &bits in &TIE_BREAK_ORDER[1..] {
            let m = self.mass[bits as usize];
            if m > best_mass {
                best = Hypothesis(bits);
                best_mass = m;
            }
        }
        best
    }

    /// Like [`dominant_label`](Self::dominant_label) but reports conflict when
    /// the empty set outweighs every non-empty hypothesis.
    pub fn decide(&self) -> Decision {
        let label = self.dominant_label();
        if self.mass[0] > self.mass[label.index()] {
            Decision::Conflict
        } else {
            Decision::Label(label)
        }
    }

    /// Divides by the sum when it has drifted beyond [`MASS_TOLERANCE`].
    pub fn renormalized(&self) -> MassFunction {
        let sum = self.sum();
        if (sum - 1.0).abs() <= MASS_TOLERANCE || sum <= 0.0 {
            return *self;
        }
        let mut mass = self.mass;
        mass.iter_mut().for_each(|m| *m /= sum);
        MassFunction { mass }
    }
}

impl Default for MassFunction {
    fn default() -> Self {
        Self::vacuous()
    }
}

impl fmt::Debug for MassFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut map = f.debug_map();
        for (h, m) in self.focal_elements() {
            map.entry(&h, &m);
        }
        map.finish()
    }
}
