//! Measurable subsets of a (possibly skyscraper) system.

use std::collections::BTreeMap;

use serde::{Serialize, Serializer};

use crate::field::{Field, QuadNumber};
use crate::sets::{pairwise_disjoint, Interval, IntervalSet};

/// Address of one level of one cell: `level` floors above the base `B_cell`.
/// A flat system has the single level `(0, 0)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Level {
    pub cell: usize,
    pub level: usize,
}

impl Level {
    pub const GROUND: Level = Level { cell: 0, level: 0 };

    pub fn new(cell: usize, level: usize) -> Self {
        Level { cell, level }
    }
}

/// A subset of the space, stored per level as an [`IntervalSet`] of base
/// coordinates. Empty components are never stored, so equality is structural.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LeveledSet {
    field: Field,
    parts: BTreeMap<Level, IntervalSet>,
}

impl LeveledSet {
    pub fn empty(field: Field) -> Self {
        LeveledSet {
            field,
            parts: BTreeMap::new(),
        }
    }

    /// A subset of a flat system.
    pub fn flat(set: IntervalSet) -> Self {
        Self::single(Level::GROUND, set)
    }

    pub fn single(level: Level, set: IntervalSet) -> Self {
        let mut out = Self::empty(set.field());
        out.insert(level, set);
        out
    }

    pub(crate) fn from_raw(field: Field, raw: BTreeMap<Level, Vec<Interval>>) -> Self {
        let mut out = Self::empty(field);
        for (level, ivs) in raw {
            out.insert(level, IntervalSet::canonical(field, ivs));
        }
        out
    }

    fn insert(&mut self, level: Level, set: IntervalSet) {
        assert_eq!(set.field(), self.field, "leveled set across fields");
        if set.is_empty() {
            self.parts.remove(&level);
        } else {
            self.parts.insert(level, set);
        }
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn component(&self, level: Level) -> Option<&IntervalSet> {
        self.parts.get(&level)
    }

    pub fn components(&self) -> impl Iterator<Item = (Level, &IntervalSet)> {
        self.parts.iter().map(|(l, s)| (*l, s))
    }

    /// The ground-level set of a flat-system subset.
    pub fn as_flat(&self) -> IntervalSet {
        self.parts
            .get(&Level::GROUND)
            .cloned()
            .unwrap_or_else(|| IntervalSet::empty(self.field))
    }

    pub fn part_count(&self) -> usize {
        self.parts.values().map(IntervalSet::part_count).sum()
    }

    /// Sum of base-coordinate lengths over all levels (not normalized).
    pub fn raw_measure(&self) -> QuadNumber {
        self.parts
            .values()
            .fold(self.field.zero(), |acc, s| acc + s.measure())
    }

    pub fn contains(&self, level: Level, x: &QuadNumber) -> bool {
        self.parts.get(&level).is_some_and(|s| s.contains(x))
    }

    fn zip(&self, other: &Self, op: impl Fn(Option<&IntervalSet>, Option<&IntervalSet>) -> Option<IntervalSet>) -> Self {
        assert_eq!(self.field, other.field, "leveled set across fields");
        let mut out = Self::empty(self.field);
        let keys: std::collections::BTreeSet<Level> =
            self.parts.keys().chain(other.parts.keys()).copied().collect();
        for key in keys {
            if let Some(s) = op(self.parts.get(&key), other.parts.get(&key)) {
                out.insert(key, s);
            }
        }
        out
    }

    pub fn union(&self, other: &Self) -> Self {
        self.zip(other, |x, y| match (x, y) {
            (Some(x), Some(y)) => Some(x.union(y)),
            (Some(s), None) | (None, Some(s)) => Some(s.clone()),
            (None, None) => None,
        })
    }

    pub fn intersect(&self, other: &Self) -> Self {
        self.zip(other, |x, y| match (x, y) {
            (Some(x), Some(y)) => Some(x.intersect(y)),
            _ => None,
        })
    }

    pub fn difference(&self, other: &Self) -> Self {
        self.zip(other, |x, y| match (x, y) {
            (Some(x), Some(y)) => Some(x.difference(y)),
            (Some(x), None) => Some(x.clone()),
            _ => None,
        })
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.difference(other).is_empty()
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        self.intersect(other).is_empty()
    }

    /// Union of many sets in one canonicalization pass per level.
    pub fn union_all<'a>(field: Field, sets: impl IntoIterator<Item = &'a LeveledSet>) -> Self {
        let mut raw: BTreeMap<Level, Vec<Interval>> = BTreeMap::new();
        for s in sets {
            for (level, part) in &s.parts {
                raw.entry(*level).or_default().extend(part.parts().iter().cloned());
            }
        }
        Self::from_raw(field, raw)
    }

    /// True iff no two of the sets overlap in positive measure.
    pub fn pairwise_disjoint<'a>(sets: impl IntoIterator<Item = &'a LeveledSet>) -> bool {
        let mut by_level: BTreeMap<Level, Vec<&IntervalSet>> = BTreeMap::new();
        for s in sets {
            for (level, part) in &s.parts {
                by_level.entry(*level).or_default().push(part);
            }
        }
        by_level.values().all(|v| pairwise_disjoint(v.iter().copied()))
    }

    /// The leftmost subset of raw measure `length`, scanning levels in order.
    pub fn leftmost(&self, length: &QuadNumber) -> Option<Self> {
        let mut remaining = length.clone();
        let mut out = Self::empty(self.field);
        for (level, part) in &self.parts {
            if remaining.signum() <= 0 {
                break;
            }
            let m = part.measure();
            if m <= remaining {
                remaining = &remaining - &m;
                out.insert(*level, part.clone());
            } else {
                out.insert(*level, part.leftmost(&remaining)?);
                remaining = self.field.zero();
            }
        }
        (remaining.signum() <= 0).then_some(out)
    }
}

#[derive(Serialize)]
struct ComponentRepr<'a> {
    cell: usize,
    level: usize,
    parts: &'a IntervalSet,
}

impl Serialize for LeveledSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.parts.iter().map(|(l, p)| ComponentRepr {
            cell: l.cell,
            level: l.level,
            parts: p,
        }))
    }
}
