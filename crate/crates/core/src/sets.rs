//! Finite unions of half-open subintervals of `[0, 1)`.
//!
//! An [`IntervalSet`] is always canonical: parts are sorted, nonempty,
//! pairwise disjoint and never adjacent. Equal sets therefore have identical
//! part sequences, and single points are identified with the empty set.

use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::field::{Field, QuadNumber};

/// The half-open interval `[start, end)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Interval {
    pub start: QuadNumber,
    pub end: QuadNumber,
}

impl Interval {
    pub fn new(start: QuadNumber, end: QuadNumber) -> Self {
        Interval { start, end }
    }

    pub fn length(&self) -> QuadNumber {
        &self.end - &self.start
    }

    pub fn contains(&self, x: &QuadNumber) -> bool {
        &self.start <= x && x < &self.end
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }

    pub fn translate(&self, t: &QuadNumber) -> Interval {
        Interval {
            start: &self.start + t,
            end: &self.end + t,
        }
    }
}

impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(2))?;
        seq.serialize_element(&self.start)?;
        seq.serialize_element(&self.end)?;
        seq.end()
    }
}

/// A canonical finite disjoint union of intervals `[l, r)` with `0 <= l < r <= 1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IntervalSet {
    field: Field,
    parts: Vec<Interval>,
}

impl Serialize for IntervalSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.parts.serialize(serializer)
    }
}

impl IntervalSet {
    pub fn empty(field: Field) -> Self {
        IntervalSet {
            field,
            parts: Vec::new(),
        }
    }

    pub fn full(field: Field) -> Self {
        IntervalSet {
            field,
            parts: vec![Interval::new(field.zero(), field.one())],
        }
    }

    /// The single interval `[start, end)`, validated like [`IntervalSet::normalize`].
    pub fn interval(start: QuadNumber, end: QuadNumber) -> Result<Self> {
        let field = start.field();
        Self::normalize(field, vec![Interval::new(start, end)])
    }

    /// Canonicalizes raw intervals: drops empty ones, merges overlaps and adjacency.
    pub fn normalize(field: Field, raw: Vec<Interval>) -> Result<Self> {
        let zero = field.zero();
        let one = field.one();
        for iv in &raw {
            if iv.start.field() != field || iv.end.field() != field {
                return Err(Error::FieldMismatch {
                    left: field.discriminant(),
                    right: if iv.start.field() != field {
                        iv.start.field().discriminant()
                    } else {
                        iv.end.field().discriminant()
                    },
                });
            }
            for x in [&iv.start, &iv.end] {
                if x < &zero || x > &one {
                    return Err(Error::EndpointOutOfRange(x.to_string()));
                }
            }
            if iv.start > iv.end {
                return Err(Error::MalformedInterval {
                    start: iv.start.to_string(),
                    end: iv.end.to_string(),
                });
            }
        }
        Ok(Self::canonical(field, raw))
    }

    /// Canonicalizes intervals already known to lie in `[0, 1]`.
    pub(crate) fn canonical(field: Field, mut raw: Vec<Interval>) -> Self {
        raw.retain(|iv| !iv.is_empty());
        raw.sort_by(|x, y| x.start.cmp(&y.start));
        let mut parts: Vec<Interval> = Vec::with_capacity(raw.len());
        for iv in raw {
            match parts.last_mut() {
                Some(last) if iv.start <= last.end => {
                    if iv.end > last.end {
                        last.end = iv.end;
                    }
                }
                _ => parts.push(iv),
            }
        }
        IntervalSet { field, parts }
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn parts(&self) -> &[Interval] {
        &self.parts
    }

    pub fn part_count(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.parts.len() == 1
            && self.parts[0].start == self.field.zero()
            && self.parts[0].end == self.field.one()
    }

    /// Lebesgue measure.
    pub fn measure(&self) -> QuadNumber {
        self.parts
            .iter()
            .fold(self.field.zero(), |acc, iv| acc + iv.length())
    }

    pub fn contains(&self, x: &QuadNumber) -> bool {
        let i = self.parts.partition_point(|iv| &iv.end <= x);
        self.parts.get(i).is_some_and(|iv| iv.contains(x))
    }

    pub fn union(&self, other: &Self) -> Self {
        assert_eq!(self.field, other.field, "union across fields");
        let mut raw = self.parts.clone();
        raw.extend(other.parts.iter().cloned());
        Self::canonical(self.field, raw)
    }

    pub fn intersect(&self, other: &Self) -> Self {
        assert_eq!(self.field, other.field, "intersection across fields");
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.parts.len() && j < other.parts.len() {
            let (x, y) = (&self.parts[i], &other.parts[j]);
            let lo = if x.start >= y.start { &x.start } else { &y.start };
            let hi = if x.end <= y.end { &x.end } else { &y.end };
            if lo < hi {
                out.push(Interval::new(lo.clone(), hi.clone()));
            }
            if x.end <= y.end {
                i += 1;
            } else {
                j += 1;
            }
        }
        Self::canonical(self.field, out)
    }

    /// Complement relative to `[0, 1)`.
    pub fn complement(&self) -> Self {
        let mut out = Vec::with_capacity(self.parts.len() + 1);
        let mut cursor = self.field.zero();
        for iv in &self.parts {
            if cursor < iv.start {
                out.push(Interval::new(cursor, iv.start.clone()));
            }
            cursor = iv.end.clone();
        }
        let one = self.field.one();
        if cursor < one {
            out.push(Interval::new(cursor, one));
        }
        IntervalSet {
            field: self.field,
            parts: out,
        }
    }

    pub fn difference(&self, other: &Self) -> Self {
        self.intersect(&other.complement())
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.difference(other).is_empty()
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        self.intersect(other).is_empty()
    }

    /// `{ x + t mod 1 : x in self }`.
    pub fn translate_mod1(&self, t: &QuadNumber) -> Self {
        let (_, t) = t.floor_mod1();
        if t.is_zero() {
            return self.clone();
        }
        let one = self.field.one();
        let mut out = Vec::with_capacity(self.parts.len() + 1);
        for iv in &self.parts {
            let (s, e) = (&iv.start + &t, &iv.end + &t);
            if e <= one {
                out.push(Interval::new(s, e));
            } else if s >= one {
                out.push(Interval::new(&s - &one, &e - &one));
            } else {
                out.push(Interval::new(s, one.clone()));
                out.push(Interval::new(self.field.zero(), &e - &one));
            }
        }
        Self::canonical(self.field, out)
    }

    /// Cuts `[start, end)` against this set, returning maximal pieces tagged
    /// with membership, in left-to-right order.
    pub fn classify(&self, start: &QuadNumber, end: &QuadNumber) -> Vec<(QuadNumber, QuadNumber, bool)> {
        let mut out = Vec::new();
        let mut cursor = start.clone();
        let mut i = self.parts.partition_point(|iv| &iv.end <= start);
        while &cursor < end {
            match self.parts.get(i) {
                Some(iv) if &iv.start < end => {
                    if cursor < iv.start {
                        out.push((cursor.clone(), iv.start.clone(), false));
                        cursor = iv.start.clone();
                    }
                    let stop = if &iv.end < end { iv.end.clone() } else { end.clone() };
                    out.push((cursor, stop.clone(), true));
                    cursor = stop;
                    i += 1;
                }
                _ => {
                    out.push((cursor, end.clone(), false));
                    break;
                }
            }
        }
        out
    }

    /// The leftmost subset of the given measure, cut through the parts in order.
    /// Returns `None` when the set is too small.
    pub fn leftmost(&self, measure: &QuadNumber) -> Option<Self> {
        let mut remaining = measure.clone();
        let mut out = Vec::new();
        for iv in &self.parts {
            if remaining.signum() <= 0 {
                break;
            }
            let len = iv.length();
            if len <= remaining {
                remaining = &remaining - &len;
                out.push(iv.clone());
            } else {
                out.push(Interval::new(iv.start.clone(), &iv.start + &remaining));
                remaining = self.field.zero();
            }
        }
        (remaining.signum() <= 0).then(|| Self::canonical(self.field, out))
    }
}

/// True iff no two of the given interval families overlap in positive length.
pub fn pairwise_disjoint<'a>(sets: impl IntoIterator<Item = &'a IntervalSet>) -> bool {
    let mut all: Vec<&Interval> = sets.into_iter().flat_map(|s| s.parts.iter()).collect();
    all.sort_by(|x, y| x.start.cmp(&y.start));
    all.windows(2).all(|w| w[0].end <= w[1].start)
}
