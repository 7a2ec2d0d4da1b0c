//! Measure-preserving systems: piecewise translations of `[0, 1)` and
//! skyscraper systems stacked over them.
//!
//! A flat system is represented as a skyscraper with one cell of height 1
//! whose base is all of `[0, 1)`, so every operation has a single code path.
//! Points of a skyscraper are addressed by `(cell, level, x)` where `x` is the
//! base coordinate; moving up a column leaves `x` unchanged and the top level
//! is sent to wherever the base map sends `x`.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{Exact, Field, QuadNumber};
use crate::leveled::{Level, LeveledSet};
use crate::sets::{Interval, IntervalSet};

/// Default bound on the number of steps of any single orbit computation.
pub const DEFAULT_ORBIT_CAP: u64 = 1 << 20;

/// One branch of a piecewise translation: `x -> x + shift` on `domain`.
/// Shifts are stored so that the image stays inside `[0, 1)` without reduction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TranslationPiece {
    pub domain: Interval,
    pub shift: QuadNumber,
}

/// An invertible piecewise translation of `[0, 1)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PiecewiseTranslation {
    field: Field,
    pieces: Vec<TranslationPiece>,
    angle: Option<QuadNumber>,
}

impl PiecewiseTranslation {
    /// Builds the map `x -> x + shift mod 1` on each domain. Domains must
    /// partition `[0, 1)`, and so must the images.
    pub fn new(field: Field, raw: Vec<(Interval, QuadNumber)>) -> Result<Self> {
        let one = field.one();
        let mut pieces = Vec::with_capacity(raw.len() + 1);
        for (domain, shift) in raw {
            IntervalSet::normalize(field, vec![domain.clone()])?;
            if shift.field() != field {
                return Err(Error::FieldMismatch {
                    left: field.discriminant(),
                    right: shift.field().discriminant(),
                });
            }
            if domain.is_empty() {
                continue;
            }
            let (_, s) = shift.floor_mod1();
            let wrap = &one - &s;
            let down = &s - &one;
            if domain.end <= wrap {
                pieces.push(TranslationPiece { domain, shift: s });
            } else if domain.start >= wrap {
                pieces.push(TranslationPiece { domain, shift: down });
            } else {
                pieces.push(TranslationPiece {
                    domain: Interval::new(domain.start, wrap.clone()),
                    shift: s,
                });
                pieces.push(TranslationPiece {
                    domain: Interval::new(wrap, domain.end),
                    shift: down,
                });
            }
        }
        pieces.sort_by(|x, y| x.domain.start.cmp(&y.domain.start));
        let domains: Vec<&Interval> = pieces.iter().map(|p| &p.domain).collect();
        if !tiles_unit(field, domains) {
            return Err(Error::InvalidSystem("domains do not partition [0, 1)".into()));
        }
        let images: Vec<Interval> = pieces.iter().map(|p| p.domain.translate(&p.shift)).collect();
        let mut image_refs: Vec<&Interval> = images.iter().collect();
        image_refs.sort_by(|x, y| x.start.cmp(&y.start));
        if !tiles_unit(field, image_refs) {
            return Err(Error::InvalidSystem("images do not partition [0, 1)".into()));
        }
        Ok(PiecewiseTranslation {
            field,
            pieces,
            angle: None,
        })
    }

    /// Rotation `x -> x + alpha mod 1`, stored pre-split at `1 - alpha`.
    pub fn rotation(alpha: QuadNumber) -> Result<Self> {
        let field = alpha.field();
        if alpha.is_rational() {
            return Err(Error::RationalAngle(alpha.to_string()));
        }
        if alpha.signum() <= 0 || alpha >= field.one() {
            return Err(Error::Precondition(format!("rotation angle {alpha} not in (0, 1)")));
        }
        let mut map = Self::new(field, vec![(Interval::new(field.zero(), field.one()), alpha.clone())])?;
        map.angle = Some(alpha);
        Ok(map)
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn pieces(&self) -> &[TranslationPiece] {
        &self.pieces
    }

    /// The rotation angle, when this map was built by [`PiecewiseTranslation::rotation`].
    pub fn angle(&self) -> Option<&QuadNumber> {
        self.angle.as_ref()
    }

    pub fn inverse(&self) -> Self {
        let mut pieces: Vec<TranslationPiece> = self
            .pieces
            .iter()
            .map(|p| TranslationPiece {
                domain: p.domain.translate(&p.shift),
                shift: -&p.shift,
            })
            .collect();
        pieces.sort_by(|x, y| x.domain.start.cmp(&y.domain.start));
        PiecewiseTranslation {
            field: self.field,
            pieces,
            angle: self.angle.as_ref().map(|a| &self.field.one() - a),
        }
    }

    fn piece_at(&self, x: &QuadNumber) -> &TranslationPiece {
        let i = self.pieces.partition_point(|p| &p.domain.end <= x);
        &self.pieces[i.min(self.pieces.len() - 1)]
    }

    pub fn apply(&self, x: &QuadNumber) -> QuadNumber {
        x + &self.piece_at(x).shift
    }

    /// Splits `[start, end)` at the map's discontinuities: `(s, e, shift)` per branch.
    pub(crate) fn map_interval(&self, start: &QuadNumber, end: &QuadNumber) -> Vec<(QuadNumber, QuadNumber, QuadNumber)> {
        let mut out = Vec::with_capacity(2);
        let mut i = self.pieces.partition_point(|p| &p.domain.end <= start);
        let mut cursor = start.clone();
        while &cursor < end && i < self.pieces.len() {
            let p = &self.pieces[i];
            let stop = if &p.domain.end < end { p.domain.end.clone() } else { end.clone() };
            out.push((cursor, stop.clone(), p.shift.clone()));
            cursor = stop;
            i += 1;
        }
        out
    }

    fn image_once(&self, set: &IntervalSet) -> IntervalSet {
        let mut raw = Vec::new();
        for iv in set.parts() {
            for (s, e, sh) in self.map_interval(&iv.start, &iv.end) {
                raw.push(Interval::new(&s + &sh, &e + &sh));
            }
        }
        IntervalSet::canonical(self.field, raw)
    }

    /// Image of a set under the `n`-th iterate (negative `n` for pre-images).
    pub fn image(&self, set: &IntervalSet, n: i64) -> IntervalSet {
        if let Some(a) = &self.angle {
            return set.translate_mod1(&a.scale_int(n));
        }
        let inverse;
        let map = if n < 0 {
            inverse = self.inverse();
            &inverse
        } else {
            self
        };
        (0..n.unsigned_abs()).fold(set.clone(), |s, _| map.image_once(&s))
    }
}

fn tiles_unit(field: Field, sorted: Vec<&Interval>) -> bool {
    let mut cursor = field.zero();
    for iv in sorted {
        if iv.start != cursor {
            return false;
        }
        cursor = iv.end.clone();
    }
    cursor == field.one()
}

/// One column of a skyscraper: a base set and the number of floors over it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Cell {
    pub base: IntervalSet,
    pub height: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SystemKind {
    Flat,
    Inflation { i_max: usize },
    Skyscraper,
}

/// A point of the space: base coordinate `x` on floor `level` of cell `cell`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct PointAddress {
    pub cell: usize,
    pub level: usize,
    pub x: QuadNumber,
}

impl PointAddress {
    pub fn flat(x: QuadNumber) -> Self {
        PointAddress { cell: 0, level: 0, x }
    }

    pub fn level(&self) -> Level {
        Level::new(self.cell, self.level)
    }
}

/// A measure-preserving system.
#[derive(Clone, Debug)]
pub struct System {
    field: Field,
    base: PiecewiseTranslation,
    inverse: PiecewiseTranslation,
    cells: Vec<Cell>,
    // (part of some cell base, cell index), sorted by start; tiles [0, 1).
    partition: Vec<(Interval, usize)>,
    normalizer: QuadNumber,
    kind: SystemKind,
    orbit_cap: u64,
}

impl System {
    pub fn flat(base: PiecewiseTranslation) -> Self {
        let field = base.field();
        let cell = Cell {
            base: IntervalSet::full(field),
            height: 1,
        };
        Self::assemble(base, vec![cell], SystemKind::Flat).expect("flat system is always valid")
    }

    /// Golden-mean style convenience: the flat rotation by `alpha`.
    pub fn rotation(alpha: QuadNumber) -> Result<Self> {
        Ok(Self::flat(PiecewiseTranslation::rotation(alpha)?))
    }

    /// A skyscraper over `base` with the given cells; the cell bases must
    /// partition `[0, 1)`.
    pub fn skyscraper(base: PiecewiseTranslation, cells: Vec<Cell>) -> Result<Self> {
        Self::assemble(base, cells, SystemKind::Skyscraper)
    }

    fn assemble(base: PiecewiseTranslation, cells: Vec<Cell>, kind: SystemKind) -> Result<Self> {
        let field = base.field();
        if cells.is_empty() {
            return Err(Error::InvalidSystem("no cells".into()));
        }
        let mut partition = Vec::new();
        let mut normalizer = field.zero();
        for (i, cell) in cells.iter().enumerate() {
            if cell.height == 0 {
                return Err(Error::InvalidSystem(format!("cell {i} has height 0")));
            }
            if cell.base.field() != field {
                return Err(Error::FieldMismatch {
                    left: field.discriminant(),
                    right: cell.base.field().discriminant(),
                });
            }
            if cell.base.is_empty() {
                return Err(Error::InvalidSystem(format!("cell {i} has an empty base")));
            }
            normalizer = normalizer + cell.base.measure().scale_int(cell.height as i64);
            partition.extend(cell.base.parts().iter().map(|iv| (iv.clone(), i)));
        }
        partition.sort_by(|x, y| x.0.start.cmp(&y.0.start));
        if !tiles_unit(field, partition.iter().map(|(iv, _)| iv).collect()) {
            return Err(Error::InvalidSystem("cell bases do not partition [0, 1)".into()));
        }
        Ok(System {
            field,
            inverse: base.inverse(),
            base,
            cells,
            partition,
            normalizer,
            kind,
            orbit_cap: DEFAULT_ORBIT_CAP,
        })
    }

    pub fn with_orbit_cap(mut self, cap: u64) -> Self {
        self.orbit_cap = cap;
        self
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn base(&self) -> &PiecewiseTranslation {
        &self.base
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell(&self, i: usize) -> &Cell {
        &self.cells[i]
    }

    pub fn height(&self, cell: usize) -> usize {
        self.cells[cell].height
    }

    pub fn kind(&self) -> &SystemKind {
        &self.kind
    }

    pub fn is_flat(&self) -> bool {
        self.cells.len() == 1 && self.cells[0].height == 1
    }

    /// `Z = sum_i N_i m(B_i)`; the measure of a level of cell `i` is `m(B_i)/Z`.
    pub fn normalizer(&self) -> &QuadNumber {
        &self.normalizer
    }

    pub fn orbit_cap(&self) -> u64 {
        self.orbit_cap
    }

    fn check_cap(&self, n: i64) -> Result<()> {
        if n.unsigned_abs() > self.orbit_cap {
            return Err(Error::OrbitCapExceeded {
                requested: n.unsigned_abs(),
                cap: self.orbit_cap,
            });
        }
        Ok(())
    }

    pub fn level_count(&self) -> usize {
        self.cells.iter().map(|c| c.height).sum()
    }

    /// The whole space, every level of every cell.
    pub fn full_space(&self) -> LeveledSet {
        let mut raw = BTreeMap::new();
        for (i, cell) in self.cells.iter().enumerate() {
            for l in 0..cell.height {
                raw.insert(Level::new(i, l), cell.base.parts().to_vec());
            }
        }
        LeveledSet::from_raw(self.field, raw)
    }

    /// The ground floor of every cell, i.e. a copy of `[0, 1)` at level 0.
    pub fn ground(&self) -> LeveledSet {
        let raw = self
            .cells
            .iter()
            .enumerate()
            .map(|(i, c)| (Level::new(i, 0), c.base.parts().to_vec()))
            .collect();
        LeveledSet::from_raw(self.field, raw)
    }

    /// Lifts a subset of `[0, 1)` to the ground floors of the cells.
    pub fn lift_ground(&self, set: &IntervalSet) -> LeveledSet {
        let raw = self
            .cells
            .iter()
            .enumerate()
            .map(|(i, c)| (Level::new(i, 0), c.base.intersect(set).parts().to_vec()))
            .collect();
        LeveledSet::from_raw(self.field, raw)
    }

    /// Normalized measure `mu(S) = sum m(S_level) / Z`.
    pub fn measure(&self, set: &LeveledSet) -> QuadNumber {
        &set.raw_measure() / &self.normalizer
    }

    /// Checks that every component lies in its cell's base at a valid level.
    pub fn validate_set(&self, set: &LeveledSet) -> Result<()> {
        for (level, part) in set.components() {
            let cell = self
                .cells
                .get(level.cell)
                .ok_or_else(|| Error::Precondition(format!("no cell {}", level.cell)))?;
            if level.level >= cell.height || !part.is_subset(&cell.base) {
                return Err(Error::Precondition(format!(
                    "component at cell {} level {} is outside the space",
                    level.cell, level.level
                )));
            }
        }
        Ok(())
    }

    /// Cell whose base contains `x in [0, 1)`.
    pub fn locate_point(&self, x: &QuadNumber) -> usize {
        let i = self.partition.partition_point(|(iv, _)| &iv.end <= x);
        self.partition[i.min(self.partition.len() - 1)].1
    }

    fn locate(&self, start: &QuadNumber, end: &QuadNumber) -> Vec<(QuadNumber, QuadNumber, usize)> {
        if self.partition.len() == 1 {
            return vec![(start.clone(), end.clone(), self.partition[0].1)];
        }
        let mut out = Vec::with_capacity(1);
        let mut i = self.partition.partition_point(|(iv, _)| &iv.end <= start);
        let mut cursor = start.clone();
        while &cursor < end && i < self.partition.len() {
            let (iv, cell) = &self.partition[i];
            let stop = if &iv.end < end { iv.end.clone() } else { end.clone() };
            out.push((cursor, stop.clone(), *cell));
            cursor = stop;
            i += 1;
        }
        out
    }

    /// One step of a tracked piece, splitting it at discontinuities.
    pub(crate) fn step_tracked(&self, mut p: Tracked, forward: bool, out: &mut Vec<Tracked>) {
        let height = self.cells[p.at.cell].height;
        if forward && p.at.level + 1 < height {
            p.at.level += 1;
            out.push(p);
            return;
        }
        if !forward && p.at.level > 0 {
            p.at.level -= 1;
            out.push(p);
            return;
        }
        let map = if forward { &self.base } else { &self.inverse };
        let (cs, ce) = p.current();
        for (s, e, sh) in map.map_interval(&cs, &ce) {
            let total = &p.shift + &sh;
            let (ms, me) = (&s + &sh, &e + &sh);
            for (ls, le, cell) in self.locate(&ms, &me) {
                let level = if forward { 0 } else { self.cells[cell].height - 1 };
                out.push(Tracked {
                    origin: p.origin,
                    start: &ls - &total,
                    end: &le - &total,
                    at: Level::new(cell, level),
                    shift: total.clone(),
                });
            }
        }
    }

    /// `n` steps of a tracked piece (negative for backward), jumping along columns.
    pub(crate) fn advance_tracked(&self, p: Tracked, n: i64, out: &mut Vec<Tracked>) {
        let forward = n >= 0;
        let mut stack = vec![(p, n.unsigned_abs() as usize)];
        let mut scratch = Vec::new();
        while let Some((mut p, remaining)) = stack.pop() {
            if remaining == 0 {
                out.push(p);
                continue;
            }
            let height = self.cells[p.at.cell].height;
            let room = if forward { height - 1 - p.at.level } else { p.at.level };
            if remaining <= room {
                if forward {
                    p.at.level += remaining;
                } else {
                    p.at.level -= remaining;
                }
                out.push(p);
                continue;
            }
            p.at.level = if forward { height - 1 } else { 0 };
            scratch.clear();
            self.step_tracked(p, forward, &mut scratch);
            stack.extend(scratch.drain(..).map(|q| (q, remaining - room - 1)));
        }
    }

    /// Exact image of a set under `T^n`.
    pub fn image(&self, set: &LeveledSet, n: i64) -> Result<LeveledSet> {
        self.check_cap(n)?;
        if n == 0 {
            return Ok(set.clone());
        }
        let mut moved = Vec::new();
        for (level, part) in set.components() {
            for iv in part.parts() {
                self.advance_tracked(Tracked::new(level, iv), n, &mut moved);
            }
        }
        let mut raw: BTreeMap<Level, Vec<Interval>> = BTreeMap::new();
        for p in moved {
            let (s, e) = p.current();
            raw.entry(p.at).or_default().push(Interval::new(s, e));
        }
        Ok(LeveledSet::from_raw(self.field, raw))
    }

    /// Image of a subset of a flat system.
    pub fn image_flat(&self, set: &IntervalSet, n: i64) -> Result<IntervalSet> {
        Ok(self.image(&LeveledSet::flat(set.clone()), n)?.as_flat())
    }

    /// Validated point constructor.
    pub fn point(&self, cell: usize, level: usize, x: QuadNumber) -> Result<PointAddress> {
        let ok = self
            .cells
            .get(cell)
            .is_some_and(|c| level < c.height && c.base.contains(&x));
        if !ok {
            return Err(Error::Precondition(format!("({cell}, {level}, {x}) is not a point of the system")));
        }
        Ok(PointAddress { cell, level, x })
    }

    pub(crate) fn step_forward_mut(&self, p: &mut PointAddress) {
        if p.level + 1 < self.cells[p.cell].height {
            p.level += 1;
        } else {
            p.x = self.base.apply(&p.x);
            p.cell = self.locate_point(&p.x);
            p.level = 0;
        }
    }

    fn step_backward_mut(&self, p: &mut PointAddress) {
        if p.level > 0 {
            p.level -= 1;
        } else {
            p.x = self.inverse.apply(&p.x);
            p.cell = self.locate_point(&p.x);
            p.level = self.cells[p.cell].height - 1;
        }
    }

    /// Exact `n`-step orbit position (negative `n` steps backward).
    pub fn step_point(&self, p: &PointAddress, n: i64) -> Result<PointAddress> {
        self.check_cap(n)?;
        let mut q = p.clone();
        let mut remaining = n.unsigned_abs() as usize;
        while remaining > 0 {
            let height = self.cells[q.cell].height;
            let room = if n > 0 { height - 1 - q.level } else { q.level };
            let jump = room.min(remaining);
            if jump > 0 {
                if n > 0 {
                    q.level += jump;
                } else {
                    q.level -= jump;
                }
                remaining -= jump;
                continue;
            }
            if n > 0 {
                self.step_forward_mut(&mut q);
            } else {
                self.step_backward_mut(&mut q);
            }
            remaining -= 1;
        }
        Ok(q)
    }

    pub fn description(&self) -> SystemDescription {
        SystemDescription {
            kind: self.kind.clone(),
            discriminant: self.field.discriminant(),
            alpha: self.base.angle().cloned(),
            normalizer: Exact::from(&self.normalizer),
            base_pieces: self.base.pieces().to_vec(),
            cells: self
                .cells
                .iter()
                .enumerate()
                .map(|(index, c)| CellDescription {
                    index,
                    height: c.height,
                    base: c.base.clone(),
                    base_measure: Exact::from(c.base.measure()),
                })
                .collect(),
        }
    }
}

/// JSON-facing description of a system.
#[derive(Clone, Debug, Serialize)]
pub struct SystemDescription {
    #[serde(flatten)]
    pub kind: SystemKind,
    pub discriminant: u64,
    pub alpha: Option<QuadNumber>,
    pub normalizer: Exact,
    pub base_pieces: Vec<TranslationPiece>,
    pub cells: Vec<CellDescription>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CellDescription {
    pub index: usize,
    pub height: usize,
    pub base: IntervalSet,
    pub base_measure: Exact,
}

/// Largest supported number of inflation columns (the space has `2^(i_max+1) - 1` levels).
pub const MAX_INFLATION_COLUMNS: usize = 20;

/// The inflation of `base`: columns `C_i` of height `2^i` over consecutive
/// intervals `B_i` of length `3/4^i`, for `1 <= i <= i_max`, plus a height-1
/// tail cell (index 0) carrying the remaining base mass `4^-i_max`.
///
/// Cell index `i` holds column `C_i`; `B_i = [1 - 4^(1-i), 1 - 4^-i)`.
pub fn build_inflation(base: PiecewiseTranslation, i_max: usize) -> Result<System> {
    if i_max < 2 {
        return Err(Error::Precondition("inflation needs i_max >= 2".into()));
    }
    if i_max > MAX_INFLATION_COLUMNS {
        return Err(Error::Precondition(format!(
            "inflation supports at most {MAX_INFLATION_COLUMNS} columns"
        )));
    }
    let field = base.field();
    let quarter_pow = |i: usize| {
        field.rational(BigRational::new(BigInt::from(1), num_traits::pow(BigInt::from(4), i)))
    };
    let one = field.one();
    let mut cells = Vec::with_capacity(i_max + 1);
    cells.push(Cell {
        base: IntervalSet::interval(&one - &quarter_pow(i_max), one.clone())?,
        height: 1,
    });
    for i in 1..=i_max {
        cells.push(Cell {
            base: IntervalSet::interval(&one - &quarter_pow(i - 1), &one - &quarter_pow(i))?,
            height: 1 << i,
        });
    }
    let mut sys = System::assemble(base, cells, SystemKind::Inflation { i_max })?;
    sys.kind = SystemKind::Inflation { i_max };
    Ok(sys)
}

/// An interval of some level, followed forward or backward under the map.
/// Its current position is `[start + shift, end + shift)` on level `at`.
#[derive(Clone, Debug)]
pub(crate) struct Tracked {
    pub origin: Level,
    pub start: QuadNumber,
    pub end: QuadNumber,
    pub at: Level,
    pub shift: QuadNumber,
}

impl Tracked {
    pub fn new(level: Level, iv: &Interval) -> Self {
        Tracked {
            origin: level,
            start: iv.start.clone(),
            end: iv.end.clone(),
            at: level,
            shift: iv.start.field().zero(),
        }
    }

    pub fn current(&self) -> (QuadNumber, QuadNumber) {
        if self.shift.is_zero() {
            (self.start.clone(), self.end.clone())
        } else {
            (&self.start + &self.shift, &self.end + &self.shift)
        }
    }

    /// Restricts to the sub-piece whose current position is `[s, e)`.
    pub fn restrict(&self, s: &QuadNumber, e: &QuadNumber) -> Tracked {
        Tracked {
            origin: self.origin,
            start: s - &self.shift,
            end: e - &self.shift,
            at: self.at,
            shift: self.shift.clone(),
        }
    }

    pub fn origin_interval(&self) -> Interval {
        Interval::new(self.start.clone(), self.end.clone())
    }
}
