//! Columns, towers, return-time (Kakutani) towers and Rokhlin towers.
//!
//! A column of height `k` over a base `B` is the list of levels
//! `B, TB, ..., T^(k-1) B`, which must be pairwise disjoint. A tower is a
//! sequence of pairwise disjoint columns. Every predicate here is decided
//! exactly.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{Exact, QuadNumber, Rational};
use crate::leveled::{Level, LeveledSet};
use crate::sets::{Interval, IntervalSet};
use crate::systems::{System, SystemKind, Tracked};

/// Default bound on the number of interval pieces a construction may create.
pub const DEFAULT_PIECE_CAP: usize = 1_000_000;

/// A column: `height` pairwise disjoint levels, level `i` being `T^i(base)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Column {
    index: usize,
    levels: Vec<LeveledSet>,
}

impl Column {
    /// Builds the column of the given height over `base`, caching every level.
    /// `index` is the column's label inside its tower (the return time for
    /// Kakutani towers).
    pub fn new(sys: &System, index: usize, base: LeveledSet, height: usize) -> Result<Self> {
        if height == 0 {
            return Err(Error::Precondition("column height must be positive".into()));
        }
        sys.validate_set(&base)?;
        let mut levels = Vec::with_capacity(height);
        levels.push(base);
        for i in 1..height {
            let next = sys.image(&levels[i - 1], 1)?;
            levels.push(next);
        }
        Ok(Column { index, levels })
    }

    /// Assembles a column from explicit levels without checking anything;
    /// [`column_check`] decides whether the result is a column.
    pub fn from_levels(index: usize, levels: Vec<LeveledSet>) -> Self {
        assert!(!levels.is_empty(), "a column needs at least one level");
        Column { index, levels }
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn height(&self) -> usize {
        self.levels.len()
    }

    pub fn base(&self) -> &LeveledSet {
        &self.levels[0]
    }

    pub fn levels(&self) -> &[LeveledSet] {
        &self.levels
    }

    pub fn level(&self, i: usize) -> &LeveledSet {
        &self.levels[i]
    }

    pub fn union(&self) -> LeveledSet {
        LeveledSet::union_all(self.levels[0].field(), &self.levels)
    }

    /// Sum of the level measures (the column measure when the column is valid).
    pub fn measure(&self, sys: &System) -> QuadNumber {
        self.levels
            .iter()
            .fold(sys.field().zero(), |acc, l| acc + sys.measure(l))
    }

    /// Union of the levels `first..end`.
    pub fn band(&self, first: usize, end: usize) -> LeveledSet {
        LeveledSet::union_all(self.levels[0].field(), &self.levels[first..end.min(self.levels.len())])
    }
}

/// A tower: columns ordered by index. Return-time towers also remember the
/// set they were built over.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tower {
    columns: Vec<Column>,
    return_base: Option<LeveledSet>,
}

impl Tower {
    pub fn new(mut columns: Vec<Column>) -> Self {
        columns.sort_by_key(Column::index);
        Tower {
            columns,
            return_base: None,
        }
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, index: usize) -> Option<&Column> {
        self.columns.iter().find(|c| c.index == index)
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// The base `B` when this is the Kakutani tower over `B`.
    pub fn return_base(&self) -> Option<&LeveledSet> {
        self.return_base.as_ref()
    }

    pub fn union(&self, sys: &System) -> LeveledSet {
        LeveledSet::union_all(sys.field(), self.columns.iter().flat_map(|c| c.levels.iter()))
    }

    /// Drops the column with the given index.
    pub fn without(&self, index: usize) -> Tower {
        Tower {
            columns: self.columns.iter().filter(|c| c.index != index).cloned().collect(),
            return_base: self.return_base.clone(),
        }
    }

    /// `sum_N N m(B_N)` over a return-time tower (Kac's sum).
    pub fn kac_sum(&self, sys: &System) -> QuadNumber {
        self.columns.iter().fold(sys.field().zero(), |acc, c| {
            acc + sys.measure(c.base()).scale_int(c.height() as i64)
        })
    }

    pub fn report(&self, sys: &System) -> TowerReport {
        TowerReport {
            columns: self
                .columns
                .iter()
                .map(|c| ColumnReport {
                    index: c.index,
                    height: c.height(),
                    base: c.base().clone(),
                    base_measure: Exact::from(sys.measure(c.base())),
                    column_measure: Exact::from(c.measure(sys)),
                })
                .collect(),
        }
    }
}

/// JSON export of a tower.
#[derive(Clone, Debug, Serialize)]
pub struct TowerReport {
    pub columns: Vec<ColumnReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ColumnReport {
    pub index: usize,
    pub height: usize,
    pub base: LeveledSet,
    pub base_measure: Exact,
    pub column_measure: Exact,
}

/// The Kakutani return-time tower over `base`: column `N` sits over the
/// first-return set `B_N` and has height `N`.
///
/// The un-returned part of `base` is pushed forward one step at a time,
/// split at the map's discontinuities, until all of it has come back.
pub fn kakutani(sys: &System, base: &LeveledSet, piece_cap: usize) -> Result<Tower> {
    sys.validate_set(base)?;
    let mu = sys.measure(base);
    if mu.signum() <= 0 || mu >= sys.field().one() {
        return Err(Error::Precondition(format!(
            "base measure {} must lie strictly between 0 and 1",
            mu.to_decimal(12)
        )));
    }
    let mut live: Vec<Tracked> = base
        .components()
        .flat_map(|(level, part)| part.parts().iter().map(move |iv| Tracked::new(level, iv)))
        .collect();
    let mut returned: BTreeMap<usize, BTreeMap<Level, Vec<Interval>>> = BTreeMap::new();
    let mut recorded = 0usize;
    let mut stepped = Vec::new();
    let mut time = 0usize;
    while !live.is_empty() {
        time += 1;
        if time as u64 > sys.orbit_cap() {
            return Err(Error::OrbitCapExceeded {
                requested: time as u64,
                cap: sys.orbit_cap(),
            });
        }
        stepped.clear();
        for p in live.drain(..) {
            sys.step_tracked(p, true, &mut stepped);
        }
        for p in stepped.drain(..) {
            let Some(comp) = base.component(p.at) else {
                live.push(p);
                continue;
            };
            let (s, e) = p.current();
            for (a, b, inside) in comp.classify(&s, &e) {
                let q = p.restrict(&a, &b);
                if inside {
                    returned
                        .entry(time)
                        .or_default()
                        .entry(q.origin)
                        .or_default()
                        .push(q.origin_interval());
                    recorded += 1;
                } else {
                    live.push(q);
                }
            }
        }
        if live.len() + recorded > piece_cap {
            return Err(Error::PieceCapExceeded { cap: piece_cap });
        }
    }
    let mut columns = Vec::with_capacity(returned.len());
    for (n, raw) in returned {
        let b_n = LeveledSet::from_raw(sys.field(), raw);
        columns.push(Column::new(sys, n, b_n, n)?);
    }
    Ok(Tower {
        columns,
        return_base: Some(base.clone()),
    })
}

/// The columns `C_1, ..., C_imax` of an inflation system as a tower (the
/// height-1 tail cell is left out). Column `i` has index `i`.
pub fn inflation_tower(sys: &System) -> Result<Tower> {
    let SystemKind::Inflation { i_max } = *sys.kind() else {
        return Err(Error::Precondition("not an inflation system".into()));
    };
    let columns = (1..=i_max)
        .map(|i| {
            let base = LeveledSet::single(Level::new(i, 0), sys.cell(i).base.clone());
            Column::new(sys, i, base, sys.height(i))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Tower::new(columns))
}

/// True iff the levels of all columns are pairwise disjoint and their union
/// is exactly `ambient`.
pub fn partition_check(t: &Tower, ambient: &LeveledSet) -> bool {
    let levels = t.columns.iter().flat_map(|c| c.levels.iter());
    if !LeveledSet::pairwise_disjoint(levels.clone()) {
        return false;
    }
    LeveledSet::union_all(ambient.field(), levels) == *ambient
}

/// Levels pairwise disjoint, and level `i + 1` is the image of level `i`.
pub fn column_check(sys: &System, c: &Column) -> bool {
    if !LeveledSet::pairwise_disjoint(&c.levels) {
        return false;
    }
    if sys.validate_set(c.base()).is_err() {
        return false;
    }
    c.levels
        .windows(2)
        .all(|w| sys.image(&w[0], 1).is_ok_and(|img| img == w[1]))
}

/// Every column valid and all columns pairwise disjoint.
pub fn tower_check(sys: &System, t: &Tower) -> bool {
    t.columns.iter().all(|c| column_check(sys, c))
        && LeveledSet::pairwise_disjoint(t.columns.iter().flat_map(|c| c.levels.iter()))
}

/// Partial fatness sums of a tower.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fatness {
    /// `sum height * mu(column)` over the first `upto` columns.
    pub column_form: QuadNumber,
    /// `sum N^2 mu(B_N)` over the same columns, for return-time towers.
    pub return_time_form: Option<QuadNumber>,
}

impl Fatness {
    /// Whether the two forms agree (vacuously true for general towers).
    pub fn forms_agree(&self) -> bool {
        self.return_time_form
            .as_ref()
            .is_none_or(|r| *r == self.column_form)
    }
}

pub fn fatness_partial(sys: &System, t: &Tower, upto: usize) -> Fatness {
    let cols = &t.columns[..upto.min(t.columns.len())];
    let column_form = cols.iter().fold(sys.field().zero(), |acc, c| {
        acc + c.measure(sys).scale_int(c.height() as i64)
    });
    let return_time_form = t.return_base.as_ref().map(|_| {
        cols.iter().fold(sys.field().zero(), |acc, c| {
            let h = c.height() as i64;
            acc + sys.measure(c.base()).scale_int(h * h)
        })
    });
    Fatness {
        column_form,
        return_time_form,
    }
}

/// A Rokhlin tower: one column of the requested height plus a small error set.
#[derive(Clone, Debug)]
pub struct RokhlinResult {
    pub column: Column,
    pub error_set: LeveledSet,
}

/// Rokhlin tower of the given height with error measure `< eps`.
///
/// Builds the Kakutani tower over a left-aligned interval `B0` with
/// `mu(B0) = eps / height`, cuts each return column of height `h` into
/// `h / height` blocks of exactly `height` levels, and takes the union of the
/// block bottoms as the base. The leftover tops have measure at most
/// `(height - 1) mu(B0) < eps`.
pub fn rokhlin(sys: &System, height: usize, eps: &Rational, piece_cap: usize) -> Result<RokhlinResult> {
    let field = sys.field();
    let eps_q = field.rational(eps.clone());
    if height == 0 {
        return Err(Error::Precondition("Rokhlin height must be positive".into()));
    }
    if eps_q.signum() <= 0 || eps_q >= field.one() {
        return Err(Error::Precondition("eps must lie in (0, 1)".into()));
    }
    let full = sys.full_space();
    if height == 1 {
        let column = Column::new(sys, 1, full, 1)?;
        return Ok(RokhlinResult {
            column,
            error_set: LeveledSet::empty(field),
        });
    }
    let cell = sys.locate_point(&field.zero());
    let first = sys.cell(cell).base.parts()[0].clone();
    let target = (&eps_q * sys.normalizer()).scale(&Rational::new(1.into(), (height as i64).into()));
    let len = target.min(first.length());
    let b0 = LeveledSet::single(
        Level::new(cell, 0),
        IntervalSet::interval(first.start.clone(), &first.start + &len)?,
    );
    let returns = kakutani(sys, &b0, piece_cap)?;
    let mut bottoms = Vec::new();
    for col in returns.columns() {
        for block in 0..col.height() / height {
            bottoms.push(col.level(block * height).clone());
        }
    }
    let base = LeveledSet::union_all(field, &bottoms);
    if base.is_empty() {
        return Err(Error::Precondition(format!(
            "eps too small: no return column reaches height {height}"
        )));
    }
    let column = Column::new(sys, height, base, height)?;
    let error_set = full.difference(&column.union());
    if sys.measure(&error_set) >= eps_q {
        return Err(Error::AuditFailed("Rokhlin error set is not smaller than eps".into()));
    }
    if !column_check(sys, &column) {
        return Err(Error::AuditFailed("Rokhlin column is not a column".into()));
    }
    Ok(RokhlinResult { column, error_set })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{ratio, Field};
    use crate::systems::{build_inflation, PiecewiseTranslation};

    fn f() -> Field {
        Field::GOLDEN
    }

    fn alpha() -> QuadNumber {
        Field::golden_angle()
    }

    fn rot() -> System {
        System::rotation(alpha()).unwrap()
    }

    fn flat(s: QuadNumber, e: QuadNumber) -> LeveledSet {
        LeveledSet::flat(IntervalSet::interval(s, e).unwrap())
    }

    /// Return times by brute force: iterate each point of a fine rational
    /// grid until it re-enters `[lo, hi)`.
    fn brute_return_times(lo: &QuadNumber, hi: &QuadNumber) -> std::collections::BTreeSet<usize> {
        let a = alpha();
        let mut out = std::collections::BTreeSet::new();
        for k in 0..200 {
            let x = lo + &(hi - lo).scale(&ratio(2 * k + 1, 400));
            let mut y = x;
            for n in 1..10_000 {
                y = (&y + &a).floor_mod1().1;
                if &y >= lo && &y < hi {
                    out.insert(n);
                    break;
                }
            }
        }
        out
    }

    #[test]
    fn golden_tower_over_alpha() {
        let sys = rot();
        let one = f().one();
        let b = flat(f().zero(), alpha());
        let t = kakutani(&sys, &b, DEFAULT_PIECE_CAP).unwrap();
        let heights: Vec<usize> = t.columns().iter().map(Column::height).collect();
        assert_eq!(heights, vec![1, 2]);
        assert_eq!(t.column(1).unwrap().base(), &flat(&one - &alpha(), alpha()));
        assert_eq!(t.column(2).unwrap().base(), &flat(f().zero(), &one - &alpha()));
        assert_eq!(t.kac_sum(&sys), one);
        assert!(partition_check(&t, &sys.full_space()));
        assert!(tower_check(&sys, &t));
        let brute: Vec<usize> = brute_return_times(&f().zero(), &alpha()).into_iter().collect();
        assert_eq!(brute, vec![1, 2]);
    }

    #[test]
    fn missing_column_fails_partition() {
        let sys = rot();
        let t = kakutani(&sys, &flat(f().zero(), alpha()), DEFAULT_PIECE_CAP).unwrap();
        assert!(!partition_check(&t.without(2), &sys.full_space()));
    }

    #[test]
    fn full_base_is_rejected_and_single_column_partitions() {
        let sys = rot();
        assert!(kakutani(&sys, &sys.full_space(), DEFAULT_PIECE_CAP).is_err());
        let c = Column::new(&sys, 1, sys.full_space(), 1).unwrap();
        let t = Tower::new(vec![c]);
        assert!(partition_check(&t, &sys.full_space()));
        assert!(tower_check(&sys, &t));
    }

    #[test]
    fn fatness_of_golden_tower() {
        let sys = rot();
        let t = kakutani(&sys, &flat(f().zero(), alpha()), DEFAULT_PIECE_CAP).unwrap();
        let fat = fatness_partial(&sys, &t, 2);
        let expected = &f().int(3) - &alpha().scale_int(2);
        assert_eq!(fat.column_form, expected);
        assert_eq!(fat.return_time_form, Some(expected));
        assert!(fat.forms_agree());
        assert!(fatness_partial(&sys, &Tower::new(vec![]), 5).column_form.is_zero());
    }

    #[test]
    fn inflation_column_tower_fatness() {
        let sys = build_inflation(PiecewiseTranslation::rotation(alpha()).unwrap(), 10).unwrap();
        let cols = (1..=10)
            .map(|i| {
                let base = LeveledSet::single(Level::new(i, 0), sys.cell(i).base.clone());
                Column::new(&sys, i, base, sys.height(i)).unwrap()
            })
            .collect();
        let t = Tower::new(cols);
        assert!(tower_check(&sys, &t));
        let fat = fatness_partial(&sys, &t, 10);
        assert_eq!(fat.column_form, &f().int(30) / sys.normalizer());
        assert!(fat.return_time_form.is_none());
    }

    #[test]
    fn duplicated_level_is_not_a_column() {
        let sys = rot();
        let b = flat(f().zero(), f().ratio(1, 10));
        let good = Column::new(&sys, 3, b.clone(), 3).unwrap();
        assert!(column_check(&sys, &good));
        let bad = Column::from_levels(3, vec![b.clone(), b.clone(), sys.image(&b, 2).unwrap()]);
        assert!(!column_check(&sys, &bad));
        let skewed = Column::from_levels(2, vec![b.clone(), sys.image(&b, 2).unwrap()]);
        assert!(!column_check(&sys, &skewed));
    }

    #[test]
    fn rokhlin_examples() {
        let sys = rot();
        let r = rokhlin(&sys, 1, &ratio(1, 10), DEFAULT_PIECE_CAP).unwrap();
        assert_eq!(r.column.base(), &sys.full_space());
        assert!(r.error_set.is_empty());

        let r = rokhlin(&sys, 5, &ratio(1, 10), DEFAULT_PIECE_CAP).unwrap();
        assert_eq!(r.column.height(), 5);
        assert!(sys.measure(&r.error_set) < f().ratio(1, 10));
        assert!(column_check(&sys, &r.column));
        let mut parts = r.column.levels().to_vec();
        parts.push(r.error_set.clone());
        assert!(LeveledSet::pairwise_disjoint(&parts));
        assert_eq!(LeveledSet::union_all(f(), &parts), sys.full_space());
    }

    #[test]
    fn rokhlin_on_inflation() {
        let sys = build_inflation(PiecewiseTranslation::rotation(alpha()).unwrap(), 3).unwrap();
        let r = rokhlin(&sys, 4, &ratio(1, 5), DEFAULT_PIECE_CAP).unwrap();
        assert!(column_check(&sys, &r.column));
        assert!(sys.measure(&r.error_set) < f().ratio(1, 5));
    }

    #[test]
    fn piece_cap_is_enforced() {
        let sys = rot();
        let b = flat(f().zero(), f().ratio(1, 1000));
        assert_eq!(kakutani(&sys, &b, 2), Err(Error::PieceCapExceeded { cap: 2 }));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn endpoint() -> impl Strategy<Value = QuadNumber> {
            (0i64..=30, -3i64..=3).prop_map(|(n, k)| {
                (&Field::GOLDEN.ratio(n, 31) + &Field::golden_angle().scale(&ratio(k, 4))).floor_mod1().1
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(40))]

            #[test]
            fn kac_three_distance_and_equivalence(a in endpoint(), b in endpoint()) {
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                let len = &hi - &lo;
                prop_assume!(len >= Field::GOLDEN.ratio(1, 20) && len < Field::GOLDEN.one());
                let sys = rot();
                let t = kakutani(&sys, &flat(lo, hi), DEFAULT_PIECE_CAP).unwrap();
                prop_assert!(partition_check(&t, &sys.full_space()));
                prop_assert_eq!(t.kac_sum(&sys), Field::GOLDEN.one());
                prop_assert!(t.columns().len() <= 3);
                let fat = fatness_partial(&sys, &t, usize::MAX);
                prop_assert!(fat.forms_agree());
                for c in t.columns() {
                    // m(T_N) = N m(B_N), term by term.
                    prop_assert_eq!(c.measure(&sys), sys.measure(c.base()).scale_int(c.height() as i64));
                }
            }

            #[test]
            fn rokhlin_audit(height in 2usize..=20, tenth in prop::bool::ANY) {
                let eps = if tenth { ratio(1, 10) } else { ratio(1, 100) };
                let sys = rot();
                let r = rokhlin(&sys, height, &eps, DEFAULT_PIECE_CAP).unwrap();
                prop_assert!(sys.measure(&r.error_set) < Field::GOLDEN.rational(eps));
                prop_assert!(column_check(&sys, &r.column));
                let mut parts = r.column.levels().to_vec();
                parts.push(r.error_set.clone());
                prop_assert!(LeveledSet::pairwise_disjoint(&parts));
                prop_assert_eq!(LeveledSet::union_all(Field::GOLDEN, &parts), sys.full_space());
            }
        }
    }
}
