//! Building a fat tower inside an aperiodic system by stagewise surgery.
//!
//! Stage `n` extracts a fresh column `T(n,1)` of height `k_n` and measure
//! `1/k_n` from the whole space, then repairs the older columns: every grain
//! (vertical fiber) of an old column that meets the new column is cut out,
//! and the part of those grains outside the new column is handed back to the
//! first column `X_n`. Every stage is audited exactly.

use num_bigint::{BigInt, BigUint};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{Exact, QuadNumber, Rational};
use crate::leveled::LeveledSet;
use crate::systems::System;
use crate::towers::{column_check, partition_check, rokhlin, Column, Tower, DEFAULT_PIECE_CAP};

fn rat(n: &BigUint) -> Rational {
    Rational::from_integer(BigInt::from(n.clone()))
}

fn rat_ratio(num: &BigUint, den: &BigUint) -> Rational {
    Rational::new(BigInt::from(num.clone()), BigInt::from(den.clone()))
}

/// Outcome of the two summability conditions on a growth sequence.
#[derive(Clone, Debug, Serialize)]
pub struct GrowthReport {
    /// Smallest ratio `k_(j+1) / k_j` of the given prefix; the unseen tail is
    /// assumed to grow at least this fast.
    pub min_ratio: Exact,
    /// Upper bound for `sum_(j >= 2) 1/k_j`.
    pub sum_bound: Exact,
    /// Upper bound for `sum_(t >= 1) k_j / k_(j+t)`, one per listed `j`,
    /// followed by the bound `1/(q - 1)` shared by all unlisted `j`.
    pub row_bounds: Vec<Exact>,
    pub passed: bool,
}

fn validate_ks(ks: &[BigUint]) -> Result<Rational> {
    if ks.first() != Some(&BigUint::from(1u8)) {
        return Err(Error::Precondition("the growth sequence must start with 1".into()));
    }
    if ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Precondition("the growth sequence must be strictly increasing".into()));
    }
    if ks.len() < 2 {
        return Err(Error::TailNotCertifiable("need at least two terms".into()));
    }
    let q = ks
        .windows(2)
        .map(|w| rat_ratio(&w[1], &w[0]))
        .min()
        .expect("at least one ratio");
    if q < Rational::from_integer(2.into()) {
        return Err(Error::TailNotCertifiable(format!(
            "consecutive ratio {q} is below 2"
        )));
    }
    Ok(q)
}

/// Decides `sum_(j >= 2) 1/k_j < budget` and `sum_(t >= 1) k_j/k_(j+t) < budget`
/// for all `j`, bounding the infinite tails geometrically by the smallest
/// ratio of the prefix `ks` (which must start with `k_1 = 1`).
pub fn check_growth(ks: &[BigUint], budget: &Rational) -> Result<GrowthReport> {
    let q = validate_ks(ks)?;
    let one = Rational::from_integer(1.into());
    let last = ks.last().expect("nonempty");
    // sum_(i > m) 1/k_i <= 1 / (k_m (q - 1))
    let tail = &one / (rat(last) * (&q - &one));
    let sum_bound = ks[1..].iter().fold(tail.clone(), |acc, k| acc + &one / rat(k));
    let mut rows: Vec<Rational> = (0..ks.len())
        .map(|j| {
            let kj = rat(&ks[j]);
            ks[j + 1..]
                .iter()
                .fold(&kj * &tail, |acc, k| acc + &kj / rat(k))
        })
        .collect();
    rows.push(&one / (&q - &one));
    let passed = &sum_bound < budget && rows.iter().all(|r| r < budget);
    Ok(GrowthReport {
        min_ratio: Exact::rational(&q),
        sum_bound: Exact::rational(&sum_bound),
        row_bounds: rows.iter().map(Exact::rational).collect(),
        passed,
    })
}

/// Certified bound for the measure moved in or out of the first column over
/// all stages, `sum_(n >= 2) [1/k_n + sum_(2 <= j < n) k_j/k_n]`.
#[derive(Clone, Debug, Serialize)]
pub struct LimitDiagnostics {
    pub bound: Exact,
    pub finite: bool,
}

/// Bounds the displaced-measure series. Beyond the prefix the sequence is
/// assumed to keep squaring, `k_(n+1) >= k_n^2`, which is checked on the
/// prefix from `k_2` on; the tail is then at most `6 / k_m`.
pub fn limit_diagnostics(ks: &[BigUint]) -> Result<LimitDiagnostics> {
    validate_ks(ks)?;
    if ks.len() < 3 {
        return Err(Error::TailNotCertifiable("need k_2 and k_3".into()));
    }
    if ks[1..].windows(2).any(|w| w[1] < &w[0] * &w[0]) {
        return Err(Error::TailNotCertifiable("the sequence does not square from k_2 on".into()));
    }
    let one = Rational::from_integer(1.into());
    let mut bound = Rational::from_integer(6.into()) / rat(ks.last().expect("nonempty"));
    let mut prefix = BigUint::from(0u8);
    for k in &ks[1..] {
        let kn = rat(k);
        bound = bound + &one / &kn + rat(&prefix) / &kn;
        prefix += k;
    }
    Ok(LimitDiagnostics {
        bound: Exact::rational(&bound),
        finite: true,
    })
}

/// A column of height `k` and measure exactly `1/k`, cut from the bottom
/// of a Rokhlin tower of height `k + 1` and error `eps`.
pub fn extract_column(sys: &System, k: usize, eps: &Rational, piece_cap: usize) -> Result<Column> {
    if k < 2 {
        return Err(Error::Precondition("column height must be at least 2".into()));
    }
    let field = sys.field();
    let one = Rational::from_integer(1.into());
    let kk = Rational::from_integer((k as i64).into());
    if (&one - eps) / (&kk + &one) < &one / (&kk * &kk) {
        return Err(Error::Precondition(format!("eps too large to extract a column of height {k}")));
    }
    let tower = rokhlin(sys, k + 1, eps, piece_cap)?;
    let target = sys.normalizer().scale(&(&one / (&kk * &kk)));
    let base = tower
        .column
        .base()
        .leftmost(&target)
        .ok_or_else(|| Error::AuditFailed("Rokhlin base smaller than 1/k^2".into()))?;
    let column = Column::new(sys, k, base, k)?;
    if column.measure(sys) != field.rational(one / kk) {
        return Err(Error::AuditFailed("extracted column does not have measure 1/k".into()));
    }
    Ok(column)
}

/// The tower after some stage: `X_n` and the columns `T(j, n-j+1)`.
#[derive(Clone, Debug)]
pub struct StageState {
    pub stage: usize,
    pub first: LeveledSet,
    /// `(j, column)` for `2 <= j <= stage`; each column has height `k_j`.
    pub columns: Vec<(usize, Column)>,
    pub ks: Vec<usize>,
}

impl StageState {
    /// Stage 1: the tower consisting of the whole space.
    pub fn initial(sys: &System, ks: Vec<usize>) -> Self {
        StageState {
            stage: 1,
            first: sys.full_space(),
            columns: Vec::new(),
            ks,
        }
    }

    /// The tower with `X_n` as the height-1 column of index 1 and `T(j, .)`
    /// as column `j`.
    pub fn tower(&self) -> Tower {
        let mut cols = vec![Column::from_levels(1, vec![self.first.clone()])];
        cols.extend(
            self.columns
                .iter()
                .map(|(j, c)| Column::from_levels(*j, c.levels().to_vec())),
        );
        Tower::new(cols)
    }
}

/// Surgery on one old column at one stage.
#[derive(Clone, Debug, Serialize)]
pub struct SurgeryReport {
    pub j: usize,
    pub height: usize,
    pub removed: Exact,
    /// `k_j / k_n`.
    pub removed_bound: Exact,
    pub removed_ok: bool,
    /// `sum_i mu(C_i)` with `C_i` the first entrances of grains into the new column.
    pub entries_first_entrance: Exact,
    /// `sum_i mu(C_i)` with `C_i` the points of the new column having some
    /// pre-image in the old column outside it.
    pub entries_some_preimage: Exact,
    /// Both readings saturate to the same set of grains.
    pub saturations_agree: bool,
    pub returned: Exact,
    pub returned_disjoint: bool,
    pub nested: bool,
    pub column_ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct StageReport {
    pub stage: usize,
    pub k: usize,
    pub surgery: Vec<SurgeryReport>,
    pub first_measure: Exact,
    /// `1 - sum_(2 <= j <= n) 1/k_j`.
    pub first_bound: Exact,
    /// `min_j k_j mu(T(j, .))`, the P3 constant reached at this stage.
    pub measured_c: Option<Exact>,
    pub partition_ok: bool,
    pub heights_ok: bool,
    pub p3_ok: bool,
    pub fatness: Exact,
}

/// Runs stage `state.stage + 1`.
pub fn stage_refine(
    sys: &System,
    state: &StageState,
    eps: &Rational,
    piece_cap: usize,
) -> Result<(StageState, Vec<SurgeryReport>)> {
    let n = state.stage + 1;
    let kn = *state
        .ks
        .get(n - 1)
        .ok_or_else(|| Error::Precondition(format!("no k for stage {n}")))?;
    let field = sys.field();
    let fresh = extract_column(sys, kn, eps, piece_cap)?;
    let fresh_set = fresh.union();
    let mut returned_all = Vec::new();
    let mut columns = Vec::with_capacity(state.columns.len() + 1);
    let mut reports = Vec::new();
    for (j, col) in &state.columns {
        let kj = col.height();
        // G_i: base points whose grain meets the new column at level i.
        let hits: Vec<LeveledSet> = col
            .levels()
            .iter()
            .enumerate()
            .map(|(i, level)| sys.image(&level.intersect(&fresh_set), -(i as i64)))
            .collect::<Result<_>>()?;
        let mut seen = LeveledSet::empty(field);
        let mut all_before: Option<LeveledSet> = None;
        let mut first_entrance = field.zero();
        let mut some_preimage = field.zero();
        let mut formula_union = LeveledSet::empty(field);
        for g in &hits {
            first_entrance = first_entrance + sys.measure(&g.difference(&seen));
            let c = match &all_before {
                None => g.clone(),
                Some(all) => g.difference(all),
            };
            some_preimage = some_preimage + sys.measure(&c);
            formula_union = formula_union.union(&c);
            seen = seen.union(g);
            all_before = Some(match all_before {
                None => col.base().clone(),
                Some(all) => all,
            }
            .intersect(g));
        }
        let grains = seen;
        let saturations_agree = formula_union == grains;

        let mut removed_levels = Vec::with_capacity(kj);
        let mut kept_levels = Vec::with_capacity(kj);
        let mut current = grains.clone();
        for (i, level) in col.levels().iter().enumerate() {
            if i > 0 {
                current = sys.image(&current, 1)?;
            }
            kept_levels.push(level.difference(&current));
            removed_levels.push(current.clone());
        }
        let removed = LeveledSet::union_all(field, &removed_levels);
        let returned = removed.difference(&fresh_set);
        let kept = Column::from_levels(*j, kept_levels);

        let removed_measure = sys.measure(&removed);
        let bound = field.ratio(kj as i64, kn as i64);
        let nested = kept
            .levels()
            .iter()
            .zip(col.levels())
            .all(|(new, old)| new.is_subset(old));
        reports.push(SurgeryReport {
            j: *j,
            height: kj,
            removed_ok: removed_measure <= bound,
            removed: Exact::from(&removed_measure),
            removed_bound: Exact::from(&bound),
            entries_first_entrance: Exact::from(&first_entrance),
            entries_some_preimage: Exact::from(&some_preimage),
            saturations_agree,
            returned: Exact::from(sys.measure(&returned)),
            returned_disjoint: returned.is_disjoint(&fresh_set),
            nested,
            column_ok: column_check(sys, &kept) && kept.union().is_disjoint(&fresh_set),
        });
        returned_all.push(returned);
        columns.push((*j, kept));
    }
    let mut first = state.first.difference(&fresh_set);
    for r in &returned_all {
        first = first.union(r);
    }
    columns.push((n, Column::from_levels(n, fresh.levels().to_vec())));
    let next = StageState {
        stage: n,
        first,
        columns,
        ks: state.ks.clone(),
    };
    Ok((next, reports))
}

#[derive(Clone, Debug, Serialize)]
pub struct IntrinsicReport {
    pub ks: Vec<usize>,
    pub stages: usize,
    pub eps: Exact,
    pub growth: GrowthReport,
    pub stage_reports: Vec<StageReport>,
    /// Final column measures `(j, mu(T(j, .)))`.
    pub column_measures: Vec<(usize, Exact)>,
    pub p1: bool,
    pub p2: bool,
    pub p3: bool,
    pub nesting: bool,
    pub removal: bool,
    pub returned_disjoint: bool,
    /// `sum_(j >= 2) k_j mu(T(j, .))` after the last stage.
    pub fatness: Exact,
    /// `(7/8)(n - 1)`.
    pub fatness_bound: Exact,
    pub fatness_ok: bool,
    pub limit: Option<LimitDiagnostics>,
}

impl IntrinsicReport {
    pub fn passed(&self) -> bool {
        self.growth.passed
            && self.p1
            && self.p2
            && self.p3
            && self.nesting
            && self.removal
            && self.returned_disjoint
            && self.fatness_ok
    }
}

fn stage_summary(sys: &System, state: &StageState, surgery: Vec<SurgeryReport>) -> StageReport {
    let field = sys.field();
    let n = state.stage;
    let first_measure = sys.measure(&state.first);
    let first_bound = state.ks[1..n]
        .iter()
        .fold(field.one(), |acc, &k| acc - field.ratio(1, k as i64));
    let seven_eighths = field.ratio(7, 8);
    let mut measured_c: Option<QuadNumber> = None;
    let mut p3_ok = first_measure >= first_bound;
    let mut fatness = field.zero();
    for (j, col) in &state.columns {
        let m = col.measure(sys);
        let k = state.ks[j - 1] as i64;
        let c = m.scale_int(k);
        p3_ok &= c >= seven_eighths;
        fatness = fatness + c.clone();
        measured_c = Some(match measured_c {
            None => c,
            Some(prev) => prev.min(c),
        });
    }
    let heights_ok = state
        .columns
        .iter()
        .all(|(j, col)| col.height() == state.ks[j - 1]);
    StageReport {
        stage: n,
        k: state.ks[n - 1],
        surgery,
        first_measure: Exact::from(&first_measure),
        first_bound: Exact::from(&first_bound),
        measured_c: measured_c.as_ref().map(Exact::from),
        partition_ok: partition_check(&state.tower(), &sys.full_space()),
        heights_ok,
        p3_ok,
        fatness: Exact::from(&fatness),
    }
}

/// Runs `stages` stages on `sys` with growth sequence `ks` (starting at
/// `k_1 = 1`) and Rokhlin error `eps`.
pub fn run_intrinsic(
    sys: &System,
    ks: &[usize],
    stages: usize,
    eps: &Rational,
    budget: &Rational,
    piece_cap: usize,
) -> Result<(Tower, IntrinsicReport)> {
    let big: Vec<BigUint> = ks.iter().map(|&k| BigUint::from(k)).collect();
    let growth = check_growth(&big, budget)?;
    if !growth.passed {
        return Err(Error::Precondition("growth sequence fails the budget conditions".into()));
    }
    if stages == 0 || stages > ks.len() {
        return Err(Error::Precondition(format!(
            "stages must lie in 1..={}",
            ks.len()
        )));
    }
    let field = sys.field();
    let mut state = StageState::initial(sys, ks.to_vec());
    let mut stage_reports = vec![stage_summary(sys, &state, Vec::new())];
    let mut history: Vec<Vec<(usize, Column)>> = vec![Vec::new()];
    while state.stage < stages {
        let (next, surgery) = stage_refine(sys, &state, eps, piece_cap)?;
        state = next;
        stage_reports.push(stage_summary(sys, &state, surgery));
        history.push(state.columns.clone());
    }
    // Nesting across every stage, not just consecutive surgery.
    let mut nesting = true;
    for w in history.windows(2) {
        for (j, col) in &w[0] {
            let later = &w[1].iter().find(|(i, _)| i == j).expect("columns persist").1;
            nesting &= later
                .levels()
                .iter()
                .zip(col.levels())
                .all(|(a, b)| a.is_subset(b));
        }
    }
    let surgeries = stage_reports.iter().flat_map(|s| s.surgery.iter());
    let removal = surgeries.clone().all(|s| s.removed_ok && s.column_ok);
    let returned_disjoint = surgeries.clone().all(|s| s.returned_disjoint);
    let last = stage_reports.last().expect("at least one stage");
    let fatness = state.columns.iter().fold(field.zero(), |acc, (j, col)| {
        acc + col.measure(sys).scale_int(ks[j - 1] as i64)
    });
    let fatness_bound = field.ratio(7 * (stages as i64 - 1), 8);
    let limit = limit_diagnostics(&big).ok();
    let report = IntrinsicReport {
        ks: ks.to_vec(),
        stages,
        eps: Exact::rational(eps),
        p1: stage_reports.iter().all(|s| s.partition_ok),
        p2: stage_reports.iter().all(|s| s.heights_ok),
        p3: stage_reports.iter().all(|s| s.p3_ok),
        nesting: nesting && surgeries.clone().all(|s| s.nested),
        removal,
        returned_disjoint,
        column_measures: state
            .columns
            .iter()
            .map(|(j, c)| (*j, Exact::from(c.measure(sys))))
            .collect(),
        fatness_ok: fatness >= fatness_bound && last.stage == stages,
        fatness: Exact::from(&fatness),
        fatness_bound: Exact::from(&fatness_bound),
        growth,
        stage_reports,
        limit,
    };
    Ok((state.tower(), report))
}

/// [`run_intrinsic`] with the default piece cap.
pub fn run_intrinsic_default(
    sys: &System,
    ks: &[usize],
    stages: usize,
    eps: &Rational,
    budget: &Rational,
) -> Result<(Tower, IntrinsicReport)> {
    run_intrinsic(sys, ks, stages, eps, budget, DEFAULT_PIECE_CAP)
}
