//! The indicator counterexample: from a fat tower build `A` as the union of
//! its tall columns, and show exactly that the stability time
//!
//! ```text
//! N(x) = min { n : A_k 1_A (x) <= 2 mu(A) for all k >= n }
//! ```
//!
//! has a large integral.
//!
//! `N(x)` quantifies over all `k`, so it is replaced by the truncated
//! `N_H(x) = min { n <= H : A_k 1_A (x) <= 2 mu(A) for n <= k <= H }`
//! (`H + 1` if no such `n`). `N_H` increases pointwise to `N`, so every
//! integral computed here is a certified lower bound for `∫ N dmu`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{Exact, QuadNumber, Rational};
use crate::leveled::{Level, LeveledSet};
use crate::sets::Interval;
use crate::sweep::{sweep, Indicator};
use crate::systems::{PointAddress, System};
use crate::towers::Tower;

/// The set `A`, the integral of `f = 1_A`, and the threshold `2 ∫ f`.
#[derive(Clone, Debug)]
pub struct CounterexampleConfig {
    tower: Tower,
    n0: usize,
    set: LeveledSet,
    f_integral: QuadNumber,
    threshold: QuadNumber,
}

impl CounterexampleConfig {
    /// Like [`build_config`] but without the `mu(A) < 1/4` requirement.
    pub fn unchecked(sys: &System, tower: &Tower, n0: usize) -> Self {
        let set = LeveledSet::union_all(
            sys.field(),
            tower
                .columns()
                .iter()
                .filter(|c| c.index() >= n0)
                .flat_map(|c| c.levels().iter()),
        );
        Self::assemble(sys, tower.clone(), n0, set)
    }

    fn assemble(sys: &System, tower: Tower, n0: usize, set: LeveledSet) -> Self {
        let f_integral = sys.measure(&set);
        let threshold = f_integral.scale_int(2);
        CounterexampleConfig {
            tower,
            n0,
            set,
            f_integral,
            threshold,
        }
    }

    /// A configuration for an arbitrary set `A`, with no tower behind it.
    pub fn for_set(sys: &System, set: LeveledSet) -> Self {
        Self::assemble(sys, Tower::new(Vec::new()), 0, set)
    }

    /// The same tower and `N0` with a different set `A` (integral and
    /// threshold recomputed).
    pub fn with_set(&self, sys: &System, set: LeveledSet) -> Self {
        Self::assemble(sys, self.tower.clone(), self.n0, set)
    }

    pub fn tower(&self) -> &Tower {
        &self.tower
    }

    pub fn n0(&self) -> usize {
        self.n0
    }

    /// The set `A`.
    pub fn set(&self) -> &LeveledSet {
        &self.set
    }

    pub fn f_integral(&self) -> &QuadNumber {
        &self.f_integral
    }

    pub fn threshold(&self) -> &QuadNumber {
        &self.threshold
    }
}

/// Smallest column index whose tail `∪_{index >= N} C` has measure `< bound`.
pub fn choose_n0(sys: &System, tower: &Tower, bound: &Rational) -> Result<usize> {
    let bound = sys.field().rational(bound.clone());
    let mut tail = sys.field().zero();
    let mut best = None;
    for col in tower.columns().iter().rev() {
        tail = tail + col.measure(sys);
        if tail < bound {
            best = Some(col.index());
        } else {
            break;
        }
    }
    best.ok_or_else(|| Error::Precondition("no column index has a tail below the bound".into()))
}

/// `A` = union of all columns with index `>= n0`; requires `mu(A) < 1/4`.
pub fn build_config(sys: &System, tower: &Tower, n0: usize) -> Result<CounterexampleConfig> {
    let cfg = CounterexampleConfig::unchecked(sys, tower, n0);
    if cfg.f_integral >= sys.field().ratio(1, 4) {
        return Err(Error::Precondition(format!(
            "mu(A) = {} is not below 1/4",
            cfg.f_integral.to_decimal(12)
        )));
    }
    Ok(cfg)
}

/// Lower halves `L_N`: levels `n` with `n < height/2` of each column with
/// index `>= n0`, keyed by column index.
pub fn lower_halves(tower: &Tower, n0: usize) -> BTreeMap<usize, LeveledSet> {
    tower
        .columns()
        .iter()
        .filter(|c| c.index() >= n0)
        .map(|c| (c.index(), c.band(0, c.height().div_ceil(2))))
        .collect()
}

/// The level sets `D_N = { x : N_H(x) = N }`, `1 <= N <= H + 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StabilityPartition {
    horizon: usize,
    cells: BTreeMap<usize, LeveledSet>,
}

impl StabilityPartition {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Nonempty cells keyed by `N`.
    pub fn cells(&self) -> &BTreeMap<usize, LeveledSet> {
        &self.cells
    }

    pub fn cell(&self, n: usize) -> Option<&LeveledSet> {
        self.cells.get(&n)
    }

    /// `N_H` at a point, read off the partition.
    pub fn value_at(&self, p: &PointAddress) -> Option<usize> {
        self.cells
            .iter()
            .find(|(_, set)| set.contains(p.level(), &p.x))
            .map(|(n, _)| *n)
    }
}

/// Exact stability partition at horizon `h`.
pub fn stability_partition(
    sys: &System,
    cfg: &CounterexampleConfig,
    h: usize,
    piece_cap: usize,
) -> Result<StabilityPartition> {
    Ok(stability_partitions(sys, cfg, &[h], piece_cap)?.remove(0))
}

/// Stability partitions at several increasing horizons from one sweep.
pub fn stability_partitions(
    sys: &System,
    cfg: &CounterexampleConfig,
    horizons: &[usize],
    piece_cap: usize,
) -> Result<Vec<StabilityPartition>> {
    if horizons.is_empty() || horizons[0] == 0 {
        return Err(Error::Precondition("horizons must be positive".into()));
    }
    let indicator = Indicator::new(sys, &cfg.set);
    let atoms = sweep(sys, &indicator, &cfg.threshold, &sys.full_space(), horizons, piece_cap)?;
    let mut out = Vec::with_capacity(horizons.len());
    for (i, &h) in horizons.iter().enumerate() {
        let mut raw: BTreeMap<usize, BTreeMap<Level, Vec<Interval>>> = BTreeMap::new();
        for atom in &atoms {
            let n = atom.marks[i].last_exceed as usize + 1;
            raw.entry(n)
                .or_default()
                .entry(atom.piece.origin)
                .or_default()
                .push(atom.piece.origin_interval());
        }
        let cells = raw
            .into_iter()
            .map(|(n, r)| (n, LeveledSet::from_raw(sys.field(), r)))
            .collect();
        out.push(StabilityPartition { horizon: h, cells });
    }
    Ok(out)
}

/// `∫ N_H dmu = sum_N N mu(D_N)`, a lower bound for `∫ N dmu`.
pub fn integral_lower_bound(sys: &System, sp: &StabilityPartition) -> QuadNumber {
    sp.cells.iter().fold(sys.field().zero(), |acc, (n, set)| {
        acc + sys.measure(set).scale_int(*n as i64)
    })
}

/// Checks `A_N 1_A >= 1/2` on every lower half `L_N`, where `N` is the
/// column height. Returns the verdict per column index.
pub fn verify_lower_half_bound(
    sys: &System,
    cfg: &CounterexampleConfig,
    halves: &BTreeMap<usize, LeveledSet>,
    piece_cap: usize,
) -> Result<BTreeMap<usize, bool>> {
    let indicator = Indicator::new(sys, &cfg.set);
    let mut out = BTreeMap::new();
    for (&index, half) in halves {
        let height = cfg
            .tower
            .column(index)
            .ok_or_else(|| Error::Precondition(format!("no column {index}")))?
            .height();
        let atoms = sweep(sys, &indicator, &cfg.threshold, half, &[height], piece_cap)?;
        let holds = atoms.iter().all(|a| 2 * a.marks[0].visits as usize >= height);
        out.insert(index, holds);
    }
    Ok(out)
}

/// The summed chain `sum N mu(L_N) <= sum n mu(C_{N,n}) <= ∫ N_H`, with
/// `C_{N,n} = L_N ∩ D_n`, over `n0 <= index <= k`.
#[derive(Clone, Debug, Serialize)]
pub struct ChainReport {
    pub horizon: usize,
    pub k: usize,
    pub lhs: QuadNumber,
    pub middle: QuadNumber,
    pub rhs: QuadNumber,
    /// The pieces `C_{N,n}` are pairwise disjoint.
    pub pieces_disjoint: bool,
    /// `N_H > N` on every `L_N`.
    pub halves_exceed: bool,
    pub ok: bool,
}

impl ChainReport {
    pub fn exact_values(&self) -> [(&'static str, Exact); 3] {
        [
            ("lhs", Exact::from(&self.lhs)),
            ("middle", Exact::from(&self.middle)),
            ("rhs", Exact::from(&self.rhs)),
        ]
    }
}

pub fn chain_check(
    sys: &System,
    cfg: &CounterexampleConfig,
    halves: &BTreeMap<usize, LeveledSet>,
    sp: &StabilityPartition,
    k: usize,
) -> Result<ChainReport> {
    let field = sys.field();
    let mut lhs = field.zero();
    let mut middle = field.zero();
    let mut pieces = Vec::new();
    let mut halves_exceed = true;
    for (&index, half) in halves.range(cfg.n0..=k) {
        let height = cfg
            .tower
            .column(index)
            .ok_or_else(|| Error::Precondition(format!("no column {index}")))?
            .height();
        if height > sp.horizon {
            return Err(Error::Precondition(format!(
                "column {index} of height {height} exceeds the horizon {}",
                sp.horizon
            )));
        }
        lhs = lhs + sys.measure(half).scale_int(height as i64);
        for (&n, cell) in &sp.cells {
            let piece = half.intersect(cell);
            if piece.is_empty() {
                continue;
            }
            if n <= height {
                halves_exceed = false;
            }
            middle = middle + sys.measure(&piece).scale_int(n as i64);
            pieces.push(piece);
        }
    }
    let rhs = integral_lower_bound(sys, sp);
    let pieces_disjoint = LeveledSet::pairwise_disjoint(&pieces);
    let ok = lhs <= rhs;
    Ok(ChainReport {
        horizon: sp.horizon,
        k,
        ok,
        pieces_disjoint,
        halves_exceed: halves_exceed && lhs <= middle && middle <= rhs,
        lhs,
        middle,
        rhs,
    })
}
