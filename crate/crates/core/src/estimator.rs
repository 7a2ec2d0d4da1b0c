//! Monte-Carlo estimates of the truncated stability time by direct orbit
//! iteration.
//!
//! Sample points are uniform dyadic draws lifted to the space, and each
//! orbit is followed exactly, so the only randomness is in the choice of
//! points. All horizons share one sample set.

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::Rational;
use crate::lattice::FastOrbit;
use crate::leveled::LeveledSet;
use crate::sweep::{exceed_floors, Indicator};
use crate::systems::{PointAddress, System};

/// `count` points distributed according to the normalized measure,
/// reproducible from `seed`.
pub fn sample_points(sys: &System, seed: u64, count: usize) -> Vec<PointAddress> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = Rational::new(BigInt::from(1), BigInt::from(1u128 << 64));
    // (cell, base measure, cumulative raw mass before the cell)
    let mut table = Vec::with_capacity(sys.cells().len());
    let mut cum = sys.field().zero();
    for (i, c) in sys.cells().iter().enumerate() {
        let m = c.base.measure();
        let mass = m.scale_int(c.height as i64);
        table.push((i, m, cum.clone()));
        cum = cum + mass;
    }
    (0..count)
        .map(|_| {
            let u = Rational::from_integer(BigInt::from(rng.next_u64())) * &scale;
            let t = sys.normalizer().scale(&u);
            let slot = table.partition_point(|(_, _, start)| start <= &t) - 1;
            let (cell, m, start) = &table[slot];
            let offset = &t - start;
            let level = (&offset / m).floor();
            let mut r = &offset - &m.scale(&Rational::from_integer(level.clone()));
            let level = level.to_usize().expect("level fits").min(sys.height(*cell) - 1);
            let parts = sys.cell(*cell).base.parts();
            let mut x = parts.last().expect("nonempty base").start.clone();
            for iv in parts {
                let len = iv.length();
                if r < len {
                    x = &iv.start + &r;
                    break;
                }
                r = &r - &len;
            }
            PointAddress { cell: *cell, level, x }
        })
        .collect()
}

/// Orbit-following evaluator of `N_H` for one set `A` with threshold
/// `2 mu(A)`.
pub struct StabilityOracle<'a> {
    sys: &'a System,
    indicator: Indicator,
    floors: Vec<u64>,
    fast: Option<FastOrbit>,
    set: LeveledSet,
}

impl<'a> StabilityOracle<'a> {
    pub fn new(sys: &'a System, set: &LeveledSet, max_horizon: usize) -> Result<Self> {
        if max_horizon as u64 > sys.orbit_cap() {
            return Err(Error::OrbitCapExceeded {
                requested: max_horizon as u64,
                cap: sys.orbit_cap(),
            });
        }
        let theta = sys.measure(set).scale_int(2);
        Ok(StabilityOracle {
            sys,
            indicator: Indicator::new(sys, set),
            floors: exceed_floors(&theta, max_horizon),
            fast: None,
            set: set.clone(),
        })
    }

    /// Enables integer orbit following for points like these, when their
    /// coordinates and the system's share a small enough denominator.
    pub fn prepare(&mut self, points: &[PointAddress]) {
        self.fast = FastOrbit::new(self.sys, &self.set, points);
    }

    /// `N_H(x)` at each of the increasing `horizons`, from one orbit pass.
    pub fn times(&self, x: &PointAddress, horizons: &[usize]) -> Vec<usize> {
        let h = *horizons.last().expect("at least one horizon");
        assert!(h < self.floors.len(), "horizon beyond the oracle's range");
        if let Some(out) = self.fast_times(x, horizons) {
            return out;
        }
        let mut out = Vec::with_capacity(horizons.len());
        let mut p = x.clone();
        let mut visits = 0u64;
        let mut last = 0usize;
        let mut next = 0;
        for k in 1..=h {
            if self.indicator.contains(&p) {
                visits += 1;
            }
            if visits > self.floors[k] {
                last = k;
            }
            while next < horizons.len() && horizons[next] == k {
                out.push(last + 1);
                next += 1;
            }
            if k < h {
                self.sys.step_forward_mut(&mut p);
            }
        }
        out
    }
}

impl StabilityOracle<'_> {
    fn fast_times(&self, x: &PointAddress, horizons: &[usize]) -> Option<Vec<usize>> {
        let fast = self.fast.as_ref()?;
        let h = *horizons.last()?;
        let mut out = Vec::with_capacity(horizons.len());
        let mut p = fast.start(x)?;
        let mut visits = 0u64;
        let mut last = 0usize;
        let mut next = 0;
        for k in 1..=h {
            if fast.contains(&p) {
                visits += 1;
            }
            if visits > self.floors[k] {
                last = k;
            }
            while next < horizons.len() && horizons[next] == k {
                out.push(last + 1);
                next += 1;
            }
            if k < h {
                fast.step(&mut p)?;
            }
        }
        Some(out)
    }
}

/// `N_H(x) = 1 + max{k <= H : S_k / k > 2 mu(A)}` (the max of nothing is 0).
pub fn stability_time(sys: &System, set: &LeveledSet, x: &PointAddress, h: usize) -> Result<usize> {
    if h == 0 {
        return Err(Error::Precondition("horizon must be positive".into()));
    }
    let mut oracle = StabilityOracle::new(sys, set, h)?;
    oracle.prepare(std::slice::from_ref(x));
    Ok(oracle.times(x, &[h])[0])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateRow {
    pub horizon: usize,
    pub samples: usize,
    pub mean: f64,
    pub stderr: f64,
    pub seed: u64,
}

impl EstimateRow {
    pub const CSV_HEADER: &'static str = "H,samples,mean,stderr,seed";

    pub fn csv(&self) -> String {
        format!(
            "{},{},{:.6},{:.6},{}",
            self.horizon, self.samples, self.mean, self.stderr, self.seed
        )
    }
}

/// Mean and standard error of `N_H` over `n` shared sample points.
pub fn mean_curve(
    sys: &System,
    set: &LeveledSet,
    horizons: &[usize],
    n: usize,
    seed: u64,
) -> Result<Vec<EstimateRow>> {
    if horizons.is_empty() || horizons[0] == 0 || horizons.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Precondition("horizons must be positive and increasing".into()));
    }
    if n == 0 {
        return Err(Error::Precondition("sample count must be positive".into()));
    }
    let mut oracle = StabilityOracle::new(sys, set, *horizons.last().expect("nonempty"))?;
    let points = sample_points(sys, seed, n);
    oracle.prepare(&points);
    let times: Vec<Vec<usize>> = points.par_iter().map(|p| oracle.times(p, horizons)).collect();
    Ok(horizons
        .iter()
        .enumerate()
        .map(|(i, &h)| {
            // Integer sums keep the reduction order-independent.
            let (sum, sum_sq) = times.iter().fold((0u128, 0u128), |(s, q), t| {
                let v = t[i] as u128;
                (s + v, q + v * v)
            });
            let nf = n as f64;
            let mean = sum as f64 / nf;
            let var = if n > 1 {
                ((sum_sq as f64) - (sum as f64) * mean) / (nf - 1.0)
            } else {
                0.0
            };
            EstimateRow {
                horizon: h,
                samples: n,
                mean,
                stderr: (var.max(0.0) / nf).sqrt(),
                seed,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counterexample::{build_config, stability_partition, CounterexampleConfig};
    use crate::field::Field;
    use crate::leveled::Level;
    use crate::sets::IntervalSet;
    use crate::systems::{build_inflation, PiecewiseTranslation};
    use crate::towers::{Column, Tower, DEFAULT_PIECE_CAP};

    fn f() -> Field {
        Field::GOLDEN
    }

    fn inflation(i_max: usize) -> System {
        build_inflation(PiecewiseTranslation::rotation(Field::golden_angle()).unwrap(), i_max).unwrap()
    }

    fn column_tower(sys: &System, i_max: usize) -> Tower {
        Tower::new(
            (1..=i_max)
                .map(|i| {
                    let base = LeveledSet::single(Level::new(i, 0), sys.cell(i).base.clone());
                    Column::new(sys, i, base, sys.height(i)).unwrap()
                })
                .collect(),
        )
    }

    #[test]
    fn sampling_is_deterministic_and_valid() {
        let sys = inflation(6);
        let a = sample_points(&sys, 7, 200);
        assert_eq!(a, sample_points(&sys, 7, 200));
        assert_ne!(a, sample_points(&sys, 8, 200));
        for p in &a {
            assert!(sys.point(p.cell, p.level, p.x.clone()).is_ok());
        }
        let one = sample_points(&System::rotation(Field::golden_angle()).unwrap(), 1, 1);
        assert_eq!(one.len(), 1);
        assert!(one[0].x.signum() >= 0 && one[0].x < f().one());
    }

    #[test]
    fn cell_frequencies_match_measure() {
        let sys = inflation(6);
        let n = 10_000;
        let pts = sample_points(&sys, 42, n);
        for (i, c) in sys.cells().iter().enumerate() {
            let p = (c.base.measure().scale_int(c.height as i64) / sys.normalizer().clone()).to_f64();
            let hits = pts.iter().filter(|q| q.cell == i).count() as f64 / n as f64;
            let sd = (p * (1.0 - p) / n as f64).sqrt();
            assert!((hits - p).abs() <= 4.0 * sd, "cell {i}: {hits} vs {p}");
        }
    }

    #[test]
    fn empty_set_is_constant_one() {
        let sys = inflation(4);
        let empty = LeveledSet::empty(f());
        let rows = mean_curve(&sys, &empty, &[4, 16], 50, 3).unwrap();
        for row in rows {
            assert_eq!(row.mean, 1.0);
            assert_eq!(row.stderr, 0.0);
        }
    }

    #[test]
    fn levels_zero_of_tall_columns_exceed_height() {
        let sys = inflation(8);
        let cfg = build_config(&sys, &column_tower(&sys, 8), 3).unwrap();
        for i in 3..=7usize {
            let x = sys.cell(i).base.parts()[0].start.clone();
            let p = sys.point(i, 0, x).unwrap();
            assert!(stability_time(&sys, cfg.set(), &p, 256).unwrap() > 1 << i);
        }
    }

    #[test]
    fn agrees_with_exact_partition() {
        let sys = inflation(6);
        let cfg = CounterexampleConfig::unchecked(&sys, &column_tower(&sys, 6), 3);
        let sp = stability_partition(&sys, &cfg, 64, DEFAULT_PIECE_CAP).unwrap();
        let generic = StabilityOracle::new(&sys, cfg.set(), 64).unwrap();
        let points = sample_points(&sys, 11, 1000);
        let mut fast = StabilityOracle::new(&sys, cfg.set(), 64).unwrap();
        fast.prepare(&points);
        for p in &points {
            let t = fast.fast_times(p, &[16, 64]).expect("lattice path applies");
            assert_eq!(t, generic.times(p, &[16, 64]));
            assert_eq!(Some(t[1]), sp.value_at(p));
        }
    }

    #[test]
    fn rows_are_monotone_and_reproducible() {
        let rot = System::rotation(Field::golden_angle()).unwrap();
        let a = LeveledSet::flat(IntervalSet::interval(f().zero(), f().ratio(1, 4)).unwrap());
        let rows = mean_curve(&rot, &a, &[8, 16, 32, 64], 300, 5).unwrap();
        assert!(rows.windows(2).all(|w| w[0].mean <= w[1].mean));
        assert_eq!(rows, mean_curve(&rot, &a, &[8, 16, 32, 64], 300, 5).unwrap());
        assert!(mean_curve(&rot, &a, &[16, 8], 10, 5).is_err());
    }
}
