//! Fast exact orbits on a fixed lattice `(p + q sqrt(D)) / den` with `i128`
//! numerators.
//!
//! Every constant of a system (piece endpoints and shifts, cell bases, the
//! set being counted) and every starting point shares one denominator, so a
//! step is integer additions and comparisons. Comparisons use a
//! floating-point filter with an exact `BigInt` fallback; any overflow makes
//! the caller fall back to the generic `QuadNumber` path.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive};

use crate::field::QuadNumber;
use crate::leveled::LeveledSet;
use crate::systems::{PointAddress, System};

/// Numerators beyond this many bits leave no headroom for an orbit's drift.
const MAX_BITS: u64 = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct LPoint {
    p: i128,
    q: i128,
}

#[derive(Clone, Debug)]
pub(crate) struct Lattice {
    den: BigInt,
    d: u64,
    sqrt_d: f64,
}

impl Lattice {
    /// The lattice spanned by the denominators of `values`, if small enough.
    pub fn spanning<'a>(d: u64, values: impl IntoIterator<Item = &'a QuadNumber>) -> Option<Self> {
        let mut den = BigInt::one();
        for v in values {
            den = den.lcm(v.rational_part().denom()).lcm(v.irrational_part().denom());
            if den.bits() > MAX_BITS {
                return None;
            }
        }
        Some(Lattice {
            den,
            d,
            sqrt_d: (d as f64).sqrt(),
        })
    }

    pub fn point(&self, v: &QuadNumber) -> Option<LPoint> {
        let scale = |r: &crate::field::Rational| -> Option<i128> {
            let (scale, rem) = self.den.div_rem(r.denom());
            if rem != BigInt::from(0) {
                return None;
            }
            let n = r.numer() * scale;
            if n.bits() > MAX_BITS + 8 {
                return None;
            }
            n.to_i128()
        };
        Some(LPoint {
            p: scale(v.rational_part())?,
            q: scale(v.irrational_part())?,
        })
    }

    pub fn cmp(&self, x: LPoint, y: LPoint) -> Ordering {
        let dp = x.p - y.p;
        let dq = x.q - y.q;
        if dq == 0 || dp == 0 || (dp > 0) == (dq > 0) {
            return if dq == 0 { dp.cmp(&0) } else if dp == 0 { dq.cmp(&0) } else { dp.cmp(&0) };
        }
        let v = dp as f64 + dq as f64 * self.sqrt_d;
        let slack = 1e-9 * ((dp as f64).abs() + (dq as f64 * self.sqrt_d).abs());
        if v > slack {
            return Ordering::Greater;
        }
        if v < -slack {
            return Ordering::Less;
        }
        let p2 = BigInt::from(dp) * BigInt::from(dp);
        let q2 = BigInt::from(dq) * BigInt::from(dq) * BigInt::from(self.d);
        match p2.cmp(&q2) {
            Ordering::Greater => dp.cmp(&0),
            Ordering::Less => dq.cmp(&0),
            Ordering::Equal => Ordering::Equal,
        }
    }

    fn add(x: LPoint, y: LPoint) -> Option<LPoint> {
        Some(LPoint {
            p: x.p.checked_add(y.p)?,
            q: x.q.checked_add(y.q)?,
        })
    }
}

enum Membership {
    Out,
    In,
    Partial(Vec<(LPoint, LPoint)>),
}

/// A system and a counted set, transcribed onto one lattice.
pub(crate) struct FastOrbit {
    lattice: Lattice,
    // (domain end, shift), sorted by domain
    pieces: Vec<(LPoint, LPoint)>,
    // (interval end, cell), sorted; tiles [0, 1)
    partition: Vec<(LPoint, usize)>,
    heights: Vec<usize>,
    table: Vec<Vec<Membership>>,
}

/// A point on the fast path.
#[derive(Clone, Copy, Debug)]
pub(crate) struct FastPoint {
    cell: usize,
    level: usize,
    x: LPoint,
}

impl FastOrbit {
    /// Transcribes `sys` and `set`, with room for the given starting points.
    pub fn new(sys: &System, set: &LeveledSet, points: &[PointAddress]) -> Option<Self> {
        let mut constants: Vec<&QuadNumber> = Vec::new();
        for piece in sys.base().pieces() {
            constants.extend([&piece.domain.start, &piece.domain.end, &piece.shift]);
        }
        for cell in sys.cells() {
            constants.extend(cell.base.parts().iter().flat_map(|iv| [&iv.start, &iv.end]));
        }
        for (_, part) in set.components() {
            constants.extend(part.parts().iter().flat_map(|iv| [&iv.start, &iv.end]));
        }
        constants.extend(points.iter().map(|p| &p.x));
        let lattice = Lattice::spanning(sys.field().discriminant(), constants)?;

        let pieces = sys
            .base()
            .pieces()
            .iter()
            .map(|pc| Some((lattice.point(&pc.domain.end)?, lattice.point(&pc.shift)?)))
            .collect::<Option<Vec<_>>>()?;
        let mut partition = Vec::new();
        for (i, cell) in sys.cells().iter().enumerate() {
            for iv in cell.base.parts() {
                partition.push((lattice.point(&iv.start)?, lattice.point(&iv.end)?, i));
            }
        }
        partition.sort_by(|a, b| lattice.cmp(a.0, b.0));
        let partition = partition.into_iter().map(|(_, e, i)| (e, i)).collect();

        let mut table: Vec<Vec<Membership>> = sys
            .cells()
            .iter()
            .map(|c| (0..c.height).map(|_| Membership::Out).collect())
            .collect();
        for (level, part) in set.components() {
            table[level.cell][level.level] = if *part == sys.cell(level.cell).base {
                Membership::In
            } else {
                Membership::Partial(
                    part.parts()
                        .iter()
                        .map(|iv| Some((lattice.point(&iv.start)?, lattice.point(&iv.end)?)))
                        .collect::<Option<Vec<_>>>()?,
                )
            };
        }
        Some(FastOrbit {
            lattice,
            pieces,
            partition,
            heights: sys.cells().iter().map(|c| c.height).collect(),
            table,
        })
    }

    pub fn start(&self, p: &PointAddress) -> Option<FastPoint> {
        Some(FastPoint {
            cell: p.cell,
            level: p.level,
            x: self.lattice.point(&p.x)?,
        })
    }

    pub fn contains(&self, p: &FastPoint) -> bool {
        match &self.table[p.cell][p.level] {
            Membership::Out => false,
            Membership::In => true,
            Membership::Partial(parts) => {
                let i = parts.partition_point(|(_, e)| self.lattice.cmp(*e, p.x) != Ordering::Greater);
                i < parts.len() && self.lattice.cmp(parts[i].0, p.x) != Ordering::Greater
            }
        }
    }

    /// One forward step; `None` on numerator overflow.
    pub fn step(&self, p: &mut FastPoint) -> Option<()> {
        if p.level + 1 < self.heights[p.cell] {
            p.level += 1;
            return Some(());
        }
        let lat = &self.lattice;
        let i = self.pieces.partition_point(|(e, _)| lat.cmp(*e, p.x) != Ordering::Greater);
        let shift = self.pieces[i.min(self.pieces.len() - 1)].1;
        p.x = Lattice::add(p.x, shift)?;
        let j = self.partition.partition_point(|(e, _)| lat.cmp(*e, p.x) != Ordering::Greater);
        p.cell = self.partition[j.min(self.partition.len() - 1)].1;
        p.level = 0;
        Some(())
    }
}
