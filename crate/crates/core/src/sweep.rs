//! Atom refinement for finite-horizon ergodic averages of an indicator.
//!
//! Intervals are pushed forward under `T`, split at the map's
//! discontinuities and at the boundary of `A`, so that each atom has one
//! itinerary `1_A(x), 1_A(Tx), ...` up to the horizon. Visit counts are
//! compared with the threshold through the integer `floor(theta k)`:
//! `S_k / k > theta` iff `S_k > floor(theta k)`.

use crate::error::{Error, Result};
use crate::field::QuadNumber;
use crate::leveled::{Level, LeveledSet};
use crate::sets::IntervalSet;
use crate::systems::{PointAddress, System, Tracked};

pub(crate) enum Membership {
    Out,
    In,
    Partial(IntervalSet),
}

/// Per-level lookup of a set `A`.
pub(crate) struct Indicator {
    table: Vec<Vec<Membership>>,
}

impl Indicator {
    pub fn new(sys: &System, set: &LeveledSet) -> Self {
        let mut table: Vec<Vec<Membership>> = sys
            .cells()
            .iter()
            .map(|c| (0..c.height).map(|_| Membership::Out).collect())
            .collect();
        for (level, part) in set.components() {
            let slot = &mut table[level.cell][level.level];
            *slot = if *part == sys.cell(level.cell).base {
                Membership::In
            } else {
                Membership::Partial(part.clone())
            };
        }
        Indicator { table }
    }

    pub fn at(&self, level: Level) -> &Membership {
        &self.table[level.cell][level.level]
    }

    pub fn contains(&self, p: &PointAddress) -> bool {
        match self.at(p.level()) {
            Membership::Out => false,
            Membership::In => true,
            Membership::Partial(s) => s.contains(&p.x),
        }
    }
}

/// `floor(theta k)` for `k = 0..=horizon`.
pub(crate) fn exceed_floors(theta: &QuadNumber, horizon: usize) -> Vec<u64> {
    use num_traits::ToPrimitive;
    (0..=horizon)
        .map(|k| {
            let v = theta.scale_int(k as i64).floor();
            // A negative threshold is exceeded by every count.
            v.to_i64().map_or(u64::MAX, |v| if v < 0 { 0 } else { v as u64 })
        })
        .collect()
}

/// Visit statistics recorded for an atom at one checkpoint horizon.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Mark {
    pub visits: u32,
    /// Largest `k <= horizon` with `S_k / k > theta`, or 0.
    pub last_exceed: u32,
}

#[derive(Clone, Debug)]
pub(crate) struct Atom {
    pub piece: Tracked,
    pub visits: u32,
    pub last_exceed: u32,
    pub marks: Vec<Mark>,
}

/// Refines `start` into atoms up to the largest checkpoint and records the
/// visit statistics of every atom at each checkpoint.
pub(crate) fn sweep(
    sys: &System,
    indicator: &Indicator,
    theta: &QuadNumber,
    start: &LeveledSet,
    checkpoints: &[usize],
    piece_cap: usize,
) -> Result<Vec<Atom>> {
    let Some(&horizon) = checkpoints.last() else {
        return Ok(Vec::new());
    };
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) || checkpoints[0] == 0 {
        return Err(Error::Precondition("checkpoints must be positive and increasing".into()));
    }
    if horizon as u64 > sys.orbit_cap() {
        return Err(Error::OrbitCapExceeded {
            requested: horizon as u64,
            cap: sys.orbit_cap(),
        });
    }
    let floors = exceed_floors(theta, horizon);
    let mut atoms: Vec<Atom> = start
        .components()
        .flat_map(|(level, part)| {
            part.parts().iter().map(move |iv| Atom {
                piece: Tracked::new(level, iv),
                visits: 0,
                last_exceed: 0,
                marks: Vec::with_capacity(checkpoints.len()),
            })
        })
        .collect();
    let mut next_checkpoint = 0;
    let mut scratch = Vec::new();
    let mut buffer: Vec<Atom> = Vec::with_capacity(atoms.len());
    for (k, &floor) in floors.iter().enumerate().skip(1) {
        // Count the visit of T^(k-1) x.
        buffer.clear();
        for atom in atoms.drain(..) {
            match indicator.at(atom.piece.at) {
                Membership::Out => buffer.push(atom),
                Membership::In => {
                    let mut atom = atom;
                    atom.visits += 1;
                    buffer.push(atom);
                }
                Membership::Partial(set) => {
                    let (s, e) = atom.piece.current();
                    for (a, b, inside) in set.classify(&s, &e) {
                        let mut sub = atom.clone();
                        sub.piece = atom.piece.restrict(&a, &b);
                        sub.visits += inside as u32;
                        buffer.push(sub);
                    }
                }
            }
        }
        let record = checkpoints[next_checkpoint] == k;
        for atom in buffer.iter_mut() {
            if atom.visits as u64 > floor {
                atom.last_exceed = k as u32;
            }
            if record {
                atom.marks.push(Mark {
                    visits: atom.visits,
                    last_exceed: atom.last_exceed,
                });
            }
        }
        if record {
            next_checkpoint += 1;
        }
        if k == horizon {
            atoms.append(&mut buffer);
            break;
        }
        for atom in buffer.drain(..) {
            scratch.clear();
            let Atom {
                piece,
                visits,
                last_exceed,
                marks,
            } = atom;
            sys.step_tracked(piece, true, &mut scratch);
            if scratch.len() == 1 {
                atoms.push(Atom {
                    piece: scratch.pop().expect("one piece"),
                    visits,
                    last_exceed,
                    marks,
                });
            } else {
                atoms.extend(scratch.drain(..).map(|piece| Atom {
                    piece,
                    visits,
                    last_exceed,
                    marks: marks.clone(),
                }));
            }
        }
        if atoms.len() > piece_cap {
            return Err(Error::PieceCapExceeded { cap: piece_cap });
        }
    }
    Ok(atoms)
}
