//! Exact-arithmetic workbench for return-time towers, fat towers, and the
//! stability time of ergodic averages.
//!
//! Everything is computed in a real quadratic field ([`field`]) over finite
//! unions of intervals ([`sets`]), so every reported measure is exact.
//!
//! - [`systems`]: interval translations, rotations and skyscraper
//!   (inflation) systems.
//! - [`towers`]: columns, Kakutani and Rokhlin towers, fatness.
//! - [`counterexample`]: the indicator whose stability time is not
//!   integrable, with exact finite-horizon certificates.
//! - [`intrinsic`]: stagewise construction of a fat tower inside a system.
//! - [`estimator`]: Monte-Carlo estimates of the same stability times.

pub mod counterexample;
pub mod error;
pub mod estimator;
pub mod field;
pub mod intrinsic;
mod lattice;
pub mod leveled;
pub mod sets;
mod sweep;
pub mod systems;
pub mod towers;

pub use error::{Error, Result};
pub use field::{Exact, Field, QuadNumber, Rational};
pub use leveled::{Level, LeveledSet};
pub use sets::{Interval, IntervalSet};
pub use systems::{build_inflation, Cell, PiecewiseTranslation, PointAddress, System, SystemKind};
pub use towers::{Column, Tower};
