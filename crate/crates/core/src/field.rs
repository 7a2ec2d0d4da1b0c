//! Exact arithmetic in a real quadratic field `Q(sqrt(D))`.
//!
//! Every coordinate, endpoint and measure in the crate is a [`QuadNumber`]
//! `a + b*sqrt(D)` with rational `a`, `b`. Comparison is decided by rational
//! sign analysis, so nothing is ever rounded.
//!
//! The textual form is `a_num/a_den+b_num/b_den*sqrt(D)`, e.g. the golden
//! rotation angle `(sqrt(5) - 1)/2` is written `-1/2+1/2*sqrt(5)`.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Arbitrary-precision rational, always in lowest terms with positive denominator.
pub type Rational = BigRational;

/// Builds the rational `num/den`. Panics if `den == 0`.
pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Parses an exact rational: `p`, `p/q`, or a finite decimal such as `0.125`.
pub fn parse_rational(input: &str) -> Result<Rational> {
    let err = |reason: &str| Error::Parse {
        input: input.to_string(),
        reason: reason.to_string(),
    };
    let s = input.trim();
    if s.is_empty() {
        return Err(err("empty rational"));
    }
    if let Some((num, den)) = s.split_once('/') {
        let num = parse_integer(num).ok_or_else(|| err("bad numerator"))?;
        let den = parse_integer(den).ok_or_else(|| err("bad denominator"))?;
        if den.is_zero() {
            return Err(err("zero denominator"));
        }
        return Ok(Rational::new(num, den));
    }
    if let Some((int, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|c| c.is_ascii_digit()) {
            return Err(err("bad decimal fraction"));
        }
        let negative = int.starts_with('-');
        let int_digits = int.trim_start_matches(['-', '+']);
        if !int_digits.bytes().all(|c| c.is_ascii_digit()) {
            return Err(err("bad decimal integer part"));
        }
        let digits = format!("{int_digits}{frac}");
        let mut num: BigInt = digits.parse().map_err(|_| err("bad decimal"))?;
        if negative {
            num = -num;
        }
        let den = num_traits::pow(BigInt::from(10), frac.len());
        return Ok(Rational::new(num, den));
    }
    parse_integer(s)
        .map(Rational::from_integer)
        .ok_or_else(|| err("not a rational"))
}

fn parse_integer(s: &str) -> Option<BigInt> {
    let s = s.trim();
    let digits = s.strip_prefix(['-', '+']).unwrap_or(s);
    if digits.is_empty() || !digits.bytes().all(|c| c.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

/// Renders a rational as `num/den` (the denominator is always written).
pub fn format_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// The field tag: a square-free discriminant `D >= 2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Field {
    d: u64,
}

impl Field {
    /// `Q(sqrt(5))`, home of the golden rotation.
    pub const GOLDEN: Field = Field { d: 5 };

    pub fn new(d: u64) -> Result<Self> {
        if d < 2 || !is_square_free(d) {
            return Err(Error::InvalidField(d));
        }
        Ok(Field { d })
    }

    pub fn discriminant(self) -> u64 {
        self.d
    }

    pub fn zero(self) -> QuadNumber {
        self.rational(Rational::zero())
    }

    pub fn one(self) -> QuadNumber {
        self.rational(Rational::one())
    }

    pub fn int(self, n: i64) -> QuadNumber {
        self.rational(Rational::from_integer(BigInt::from(n)))
    }

    pub fn ratio(self, num: i64, den: i64) -> QuadNumber {
        self.rational(ratio(num, den))
    }

    pub fn rational(self, a: Rational) -> QuadNumber {
        QuadNumber {
            a,
            b: Rational::zero(),
            d: self.d,
        }
    }

    pub fn element(self, a: Rational, b: Rational) -> QuadNumber {
        QuadNumber { a, b, d: self.d }
    }

    pub fn sqrt_d(self) -> QuadNumber {
        self.element(Rational::zero(), Rational::one())
    }

    /// `(sqrt(5) - 1)/2`, the default rotation angle.
    pub fn golden_angle() -> QuadNumber {
        Field::GOLDEN.element(ratio(-1, 2), ratio(1, 2))
    }

    /// Parses a number in this field. Accepts the canonical
    /// `a+b*sqrt(D)` grammar (with matching `D`), plain rationals, and the
    /// keywords `golden` / `1-golden` when `D = 5`.
    pub fn parse(self, input: &str) -> Result<QuadNumber> {
        let s = input.trim();
        match s {
            "golden" | "1-golden" => {
                if self != Field::GOLDEN {
                    return Err(Error::Parse {
                        input: input.to_string(),
                        reason: "`golden` requires sqrt(5)".into(),
                    });
                }
                let g = Field::golden_angle();
                return Ok(if s == "golden" { g } else { &self.one() - &g });
            }
            _ => {}
        }
        if s.contains("sqrt(") {
            let q: QuadNumber = s.parse()?;
            if q.d != self.d {
                return Err(Error::FieldMismatch {
                    left: self.d,
                    right: q.d,
                });
            }
            return Ok(q);
        }
        parse_rational(s).map(|r| self.rational(r))
    }
}

impl Default for Field {
    fn default() -> Self {
        Field::GOLDEN
    }
}

fn is_square_free(d: u64) -> bool {
    let mut p = 2u64;
    while p.saturating_mul(p) <= d {
        if d.is_multiple_of(p * p) {
            return false;
        }
        p += 1;
    }
    true
}

/// An element `a + b*sqrt(D)` of a real quadratic field.
///
/// The representation is unique, so structural equality is value equality.
/// Operator impls panic when the field tags differ; the `checked_*` methods
/// report [`Error::FieldMismatch`] instead.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct QuadNumber {
    a: Rational,
    b: Rational,
    d: u64,
}

impl QuadNumber {
    pub fn field(&self) -> Field {
        Field { d: self.d }
    }

    pub fn rational_part(&self) -> &Rational {
        &self.a
    }

    pub fn irrational_part(&self) -> &Rational {
        &self.b
    }

    pub fn is_rational(&self) -> bool {
        self.b.is_zero()
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    /// The rational value, when `b = 0`.
    pub fn to_rational(&self) -> Option<&Rational> {
        self.is_rational().then_some(&self.a)
    }

    fn check(&self, other: &Self) -> Result<()> {
        if self.d == other.d {
            Ok(())
        } else {
            Err(Error::FieldMismatch {
                left: self.d,
                right: other.d,
            })
        }
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        Ok(QuadNumber {
            a: &self.a + &other.a,
            b: &self.b + &other.b,
            d: self.d,
        })
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        Ok(QuadNumber {
            a: &self.a - &other.a,
            b: &self.b - &other.b,
            d: self.d,
        })
    }

    pub fn checked_mul(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let d = Rational::from_integer(BigInt::from(self.d));
        Ok(QuadNumber {
            a: &self.a * &other.a + &self.b * &other.b * d,
            b: &self.a * &other.b + &self.b * &other.a,
            d: self.d,
        })
    }

    pub fn checked_div(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let inv = other.checked_recip()?;
        self.checked_mul(&inv)
    }

    pub fn checked_recip(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::DivisionByZero);
        }
        // (a - b sqrt D) / (a^2 - b^2 D); the norm is nonzero because sqrt D is irrational.
        let d = Rational::from_integer(BigInt::from(self.d));
        let norm = &self.a * &self.a - &self.b * &self.b * d;
        Ok(QuadNumber {
            a: &self.a / &norm,
            b: -(&self.b / &norm),
            d: self.d,
        })
    }

    pub fn checked_cmp(&self, other: &Self) -> Result<Ordering> {
        self.check(other)?;
        let p = &self.a - &other.a;
        let q = &self.b - &other.b;
        Ok(sign_of(&p, &q, self.d).cmp(&0))
    }

    /// Sign of the real value: -1, 0 or 1.
    pub fn signum(&self) -> i8 {
        sign_of(&self.a, &self.b, self.d)
    }

    pub fn abs(&self) -> Self {
        if self.signum() < 0 {
            -self
        } else {
            self.clone()
        }
    }

    pub fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    pub fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    /// Multiplies by a rational scalar.
    pub fn scale(&self, r: &Rational) -> Self {
        QuadNumber {
            a: &self.a * r,
            b: &self.b * r,
            d: self.d,
        }
    }

    pub fn scale_int(&self, n: i64) -> Self {
        self.scale(&Rational::from_integer(BigInt::from(n)))
    }

    /// The unique integer `n` with `n <= self < n + 1`.
    pub fn floor(&self) -> BigInt {
        if self.b.is_zero() {
            return self.a.floor().to_integer();
        }
        // b^2 D = u/v in lowest terms; w = isqrt(u v) gives w/v <= |b| sqrt D < (w+1)/v.
        let t = &self.b * &self.b * Rational::from_integer(BigInt::from(self.d));
        let (u, v) = (t.numer().clone(), t.denom().clone());
        let w = (&u * &v).sqrt();
        let lower = if self.b.is_positive() {
            &self.a + Rational::new(w, v)
        } else {
            &self.a - Rational::new(w + 1, v)
        };
        // The enclosure has width 1/v <= 1, so the floor is one of two candidates.
        let cand = lower.floor().to_integer();
        let next = self.field().rational(Rational::from_integer(&cand + 1));
        if *self >= next {
            cand + 1
        } else {
            cand
        }
    }

    /// Splits `self` into `(floor, self - floor)` with the fractional part in `[0, 1)`.
    pub fn floor_mod1(&self) -> (BigInt, QuadNumber) {
        let n = self.floor();
        let frac = QuadNumber {
            a: &self.a - Rational::from_integer(n.clone()),
            b: self.b.clone(),
            d: self.d,
        };
        (n, frac)
    }

    /// Decimal expansion truncated toward zero after `digits` places.
    pub fn to_decimal(&self, digits: usize) -> String {
        let scale = num_traits::pow(BigInt::from(10), digits);
        let scaled = self.abs().scale(&Rational::from_integer(scale.clone()));
        let n = scaled.floor();
        let (int, frac) = n.div_rem(&scale);
        let sign = if self.signum() < 0 && !n.is_zero() {
            "-"
        } else {
            ""
        };
        if digits == 0 {
            format!("{sign}{int}")
        } else {
            format!("{sign}{int}.{:0>width$}", frac.to_string(), width = digits)
        }
    }

    /// Nearest-ish `f64`; for reporting only, never for decisions.
    pub fn to_f64(&self) -> f64 {
        let a = rational_to_f64(&self.a);
        let b = rational_to_f64(&self.b);
        a + b * (self.d as f64).sqrt()
    }
}

fn rational_to_f64(r: &Rational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or_else(|| {
        let n = r.numer().to_f64().unwrap_or(f64::NAN);
        let d = r.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Sign of `p + q sqrt(d)`.
fn sign_of(p: &Rational, q: &Rational, d: u64) -> i8 {
    let ps = sign_i8(p);
    let qs = sign_i8(q);
    if qs == 0 {
        return ps;
    }
    if ps == 0 || ps == qs {
        return qs;
    }
    // Opposite signs: the term of larger magnitude wins; p^2 = q^2 d is impossible.
    if let Some(s) = float_sign(p, q, d) {
        return s;
    }
    let p2 = p * p;
    let q2d = q * q * Rational::from_integer(BigInt::from(d));
    match p2.cmp(&q2d) {
        Ordering::Greater => ps,
        Ordering::Less => qs,
        Ordering::Equal => 0,
    }
}

/// Sign of `p + q sqrt(d)` from floating-point enclosures, when they decide it.
fn float_sign(p: &Rational, q: &Rational, d: u64) -> Option<i8> {
    use num_traits::ToPrimitive;
    let pf = p.to_f64().filter(|v| v.is_normal())?;
    let qf = q.to_f64().filter(|v| v.is_normal())?;
    let r = (d as f64).sqrt();
    let v = pf + qf * r;
    // Each rounded quantity is off by at most a few ulps; 1e-12 is generous.
    let slack = 1e-12 * (pf.abs() + (qf * r).abs());
    if v > slack {
        Some(1)
    } else if v < -slack {
        Some(-1)
    } else {
        None
    }
}

fn sign_i8(r: &Rational) -> i8 {
    match r.numer().sign() {
        Sign::Minus => -1,
        Sign::NoSign => 0,
        Sign::Plus => 1,
    }
}

impl PartialOrd for QuadNumber {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QuadNumber {
    /// Exact order of the real values. Panics on mismatched fields.
    fn cmp(&self, other: &Self) -> Ordering {
        self.checked_cmp(other).expect("comparison across fields")
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $checked:ident) => {
        impl<'a> $trait<&'a QuadNumber> for &'a QuadNumber {
            type Output = QuadNumber;
            fn $method(self, rhs: &'a QuadNumber) -> QuadNumber {
                self.$checked(rhs).expect(concat!("QuadNumber::", stringify!($method)))
            }
        }
        impl $trait<QuadNumber> for QuadNumber {
            type Output = QuadNumber;
            fn $method(self, rhs: QuadNumber) -> QuadNumber {
                (&self).$method(&rhs)
            }
        }
        impl<'a> $trait<&'a QuadNumber> for QuadNumber {
            type Output = QuadNumber;
            fn $method(self, rhs: &'a QuadNumber) -> QuadNumber {
                (&self).$method(rhs)
            }
        }
    };
}

binop!(Add, add, checked_add);
binop!(Sub, sub, checked_sub);
binop!(Mul, mul, checked_mul);
binop!(Div, div, checked_div);

impl Neg for &QuadNumber {
    type Output = QuadNumber;
    fn neg(self) -> QuadNumber {
        QuadNumber {
            a: -&self.a,
            b: -&self.b,
            d: self.d,
        }
    }
}

impl Neg for QuadNumber {
    type Output = QuadNumber;
    fn neg(self) -> QuadNumber {
        -&self
    }
}

impl fmt::Display for QuadNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}+{}*sqrt({})",
            format_rational(&self.a),
            format_rational(&self.b),
            self.d
        )
    }
}

impl FromStr for QuadNumber {
    type Err = Error;

    /// Parses the canonical grammar `a_num/a_den+b_num/b_den*sqrt(D)`.
    /// Denominators may be omitted (`1+-1*sqrt(2)`).
    fn from_str(input: &str) -> Result<Self> {
        let err = |reason: &str| Error::Parse {
            input: input.to_string(),
            reason: reason.to_string(),
        };
        let s = input.trim();
        let body = s
            .strip_suffix(')')
            .ok_or_else(|| err("expected trailing `*sqrt(D)`"))?;
        let (coeffs, d) = body
            .rsplit_once("*sqrt(")
            .ok_or_else(|| err("expected `*sqrt(D)`"))?;
        let d: u64 = d.trim().parse().map_err(|_| err("bad discriminant"))?;
        let field = Field::new(d)?;
        let split = coeffs
            .char_indices()
            .skip(1)
            .find(|&(_, c)| c == '+')
            .map(|(i, _)| i)
            .ok_or_else(|| err("expected `a+b*sqrt(D)`"))?;
        let a = parse_rational(&coeffs[..split])?;
        let b = parse_rational(&coeffs[split + 1..])?;
        Ok(field.element(a, b))
    }
}

impl Serialize for QuadNumber {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for QuadNumber {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// An exact value paired with its 12-digit decimal rendering, for reports.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Exact {
    pub exact: String,
    pub decimal: String,
}

impl From<&QuadNumber> for Exact {
    fn from(q: &QuadNumber) -> Self {
        Exact {
            exact: q.to_string(),
            decimal: q.to_decimal(12),
        }
    }
}

impl Exact {
    pub fn rational(r: &Rational) -> Self {
        Exact {
            exact: format_rational(r),
            decimal: Field::GOLDEN.rational(r.clone()).to_decimal(12),
        }
    }
}

impl From<QuadNumber> for Exact {
    fn from(q: QuadNumber) -> Self {
        Exact::from(&q)
    }
}
