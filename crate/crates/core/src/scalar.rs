//! Scalar abstraction shared by every numeric kernel.
//!
//! All solver components are generic over [`Real`], which is implemented for
//! `f64` and for [`DoubleDouble`]. Conversions between kinds go through the
//! double-double representation, which embeds binary64 exactly.

use std::fmt::{self, Debug, Display};
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use crate::dd::DoubleDouble;

/// Floating-point kinds the solver can run at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScalarKind {
    Binary64,
    DoubleDouble,
}

impl ScalarKind {
    /// Unit roundoff of the kind.
    pub fn epsilon(self) -> f64 {
        match self {
            ScalarKind::Binary64 => f64::EPSILON,
            ScalarKind::DoubleDouble => DoubleDouble::EPSILON.hi(),
        }
    }

    /// Number of significand bits; used to order kinds by precision.
    pub fn mantissa_bits(self) -> u32 {
        match self {
            ScalarKind::Binary64 => 53,
            ScalarKind::DoubleDouble => 106,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ScalarKind::Binary64 => "double",
            ScalarKind::DoubleDouble => "dd",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "double" | "binary64" | "f64" => Some(ScalarKind::Binary64),
            "dd" | "double-double" => Some(ScalarKind::DoubleDouble),
            _ => None,
        }
    }
}

impl Display for ScalarKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub trait Real:
    Copy
    + Debug
    + Display
    + Default
    + PartialEq
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
{
    const KIND: ScalarKind;

    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn from_dd(x: DoubleDouble) -> Self;
    fn to_dd(self) -> DoubleDouble;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn is_finite(self) -> bool;

    /// Exact text token; `parse_token(to_token(x)) == x` bitwise.
    fn to_token(self) -> String;
    fn parse_token(s: &str) -> Option<Self>;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    fn one() -> Self {
        Self::from_f64(1.0)
    }

    fn from_usize(n: usize) -> Self {
        Self::from_f64(n as f64)
    }

    fn epsilon() -> Self {
        Self::from_f64(Self::KIND.epsilon())
    }

    fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }

    fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }

    fn pos(self) -> Self {
        self.max(Self::zero())
    }
}

impl Real for f64 {
    const KIND: ScalarKind = ScalarKind::Binary64;

    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn from_dd(x: DoubleDouble) -> Self {
        x.to_f64()
    }
    fn to_dd(self) -> DoubleDouble {
        DoubleDouble::from(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    fn to_token(self) -> String {
        format!("{self:e}")
    }
    fn parse_token(s: &str) -> Option<Self> {
        s.parse().ok()
    }
}

impl Real for DoubleDouble {
    const KIND: ScalarKind = ScalarKind::DoubleDouble;

    fn from_f64(x: f64) -> Self {
        DoubleDouble::from(x)
    }
    fn to_f64(self) -> f64 {
        DoubleDouble::to_f64(self)
    }
    fn from_dd(x: DoubleDouble) -> Self {
        x
    }
    fn to_dd(self) -> DoubleDouble {
        self
    }
    fn sqrt(self) -> Self {
        DoubleDouble::sqrt(self)
    }
    fn abs(self) -> Self {
        DoubleDouble::abs(self)
    }
    fn is_finite(self) -> bool {
        DoubleDouble::is_finite(self)
    }
    fn to_token(self) -> String {
        if self.lo() == 0.0 {
            format!("{:e}", self.hi())
        } else {
            format!("{:e},{:e}", self.hi(), self.lo())
        }
    }
    fn parse_token(s: &str) -> Option<Self> {
        match s.split_once(',') {
            Some((hi, lo)) => {
                let hi: f64 = hi.parse().ok()?;
                let lo: f64 = lo.parse().ok()?;
                Some(DoubleDouble::from(hi) + DoubleDouble::from(lo))
            }
            None => Some(DoubleDouble::from(s.parse::<f64>().ok()?)),
        }
    }
}

/// Pairwise (cascade) summation. Rounding error grows with `log n` rather than `n`.
pub fn pairwise_sum<T: Real>(values: &[T]) -> T {
    const LEAF: usize = 8;
    if values.len() <= LEAF {
        let mut acc = T::zero();
        for &v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

pub fn norm2<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

pub fn norm_inf<T: Real>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

/// Smallest `k` with `k * k >= x`.
pub fn ceil_sqrt(x: usize) -> usize {
    if x == 0 {
        return 0;
    }
    let mut k = (x as f64).sqrt() as usize;
    while k * k < x {
        k += 1;
    }
    while k > 0 && (k - 1) * (k - 1) >= x {
        k -= 1;
    }
    k
}
