//! Exact dyadic rationals.
//!
//! Every measure in this crate is a nonnegative dyadic rational `num / 2^exp`.
//! Measures of cylinder sets, sums over prefix-free sets, and bound checks
//! like `≤ 2^-i` are all decided by exact integer arithmetic; floating point
//! is never involved, so a passing bound check is a proof at the tested scale,
//! not an approximation.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul};

use num_bigint::BigUint;
use num_traits::Zero;

/// A nonnegative dyadic rational `num / 2^exp`.
///
/// Kept in canonical form: `num` is odd, or the value is zero and `exp` is
/// also zero. Every constructor and operation normalizes, so derived
/// structural equality coincides with numeric equality.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Dyadic {
    num: BigUint,
    exp: u64,
}

impl Dyadic {
    /// `num / 2^exp`, normalized.
    pub fn new(num: impl Into<BigUint>, exp: u64) -> Self {
        let mut d = Dyadic { num: num.into(), exp };
        d.normalize();
        d
    }

    pub fn zero() -> Self {
        Dyadic { num: BigUint::zero(), exp: 0 }
    }

    pub fn one() -> Self {
        Dyadic { num: BigUint::from(1u8), exp: 0 }
    }

    /// `2^-k`, the measure of a cylinder fixed on `k` bits.
    pub fn pow2_neg(k: u64) -> Self {
        Dyadic { num: BigUint::from(1u8), exp: k }
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// Canonical (odd or zero) numerator.
    pub fn numerator(&self) -> &BigUint {
        &self.num
    }

    /// Canonical exponent of the denominator `2^exp`.
    pub fn exponent(&self) -> u64 {
        self.exp
    }

    /// `self / 2^k`.
    #[must_use]
    pub fn scaled_down(&self, k: u64) -> Self {
        if self.is_zero() {
            Dyadic::zero()
        } else {
            // An odd numerator stays odd; no renormalization needed.
            Dyadic { num: self.num.clone(), exp: self.exp + k }
        }
    }

    /// `self - rhs`, or `None` when the result would be negative.
    pub fn checked_sub(&self, rhs: &Dyadic) -> Option<Dyadic> {
        let exp = self.exp.max(rhs.exp);
        let a = self.num.clone() << (exp - self.exp);
        let b = rhs.num.clone() << (exp - rhs.exp);
        (a >= b).then(|| Dyadic::new(a - b, exp))
    }

    fn normalize(&mut self) {
        if self.num.is_zero() {
            self.exp = 0;
            return;
        }
        let shift = self.num.trailing_zeros().unwrap_or(0).min(self.exp);
        if shift > 0 {
            self.num >>= shift;
            self.exp -= shift;
        }
    }
}

impl Add for Dyadic {
    type Output = Dyadic;

    fn add(self, rhs: Dyadic) -> Dyadic {
        let exp = self.exp.max(rhs.exp);
        let num = (self.num << (exp - self.exp)) + (rhs.num << (exp - rhs.exp));
        Dyadic::new(num, exp)
    }
}

impl AddAssign for Dyadic {
    fn add_assign(&mut self, rhs: Dyadic) {
        *self = self.clone() + rhs;
    }
}

impl Mul for Dyadic {
    type Output = Dyadic;

    fn mul(self, rhs: Dyadic) -> Dyadic {
        Dyadic::new(self.num * rhs.num, self.exp + rhs.exp)
    }
}

impl Sum for Dyadic {
    fn sum<I: Iterator<Item = Dyadic>>(iter: I) -> Dyadic {
        iter.fold(Dyadic::zero(), |acc, d| acc + d)
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        // a/2^m vs b/2^n compares as a·2^(e-m) vs b·2^(e-n), e = max(m, n).
        let exp = self.exp.max(other.exp);
        let lhs = self.num.clone() << (exp - self.exp);
        let rhs = other.num.clone() << (exp - other.exp);
        lhs.cmp(&rhs)
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exp == 0 {
            write!(f, "{}", self.num)
        } else if self.exp <= 20 {
            write!(f, "{}/{}", self.num, 1u64 << self.exp)
        } else {
            write!(f, "{}/2^{}", self.num, self.exp)
        }
    }
}

// Debug forwards to Display so assertion failures print `3/8`, not a
// struct dump.
impl fmt::Debug for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}
