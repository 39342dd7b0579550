//! Dyadic rationals `n / 2^e` with canonical form.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// A number of the form `num / 2^exp`.
///
/// The representation is canonical: either `num == 0 && exp == 0`, or `num` is odd.
/// Arithmetic panics on `i128` overflow; callers bound exponents through the
/// depth cap on [`DyadicBox`](super::DyadicBox) operations.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicRational {
    num: i128,
    exp: u32,
}

impl DyadicRational {
    pub const ZERO: Self = Self { num: 0, exp: 0 };
    pub const ONE: Self = Self { num: 1, exp: 0 };
    pub const HALF: Self = Self { num: 1, exp: 1 };

    /// Builds `num / 2^exp` and reduces it.
    pub fn new(num: i128, exp: u32) -> Self {
        if num == 0 {
            return Self::ZERO;
        }
        let tz = num.trailing_zeros().min(exp);
        Self {
            num: num >> tz,
            exp: exp - tz,
        }
    }

    pub fn from_int(n: i128) -> Self {
        Self::new(n, 0)
    }

    pub fn numerator(self) -> i128 {
        self.num
    }

    pub fn exponent(self) -> u32 {
        self.exp
    }

    pub fn is_zero(self) -> bool {
        self.num == 0
    }

    pub fn is_integer(self) -> bool {
        self.exp == 0
    }

    /// Multiplies by `2^m` for any signed `m`.
    pub fn mul_pow2(self, m: i32) -> Self {
        if self.num == 0 {
            return self;
        }
        if m >= 0 {
            let m = m as u32;
            if m <= self.exp {
                Self {
                    num: self.num,
                    exp: self.exp - m,
                }
            } else {
                Self::new(shl(self.num, m - self.exp), 0)
            }
        } else {
            let e = self
                .exp
                .checked_add(m.unsigned_abs())
                .expect("dyadic exponent overflow");
            Self::new(self.num, e)
        }
    }

    /// Largest integer not exceeding the value.
    pub fn floor(self) -> i128 {
        if self.exp >= 127 {
            return if self.num < 0 { -1 } else { 0 };
        }
        self.num >> self.exp
    }

    /// Value minus its floor, in `[0, 1)`.
    pub fn fract(self) -> Self {
        self - Self::from_int(self.floor())
    }

    pub fn abs(self) -> Self {
        Self {
            num: self.num.abs(),
            exp: self.exp,
        }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 * 2f64.powi(-(self.exp as i32))
    }

    /// Exact conversion when `x` is a finite binary float.
    pub fn from_f64(x: f64) -> Option<Self> {
        if !x.is_finite() {
            return None;
        }
        if x == 0.0 {
            return Some(Self::ZERO);
        }
        let bits = x.to_bits();
        let sign = if bits >> 63 == 1 { -1i128 } else { 1 };
        let biased = ((bits >> 52) & 0x7ff) as i32;
        let frac = (bits & ((1u64 << 52) - 1)) as i128;
        let (mant, e) = if biased == 0 {
            (frac, -1074)
        } else {
            (frac | (1i128 << 52), biased - 1075)
        };
        if e >= 0 {
            if e > 70 {
                return None;
            }
            Some(Self::new(sign * shl(mant, e as u32), 0))
        } else {
            Some(Self::new(sign * mant, (-e) as u32))
        }
    }

    fn aligned(self, other: Self) -> (i128, i128, u32) {
        let e = self.exp.max(other.exp);
        (
            shl(self.num, e - self.exp),
            shl(other.num, e - other.exp),
            e,
        )
    }
}

fn shl(n: i128, s: u32) -> i128 {
    if n == 0 {
        return 0;
    }
    assert!(
        s < 127 && (n.unsigned_abs().leading_zeros() as i64 - 1) >= s as i64,
        "dyadic numerator overflow"
    );
    n << s
}

impl Add for DyadicRational {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let (a, b, e) = self.aligned(rhs);
        Self::new(a.checked_add(b).expect("dyadic numerator overflow"), e)
    }
}

impl Sub for DyadicRational {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Neg for DyadicRational {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            num: -self.num,
            exp: self.exp,
        }
    }
}

impl Mul for DyadicRational {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let num = self
            .num
            .checked_mul(rhs.num)
            .expect("dyadic numerator overflow");
        let exp = self
            .exp
            .checked_add(rhs.exp)
            .expect("dyadic exponent overflow");
        Self::new(num, exp)
    }
}

impl Ord for DyadicRational {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b, _) = self.aligned(*other);
        a.cmp(&b)
    }
}

impl PartialOrd for DyadicRational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl From<i64> for DyadicRational {
    fn from(n: i64) -> Self {
        Self::from_int(n as i128)
    }
}

impl fmt::Debug for DyadicRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for DyadicRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exp == 0 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/2^{}", self.num, self.exp)
        }
    }
}

/// Shorthand for `num / 2^exp`.
pub fn dy(num: i128, exp: u32) -> DyadicRational {
    DyadicRational::new(num, exp)
}
