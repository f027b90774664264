//! Signed real numbers stored as a sign and a natural-log magnitude.
//!
//! Values such as `K_0(10^6) ~ e^{-10^6}` underflow in `f64`, so every
//! Bessel evaluation and weighted energy in this crate is carried as a
//! [`LogScalar`]. Products and quotients add or subtract log magnitudes;
//! sums use a shifted log-sum-exp and never form the linear value.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// `sign * exp(logmag)`, with `sign == 0` exactly when `logmag == -inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogScalar {
    sign: i8,
    logmag: f64,
}

impl LogScalar {
    pub const ZERO: LogScalar = LogScalar {
        sign: 0,
        logmag: f64::NEG_INFINITY,
    };
    pub const ONE: LogScalar = LogScalar { sign: 1, logmag: 0.0 };

    /// Builds from parts. A zero sign or a `-inf` magnitude yields zero.
    pub fn new(sign: i8, logmag: f64) -> Self {
        debug_assert!(!logmag.is_nan(), "NaN log magnitude");
        if sign == 0 || logmag == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            LogScalar {
                sign: sign.signum(),
                logmag,
            }
        }
    }

    /// Positive number `exp(logmag)`.
    pub fn from_ln(logmag: f64) -> Self {
        Self::new(1, logmag)
    }

    pub fn from_f64(v: f64) -> Self {
        if v == 0.0 {
            Self::ZERO
        } else {
            Self::new(if v > 0.0 { 1 } else { -1 }, v.abs().ln())
        }
    }

    pub fn sign(&self) -> i8 {
        self.sign
    }

    pub fn logmag(&self) -> f64 {
        self.logmag
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    /// Linear value; underflows to zero or overflows to infinity when out of range.
    pub fn to_f64(&self) -> f64 {
        if self.sign == 0 {
            0.0
        } else {
            f64::from(self.sign) * self.logmag.exp()
        }
    }

    pub fn abs(&self) -> Self {
        Self::new(self.sign.abs(), self.logmag)
    }

    pub fn recip(&self) -> Self {
        assert!(self.sign != 0, "reciprocal of zero LogScalar");
        Self::new(self.sign, -self.logmag)
    }

    /// Integer power; exact on the log magnitude.
    pub fn powi(&self, k: i32) -> Self {
        if k == 0 {
            return Self::ONE;
        }
        if self.sign == 0 {
            assert!(k > 0, "negative power of zero LogScalar");
            return Self::ZERO;
        }
        let sign = if k % 2 == 0 { 1 } else { self.sign };
        Self::new(sign, self.logmag * f64::from(k))
    }

    /// Real power of a nonnegative value.
    pub fn powf(&self, p: f64) -> Self {
        assert!(self.sign >= 0, "real power of a negative LogScalar");
        if self.sign == 0 {
            return if p == 0.0 { Self::ONE } else { Self::ZERO };
        }
        Self::new(1, self.logmag * p)
    }

    /// Sum of many terms with a single max shift.
    pub fn sum_slice(terms: &[LogScalar]) -> Self {
        let top = terms
            .iter()
            .filter(|t| t.sign != 0)
            .map(|t| t.logmag)
            .fold(f64::NEG_INFINITY, f64::max);
        if top == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        let acc: f64 = terms
            .iter()
            .filter(|t| t.sign != 0)
            .map(|t| f64::from(t.sign) * (t.logmag - top).exp())
            .sum();
        Self::from_f64(acc).scale_ln(top)
    }

    /// Multiplies by `exp(shift)`.
    pub fn scale_ln(&self, shift: f64) -> Self {
        if self.sign == 0 {
            *self
        } else {
            Self::new(self.sign, self.logmag + shift)
        }
    }

    fn add_impl(a: Self, b: Self) -> Self {
        if a.sign == 0 {
            return b;
        }
        if b.sign == 0 {
            return a;
        }
        let (big, small) = if a.logmag >= b.logmag { (a, b) } else { (b, a) };
        let d = small.logmag - big.logmag;
        if big.sign == small.sign {
            Self::new(big.sign, big.logmag + d.exp().ln_1p())
        } else if d == 0.0 {
            Self::ZERO
        } else {
            Self::new(big.sign, big.logmag + (-d.exp_m1()).ln())
        }
    }
}

impl Default for LogScalar {
    fn default() -> Self {
        Self::ZERO
    }
}

impl fmt::Display for LogScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sign {
            0 => write!(f, "0"),
            s => write!(f, "{}exp({})", if s < 0 { "-" } else { "" }, self.logmag),
        }
    }
}

impl Neg for LogScalar {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.sign, self.logmag)
    }
}

impl Add for LogScalar {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::add_impl(self, rhs)
    }
}

impl Sub for LogScalar {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::add_impl(self, -rhs)
    }
}

impl Mul for LogScalar {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        if self.sign == 0 || rhs.sign == 0 {
            Self::ZERO
        } else {
            Self::new(self.sign * rhs.sign, self.logmag + rhs.logmag)
        }
    }
}

impl Div for LogScalar {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        self * rhs.recip()
    }
}

impl PartialOrd for LogScalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.sign.cmp(&other.sign) {
            Ordering::Equal => match self.sign {
                0 => Some(Ordering::Equal),
                1 => self.logmag.partial_cmp(&other.logmag),
                _ => other.logmag.partial_cmp(&self.logmag),
            },
            ord => Some(ord),
        }
    }
}

impl std::iter::Sum for LogScalar {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        let v: Vec<LogScalar> = iter.collect();
        Self::sum_slice(&v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_has_sentinel() {
        let z = LogScalar::from_f64(0.0);
        assert_eq!(z.sign(), 0);
        assert_eq!(z.logmag(), f64::NEG_INFINITY);
        assert_eq!(LogScalar::new(1, f64::NEG_INFINITY), LogScalar::ZERO);
    }

    #[test]
    fn arithmetic_matches_linear() {
        let a = LogScalar::from_f64(3.5);
        let b = LogScalar::from_f64(-1.25);
        assert_relative_eq!((a + b).to_f64(), 2.25, max_relative = 1e-15);
        assert_relative_eq!((a - b).to_f64(), 4.75, max_relative = 1e-15);
        assert_relative_eq!((b - a).to_f64(), -4.75, max_relative = 1e-15);
        assert_relative_eq!((a * b).to_f64(), -4.375, max_relative = 1e-15);
        assert_relative_eq!((a / b).to_f64(), -2.8, max_relative = 1e-15);
        assert_relative_eq!(b.powi(3).to_f64(), -1.953125, max_relative = 1e-15);
        assert!((a - a).is_zero());
    }

    #[test]
    fn sums_far_outside_f64_range() {
        let a = LogScalar::from_ln(-1.0e6);
        let s = a + a;
        assert_relative_eq!(s.logmag(), -1.0e6 + 2f64.ln(), max_relative = 1e-15);
        let d = LogScalar::from_ln(-1.0e6 + 1.0) - a;
        assert_relative_eq!(
            d.logmag(),
            -1.0e6 + (std::f64::consts::E - 1.0).ln(),
            max_relative = 1e-15
        );
        let big = LogScalar::sum_slice(&[a, a.scale_ln(2.0), -a]);
        assert_relative_eq!(big.logmag(), -1.0e6 + 2.0, max_relative = 1e-15);
    }

    #[test]
    fn ordering() {
        let xs = [-3.0, -0.5, 0.0, 1e-300, 2.0];
        for w in xs.windows(2) {
            assert!(LogScalar::from_f64(w[0]) < LogScalar::from_f64(w[1]));
        }
    }
}
