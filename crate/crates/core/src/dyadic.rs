//! Exact dyadic rationals `n / 2^e` used for knot breakpoints.
//!
//! Repeated bisection only ever produces dyadic values, so breakpoint
//! comparisons and nesting checks never need a floating-point tolerance.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// A dyadic rational in canonical form: the numerator is odd, or the
/// exponent is zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Dyadic {
    num: i64,
    exp: u32,
}

impl Dyadic {
    pub const ZERO: Dyadic = Dyadic { num: 0, exp: 0 };
    pub const ONE: Dyadic = Dyadic { num: 1, exp: 0 };

    /// Builds `num / 2^exp` and reduces it.
    pub fn new(num: i64, exp: u32) -> Self {
        let mut d = Dyadic { num, exp };
        d.reduce();
        d
    }

    pub fn from_int(n: i64) -> Self {
        Dyadic { num: n, exp: 0 }
    }

    fn reduce(&mut self) {
        if self.num == 0 {
            self.exp = 0;
            return;
        }
        let tz = self.num.trailing_zeros().min(self.exp);
        self.num >>= tz;
        self.exp -= tz;
    }

    pub fn numerator(&self) -> i64 {
        self.num
    }

    pub fn exponent(&self) -> u32 {
        self.exp
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / (2f64).powi(self.exp as i32)
    }

    /// `(self + other) / 2`, exact.
    pub fn midpoint(self, other: Dyadic) -> Dyadic {
        let e = self.exp.max(other.exp);
        let a = (self.num as i128) << (e - self.exp);
        let b = (other.num as i128) << (e - other.exp);
        Self::from_wide(a + b, e + 1)
    }

    /// `self + (other - self) * k / 2^level`, exact.
    pub fn lerp_dyadic(self, other: Dyadic, k: u64, level: u32) -> Dyadic {
        let e = self.exp.max(other.exp);
        let a = (self.num as i128) << (e - self.exp);
        let b = (other.num as i128) << (e - other.exp);
        let v = (a << level) + (b - a) * k as i128;
        Self::from_wide(v, e + level)
    }

    fn from_wide(mut num: i128, mut exp: u32) -> Dyadic {
        if num == 0 {
            return Dyadic::ZERO;
        }
        let tz = num.trailing_zeros().min(exp);
        num >>= tz;
        exp -= tz;
        let num = i64::try_from(num).expect("dyadic numerator overflow");
        Dyadic { num, exp }
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let e = self.exp.max(other.exp);
        let a = (self.num as i128) << (e - self.exp);
        let b = (other.num as i128) << (e - other.exp);
        a.cmp(&b)
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
        } else {
            write!(f, "{}/{}", self.num, 1u64 << self.exp)
        }
    }
}

impl FromStr for Dyadic {
    type Err = Error;

    /// Accepts `n` or `n/d` where `d` is a power of two.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || Error::Argument(format!("'{s}' is not a dyadic rational"));
        let s = s.trim();
        match s.split_once('/') {
            None => s.parse::<i64>().map(Dyadic::from_int).map_err(|_| bad()),
            Some((n, d)) => {
                let n: i64 = n.trim().parse().map_err(|_| bad())?;
                let d: u64 = d.trim().parse().map_err(|_| bad())?;
                if d == 0 || !d.is_power_of_two() {
                    return Err(bad());
                }
                Ok(Dyadic::new(n, d.trailing_zeros()))
            }
        }
    }
}
