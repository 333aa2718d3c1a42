//! Coefficient field abstraction: plain `f64` for production runs, exact
//! rationals for golden tests where the inputs are rational.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Coefficient type for truncated series arithmetic.
pub trait Scalar:
    Clone
    + PartialEq
    + Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_ratio(num: i64, den: i64) -> Self;
    fn is_zero(&self) -> bool;
    fn to_f64(&self) -> f64;
    /// `self^(1/n)`, exact for rationals (perfect powers only), numeric for floats.
    fn nth_root(&self, n: u32) -> Option<Self>;
    /// Whether the value is indistinguishable from zero at the given magnitude
    /// scale. Exact zero test for rationals, relative tolerance for floats.
    fn is_negligible(&self, scale: f64) -> bool;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn nth_root(&self, n: u32) -> Option<Self> {
        if *self > 0.0 {
            Some(self.powf(1.0 / n as f64))
        } else if *self == 0.0 {
            Some(0.0)
        } else if n % 2 == 1 {
            Some(-(-self).powf(1.0 / n as f64))
        } else {
            None
        }
    }
    fn is_negligible(&self, scale: f64) -> bool {
        self.abs() <= 1e-9 * scale.max(1e-300)
    }
}

fn exact_int_root(x: &BigInt, n: u32) -> Option<BigInt> {
    if x.is_negative() && n % 2 == 0 {
        return None;
    }
    let r = x.nth_root(n);
    if num_traits::pow::pow(r.clone(), n as usize) == *x {
        Some(r)
    } else {
        None
    }
}

impl Scalar for BigRational {
    fn zero() -> Self {
        <BigRational as Zero>::zero()
    }
    fn one() -> Self {
        <BigRational as num_traits::One>::one()
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn nth_root(&self, n: u32) -> Option<Self> {
        let num = exact_int_root(self.numer(), n)?;
        let den = exact_int_root(self.denom(), n)?;
        Some(BigRational::new(num, den))
    }
    fn is_negligible(&self, _scale: f64) -> bool {
        Zero::is_zero(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_nth_root_exact_only() {
        let x = BigRational::from_ratio(27, 8);
        assert_eq!(x.nth_root(3), Some(BigRational::from_ratio(3, 2)));
        let y = BigRational::from_ratio(2, 1);
        assert_eq!(y.nth_root(2), None);
    }

    #[test]
    fn f64_nth_root() {
        assert!((8.0f64.nth_root(3).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!((-4.0f64).nth_root(2), None);
        assert!(((-8.0f64).nth_root(3).unwrap() + 2.0).abs() < 1e-15);
    }
}
