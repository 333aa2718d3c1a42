//! Truncated univariate series with explicit truncation order.
//!
//! The series variable is tagged with a symbol so that operands from
//! different expansions cannot be mixed silently. Arithmetic results carry
//! the minimum of the operand orders; division below a nonzero valuation
//! must be requested explicitly through [`PuiseuxSeries::shift_down`].

use super::scalar::Scalar;
use serde::Serialize;
use std::fmt;
use std::sync::Arc;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SeriesError {
    #[error("series base mismatch: {0} vs {1}")]
    BaseMismatch(String, String),
    #[error("division by series with zero constant term")]
    ZeroDivisor,
    #[error("coefficient of order {0} is nonzero; cannot lower valuation")]
    NonzeroLowOrder(usize),
    #[error("constant term admits no exact root of index {0}")]
    NoExactRoot(u32),
    #[error("reversion needs zero constant term and invertible linear term")]
    InvalidReversion,
    #[error("composition needs inner series with zero constant term")]
    InvalidComposition,
    #[error("implicit solve: linear coefficient of the solved variable is zero")]
    DegenerateImplicit,
}

/// Truncated power series `c0 + c1 v + ... + cK v^K + O(v^{K+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct PuiseuxSeries<C> {
    base: Arc<str>,
    coeffs: Vec<C>,
}

impl<C: Scalar> PuiseuxSeries<C> {
    pub fn new(base: &str, coeffs: Vec<C>) -> Self {
        assert!(!coeffs.is_empty(), "series needs at least the constant term");
        Self { base: Arc::from(base), coeffs }
    }

    pub fn zero(base: &str, order: usize) -> Self {
        Self::new(base, vec![C::zero(); order + 1])
    }

    pub fn constant(base: &str, value: C, order: usize) -> Self {
        let mut s = Self::zero(base, order);
        s.coeffs[0] = value;
        s
    }

    /// The identity series `v`.
    pub fn variable(base: &str, order: usize) -> Self {
        let mut s = Self::zero(base, order);
        if order >= 1 {
            s.coeffs[1] = C::one();
        }
        s
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, k: usize) -> C {
        self.coeffs.get(k).cloned().unwrap_or_else(C::zero)
    }

    pub fn coeffs(&self) -> &[C] {
        &self.coeffs
    }

    fn check_base(&self, other: &Self) -> Result<(), SeriesError> {
        if self.base != other.base {
            return Err(SeriesError::BaseMismatch(
                self.base.to_string(),
                other.base.to_string(),
            ));
        }
        Ok(())
    }

    fn magnitude(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|c| c.to_f64().abs())
            .fold(0.0, f64::max)
    }

    pub fn truncate(&self, order: usize) -> Self {
        let n = order.min(self.order());
        Self { base: self.base.clone(), coeffs: self.coeffs[..=n].to_vec() }
    }

    /// Extend the allocation with zero coefficients up to `order`. The new
    /// slots are only placeholders; the caller owns their reliability.
    pub fn pad(&self, order: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(order.max(self.order()) + 1, C::zero());
        Self { base: self.base.clone(), coeffs }
    }

    pub fn add(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check_base(other)?;
        let n = self.order().min(other.order());
        let coeffs = (0..=n)
            .map(|k| self.coeff(k) + other.coeff(k))
            .collect();
        Ok(Self { base: self.base.clone(), coeffs })
    }

    pub fn sub(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check_base(other)?;
        let n = self.order().min(other.order());
        let coeffs = (0..=n)
            .map(|k| self.coeff(k) - other.coeff(k))
            .collect();
        Ok(Self { base: self.base.clone(), coeffs })
    }

    pub fn neg(&self) -> Self {
        Self {
            base: self.base.clone(),
            coeffs: self.coeffs.iter().map(|c| -c.clone()).collect(),
        }
    }

    pub fn scale(&self, factor: &C) -> Self {
        Self {
            base: self.base.clone(),
            coeffs: self.coeffs.iter().map(|c| c.clone() * factor.clone()).collect(),
        }
    }

    pub fn add_constant(&self, value: &C) -> Self {
        let mut out = self.clone();
        out.coeffs[0] = out.coeffs[0].clone() + value.clone();
        out
    }

    /// Cauchy product, truncated at the minimum operand order.
    pub fn mul(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check_base(other)?;
        let n = self.order().min(other.order());
        let mut coeffs = vec![C::zero(); n + 1];
        for i in 0..=n {
            let a = self.coeff(i);
            if a.is_zero() {
                continue;
            }
            for j in 0..=(n - i) {
                let b = other.coeff(j);
                if b.is_zero() {
                    continue;
                }
                coeffs[i + j] = coeffs[i + j].clone() + a.clone() * b;
            }
        }
        Ok(Self { base: self.base.clone(), coeffs })
    }

    /// Multiplicative inverse; the constant term must be nonzero.
    pub fn inverse(&self) -> Result<Self, SeriesError> {
        let a0 = self.coeff(0);
        if a0.is_zero() {
            return Err(SeriesError::ZeroDivisor);
        }
        let n = self.order();
        let mut coeffs = vec![C::zero(); n + 1];
        coeffs[0] = C::one() / a0.clone();
        for k in 1..=n {
            let mut s = C::zero();
            for j in 1..=k {
                s = s + self.coeff(j) * coeffs[k - j].clone();
            }
            coeffs[k] = -s / a0.clone();
        }
        Ok(Self { base: self.base.clone(), coeffs })
    }

    pub fn div(&self, other: &Self) -> Result<Self, SeriesError> {
        self.mul(&other.inverse()?)
    }

    /// Divide by `v^k`; the low-order coefficients must vanish. Reduces the
    /// truncation order by `k`.
    pub fn shift_down(&self, k: usize) -> Result<Self, SeriesError> {
        let scale = self.magnitude();
        for j in 0..k.min(self.coeffs.len()) {
            if !self.coeffs[j].is_negligible(scale) {
                return Err(SeriesError::NonzeroLowOrder(j));
            }
        }
        if k > self.order() {
            return Ok(Self::zero(&self.base, 0));
        }
        Ok(Self { base: self.base.clone(), coeffs: self.coeffs[k..].to_vec() })
    }

    /// Multiply by `v^k`, keeping the allocation (coefficients past the
    /// original order are dropped, so the stored order is unchanged).
    pub fn shift_up(&self, k: usize) -> Self {
        let n = self.order();
        let mut coeffs = vec![C::zero(); n + 1];
        for j in 0..=n.saturating_sub(k) {
            coeffs[j + k] = self.coeffs[j].clone();
        }
        Self { base: self.base.clone(), coeffs }
    }

    /// Integer power via repeated squaring; negative exponents invert first.
    pub fn powi(&self, exp: i64) -> Result<Self, SeriesError> {
        if exp < 0 {
            return self.inverse()?.powi(-exp);
        }
        let mut result = Self::constant(&self.base, C::one(), self.order());
        let mut b = self.clone();
        let mut e = exp as u64;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&b)?;
            }
            e >>= 1;
            if e > 0 {
                b = b.mul(&b)?;
            }
        }
        Ok(result)
    }

    /// Fractional power `self^(num/den)` via the power-series power
    /// recurrence. The constant term must have an exact `den`-th root
    /// (automatic when it equals one, or always in floating point).
    pub fn pow_frac(&self, num: i64, den: u32) -> Result<Self, SeriesError> {
        assert!(den >= 1);
        if den == 1 {
            return self.powi(num);
        }
        let a0 = self.coeff(0);
        if a0.is_zero() {
            return Err(SeriesError::ZeroDivisor);
        }
        let root = a0.nth_root(den).ok_or(SeriesError::NoExactRoot(den))?;
        let lead = root.clone();
        let lead_pow = if num >= 0 {
            let mut p = C::one();
            for _ in 0..num {
                p = p * lead.clone();
            }
            p
        } else {
            let mut p = C::one();
            for _ in 0..(-num) {
                p = p * lead.clone();
            }
            C::one() / p
        };
        let normalized = self.scale(&(C::one() / a0));
        let r = C::from_ratio(num, den as i64);
        let n = normalized.order();
        let mut coeffs = vec![C::zero(); n + 1];
        coeffs[0] = C::one();
        for m in 1..=n {
            let mut s = C::zero();
            for k in 1..=m {
                // ((r+1)k/m - 1) * f_k * h_{m-k}
                let w = (r.clone() + C::one()) * C::from_ratio(k as i64, m as i64) - C::one();
                s = s + w * normalized.coeff(k) * coeffs[m - k].clone();
            }
            coeffs[m] = s;
        }
        Ok(Self { base: self.base.clone(), coeffs }.scale(&lead_pow))
    }

    /// Substitute `inner` (zero constant term) for the variable of `self`.
    /// The result is a series in `inner`'s variable.
    pub fn compose(&self, inner: &Self) -> Result<Self, SeriesError> {
        if !inner.coeff(0).is_negligible(inner.magnitude()) {
            return Err(SeriesError::InvalidComposition);
        }
        let n = inner.order();
        let mut acc = PuiseuxSeries::constant(&inner.base, self.coeff(self.order()), n);
        for k in (0..self.order()).rev() {
            acc = acc.mul(inner)?;
            acc.coeffs[0] = acc.coeffs[0].clone() + self.coeff(k);
        }
        Ok(acc)
    }

    /// Compositional inverse via the Lagrange inversion formula:
    /// `[v^k] inverse = (1/k) [z^{k-1}] (z / self(z))^k`.
    pub fn reversion(&self) -> Result<Self, SeriesError> {
        let scale = self.magnitude();
        if !self.coeff(0).is_negligible(scale) || self.coeff(1).is_zero() {
            return Err(SeriesError::InvalidReversion);
        }
        let n = self.order();
        // phi = z / self(z), valuation divided out.
        let mut shifted = self.coeffs[1..].to_vec();
        shifted.push(C::zero());
        shifted[n] = C::zero();
        let phi = Self { base: self.base.clone(), coeffs: shifted }.inverse()?;
        let mut coeffs = vec![C::zero(); n + 1];
        let mut phik = Self::constant(&self.base, C::one(), n);
        for k in 1..=n {
            phik = phik.mul(&phi)?;
            coeffs[k] = phik.coeff(k - 1) / C::from_ratio(k as i64, 1);
        }
        Ok(Self { base: self.base.clone(), coeffs })
    }

    /// Term-wise derivative (order drops by one).
    pub fn derivative(&self) -> Self {
        if self.order() == 0 {
            return Self::zero(&self.base, 0);
        }
        let coeffs = (1..=self.order())
            .map(|k| self.coeff(k) * C::from_ratio(k as i64, 1))
            .collect();
        Self { base: self.base.clone(), coeffs }
    }

    /// Evaluate the truncated polynomial at a numeric point.
    pub fn eval_f64(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c.to_f64();
        }
        acc
    }

    /// Rebase onto a new symbol with coefficients mapped through `f`.
    pub fn map<D: Scalar>(&self, base: &str, f: impl Fn(usize, &C) -> D) -> PuiseuxSeries<D> {
        PuiseuxSeries {
            base: Arc::from(base),
            coeffs: self.coeffs.iter().enumerate().map(|(k, c)| f(k, c)).collect(),
        }
    }

    pub fn to_f64_series(&self) -> PuiseuxSeries<f64> {
        self.map(&self.base.clone(), |_, c| c.to_f64())
    }
}

impl PuiseuxSeries<f64> {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "base": self.base.as_ref(),
            "order": self.order(),
            "coeffs": self.coeffs,
        })
    }
}

impl Serialize for PuiseuxSeries<f64> {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut s = serializer.serialize_struct("PuiseuxSeries", 3)?;
        s.serialize_field("base", self.base.as_ref())?;
        s.serialize_field("order", &self.order())?;
        s.serialize_field("coeffs", &self.coeffs)?;
        s.end()
    }
}

impl<C: Scalar> fmt::Display for PuiseuxSeries<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() && !(k == 0 && self.coeffs.len() == 1) {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match k {
                0 => write!(f, "{}", c.to_f64())?,
                1 => write!(f, "{}·{}", c.to_f64(), self.base)?,
                _ => write!(f, "{}·{}^{}", c.to_f64(), self.base, k)?,
            }
        }
        if first {
            write!(f, "0")?;
        }
        write!(f, " + O({}^{})", self.base, self.order() + 1)
    }
}
