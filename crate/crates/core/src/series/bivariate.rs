//! Truncated bivariate series in `(x, y)` with rectangular truncation.

use super::puiseux::{PuiseuxSeries, SeriesError};
use super::scalar::Scalar;

/// `sum_{i<=I, j<=J} a_ij x^i y^j`, stored x-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BivariateSeries<C> {
    coeffs: Vec<Vec<C>>,
}

impl<C: Scalar> BivariateSeries<C> {
    pub fn zero(order_x: usize, order_y: usize) -> Self {
        Self { coeffs: vec![vec![C::zero(); order_y + 1]; order_x + 1] }
    }

    pub fn constant(value: C, order_x: usize, order_y: usize) -> Self {
        let mut s = Self::zero(order_x, order_y);
        s.coeffs[0][0] = value;
        s
    }

    pub fn var_x(order_x: usize, order_y: usize) -> Self {
        let mut s = Self::zero(order_x, order_y);
        if order_x >= 1 {
            s.coeffs[1][0] = C::one();
        }
        s
    }

    pub fn var_y(order_x: usize, order_y: usize) -> Self {
        let mut s = Self::zero(order_x, order_y);
        if order_y >= 1 {
            s.coeffs[0][1] = C::one();
        }
        s
    }

    pub fn order_x(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn order_y(&self) -> usize {
        self.coeffs[0].len() - 1
    }

    pub fn coeff(&self, i: usize, j: usize) -> C {
        self.coeffs
            .get(i)
            .and_then(|row| row.get(j))
            .cloned()
            .unwrap_or_else(C::zero)
    }

    pub fn set_coeff(&mut self, i: usize, j: usize, value: C) {
        self.coeffs[i][j] = value;
    }

    fn magnitude(&self) -> f64 {
        self.coeffs
            .iter()
            .flatten()
            .map(|c| c.to_f64().abs())
            .fold(0.0, f64::max)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a - b)
    }

    fn zip(&self, other: &Self, f: impl Fn(C, C) -> C) -> Self {
        let ox = self.order_x().min(other.order_x());
        let oy = self.order_y().min(other.order_y());
        let mut out = Self::zero(ox, oy);
        for i in 0..=ox {
            for j in 0..=oy {
                out.coeffs[i][j] = f(self.coeff(i, j), other.coeff(i, j));
            }
        }
        out
    }

    pub fn neg(&self) -> Self {
        Self {
            coeffs: self
                .coeffs
                .iter()
                .map(|row| row.iter().map(|c| -c.clone()).collect())
                .collect(),
        }
    }

    pub fn scale(&self, factor: &C) -> Self {
        Self {
            coeffs: self
                .coeffs
                .iter()
                .map(|row| row.iter().map(|c| c.clone() * factor.clone()).collect())
                .collect(),
        }
    }

    pub fn add_constant(&self, value: &C) -> Self {
        let mut out = self.clone();
        out.coeffs[0][0] = out.coeffs[0][0].clone() + value.clone();
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let ox = self.order_x().min(other.order_x());
        let oy = self.order_y().min(other.order_y());
        let mut out = Self::zero(ox, oy);
        for i1 in 0..=ox.min(self.order_x()) {
            for j1 in 0..=oy.min(self.order_y()) {
                let a = self.coeff(i1, j1);
                if a.is_zero() {
                    continue;
                }
                for i2 in 0..=(ox - i1).min(other.order_x()) {
                    for j2 in 0..=(oy - j1).min(other.order_y()) {
                        let b = other.coeff(i2, j2);
                        if b.is_zero() {
                            continue;
                        }
                        out.coeffs[i1 + i2][j1 + j2] =
                            out.coeffs[i1 + i2][j1 + j2].clone() + a.clone() * b;
                    }
                }
            }
        }
        out
    }

    /// Multiplicative inverse by triangular solve in graded order; the
    /// constant term must be nonzero.
    pub fn inverse(&self) -> Result<Self, SeriesError> {
        let a00 = self.coeff(0, 0);
        if a00.is_zero() {
            return Err(SeriesError::ZeroDivisor);
        }
        let (ox, oy) = (self.order_x(), self.order_y());
        let mut out = Self::zero(ox, oy);
        let inv0 = C::one() / a00.clone();
        for deg in 0..=(ox + oy) {
            for i in 0..=deg.min(ox) {
                let j = deg - i;
                if j > oy {
                    continue;
                }
                if deg == 0 {
                    out.coeffs[0][0] = inv0.clone();
                    continue;
                }
                // sum over (k,l) < (i,j) componentwise with (k,l) != (i,j)
                let mut s = C::zero();
                for k in 0..=i {
                    for l in 0..=j {
                        if k == 0 && l == 0 {
                            continue;
                        }
                        let a = self.coeff(k, l);
                        if a.is_zero() {
                            continue;
                        }
                        s = s + a * out.coeff(i - k, j - l);
                    }
                }
                out.coeffs[i][j] = -s * inv0.clone();
            }
        }
        Ok(out)
    }

    pub fn derivative_x(&self) -> Self {
        let (ox, oy) = (self.order_x(), self.order_y());
        if ox == 0 {
            return Self::zero(0, oy);
        }
        let mut out = Self::zero(ox - 1, oy);
        for i in 1..=ox {
            for j in 0..=oy {
                out.coeffs[i - 1][j] = self.coeff(i, j) * C::from_ratio(i as i64, 1);
            }
        }
        out
    }

    /// Antiderivative in `x` with zero constant row; order grows by one up
    /// to the given allocation cap.
    pub fn integrate_x(&self, cap_x: usize) -> Self {
        let oy = self.order_y();
        let ox = (self.order_x() + 1).min(cap_x);
        let mut out = Self::zero(ox, oy);
        for i in 0..ox {
            for j in 0..=oy {
                out.coeffs[i + 1][j] = self.coeff(i, j) / C::from_ratio(i as i64 + 1, 1);
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let (ox, oy) = (self.order_x(), self.order_y());
        let mut out = Self::zero(oy, ox);
        for i in 0..=ox {
            for j in 0..=oy {
                out.coeffs[j][i] = self.coeff(i, j);
            }
        }
        out
    }

    /// Divide by `x^k`; rows `0..k` must vanish.
    pub fn shift_down_x(&self, k: usize) -> Result<Self, SeriesError> {
        let scale = self.magnitude();
        for i in 0..k {
            for c in &self.coeffs[i] {
                if !c.is_negligible(scale) {
                    return Err(SeriesError::NonzeroLowOrder(i));
                }
            }
        }
        Ok(Self { coeffs: self.coeffs[k..].to_vec() })
    }

    /// Row `i` as a univariate series in `y`.
    pub fn row(&self, i: usize, base: &str) -> PuiseuxSeries<C> {
        PuiseuxSeries::new(base, self.coeffs[i].clone())
    }

    /// Substitute `x = inner(v)` (zero constant term); the result is a
    /// univariate series in `inner`'s variable, truncated at its order.
    /// The `y` variable must already agree with `inner`'s variable.
    pub fn compose_x(&self, inner: &PuiseuxSeries<C>) -> Result<PuiseuxSeries<C>, SeriesError> {
        let n = inner.order();
        let mut acc = self.row_padded(self.order_x(), inner.base(), n);
        for i in (0..self.order_x()).rev() {
            acc = acc.mul(inner)?;
            acc = acc.add(&self.row_padded(i, inner.base(), n))?;
        }
        Ok(acc)
    }

    /// Substitute `x = bx(v)`, `y = by(v)` (both zero constant term).
    pub fn compose_xy(
        &self,
        bx: &PuiseuxSeries<C>,
        by: &PuiseuxSeries<C>,
    ) -> Result<PuiseuxSeries<C>, SeriesError> {
        let n = bx.order().min(by.order());
        let mut acc = PuiseuxSeries::zero(bx.base(), n);
        for i in (0..=self.order_x()).rev() {
            acc = acc.mul(&bx.truncate(n))?;
            let row = self.row(i, bx.base());
            acc = acc.add(&row.compose(&by.truncate(n))?)?;
        }
        Ok(acc)
    }

    fn row_padded(&self, i: usize, base: &str, order: usize) -> PuiseuxSeries<C> {
        let mut coeffs = self.coeffs[i].clone();
        coeffs.resize(order + 1, C::zero());
        coeffs.truncate(order + 1);
        PuiseuxSeries::new(base, coeffs)
    }
}

/// Solve `F(x, y(x)) = 0` for `y(x)` with `y(0) = 0`, requiring `F(0,0) = 0`
/// and a nonzero linear-in-`y` coefficient at the origin.
pub fn solve_implicit<C: Scalar>(
    f: &BivariateSeries<C>,
    base_x: &str,
) -> Result<PuiseuxSeries<C>, SeriesError> {
    let scale = f.magnitude();
    if !f.coeff(0, 0).is_negligible(scale) {
        return Err(SeriesError::DegenerateImplicit);
    }
    let fy = f.coeff(0, 1);
    if fy.is_zero() {
        return Err(SeriesError::DegenerateImplicit);
    }
    let order = f.order_x();
    let inv_fy = C::one() / fy;
    let mut y = PuiseuxSeries::zero(base_x, order);
    for _ in 0..=(order + 1) {
        // y <- y - F(x, y)/F_y(0,0); contraction gains one order per pass
        let fxy = eval_in_y(f, &y)?;
        y = y.sub(&fxy.scale(&inv_fy))?;
    }
    Ok(y)
}

/// Substitute a univariate series (in the x-variable) for `y`.
fn eval_in_y<C: Scalar>(
    f: &BivariateSeries<C>,
    y: &PuiseuxSeries<C>,
) -> Result<PuiseuxSeries<C>, SeriesError> {
    Ok(f.transpose().compose_x(y)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    type S = PuiseuxSeries<f64>;

    #[test]
    fn inverse_of_one_plus_x_plus_y() {
        let one = BivariateSeries::constant(1.0f64, 4, 4);
        let f = one.add(&BivariateSeries::var_x(4, 4)).add(&BivariateSeries::var_y(4, 4));
        let inv = f.inverse().unwrap();
        let prod = f.mul(&inv);
        for i in 0..=4usize {
            for j in 0..=4 - i {
                let expect = if i == 0 && j == 0 { 1.0 } else { 0.0 };
                assert!((prod.coeff(i, j) - expect).abs() < 1e-14, "({i},{j})");
            }
        }
    }

    #[test]
    fn implicit_explicit_case() {
        // F = y - x  =>  y(x) = x
        let f = BivariateSeries::<f64>::var_y(5, 5).sub(&BivariateSeries::var_x(5, 5));
        let y = solve_implicit(&f, "x").unwrap();
        assert!((y.coeff(1) - 1.0).abs() < 1e-15);
        for k in [0usize, 2, 3, 4] {
            assert!(y.coeff(k).abs() < 1e-14);
        }
    }

    #[test]
    fn implicit_catalan_case() {
        // F = y - x - y^2  =>  y = x + x^2 + 2x^3 + 5x^4 + 14x^5
        let y2 = BivariateSeries::<f64>::var_y(6, 6).mul(&BivariateSeries::var_y(6, 6));
        let f = BivariateSeries::<f64>::var_y(6, 6)
            .sub(&BivariateSeries::var_x(6, 6))
            .sub(&y2);
        let y = solve_implicit(&f, "x").unwrap();
        // independent oracle: plain fixed-point iteration y <- x + y^2
        let x = S::variable("x", 6);
        let mut z = S::zero("x", 6);
        for _ in 0..8 {
            z = x.add(&z.mul(&z).unwrap()).unwrap();
        }
        for k in 0..=6 {
            assert!((y.coeff(k) - z.coeff(k)).abs() < 1e-12, "k={k}");
        }
        assert!((y.coeff(4) - 5.0).abs() < 1e-12);
        assert!((y.coeff(5) - 14.0).abs() < 1e-12);
    }
}
