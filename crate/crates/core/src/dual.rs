//! Fixed-size forward-mode dual numbers.
//!
//! Residual operators are written generically over [`Scalar`] so a single
//! definition yields both plain values (`f64`) and partial derivatives with
//! respect to the network jet components ([`Dual<N>`] seeded with unit
//! tangents). The PDE residuals in this crate are polynomial in the jet
//! entries, so only ring operations are required.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Scalar abstraction for residual evaluation.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(x: f64) -> Self;
    /// Multiply by a plain constant.
    fn scale(self, c: f64) -> Self;
    /// Add a plain constant.
    fn shift(self, c: f64) -> Self;
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn scale(self, c: f64) -> Self {
        self * c
    }
    #[inline]
    fn shift(self, c: f64) -> Self {
        self + c
    }
}

/// Value plus an `N`-dimensional tangent.
#[derive(Debug, Clone, Copy)]
pub struct Dual<const N: usize> {
    pub v: f64,
    pub d: [f64; N],
}

impl<const N: usize> Dual<N> {
    pub const fn constant(v: f64) -> Self {
        Self { v, d: [0.0; N] }
    }

    /// Variable with unit tangent in slot `i`.
    pub fn seeded(v: f64, i: usize) -> Self {
        let mut d = [0.0; N];
        d[i] = 1.0;
        Self { v, d }
    }
}

impl<const N: usize> Add for Dual<N> {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: Self) -> Self {
        self.v += rhs.v;
        for k in 0..N {
            self.d[k] += rhs.d[k];
        }
        self
    }
}

impl<const N: usize> Sub for Dual<N> {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: Self) -> Self {
        self.v -= rhs.v;
        for k in 0..N {
            self.d[k] -= rhs.d[k];
        }
        self
    }
}

impl<const N: usize> Mul for Dual<N> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        let mut d = [0.0; N];
        for k in 0..N {
            d[k] = self.d[k] * rhs.v + self.v * rhs.d[k];
        }
        Self {
            v: self.v * rhs.v,
            d,
        }
    }
}

impl<const N: usize> Div for Dual<N> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let inv = 1.0 / rhs.v;
        let mut d = [0.0; N];
        for k in 0..N {
            d[k] = (self.d[k] - self.v * inv * rhs.d[k]) * inv;
        }
        Self { v: self.v * inv, d }
    }
}

impl<const N: usize> Neg for Dual<N> {
    type Output = Self;
    #[inline]
    fn neg(mut self) -> Self {
        self.v = -self.v;
        for k in 0..N {
            self.d[k] = -self.d[k];
        }
        self
    }
}

impl<const N: usize> Scalar for Dual<N> {
    #[inline]
    fn from_f64(x: f64) -> Self {
        Self::constant(x)
    }
    #[inline]
    fn scale(mut self, c: f64) -> Self {
        self.v *= c;
        for k in 0..N {
            self.d[k] *= c;
        }
        self
    }
    #[inline]
    fn shift(mut self, c: f64) -> Self {
        self.v += c;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule() {
        let x = Dual::<2>::seeded(3.0, 0);
        let y = Dual::<2>::seeded(5.0, 1);
        let z = x * y + x.scale(2.0);
        assert_eq!(z.v, 21.0);
        assert_eq!(z.d, [7.0, 3.0]); // d/dx = y + 2, d/dy = x
    }

    #[test]
    fn quotient_rule() {
        let x = Dual::<1>::seeded(2.0, 0);
        let z = Dual::<1>::constant(1.0) / x;
        assert!((z.v - 0.5).abs() < 1e-15);
        assert!((z.d[0] + 0.25).abs() < 1e-15);
    }
}
