use std::ops::{Add, Div, Mul, Neg, Sub};

use super::Scalar;

/// Value and tangent with respect to one input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual<T> {
    pub v: T,
    pub d: T,
}

impl<T: Scalar> Dual<T> {
    pub fn new(v: T, d: T) -> Self {
        Self { v, d }
    }

    /// Constant: tangent is `0 * v` so it lives on the same tape as `v`.
    pub fn constant(v: T) -> Self {
        Self { v, d: v * 0.0 }
    }

    pub fn relu(self) -> Self {
        if self.v.value() > 0.0 {
            Self { v: self.v, d: self.d }
        } else {
            Self { v: self.v * 0.0, d: self.d * 0.0 }
        }
    }

    pub fn tanh(self) -> Self {
        let th = self.v.tanh();
        Self { v: th, d: self.d * (-(th * th) + 1.0) }
    }

    /// `sum_i w_i * x_i + b` with scalar weights.
    pub fn affine(ws: &[T], xs: &[Self], b: T) -> Self {
        let mut v = b;
        let mut d: Option<T> = None;
        for (w, x) in ws.iter().zip(xs) {
            v = v + *w * x.v;
            let term = *w * x.d;
            d = Some(match d {
                Some(acc) => acc + term,
                None => term,
            });
        }
        Self { v, d: d.unwrap_or(b * 0.0) }
    }
}

impl Dual<f64> {
    /// The independent variable: tangent 1.
    pub fn variable(t: f64) -> Self {
        Self { v: t, d: 1.0 }
    }
}

impl<T: Scalar> Add for Dual<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self { v: self.v + rhs.v, d: self.d + rhs.d }
    }
}

impl<T: Scalar> Sub for Dual<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self { v: self.v - rhs.v, d: self.d - rhs.d }
    }
}

impl<T: Scalar> Mul for Dual<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Self { v: self.v * rhs.v, d: self.d * rhs.v + self.v * rhs.d }
    }
}

impl<T: Scalar> Div for Dual<T> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let q = self.v / rhs.v;
        Self { v: q, d: (self.d - q * rhs.d) / rhs.v }
    }
}

impl<T: Scalar> Neg for Dual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self { v: -self.v, d: -self.d }
    }
}

impl<T: Scalar> Mul<f64> for Dual<T> {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        Self { v: self.v * rhs, d: self.d * rhs }
    }
}

impl<T: Scalar> Add<f64> for Dual<T> {
    type Output = Self;
    fn add(self, rhs: f64) -> Self {
        Self { v: self.v + rhs, d: self.d }
    }
}
