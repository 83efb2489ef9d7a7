//! Scalar automatic differentiation.
//!
//! Two engines that compose:
//!
//! * [`Dual`] carries a value and a tangent with respect to a single input
//!   (the network's time coordinate). It is generic over the [`Scalar`] it
//!   holds.
//! * [`Tape`] records primitive operations on [`Var`]s and runs a reverse
//!   sweep to produce gradients with respect to every leaf.
//!
//! A `Dual<Var>` gives forward-over-reverse: the time derivative of a network
//! output is itself a tape value, so a loss built from it can be
//! back-propagated to the weights.

mod dual;
mod tape;

pub use dual::Dual;
pub use tape::{Gradients, Tape, Var};

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::dinn::Mlp;

/// Arithmetic needed by model right-hand sides and network passes.
///
/// Mixed operations with `f64` constants are on the right-hand side only;
/// write `-x + 1.0` rather than `1.0 - x`.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    /// Primal value.
    fn value(&self) -> f64;
    fn tanh(self) -> Self;
    /// Rectified linear unit with derivative 0 at exactly 0.
    fn relu(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
}

impl Scalar for f64 {
    #[inline]
    fn value(&self) -> f64 {
        *self
    }
    #[inline]
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    #[inline]
    fn relu(self) -> Self {
        if self > 0.0 {
            self
        } else {
            0.0
        }
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
}

/// Plain forward pass plus the exact derivative of every output with respect
/// to the (normalized) input time.
pub fn forward_with_time_derivative(net: &Mlp, t: f64) -> (Vec<f64>, Vec<f64>) {
    let out = net.forward_dual(Dual::variable(t));
    out.iter().map(|d| (d.v, d.d)).unzip()
}

/// Reverse-mode gradient of `loss` with respect to all leaves on its tape.
pub fn grad_loss(tape: &Tape, loss: Var<'_>) -> Gradients {
    tape.gradient(loss)
}
