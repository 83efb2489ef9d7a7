//! Disease-informed networks: an MLP of time whose outputs must fit the data
//! and satisfy the model's ODE system, with the unknown rates learned jointly.

mod adam;
mod checkpoint;
mod loss;
mod network;
mod schedule;
mod train;

pub use adam::Adam;
pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use loss::{loss, loss_and_grad_tape, residuals, LossBreakdown, LossKernel};
pub use network::{Activation, Layer, LayerVars, Mlp};
pub use schedule::{CyclicLr, DecayBase};
pub use train::{error_learnable, error_nn, evaluate, relative_errors, train, train_model, FitReport, TrainConfig};

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::Scalar;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::integrate::Trajectory;
use crate::models::CompartmentModel;

/// Default half-width of the raw parameter draw.
pub const PARAM_INIT_WIDTH: f64 = 0.01;

/// Maps an unconstrained value into `(lo, hi)` through a shifted tanh.
pub fn constrain(raw: f64, lo: f64, hi: f64) -> Result<f64> {
    if !(lo < hi) {
        return Err(Error::Domain(format!("empty range ({lo}, {hi})")));
    }
    Ok(squash(raw, lo, hi))
}

#[inline]
fn squash<S: Scalar>(raw: S, lo: f64, hi: f64) -> S {
    (raw.tanh() + 1.0) * (0.5 * (hi - lo)) + lo
}

/// d constrain / d raw.
#[inline]
pub fn constrain_slope(raw: f64, lo: f64, hi: f64) -> f64 {
    let t = raw.tanh();
    0.5 * (hi - lo) * (1.0 - t * t)
}

/// Symmetric search range around zero. 100% spans `±2|v|` and wider ranges
/// scale linearly, so 1000% is `±20|v|`; 0% yields the fixed `(v, v)`.
pub fn make_range(v: f64, pct: f64) -> (f64, f64) {
    if pct == 0.0 || v == 0.0 {
        return (v, v);
    }
    let w = 2.0 * v.abs() * pct / 100.0;
    (-w, w)
}

/// Percentage error, or absolute error when the actual value is zero.
pub fn param_error(found: f64, actual: f64) -> f64 {
    if actual == 0.0 {
        (found - actual).abs()
    } else {
        100.0 * (found - actual).abs() / actual.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParamBinding {
    Fixed { value: f64 },
    Learnable { lo: f64, hi: f64, slot: usize },
}

/// Network, learnable parameters and the normalization that ties them to a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DinnModel {
    pub net: Mlp,
    pub model: CompartmentModel,
    /// One entry per model parameter, in registry order.
    pub bindings: Vec<ParamBinding>,
    pub raw_params: Vec<f64>,
    pub time_offset: f64,
    pub time_scale: f64,
    pub comp_scale: Vec<f64>,
}

impl DinnModel {
    /// Fresh network and parameters; the model's search ranges decide what is learnable.
    pub fn new(
        model: &CompartmentModel,
        ds: &Dataset,
        hidden: &[usize],
        activation: Activation,
        seed: u64,
    ) -> Result<Self> {
        Self::with_param_init(model, ds, hidden, activation, seed, PARAM_INIT_WIDTH)
    }

    /// As [`DinnModel::new`], drawing raw parameters from `U(-width, width)`.
    pub fn with_param_init(
        model: &CompartmentModel,
        ds: &Dataset,
        hidden: &[usize],
        activation: Activation,
        seed: u64,
        width: f64,
    ) -> Result<Self> {
        if !(width >= 0.0 && width.is_finite()) {
            return Err(Error::Config(format!("parameter init width must be finite and non-negative, got {width}")));
        }
        if ds.dim() != model.dim() || ds.compartments != model.compartments {
            return Err(Error::Dimension(format!(
                "dataset compartments {:?} do not match model {} {:?}",
                ds.compartments, model.name, model.compartments
            )));
        }
        if ds.len() < 2 {
            return Err(Error::Config("training needs at least 2 time points".into()));
        }
        if ds.scale.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Domain("compartment scales must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = Mlp::with_rng(1, hidden, model.dim(), activation, &mut rng);
        let mut bindings = Vec::with_capacity(model.params.len());
        let mut raw_params = Vec::new();
        for p in &model.params {
            if p.is_learnable() && p.search_lo < p.search_hi {
                bindings.push(ParamBinding::Learnable { lo: p.search_lo, hi: p.search_hi, slot: raw_params.len() });
                raw_params.push(width * rng.gen_range(-1.0..1.0));
            } else {
                bindings.push(ParamBinding::Fixed { value: p.true_value });
            }
        }
        let t0 = ds.times[0];
        let span = ds.times[ds.len() - 1] - t0;
        Ok(Self {
            net,
            model: model.clone(),
            bindings,
            raw_params,
            time_offset: t0,
            time_scale: if span > 0.0 { span } else { 1.0 },
            comp_scale: ds.scale.clone(),
        })
    }

    pub fn n_learnable(&self) -> usize {
        self.raw_params.len()
    }

    /// Full parameter vector in registry order.
    pub fn params(&self) -> Vec<f64> {
        self.bindings
            .iter()
            .map(|b| match *b {
                ParamBinding::Fixed { value } => value,
                ParamBinding::Learnable { lo, hi, slot } => squash(self.raw_params[slot], lo, hi),
            })
            .collect()
    }

    /// Learnable parameters by name.
    pub fn found_params(&self) -> BTreeMap<String, f64> {
        let values = self.params();
        self.model
            .params
            .iter()
            .zip(&self.bindings)
            .zip(values)
            .filter(|((_, b), _)| matches!(b, ParamBinding::Learnable { .. }))
            .map(|((p, _), v)| (p.name.clone(), v))
            .collect()
    }

    pub fn normalize_time(&self, t: f64) -> f64 {
        (t - self.time_offset) / self.time_scale
    }

    /// Denormalized compartment values at time `t`.
    pub fn predict(&self, t: f64) -> Vec<f64> {
        let u = self.net.forward(self.normalize_time(t));
        u.iter().zip(&self.comp_scale).map(|(u, s)| u * s).collect()
    }

    pub fn predict_trajectory(&self, grid: &[f64]) -> Trajectory {
        Trajectory {
            model_name: self.model.name.clone(),
            compartments: self.model.compartments.clone(),
            times: grid.to_vec(),
            states: grid.iter().map(|t| self.predict(*t)).collect(),
        }
    }

    /// Network weights followed by raw parameters.
    pub fn theta(&self) -> Vec<f64> {
        let mut v = self.net.flatten();
        v.extend_from_slice(&self.raw_params);
        v
    }

    pub fn set_theta(&mut self, theta: &[f64]) {
        let n = self.net.n_params();
        self.net.unflatten(&theta[..n]);
        self.raw_params.copy_from_slice(&theta[n..]);
    }
}
