use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Dual, Scalar, Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    fn dual<T: Scalar>(self, z: Dual<T>) -> Dual<T> {
        match self {
            Activation::Relu => z.relu(),
            Activation::Tanh => z.tanh(),
        }
    }

    fn scalar<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Relu => z.relu(),
            Activation::Tanh => z.tanh(),
        }
    }
}

/// Dense layer; `w` is row-major `[out][inp]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inp: usize,
    pub out: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Layer {
    fn init(inp: usize, out: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (inp as f64).sqrt();
        let w = (0..inp * out).map(|_| rng.gen_range(-bound..bound)).collect();
        let b = (0..out).map(|_| rng.gen_range(-bound..bound)).collect();
        Self { inp, out, w, b }
    }

    pub fn n_params(&self) -> usize {
        self.w.len() + self.b.len()
    }
}

/// Fully connected network with the activation between hidden layers and an
/// identity output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Layer>,
    pub activation: Activation,
}

/// Tape leaves mirroring one [`Layer`].
pub struct LayerVars<'t> {
    pub w: Vec<Var<'t>>,
    pub b: Vec<Var<'t>>,
}

impl Mlp {
    /// Weights uniform in `±1/sqrt(fan_in)`.
    pub fn new(inp: usize, hidden: &[usize], out: usize, activation: Activation, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::with_rng(inp, hidden, out, activation, &mut rng)
    }

    pub fn with_rng(inp: usize, hidden: &[usize], out: usize, activation: Activation, rng: &mut ChaCha8Rng) -> Self {
        let mut sizes = vec![inp];
        sizes.extend_from_slice(hidden);
        sizes.push(out);
        let layers = sizes.windows(2).map(|w| Layer::init(w[0], w[1], rng)).collect();
        Self { layers, activation }
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out)
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(Layer::n_params).sum()
    }

    /// Weights then biases, layer by layer.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            v.extend_from_slice(&l.w);
            v.extend_from_slice(&l.b);
        }
        v
    }

    pub fn unflatten(&mut self, flat: &[f64]) {
        let mut off = 0;
        for l in &mut self.layers {
            let nw = l.w.len();
            l.w.copy_from_slice(&flat[off..off + nw]);
            off += nw;
            let nb = l.b.len();
            l.b.copy_from_slice(&flat[off..off + nb]);
            off += nb;
        }
    }

    pub fn forward(&self, t: f64) -> Vec<f64> {
        let mut a = vec![t];
        let last = self.layers.len() - 1;
        for (k, l) in self.layers.iter().enumerate() {
            let mut z = l.b.clone();
            for o in 0..l.out {
                let row = &l.w[o * l.inp..(o + 1) * l.inp];
                z[o] += row.iter().zip(&a).map(|(w, x)| w * x).sum::<f64>();
            }
            if k != last {
                z.iter_mut().for_each(|v| *v = self.activation.apply(*v));
            }
            a = z;
        }
        a
    }

    pub fn forward_dual(&self, t: Dual<f64>) -> Vec<Dual<f64>> {
        let mut a = vec![t];
        let last = self.layers.len() - 1;
        for (k, l) in self.layers.iter().enumerate() {
            let mut next = Vec::with_capacity(l.out);
            for o in 0..l.out {
                let z = Dual::affine(&l.w[o * l.inp..(o + 1) * l.inp], &a, l.b[o]);
                next.push(if k != last { self.activation.dual(z) } else { z });
            }
            a = next;
        }
        a
    }

    /// Registers every weight and bias as a tape leaf, in flattened order.
    pub fn to_vars<'t>(&self, tape: &'t Tape) -> Vec<LayerVars<'t>> {
        self.layers
            .iter()
            .map(|l| LayerVars {
                w: l.w.iter().map(|w| tape.var(*w)).collect(),
                b: l.b.iter().map(|b| tape.var(*b)).collect(),
            })
            .collect()
    }

    /// Plain forward pass with tape weights and input.
    pub fn forward_generic<'t>(&self, weights: &[LayerVars<'t>], t: Var<'t>) -> Vec<Var<'t>> {
        let mut a = vec![t];
        let last = self.layers.len() - 1;
        for (k, (l, lv)) in self.layers.iter().zip(weights).enumerate() {
            let mut next = Vec::with_capacity(l.out);
            for o in 0..l.out {
                let mut z = lv.b[o];
                for i in 0..l.inp {
                    z = z + lv.w[o * l.inp + i] * a[i];
                }
                next.push(if k != last { self.activation.scalar(z) } else { z });
            }
            a = next;
        }
        a
    }

    /// Dual forward pass whose values and tangents are tape variables.
    pub fn forward_dual_tape<'t>(&self, weights: &[LayerVars<'t>], t: Dual<Var<'t>>) -> Vec<Dual<Var<'t>>> {
        let mut a = vec![t];
        let last = self.layers.len() - 1;
        for (k, (l, lv)) in self.layers.iter().zip(weights).enumerate() {
            let mut next = Vec::with_capacity(l.out);
            for o in 0..l.out {
                let z = Dual::affine(&lv.w[o * l.inp..(o + 1) * l.inp], &a, lv.b[o]);
                next.push(if k != last { self.activation.dual(z) } else { z });
            }
            a = next;
        }
        a
    }

    /// Smallest |pre-activation| over hidden units at input `t`.
    pub fn min_abs_preactivation(&self, t: f64) -> f64 {
        let mut a = vec![t];
        let mut min = f64::INFINITY;
        let last = self.layers.len() - 1;
        for (k, l) in self.layers.iter().enumerate() {
            let mut z = l.b.clone();
            for o in 0..l.out {
                z[o] += (0..l.inp).map(|i| l.w[o * l.inp + i] * a[i]).sum::<f64>();
            }
            if k != last {
                min = z.iter().fold(min, |m, v| m.min(v.abs()));
                z.iter_mut().for_each(|v| *v = self.activation.apply(*v));
            }
            a = z;
        }
        min
    }

    pub fn max_abs_weight(&self) -> f64 {
        self.layers.iter().flat_map(|l| l.w.iter()).fold(0.0f64, |m, w| m.max(w.abs()))
    }
}
