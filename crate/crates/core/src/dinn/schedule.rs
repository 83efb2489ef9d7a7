use serde::{Deserialize, Serialize};

/// Exponent used for the amplitude decay of the exp_range policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DecayBase {
    /// `gamma^cycle`, one decay step per triangle.
    #[default]
    Cycle,
    /// `gamma^iteration`, as in common deep-learning libraries.
    Iteration,
}

/// Triangular cyclic learning rate with exponentially shrinking amplitude.
///
/// ```text
/// cycle = floor(1 + it / (2 s))
/// x     = |it / s - 2 cycle + 1|
/// lr    = lr_min + (lr_max - lr_min) * max(0, 1 - x) * gamma^e
/// ```
/// where `e` is `cycle` or `it` depending on [`DecayBase`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CyclicLr {
    pub lr_min: f64,
    pub lr_max: f64,
    pub step_size_up: usize,
    pub gamma: f64,
    pub decay: DecayBase,
}

impl CyclicLr {
    pub fn lr(&self, it: usize) -> f64 {
        let s = self.step_size_up as f64;
        let itf = it as f64;
        let cycle = (1.0 + itf / (2.0 * s)).floor();
        let x = (itf / s - 2.0 * cycle + 1.0).abs();
        let e = match self.decay {
            DecayBase::Cycle => cycle,
            DecayBase::Iteration => itf,
        };
        self.lr_min + (self.lr_max - self.lr_min) * (1.0 - x).max(0.0) * self.gamma.powf(e)
    }
}
