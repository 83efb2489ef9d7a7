use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{param_error, Activation, Adam, CyclicLr, DecayBase, DinnModel, LossKernel};
use crate::dataset::{uniform_grid, Dataset};
use crate::error::{Error, Result};
use crate::integrate::{integrate, IntegratorConfig, Trajectory};
use crate::models::{CompartmentModel, StateVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub iterations: usize,
    pub lr_min: f64,
    pub lr_max: f64,
    pub gamma: f64,
    pub step_size_up: usize,
    pub decay: DecayBase,
    pub seed: u64,
    /// Replace the table ranges by `make_range(v, pct)`; `None` keeps the table.
    pub param_range_pct: Option<f64>,
    pub hidden_layers: usize,
    pub neurons: usize,
    pub activation: Activation,
    /// Number of uniformly spaced residual points; `None` uses the data times.
    pub collocation: Option<usize>,
    pub log_every: usize,
    /// Stop as soon as the total loss drops below this value.
    pub loss_threshold: Option<f64>,
    /// Raw parameters start uniform in `(-w, w)`, i.e. close to the middle of
    /// their search ranges. Wide draws can start the rates far enough from the
    /// data that the network collapses the infected curve to zero, where the
    /// residual no longer depends on the rates.
    pub param_init_width: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 50_000,
            lr_min: 1e-6,
            lr_max: 1e-3,
            gamma: 0.85,
            step_size_up: 1000,
            decay: DecayBase::Cycle,
            seed: 0,
            param_range_pct: None,
            hidden_layers: 4,
            neurons: 20,
            activation: Activation::Relu,
            collocation: None,
            log_every: 1000,
            loss_threshold: None,
            param_init_width: super::PARAM_INIT_WIDTH,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr_min <= self.lr_max) || !(self.lr_min >= 0.0) {
            return Err(Error::Config(format!("need 0 <= lr_min <= lr_max, got {} and {}", self.lr_min, self.lr_max)));
        }
        if self.step_size_up == 0 || self.log_every == 0 {
            return Err(Error::Config("step_size_up and log_every must be positive".into()));
        }
        if self.neurons == 0 {
            return Err(Error::Config("neurons must be positive".into()));
        }
        if let Some(n) = self.collocation {
            if n < 2 {
                return Err(Error::Config("collocation needs at least 2 points".into()));
            }
        }
        Ok(())
    }

    pub fn hidden(&self) -> Vec<usize> {
        vec![self.neurons; self.hidden_layers]
    }

    pub fn schedule(&self) -> CyclicLr {
        CyclicLr {
            lr_min: self.lr_min,
            lr_max: self.lr_max,
            step_size_up: self.step_size_up,
            gamma: self.gamma,
            decay: self.decay,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSample {
    pub iteration: usize,
    pub total: f64,
    pub data: f64,
    pub residual: f64,
}

/// Outcome of one parameter fit, shared by the network and the classical baselines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub method: String,
    pub model_name: String,
    pub compartments: Vec<String>,
    pub found_params: BTreeMap<String, f64>,
    /// Percentage error against the registry value (absolute when that is zero).
    pub param_errors: BTreeMap<String, f64>,
    /// `None` where the reference compartment is identically zero.
    pub error_nn: Vec<Option<f64>>,
    pub error_learnable: Vec<Option<f64>>,
    pub loss_history: Vec<LossSample>,
    pub iterations: usize,
    pub final_loss: f64,
    /// Iteration at which the loss threshold was met, if it was.
    pub reached_threshold_at: Option<usize>,
    pub seed: u64,
    #[serde(skip)]
    pub wall_time: f64,
}

impl FitReport {
    pub fn new(method: &str, model: &CompartmentModel, found: BTreeMap<String, f64>, seed: u64) -> Self {
        let param_errors = found
            .iter()
            .map(|(k, v)| {
                let truth = model.params[model.param_index(k).expect("found parameter belongs to model")].true_value;
                (k.clone(), param_error(*v, truth))
            })
            .collect();
        Self {
            method: method.into(),
            model_name: model.name.clone(),
            compartments: model.compartments.clone(),
            found_params: found,
            param_errors,
            error_nn: Vec::new(),
            error_learnable: Vec::new(),
            loss_history: Vec::new(),
            iterations: 0,
            final_loss: f64::NAN,
            reached_threshold_at: None,
            seed,
            wall_time: 0.0,
        }
    }

    pub fn max_param_error(&self) -> f64 {
        self.param_errors.values().fold(0.0, |m, v| m.max(*v))
    }
}

/// Per-compartment `||pred - truth||_2 / ||truth||_2` over matching rows.
pub fn relative_errors(pred: &[Vec<f64>], truth: &Trajectory) -> Vec<Option<f64>> {
    (0..truth.compartments.len())
        .map(|c| {
            let mut num = 0.0;
            let mut den = 0.0;
            for (p, t) in pred.iter().zip(&truth.states) {
                num += (p[c] - t[c]).powi(2);
                den += t[c] * t[c];
            }
            let e = (num / den).sqrt();
            (den > 0.0 && e.is_finite()).then_some(e)
        })
        .collect()
}

/// Per-compartment `||pred - truth||_2 / ||truth||_2` of the network output.
pub fn error_nn(dm: &DinnModel, truth: &Trajectory) -> Vec<Option<f64>> {
    let pred = dm.predict_trajectory(&truth.times);
    relative_errors(&pred.states, truth)
}

/// Same norm as [`error_nn`] for the system re-integrated with `params`.
pub fn error_learnable(
    model: &CompartmentModel,
    params: &[f64],
    y0: &StateVector,
    grid: &[f64],
    truth: &Trajectory,
) -> Result<Vec<Option<f64>>> {
    let tr = integrate(model, params, y0, grid, &IntegratorConfig::default())?;
    Ok(relative_errors(&tr.states, truth))
}

/// Fills both error vectors of `report` against `truth`.
pub fn evaluate(dm: &DinnModel, truth: &Trajectory, y0: &StateVector, report: &mut FitReport) -> Result<()> {
    report.error_nn = error_nn(dm, truth);
    report.error_learnable = error_learnable(&dm.model, &dm.params(), y0, &truth.times, truth)?;
    Ok(())
}

/// Trains a fresh network on `ds`.
///
/// The report's errors are measured against the dataset itself, re-integrated
/// from its first row; call [`evaluate`] to compare with a clean reference.
pub fn train(model: &CompartmentModel, ds: &Dataset, cfg: &TrainConfig) -> Result<(DinnModel, FitReport)> {
    cfg.validate()?;
    let model = match cfg.param_range_pct {
        Some(pct) => model.clone().with_range_pct(pct),
        None => model.clone(),
    };
    let dm = DinnModel::with_param_init(&model, ds, &cfg.hidden(), cfg.activation, cfg.seed, cfg.param_init_width)?;
    train_model(dm, ds, cfg)
}

/// Continues training an existing network.
pub fn train_model(mut dm: DinnModel, ds: &Dataset, cfg: &TrainConfig) -> Result<(DinnModel, FitReport)> {
    cfg.validate()?;
    let start = Instant::now();
    let batch = match cfg.collocation {
        Some(n) => {
            let t0 = ds.times[0];
            uniform_grid(n, ds.times[ds.len() - 1] - t0).into_iter().map(|t| t + t0).collect()
        }
        None => ds.times.clone(),
    };
    let mut kernel = LossKernel::new(&dm, ds, &batch)?;
    let sched = cfg.schedule();
    let mut theta = dm.theta();
    let mut grad = vec![0.0; theta.len()];
    let mut adam = Adam::new(theta.len());
    let mut history = Vec::new();
    let mut reached = None;
    let mut it = 0;
    let last = loop {
        let l = kernel.eval(&theta, &mut grad);
        if !l.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Divergence { iteration: it, loss: l.total });
        }
        let sample = LossSample { iteration: it, total: l.total, data: l.data, residual: l.residual };
        if cfg.loss_threshold.is_some_and(|th| l.total < th) {
            reached = Some(it);
            break sample;
        }
        if it == cfg.iterations {
            break sample;
        }
        if it % cfg.log_every == 0 {
            history.push(sample);
        }
        adam.step(&mut theta, &grad, sched.lr(it));
        it += 1;
    };
    if history.last().map(|s| s.iteration) != Some(last.iteration) {
        history.push(last);
    }
    dm.set_theta(&theta);

    let mut report = FitReport::new("dinn", &dm.model, dm.found_params(), cfg.seed);
    report.loss_history = history;
    report.iterations = it;
    report.final_loss = last.total;
    report.reached_threshold_at = reached;
    let reference = ds.to_trajectory();
    let y0 = StateVector(ds.observations[0].clone());
    if y0.0.iter().all(|v| v.is_finite()) {
        evaluate(&dm, &reference, &y0, &mut report)?;
    } else {
        report.error_nn = error_nn(&dm, &reference);
    }
    report.wall_time = start.elapsed().as_secs_f64();
    Ok((dm, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synthesize, NoiseSpec};
    use crate::models::registry_get;

    fn sird_data(n: usize) -> (CompartmentModel, Dataset) {
        let m = registry_get("covid_sird").unwrap();
        let ds =
            synthesize(&m, &m.true_params(), &m.default_y0.clone().into(), n, m.horizon, &NoiseSpec::none()).unwrap();
        (m, ds)
    }

    #[test]
    fn error_metric_examples() {
        let (m, ds) = sird_data(20);
        let truth = ds.to_trajectory();
        let same: Vec<Vec<f64>> = truth.states.clone();
        assert!(relative_errors(&same, &truth).iter().all(|e| *e == Some(0.0)));
        let scaled: Vec<Vec<f64>> = truth.states.iter().map(|r| r.iter().map(|v| 1.1 * v).collect()).collect();
        for e in relative_errors(&scaled, &truth) {
            assert!((e.unwrap() - 0.1).abs() < 1e-12);
        }
        let mut zero = truth.clone();
        zero.states.iter_mut().for_each(|r| r[2] = 0.0);
        assert_eq!(relative_errors(&same, &zero)[2], None);

        let y0: StateVector = m.default_y0.clone().into();
        let e0 = error_learnable(&m, &m.true_params(), &y0, &truth.times, &truth).unwrap();
        assert!(e0.iter().all(|e| e.unwrap() < 1e-9));
        let bump = |f: f64| {
            let mut p = m.true_params();
            p[0] *= f;
            let e = error_learnable(&m, &p, &y0, &truth.times, &truth).unwrap();
            e.iter().map(|x| x.unwrap()).fold(0.0, f64::max)
        };
        let (e1, e10) = (bump(1.01), bump(1.10));
        assert!(e1 > 0.0 && e10 > e1);
    }

    #[test]
    fn zero_iterations_echo_initialization() {
        let (m, ds) = sird_data(20);
        let cfg = TrainConfig { iterations: 0, hidden_layers: 2, neurons: 5, ..Default::default() };
        let (dm, rep) = train(&m, &ds, &cfg).unwrap();
        let init = DinnModel::new(&m, &ds, &[5, 5], Activation::Relu, 0).unwrap();
        assert_eq!(dm, init);
        assert_eq!(rep.iterations, 0);
        assert_eq!(rep.loss_history.len(), 1);
        assert_eq!(rep.error_nn.len(), 4);
        assert!(rep.error_nn.iter().all(|e| e.is_some()));
    }

    #[test]
    fn training_is_deterministic_and_reduces_loss() {
        let (m, ds) = sird_data(30);
        let cfg = TrainConfig {
            iterations: 3000,
            hidden_layers: 2,
            neurons: 10,
            log_every: 500,
            seed: 9,
            ..Default::default()
        };
        let (a, ra) = train(&m, &ds, &cfg).unwrap();
        let (b, rb) = train(&m, &ds, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(serde_json::to_string(&ra).unwrap(), serde_json::to_string(&rb).unwrap());
        let first = ra.loss_history.first().unwrap().total;
        assert!(ra.final_loss < first / 5.0, "{first} -> {}", ra.final_loss);
        for (name, v) in &ra.found_params {
            let spec = &m.params[m.param_index(name).unwrap()];
            assert!(*v > spec.search_lo && *v < spec.search_hi);
        }
    }

    #[test]
    fn loss_threshold_stops_early() {
        let (m, ds) = sird_data(30);
        let cfg = TrainConfig {
            iterations: 10_000,
            hidden_layers: 2,
            neurons: 10,
            loss_threshold: Some(1e9),
            ..Default::default()
        };
        let (_, rep) = train(&m, &ds, &cfg).unwrap();
        assert_eq!(rep.reached_threshold_at, Some(0));
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn config_validation() {
        let bad = TrainConfig { lr_min: 1e-2, lr_max: 1e-3, ..Default::default() };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        let cfg: TrainConfig = serde_json::from_str(r#"{"iterations": 7}"#).unwrap();
        assert_eq!(cfg.iterations, 7);
        assert_eq!(cfg.lr_max, 1e-3);
        assert_eq!(cfg.gamma, 0.85);
        assert_eq!(cfg.step_size_up, 1000);
    }
}
