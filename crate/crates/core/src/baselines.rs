//! Classical least-squares fits over integrated trajectories.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::dinn::FitReport;
use crate::error::{Error, Result};
use crate::integrate::{integrate, IntegratorConfig};
use crate::models::{CompartmentModel, StateVector};

/// Fit of selected model parameters to a dataset.
#[derive(Debug, Clone)]
pub struct LsqProblem {
    pub model: CompartmentModel,
    pub ds: Dataset,
    pub free_params: Vec<String>,
    pub x0: Vec<f64>,
    pub bounds: Vec<(f64, f64)>,
    /// Initial state; the first dataset row when not given.
    pub y0: StateVector,
    pub integrator: IntegratorConfig,
    free_idx: Vec<usize>,
}

impl LsqProblem {
    pub fn new(
        model: &CompartmentModel,
        ds: &Dataset,
        free_params: &[&str],
        x0: &[f64],
        bounds: &[(f64, f64)],
    ) -> Result<Self> {
        if free_params.len() != x0.len() || x0.len() != bounds.len() {
            return Err(Error::Dimension("free_params, x0 and bounds must have equal length".into()));
        }
        if ds.compartments != model.compartments {
            return Err(Error::Dimension("dataset does not match model".into()));
        }
        for (x, (lo, hi)) in x0.iter().zip(bounds) {
            if !(lo <= hi) || !(*lo <= *x && *x <= *hi) {
                return Err(Error::Domain(format!("x0 = {x} outside bounds ({lo}, {hi})")));
            }
        }
        let free_idx = free_params.iter().map(|n| model.param_index(n)).collect::<Result<Vec<_>>>()?;
        let y0 = StateVector(ds.observations[0].clone());
        if y0.0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("first dataset row".into()));
        }
        Ok(Self {
            model: model.clone(),
            ds: ds.clone(),
            free_params: free_params.iter().map(|s| s.to_string()).collect(),
            x0: x0.to_vec(),
            bounds: bounds.to_vec(),
            y0,
            integrator: IntegratorConfig::with_tolerances(1e-10, 1e-12),
            free_idx,
        })
    }

    /// Every learnable parameter of the model is free.
    pub fn all_learnable(model: &CompartmentModel, ds: &Dataset, x0: &[f64], bounds: &[(f64, f64)]) -> Result<Self> {
        let names = model.learnable_names();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        Self::new(model, ds, &refs, x0, bounds)
    }

    pub fn full_params(&self, x: &[f64]) -> Vec<f64> {
        let mut p = self.model.true_params();
        for (i, v) in self.free_idx.iter().zip(x) {
            p[*i] = *v;
        }
        p
    }

    /// Normalized residuals over observed entries; `None` if integration fails.
    pub fn residuals(&self, x: &[f64]) -> Option<Vec<f64>> {
        let tr = integrate(&self.model, &self.full_params(x), &self.y0, &self.ds.times, &self.integrator).ok()?;
        let mut r = Vec::new();
        for (row, (pred, obs)) in tr.states.iter().zip(&self.ds.observations).enumerate() {
            for c in 0..self.ds.dim() {
                let seen = self.ds.mask[c] || (row == 0 && self.ds.init_only[c]);
                if seen && obs[c].is_finite() {
                    r.push((pred[c] - obs[c]) / self.ds.scale[c]);
                }
            }
        }
        r.iter().all(|v| v.is_finite()).then_some(r)
    }

    pub fn sse(&self, x: &[f64]) -> f64 {
        self.residuals(x).map_or(f64::INFINITY, |r| r.iter().map(|v| v * v).sum())
    }

    /// Shapes a solver result like a network fit; trajectory errors are left to the caller.
    pub fn report(&self, method: &str, res: &LsqResult) -> FitReport {
        let found: BTreeMap<String, f64> = self.free_params.iter().cloned().zip(res.x.iter().copied()).collect();
        let mut rep = FitReport::new(method, &self.model, found, 0);
        rep.iterations = res.iterations;
        rep.final_loss = res.sse;
        rep.wall_time = res.wall_time;
        rep
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsqResult {
    pub x: Vec<f64>,
    pub sse: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    #[serde(skip)]
    pub wall_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NelderMeadConfig {
    pub max_iter: usize,
    pub tol_x: f64,
    pub tol_f: f64,
    /// Relative size of the initial simplex.
    pub initial_step: f64,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        Self { max_iter: 20_000, tol_x: 1e-10, tol_f: 1e-12, initial_step: 0.05 }
    }
}

/// Bounded Nelder-Mead on an arbitrary objective; vertices are projected into the box.
pub fn nelder_mead_fn<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    bounds: &[(f64, f64)],
    cfg: &NelderMeadConfig,
) -> Result<LsqResult> {
    let start = Instant::now();
    let n = x0.len();
    let project = |x: &mut Vec<f64>| {
        for (v, (lo, hi)) in x.iter_mut().zip(bounds) {
            *v = v.clamp(*lo, *hi);
        }
    };
    let mut evals = 0;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let f0 = eval(x0, &mut evals);
    if !f0.is_finite() {
        return Err(Error::BadStart);
    }
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(x0.to_vec(), f0)];
    for i in 0..n {
        let mut x = x0.to_vec();
        let step = if x[i] != 0.0 { cfg.initial_step * x[i] } else { 2.5e-4 };
        x[i] += step;
        project(&mut x);
        if x[i] == x0[i] {
            x[i] -= 2.0 * step;
            project(&mut x);
        }
        let fx = eval(&x, &mut evals);
        simplex.push((x, fx));
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = &simplex[0];
        let diameter = simplex[1..]
            .iter()
            .map(|(x, _)| x.iter().zip(&best.0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        let spread = simplex[n].1 - best.1;
        if diameter < cfg.tol_x || spread < cfg.tol_f {
            converged = true;
            break;
        }
        iterations += 1;

        let mut c = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (ci, xi) in c.iter_mut().zip(x) {
                *ci += xi / n as f64;
            }
        }
        let along = |t: f64, w: &[f64]| -> Vec<f64> {
            let mut x: Vec<f64> = c.iter().zip(w).map(|(ci, wi)| ci + t * (wi - ci)).collect();
            project(&mut x);
            x
        };
        let worst = simplex[n].clone();
        let xr = along(-1.0, &worst.0);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = along(-2.0, &worst.0);
            let fe = eval(&xe, &mut evals);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst.1 {
            let xc = along(-0.5, &worst.0);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        } else {
            let xc = along(0.5, &worst.0);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        };
        if fc < fr.min(worst.1) {
            simplex[n] = (xc, fc);
            continue;
        }
        let x1 = simplex[0].0.clone();
        for v in simplex.iter_mut().skip(1) {
            let mut x: Vec<f64> = x1.iter().zip(&v.0).map(|(a, b)| a + 0.5 * (b - a)).collect();
            project(&mut x);
            let fx = eval(&x, &mut evals);
            *v = (x, fx);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, sse) = simplex.swap_remove(0);
    Ok(LsqResult { x, sse, iterations, evaluations: evals, converged, wall_time: start.elapsed().as_secs_f64() })
}

/// Minimizes the normalized sum of squared residuals by Nelder-Mead.
pub fn nelder_mead(prob: &LsqProblem, cfg: &NelderMeadConfig) -> Result<LsqResult> {
    nelder_mead_fn(|x| prob.sse(x), &prob.x0, &prob.bounds, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaussNewtonConfig {
    pub max_iter: usize,
    pub tol_grad: f64,
    pub tol_step: f64,
    /// Initial damping relative to the largest diagonal entry of `J^T J`.
    pub tau: f64,
    pub max_damping: f64,
    /// Undamped steps, each accepted unconditionally.
    pub pure: bool,
}

impl Default for GaussNewtonConfig {
    fn default() -> Self {
        Self { max_iter: 500, tol_grad: 1e-10, tol_step: 1e-12, tau: 1e-3, max_damping: 1e16, pure: false }
    }
}

/// Least squares on an arbitrary residual function with a forward-difference Jacobian.
pub fn gauss_newton_fn<R: FnMut(&[f64]) -> Option<Vec<f64>>>(
    mut res: R,
    x0: &[f64],
    bounds: &[(f64, f64)],
    cfg: &GaussNewtonConfig,
) -> Result<LsqResult> {
    let start = Instant::now();
    let n = x0.len();
    let clip = |x: &mut [f64]| {
        for (v, (lo, hi)) in x.iter_mut().zip(bounds) {
            *v = v.clamp(*lo, *hi);
        }
    };
    let mut evals = 1;
    let mut x = x0.to_vec();
    let mut r = res(&x).ok_or(Error::BadStart)?;
    let sse_of = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();
    let mut sse = sse_of(&r);
    let mut lambda = f64::NAN;
    let mut nu = 2.0;
    let mut iterations = 0;
    let mut converged = false;

    'outer: while iterations < cfg.max_iter {
        iterations += 1;
        let m = r.len();
        let mut jac = DMatrix::<f64>::zeros(m, n);
        for k in 0..n {
            let mut h = 1e-6 * x[k].abs().max(1.0);
            if x[k] + h > bounds[k].1 {
                h = -h;
            }
            let mut xp = x.clone();
            xp[k] += h;
            evals += 1;
            let rp = res(&xp).ok_or_else(|| Error::Numeric("residuals not finite near the iterate".into()))?;
            for i in 0..m {
                jac[(i, k)] = (rp[i] - r[i]) / h;
            }
        }
        let rv = DVector::from_column_slice(&r);
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &rv;
        if g.amax() < cfg.tol_grad {
            converged = true;
            break;
        }
        if lambda.is_nan() {
            lambda = if cfg.pure { 0.0 } else { cfg.tau * jtj.diagonal().amax().max(1e-300) };
        }
        loop {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += lambda;
            }
            let delta = match a.lu().solve(&(-&g)) {
                Some(d) if d.iter().all(|v| v.is_finite()) => d,
                _ if cfg.pure || lambda >= cfg.max_damping => {
                    return Err(Error::Stall { best_x: x, best_sse: sse });
                }
                _ => {
                    lambda = (lambda * nu).max(1e-12);
                    nu *= 2.0;
                    continue;
                }
            };
            let mut xn: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
            clip(&mut xn);
            let step: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
            let step_norm = step.iter().map(|v| v * v).sum::<f64>().sqrt();
            if step_norm < cfg.tol_step {
                converged = true;
                break 'outer;
            }
            evals += 1;
            let rn = res(&xn);
            let sse_new = rn.as_ref().map_or(f64::INFINITY, |r| sse_of(r));
            if cfg.pure {
                match rn {
                    Some(rn) => {
                        x = xn;
                        r = rn;
                        sse = sse_new;
                        continue 'outer;
                    }
                    None => return Err(Error::Stall { best_x: x, best_sse: sse }),
                }
            }
            let s = DVector::from_vec(step);
            // predicted decrease of the local quadratic model
            let pred = -(2.0 * s.dot(&g) + (&jac * &s).norm_squared());
            let rho = if pred > 0.0 { (sse - sse_new) / pred } else { -1.0 };
            if rho > 0.0 && sse_new <= sse {
                x = xn;
                r = rn.expect("finite residuals");
                sse = sse_new;
                lambda *= (1.0 - (2.0 * rho - 1.0).powi(3)).max(1.0 / 3.0);
                nu = 2.0;
                continue 'outer;
            }
            if lambda >= cfg.max_damping {
                return Err(Error::Stall { best_x: x, best_sse: sse });
            }
            lambda = (lambda * nu).max(1e-12);
            nu *= 2.0;
        }
    }
    Ok(LsqResult { x, sse, iterations, evaluations: evals, converged, wall_time: start.elapsed().as_secs_f64() })
}

/// Damped Gauss-Newton (Levenberg-Marquardt) on the normalized residuals.
pub fn gauss_newton(prob: &LsqProblem, cfg: &GaussNewtonConfig) -> Result<LsqResult> {
    gauss_newton_fn(|x| prob.residuals(x), &prob.x0, &prob.bounds, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synthesize, NoiseSpec};
    use crate::models::registry_get;

    #[test]
    fn nelder_mead_finds_bowl_center() {
        let c = [0.3, -1.2, 2.0];
        let f = |x: &[f64]| x.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let res = nelder_mead_fn(f, &[1.0, 1.0, 1.0], &[(-5.0, 5.0); 3], &NelderMeadConfig::default()).unwrap();
        for (x, c) in res.x.iter().zip(&c) {
            assert!((x - c).abs() < 1e-6);
        }
    }

    #[test]
    fn nelder_mead_respects_bounds() {
        let f = |x: &[f64]| (x[0] + 3.0).powi(2) + (x[1] - 0.5).powi(2);
        let res = nelder_mead_fn(f, &[1.0, 1.0], &[(0.0, 2.0), (0.0, 2.0)], &NelderMeadConfig::default()).unwrap();
        assert!(res.x[0].abs() < 1e-6);
        assert!((res.x[1] - 0.5).abs() < 1e-5);
    }

    #[test]
    fn nelder_mead_rejects_bad_start() {
        let f = |_: &[f64]| f64::NAN;
        assert!(matches!(nelder_mead_fn(f, &[1.0], &[(0.0, 2.0)], &NelderMeadConfig::default()), Err(Error::BadStart)));
    }

    #[test]
    fn gauss_newton_solves_linear_residuals_in_one_step() {
        // r(x) = A x - b
        let a = [[1.0, 2.0], [3.0, -1.0], [0.5, 0.5]];
        let b = [1.0, 2.0, 3.0];
        let res = |x: &[f64]| Some((0..3).map(|i| a[i][0] * x[0] + a[i][1] * x[1] - b[i]).collect::<Vec<_>>());
        let cfg = GaussNewtonConfig { pure: true, max_iter: 1, ..Default::default() };
        let out = gauss_newton_fn(res, &[0.0, 0.0], &[(-10.0, 10.0); 2], &cfg).unwrap();
        let jtj = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, -1.0, 0.5, 0.5]);
        let exact = (jtj.transpose() * &jtj).lu().solve(&(jtj.transpose() * DVector::from_column_slice(&b))).unwrap();
        assert!((out.x[0] - exact[0]).abs() < 1e-6 && (out.x[1] - exact[1]).abs() < 1e-6);
    }

    #[test]
    fn damped_gauss_newton_fits_rosenbrock_residuals() {
        let res = |x: &[f64]| Some(vec![10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0]]);
        let out = gauss_newton_fn(res, &[-1.2, 1.0], &[(-5.0, 5.0); 2], &GaussNewtonConfig::default()).unwrap();
        assert!((out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn true_start_gives_noise_floor_sse() {
        let m = registry_get("covid_sird").unwrap();
        let ds =
            synthesize(&m, &m.true_params(), &m.default_y0.clone().into(), 50, m.horizon, &NoiseSpec::none()).unwrap();
        let prob = LsqProblem::all_learnable(&m, &ds, &m.true_params(), &[(0.0, 2.0); 3]).unwrap();
        assert!(prob.sse(&prob.x0) < 1e-8);
        let nm = nelder_mead(&prob, &NelderMeadConfig::default()).unwrap();
        assert!(nm.sse < 1e-8);
        let gn = gauss_newton(&prob, &GaussNewtonConfig::default()).unwrap();
        assert!(gn.sse < 1e-8);
        assert_eq!(prob.residuals(&prob.x0).unwrap().len(), 50 * 4);
    }

    #[test]
    fn deterministic_given_inputs() {
        let m = registry_get("covid_sird").unwrap();
        let ds = synthesize(
            &m,
            &m.true_params(),
            &m.default_y0.clone().into(),
            20,
            m.horizon,
            &NoiseSpec::multiplicative(0.05, 3),
        )
        .unwrap();
        let prob = LsqProblem::all_learnable(&m, &ds, &[0.1, 0.1, 0.1], &[(0.0, 2.0); 3]).unwrap();
        let cfg = NelderMeadConfig { max_iter: 300, ..Default::default() };
        let json = |r: Result<LsqResult>| match r {
            Ok(r) => serde_json::to_string(&r).unwrap(),
            Err(e) => format!("{e:?}"),
        };
        assert_eq!(json(nelder_mead(&prob, &cfg)), json(nelder_mead(&prob, &cfg)));
        let gcfg = GaussNewtonConfig { max_iter: 20, ..Default::default() };
        assert_eq!(json(gauss_newton(&prob, &gcfg)), json(gauss_newton(&prob, &gcfg)));
    }

    #[test]
    fn problem_validation() {
        let m = registry_get("covid_sird").unwrap();
        let ds =
            synthesize(&m, &m.true_params(), &m.default_y0.clone().into(), 5, m.horizon, &NoiseSpec::none()).unwrap();
        assert!(LsqProblem::new(&m, &ds, &["alpha"], &[3.0], &[(0.0, 2.0)]).is_err());
        assert!(matches!(LsqProblem::new(&m, &ds, &["nope"], &[1.0], &[(0.0, 2.0)]), Err(Error::UnknownParameter(_))));
    }
}
