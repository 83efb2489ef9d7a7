//! Adaptive Dormand-Prince 4(5) integration with dense output on arbitrary grids.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{CompartmentModel, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    /// `None` picks a starting step automatically.
    pub initial_step: Option<f64>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-8, abs_tol: 1e-10, max_steps: 1_000_000, initial_step: None }
    }
}

impl IntegratorConfig {
    pub fn with_tolerances(rel_tol: f64, abs_tol: f64) -> Self {
        Self { rel_tol, abs_tol, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::Config("integrator tolerances must be positive".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be positive".into()));
        }
        if let Some(h) = self.initial_step {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::Config("initial_step must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Time grid plus per-compartment values, one row per time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub model_name: String,
    pub compartments: Vec<String>,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        self.states.iter().map(|row| row[c]).collect()
    }

    pub fn last_state(&self) -> StateVector {
        StateVector(self.states.last().cloned().unwrap_or_default())
    }

    /// Writes `t,<compartments...>` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,{}", self.compartments.join(","))?;
        for (t, row) in self.times.iter().zip(&self.states) {
            write!(w, "{t:.16e}")?;
            for v in row {
                write!(w, ",{v:.16e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn read_csv<R: Read>(model_name: &str, r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers()?.clone();
        if headers.get(0) != Some("t") {
            return Err(Error::Ingestion { line: 1, msg: "first column must be `t`".into() });
        }
        let compartments: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
        let mut times = Vec::new();
        let mut states = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let parse =
                |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Ingestion { line, msg: format!("`{s}`: {e}") });
            times.push(parse(&rec[0])?);
            states.push(rec.iter().skip(1).map(parse).collect::<Result<Vec<_>>>()?);
        }
        Ok(Self { model_name: model_name.to_string(), compartments, times, states })
    }
}

pub(crate) fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Grid("empty grid".into()));
    }
    if grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::Grid("non-finite time".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Grid("times must be strictly increasing".into()));
    }
    Ok(())
}

/// Integrates `model` from `grid[0]` and reports the state at every grid time.
pub fn integrate(
    model: &CompartmentModel,
    p: &[f64],
    y0: &StateVector,
    grid: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    if y0.len() != model.dim() || p.len() != model.params.len() {
        return Err(Error::Dimension(format!("state/parameter sizes do not match model {}", model.name)));
    }
    if y0.0.iter().chain(p).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("initial state or parameters".into()));
    }
    let states = solve_dense(|t, y, dy| model.rhs(t, y, p, dy), &y0.0, grid, cfg)?;
    Ok(Trajectory {
        model_name: model.name.clone(),
        compartments: model.compartments.clone(),
        times: grid.to_vec(),
        states,
    })
}

/// State at `t_end`, integrating from `t0`.
pub fn final_state(
    model: &CompartmentModel,
    p: &[f64],
    y0: &StateVector,
    t0: f64,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<StateVector> {
    let grid = if t_end > t0 { vec![t0, t_end] } else { vec![t0] };
    Ok(integrate(model, p, y0, &grid, cfg)?.last_state())
}

// Dormand-Prince coefficients.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;
const PI_BETA: f64 = 0.04;
const PI_ALPHA: f64 = 0.2 - 0.75 * PI_BETA;

/// Generic adaptive solve returning one state row per grid time.
pub fn solve_dense<F>(mut f: F, y0: &[f64], grid: &[f64], cfg: &IntegratorConfig) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    cfg.validate()?;
    validate_grid(grid)?;
    let n = y0.len();
    let mut out = Vec::with_capacity(grid.len());
    out.push(y0.to_vec());
    if grid.len() == 1 {
        return Ok(out);
    }
    let t_end = *grid.last().unwrap();
    let span = t_end - grid[0];

    let mut t = grid[0];
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; n];
    f(t, &y, &mut k1);
    if k1.iter().any(|v| !v.is_finite()) {
        return Err(Error::BlowUp { t });
    }
    let mut h = match cfg.initial_step {
        Some(h) => h,
        None => initial_step(&mut f, t, &y, &k1, cfg),
    }
    .min(span);
    let h_min = 16.0 * f64::EPSILON * t_end.abs().max(span);

    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut next_grid = 1;
    let mut err_prev: f64 = 1e-4;
    let mut rejected = false;
    let mut steps = 0;

    while next_grid < grid.len() {
        if steps >= cfg.max_steps {
            return Err(Error::IntegrationFailure { steps, last_t: t });
        }
        steps += 1;
        let last = t + h >= t_end - h_min;
        if last {
            h = t_end - t;
        }

        for i in 0..n {
            stage[i] = y[i] + h * A21 * k1[i];
        }
        f(t + C2 * h, &stage, &mut k2);
        for i in 0..n {
            stage[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        f(t + C3 * h, &stage, &mut k3);
        for i in 0..n {
            stage[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        f(t + C4 * h, &stage, &mut k4);
        for i in 0..n {
            stage[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        f(t + C5 * h, &stage, &mut k5);
        for i in 0..n {
            stage[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        f(t + h, &stage, &mut k6);
        for i in 0..n {
            y_new[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        let t_new = if last { t_end } else { t + h };
        f(t_new, &y_new, &mut k7);

        let mut acc = 0.0;
        for i in 0..n {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(y_new[i].abs());
            acc += (e / sc) * (e / sc);
        }
        let err = (acc / n.max(1) as f64).sqrt();

        if !err.is_finite() || k7.iter().any(|v| !v.is_finite()) {
            h *= FAC_MIN;
            rejected = true;
            if h < h_min {
                return Err(Error::BlowUp { t });
            }
            continue;
        }

        if err <= 1.0 {
            // dense output on (t, t_new]
            while next_grid < grid.len() && grid[next_grid] <= t_new {
                let tg = grid[next_grid];
                if tg == t_new {
                    out.push(y_new.clone());
                } else {
                    out.push(hermite(t, h, &y, &k1, &y_new, &k7, tg));
                }
                next_grid += 1;
            }
            let mut fac = SAFETY * err.max(1e-10).powf(-PI_ALPHA) * err_prev.powf(PI_BETA);
            fac = fac.clamp(FAC_MIN, FAC_MAX);
            if rejected {
                fac = fac.min(1.0);
            }
            err_prev = err.max(1e-4);
            rejected = false;
            t = t_new;
            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(&mut k1, &mut k7);
            h *= fac;
        } else {
            let fac = (SAFETY * err.powf(-PI_ALPHA)).max(FAC_MIN);
            h *= fac;
            rejected = true;
            if h < h_min {
                return Err(Error::IntegrationFailure { steps, last_t: t });
            }
        }
    }
    Ok(out)
}

fn hermite(t0: f64, h: f64, y0: &[f64], f0: &[f64], y1: &[f64], f1: &[f64], t: f64) -> Vec<f64> {
    let s = (t - t0) / h;
    let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    let h10 = s * (1.0 - s) * (1.0 - s);
    let h01 = s * s * (3.0 - 2.0 * s);
    let h11 = s * s * (s - 1.0);
    (0..y0.len()).map(|i| h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i]).collect()
}

/// Starting step from the two-sample heuristic of Hairer, Norsett and Wanner.
fn initial_step<F>(f: &mut F, t0: f64, y0: &[f64], f0: &[f64], cfg: &IntegratorConfig) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len().max(1) as f64;
    let sc: Vec<f64> = y0.iter().map(|y| cfg.abs_tol + cfg.rel_tol * y.abs()).collect();
    let rms = |v: &[f64]| (v.iter().zip(&sc).map(|(x, s)| (x / s).powi(2)).sum::<f64>() / n).sqrt();
    let d0 = rms(y0);
    let d1 = rms(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, d)| y + h0 * d).collect();
    let mut f1 = vec![0.0; y0.len()];
    f(t0 + h0, &y1, &mut f1);
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = rms(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(1.0 / 5.0) };
    let h = (100.0 * h0).min(h1);
    if h.is_finite() && h > 0.0 {
        h
    } else {
        1e-6
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::registry_get;

    #[test]
    fn exponential_decay() {
        let cfg = IntegratorConfig::default();
        let out = solve_dense(|_, y, dy| dy[0] = -y[0], &[1.0], &[0.0, 1.0], &cfg).unwrap();
        let exact = (-1.0f64).exp();
        assert!((out[1][0] - exact).abs() <= cfg.rel_tol * exact);
    }

    #[test]
    fn sir_without_transmission_decays() {
        let m = registry_get("sir").unwrap();
        let mut p = m.true_params();
        p[0] = 0.0;
        p[1] = 0.1;
        let y =
            final_state(&m, &p, &StateVector(vec![990.0, 10.0, 0.0]), 0.0, 10.0, &IntegratorConfig::default()).unwrap();
        let exact = 10.0 * (-1.0f64).exp();
        assert!((y.0[1] - exact).abs() < 1e-7 * exact);
        assert_eq!(y.0[0], 990.0);
    }

    #[test]
    fn zero_length_interval_returns_initial_state() {
        let m = registry_get("sir").unwrap();
        let y0 = StateVector(vec![990.0, 10.0, 0.0]);
        let y = final_state(&m, &m.true_params(), &y0, 0.0, 0.0, &IntegratorConfig::default()).unwrap();
        assert_eq!(y, y0);
    }

    #[test]
    fn grid_must_increase() {
        let cfg = IntegratorConfig::default();
        assert!(matches!(solve_dense(|_, _, _| {}, &[1.0], &[0.0, 0.0], &cfg), Err(Error::Grid(_))));
        assert!(matches!(solve_dense(|_, _, _| {}, &[1.0], &[], &cfg), Err(Error::Grid(_))));
    }

    #[test]
    fn step_exhaustion_reports_last_time() {
        let cfg = IntegratorConfig { max_steps: 3, ..IntegratorConfig::default() };
        let err = solve_dense(|_, y, dy| dy[0] = -y[0], &[1.0], &[0.0, 100.0], &cfg).unwrap_err();
        match err {
            Error::IntegrationFailure { steps, last_t } => {
                assert_eq!(steps, 3);
                assert!(last_t > 0.0 && last_t < 100.0);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn finite_time_blow_up_detected() {
        // y' = y^2 with y(0) = 1 explodes at t = 1
        let err =
            solve_dense(|_, y, dy| dy[0] = y[0] * y[0], &[1.0], &[0.0, 2.0], &IntegratorConfig::default()).unwrap_err();
        assert!(matches!(err, Error::BlowUp { .. } | Error::IntegrationFailure { .. }));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let m = registry_get("covid_sird").unwrap();
        let grid: Vec<f64> = (0..11).map(|i| i as f64 * 3.3).collect();
        let tr =
            integrate(&m, &m.true_params(), &StateVector(m.default_y0.clone()), &grid, &IntegratorConfig::default())
                .unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,S,I,D,R\n"));
        let back = Trajectory::read_csv("covid_sird", buf.as_slice()).unwrap();
        assert_eq!(back, tr);
    }

    #[test]
    fn conservation_is_transported() {
        for name in ["sir", "covid_sird", "smallpox", "ebola", "polio"] {
            let m = registry_get(name).unwrap();
            let grid: Vec<f64> = (0..50).map(|i| m.horizon * i as f64 / 49.0).collect();
            let tr = integrate(
                &m,
                &m.true_params(),
                &StateVector(m.default_y0.clone()),
                &grid,
                &IntegratorConfig::default(),
            )
            .unwrap();
            let total0: f64 = m.default_y0.iter().sum();
            for row in &tr.states {
                let total: f64 = row.iter().sum();
                assert!((total - total0).abs() <= 1e-6 * total0, "{name}: {total} vs {total0}");
            }
        }
    }

    #[test]
    fn halving_tolerance_moves_outputs_less_than_coarse_tolerance() {
        for name in crate::models::REGISTRY_NAMES {
            let m = registry_get(name).unwrap();
            let grid: Vec<f64> = (0..40).map(|i| m.horizon * i as f64 / 39.0).collect();
            let y0 = StateVector(m.default_y0.clone());
            let coarse = IntegratorConfig::with_tolerances(1e-8, 1e-10);
            let fine = IntegratorConfig::with_tolerances(0.5e-8, 0.5e-10);
            let a = integrate(&m, &m.true_params(), &y0, &grid, &coarse).unwrap();
            let b = integrate(&m, &m.true_params(), &y0, &grid, &fine).unwrap();
            for c in 0..m.dim() {
                let scale = b.column(c).iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1e-12);
                let diff = a.column(c).iter().zip(b.column(c)).fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()));
                // the coarse run must sit within (a small multiple of) its own tolerance
                assert!(diff / scale < 1e-6, "{name}/{c}: {}", diff / scale);
            }
        }
    }
}
