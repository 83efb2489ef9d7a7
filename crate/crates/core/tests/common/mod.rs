//! Reference computations used by the integration tests. None of them call
//! into the integrator or the analytic module.

#![allow(dead_code)]

use dinn_core::models::{rhs_eval, CompartmentModel, StateVector};

/// Classic fixed-step RK4, sampled at every `grid` time. Grid times must be
/// multiples of `h` away from `grid[0]` for exact sampling; otherwise the last
/// partial step is shortened.
pub fn rk4(model: &CompartmentModel, p: &[f64], y0: &[f64], grid: &[f64], h: f64) -> Vec<Vec<f64>> {
    let f = |t: f64, y: &[f64]| rhs_eval(model, t, &StateVector(y.to_vec()), p).expect("rhs").0;
    let mut out = vec![y0.to_vec()];
    let mut t = grid[0];
    let mut y = y0.to_vec();
    for &target in &grid[1..] {
        while t < target {
            let dt = h.min(target - t);
            y = rk4_step(&f, t, &y, dt);
            // snap to the target so rounding does not leave a sliver step
            t = if target - (t + dt) < 1e-9 * h { target } else { t + dt };
        }
        out.push(y.clone());
    }
    out
}

pub fn rk4_step(f: &impl Fn(f64, &[f64]) -> Vec<f64>, t: f64, y: &[f64], h: f64) -> Vec<f64> {
    let add = |a: &[f64], b: &[f64], s: f64| a.iter().zip(b).map(|(x, k)| x + s * k).collect::<Vec<_>>();
    let k1 = f(t, y);
    let k2 = f(t + h / 2.0, &add(y, &k1, h / 2.0));
    let k3 = f(t + h / 2.0, &add(y, &k2, h / 2.0));
    let k4 = f(t + h, &add(y, &k3, h));
    (0..y.len()).map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect()
}

/// Largest per-compartment error, each relative to that compartment's peak magnitude.
pub fn max_relative_per_compartment(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<f64> {
    let dim = b[0].len();
    (0..dim)
        .map(|c| {
            let peak = b.iter().map(|r| r[c].abs()).fold(0.0f64, f64::max).max(1e-300);
            a.iter().zip(b).map(|(x, y)| (x[c] - y[c]).abs()).fold(0.0f64, f64::max) / peak
        })
        .collect()
}

/// SIR with `S' = -b S I`, `I' = b S I - a I`, stepped by RK4 until `I`
/// falls below `floor`. Returns the final `S` and the peak of `I`, the peak
/// refined by a parabola through the three samples around the discrete maximum.
pub fn sir_limits(s0: f64, i0: f64, b: f64, a: f64, h: f64, floor: f64) -> (f64, f64) {
    let f = |_t: f64, y: &[f64]| vec![-b * y[0] * y[1], b * y[0] * y[1] - a * y[1]];
    let mut y = vec![s0, i0];
    let mut prev = (f64::NAN, f64::NAN);
    let mut peak = i0;
    let mut t = 0.0;
    let mut rising = true;
    loop {
        let next = rk4_step(&f, t, &y, h);
        t += h;
        if rising && next[1] < y[1] {
            rising = false;
            // y is the discrete maximum, prev.1 and next[1] its neighbours
            let (l, m, r) = (prev.1, y[1], next[1]);
            peak = if l.is_finite() {
                let denom = l - 2.0 * m + r;
                if denom < 0.0 {
                    m - (r - l) * (r - l) / (8.0 * denom)
                } else {
                    m
                }
            } else {
                m
            };
        }
        prev = (y[0], y[1]);
        y = next;
        if !rising && y[1] < floor {
            return (y[0], peak);
        }
        if t > 1e7 {
            panic!("SIR oracle did not settle");
        }
    }
}

/// Root of a continuous function with a sign change on `[lo, hi]`.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    assert!(flo * f(hi) <= 0.0, "no sign change");
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) < 0.0) == (flo < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Triangular exp_range schedule written out term by term.
pub fn exp_range_lr(it: usize, lr_min: f64, lr_max: f64, step: usize, gamma: f64) -> f64 {
    let s = step as f64;
    let cycle = (1.0 + it as f64 / (2.0 * s)).floor();
    let x = (it as f64 / s - 2.0 * cycle + 1.0).abs();
    let amplitude = (lr_max - lr_min) * (1.0 - x).max(0.0);
    lr_min + amplitude * gamma.powf(cycle)
}
