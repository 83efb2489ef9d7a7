//! Closed-form quantities of the SIR model and the crude rate estimates used to seed it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SirSummary {
    pub s_infinity: f64,
    pub i_max: f64,
    pub ratio_beta_alpha: f64,
}

const MAX_ITER: usize = 100_000;

fn check_positive(pairs: &[(&str, f64)]) -> Result<()> {
    for (name, v) in pairs {
        if !v.is_finite() {
            return Err(Error::NonFinite(name.to_string()));
        }
        if *v <= 0.0 {
            return Err(Error::Domain(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(())
}

/// Susceptibles left when the epidemic has burnt out: the root of
/// `x = S0 exp(-(beta/alpha)(S0 + I0 - x))` in `(0, S0]`.
pub fn final_size(s0: f64, i0: f64, beta: f64, alpha: f64) -> Result<f64> {
    check_positive(&[("S0", s0), ("alpha", alpha), ("beta", beta)])?;
    if !(i0 >= 0.0) || !i0.is_finite() {
        return Err(Error::Domain(format!("I0 must be non-negative, got {i0}")));
    }
    let r = beta / alpha;
    let g = |x: f64| s0 * (-r * (s0 + i0 - x)).exp();
    let tol = 1e-12 * s0;

    // start below the larger root so the map contracts toward the epidemic solution
    let mut x = if i0 == 0.0 { s0 } else { 0.0 };
    for _ in 0..MAX_ITER {
        let next = 0.5 * x + 0.5 * g(x);
        if (next - x).abs() < tol {
            if (next - g(next)).abs() <= 1e-10 * s0 {
                return Ok(next);
            }
            break;
        }
        x = next;
    }
    bisect_final_size(s0, i0, r)
}

/// Root of `x - S0 exp(-r(S0 + I0 - x))` on `(0, S0)` by bisection, for the
/// cases where the damped iteration stalls.
fn bisect_final_size(s0: f64, i0: f64, r: f64) -> Result<f64> {
    let h = |x: f64| x - s0 * (-r * (s0 + i0 - x)).exp();
    let (mut lo, mut hi) = (0.0, s0);
    // h(0) < 0 always; with I0 > 0, h(S0) > 0
    if h(hi) <= 0.0 {
        return Err(Error::Numeric("final size has no root below S0".into()));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 * s0 {
            break;
        }
    }
    let x = 0.5 * (lo + hi);
    if (h(x)).abs() > 1e-10 * s0 {
        return Err(Error::Numeric(format!("final size residual {} after bisection", h(x))));
    }
    Ok(x)
}

/// Peak infected count, valid when `S0 > alpha/beta`.
pub fn i_max(s0: f64, i0: f64, beta: f64, alpha: f64) -> Result<f64> {
    check_positive(&[("S0", s0), ("alpha", alpha), ("beta", beta)])?;
    let rho = alpha / beta;
    if s0 < rho {
        return Err(Error::Domain(format!("S0 = {s0} is below alpha/beta = {rho}; infections only decline")));
    }
    // grouped so that S0 = alpha/beta returns I0 exactly
    Ok(i0 + (s0 - rho) - rho * (s0 / rho).ln())
}

/// `beta/alpha` recovered from an observed final size.
pub fn ratio_from_final_size(s0: f64, s_inf: f64, n: f64) -> Result<f64> {
    if !(s_inf > 0.0 && s_inf < s0 && s0 <= n) {
        return Err(Error::Domain(format!("need 0 < S_inf < S0 <= N, got S_inf = {s_inf}, S0 = {s0}, N = {n}")));
    }
    Ok((s0 / s_inf).ln() / (n - s_inf))
}

/// Rough rates from early counts: `n` new infections per day and a mean
/// infectious period of `d` days.
pub fn crude_rates(n: f64, s0: f64, i0: f64, d: f64) -> Result<(f64, f64)> {
    check_positive(&[("n", n), ("d", d), ("S0", s0), ("I0", i0)])?;
    Ok((n / (s0 * i0), 1.0 / d))
}

pub fn sir_summary(s0: f64, i0: f64, beta: f64, alpha: f64) -> Result<SirSummary> {
    Ok(SirSummary {
        s_infinity: final_size(s0, i0, beta, alpha)?,
        i_max: i_max(s0, i0, beta, alpha)?,
        ratio_beta_alpha: beta / alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_epidemic_without_infected() {
        assert_eq!(final_size(999.0, 0.0, 0.002, 0.5).unwrap(), 999.0);
    }

    #[test]
    fn final_size_solves_its_equation() {
        let (s0, i0, b, a) = (999.0, 1.0, 0.002, 1.0);
        let s = final_size(s0, i0, b, a).unwrap();
        assert!(s > 0.0 && s < s0);
        assert!((s - s0 * (-(b / a) * (s0 + i0 - s)).exp()).abs() < 1e-10 * s0);
    }

    #[test]
    fn i_max_collapses_at_threshold() {
        let (b, a) = (0.002, 0.5);
        let s0 = a / b;
        assert_eq!(i_max(s0, 7.0, b, a).unwrap(), 7.0);
        assert!(matches!(i_max(s0 - 1.0, 7.0, b, a), Err(Error::Domain(_))));
    }

    #[test]
    fn i_max_is_affine_in_i0() {
        let a = i_max(999.0, 1.0, 0.002, 0.5).unwrap();
        let b = i_max(999.0, 2.0, 0.002, 0.5).unwrap();
        assert!((b - a - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ratio_limits() {
        let near = ratio_from_final_size(999.0, 999.0 * (1.0 - 1e-9), 1000.0).unwrap();
        assert!(near > 0.0 && near < 1.01e-9);
        assert!(matches!(ratio_from_final_size(999.0, 999.0, 1000.0), Err(Error::Domain(_))));
    }

    #[test]
    fn crude_rate_examples() {
        assert_eq!(crude_rates(1.0, 100.0, 1.0, 2.0).unwrap(), (0.01, 0.5));
        assert_eq!(crude_rates(10.0, 1000.0, 10.0, 5.0).unwrap(), (0.001, 0.2));
        assert!(matches!(crude_rates(1.0, 0.0, 1.0, 2.0), Err(Error::Domain(_))));
        assert!(matches!(crude_rates(1.0, 10.0, 0.0, 2.0), Err(Error::Domain(_))));
    }

    #[test]
    fn invalid_inputs() {
        assert!(final_size(-1.0, 1.0, 0.1, 0.1).is_err());
        assert!(final_size(10.0, -1.0, 0.1, 0.1).is_err());
        assert!(final_size(10.0, 1.0, 0.0, 0.1).is_err());
        assert!(final_size(10.0, 1.0, 0.1, f64::NAN).is_err());
    }
}
