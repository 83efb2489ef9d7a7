//! Right-hand sides, transcribed term by term from the published systems.
//!
//! Parameter slices follow registry order (see `registry.rs`); table-only
//! parameters are skipped in the destructuring.

use super::{CompartmentModel, System};
use crate::autodiff::Scalar;

pub(super) fn eval<S: Scalar>(m: &CompartmentModel, _t: f64, y: &[S], p: &[S], out: &mut [S]) {
    match m.system {
        System::Sir => sir(y, p, out),
        System::CovidSird => covid_sird(m.constant("N"), y, p, out),
        System::Hiv => hiv(y, p, out),
        System::Smallpox => smallpox(y, p, out),
        System::Tuberculosis => tuberculosis(m.constant("N"), y, p, out),
        System::Pneumonia => pneumonia(y, p, out),
        System::Ebola => ebola(m.constant("N"), y, p, out),
        System::Dengue => dengue(y, p, out),
        System::Anthrax => anthrax(y, p, out),
        System::Polio => polio(m.constant("N"), m.constant("Nc"), m.constant("Na"), y, p, out),
        System::Measles => measles(m.constant("N"), y, p, out),
        System::Zika => zika(m.constant("Nh"), m.constant("Nv"), y, p, out),
    }
}

// S, I, R; beta, alpha
fn sir<S: Scalar>(y: &[S], p: &[S], out: &mut [S]) {
    let (s, i) = (y[0], y[1]);
    let (beta, alpha) = (p[0], p[1]);
    let infection = beta * s * i;
    out[0] = -infection;
    out[1] = infection - alpha * i;
    out[2] = alpha * i;
}

// S, I, D, R; alpha (transmission), beta (recovery), gamma (death)
fn covid_sird<S: Scalar>(n: f64, y: &[S], p: &[S], out: &mut [S]) {
    let (s, i) = (y[0], y[1]);
    let (alpha, beta, gamma) = (p[0], p[1], p[2]);
    let infection = alpha / n * s * i;
    out[0] = -infection;
    out[1] = infection - beta * i - gamma * i;
    out[2] = gamma * i;
    out[3] = beta * i;
}

// T, I, V; s, mu_T, mu_I, mu_b, mu_V, r, N, T_max, k1, k1'
fn hiv<S: Scalar>(y: &[S], p: &[S], out: &mut [S]) {
    let (tc, ic, v) = (y[0], y[1], y[2]);
    let (s, mu_t, mu_i, mu_b, mu_v, r, n, t_max, k1, k1p) =
        (p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7], p[8], p[9]);
    // the infection term sits inside the logistic bracket as printed
    out[0] = s - mu_t * tc + r * tc * (-((tc + ic) / t_max) - k1 * v * tc + 1.0);
    out[1] = k1p * v * tc - mu_i * ic;
    out[2] = n * mu_b * ic - k1 * v * tc - mu_v * v;
}

// S, En, Ei, Ci, I, Q, U, V;
// chi1, chi2, eps1, eps2, rho, theta, alpha, gamma, beta, phi
fn smallpox<S: Scalar>(y: &[S], p: &[S], out: &mut [S]) {
    let (s, en, ei, ci, i, q) = (y[0], y[1], y[2], y[3], y[4], y[5]);
    let (chi1, chi2, eps1, eps2, rho, theta, alpha, gamma, beta, phi) =
        (p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7], p[8], p[9]);
    let si = s * i;
    out[0] = chi1 * (-eps1 + 1.0) * ci - beta * (phi + rho - phi * rho) * si;
    out[1] = beta * phi * (-rho + 1.0) * si - alpha * en;
    out[2] = beta * phi * rho * si - (chi1 * eps2 + alpha * (-eps2 + 1.0)) * ei;
    out[3] = beta * rho * (-phi + 1.0) * si - chi1 * ci;
    out[4] = alpha * (-theta + 1.0) * en - (theta + gamma) * i;
    out[5] = alpha * (-eps2 + 1.0) * ei + theta * (alpha * en + i) - chi2 * q;
    out[6] = gamma * i + chi2 * q;
    out[7] = chi1 * (eps2 * ei + eps1 * ci);
}

// S, L, I, T; delta, beta, c, mu, k, r1, r2, beta', d
fn tuberculosis<S: Scalar>(n: f64, y: &[S], p: &[S], out: &mut [S]) {
    let (s, l, i, tr) = (y[0], y[1], y[2], y[3]);
    let (delta, beta, c, mu, k, r1, r2, beta_p, d) = (p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7], p[8]);
    let infection = beta * c * s * i / n;
    let reinfection = beta_p * c * tr / n;
    out[0] = delta - infection - mu * s;
    out[1] = infection - (mu + k + r1) * l + reinfection;
    out[2] = k * l - (mu + d) * i - r2 * i;
    out[3] = r1 * l + r2 * i - reinfection - mu * tr;
}

// S, V, C, I, R;
// pi, lambda, k*, eps, tau*, phi, chi, p, theta, mu, alpha, rho, beta, eta, q, delta  (* table-only)
fn pneumonia<S: Scalar>(y: &[S], p: &[S], out: &mut [S]) {
    let (s, v, c, i, r) = (y[0], y[1], y[2], y[3], y[4]);
    let (pi, lambda, eps, phi, chi, pv, theta, mu, alpha, rho, beta, eta, q, delta) =
        (p[0], p[1], p[3], p[5], p[6], p[7], p[8], p[9], p[10], p[11], p[12], p[13], p[14], p[15]);
    out[0] = (-pv + 1.0) * pi + phi * v + delta * r - (mu + lambda + theta) * s;
    out[1] = pv * pi + theta * s - (mu + eps * lambda + phi) * v;
    out[2] = rho * lambda * s + rho * eps * lambda * v + (-q + 1.0) * eta * i - (mu + beta + chi) * c;
    out[3] = (-rho + 1.0) * lambda * s + (-rho + 1.0) * eps * lambda * v + chi * c - (mu + alpha + eta) * i;
    out[4] = beta * c + q * eta * i - (mu + delta) * r;
}

// S, E, I, H, F, R;
// beta_1, beta_h, beta_f, alpha, gamma_h, theta_1, gamma_i, delta_1, gamma_d, delta_2, gamma_f, gamma_ih, gamma_dh
fn ebola<S: Scalar>(n: f64, y: &[S], p: &[S], out: &mut [S]) {
    let (s, e, i, h, f) = (y[0], y[1], y[2], y[3], y[4]);
    let (
        beta_1,
        beta_h,
        beta_f,
        alpha,
        gamma_h,
        theta_1,
        gamma_i,
        delta_1,
        gamma_d,
        delta_2,
        gamma_f,
        gamma_ih,
        gamma_dh,
    ) = (p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7], p[8], p[9], p[10], p[11], p[12]);
    let force = (beta_1 * s * i + beta_h * s * h + beta_f * s * f) / n;
    let not_hosp = -theta_1 + 1.0;
    out[0] = -force;
    out[1] = force - alpha * e;
    out[2] = alpha * e - (gamma_h * theta_1 + gamma_i * not_hosp * (-delta_1 + 1.0) + gamma_d * not_hosp * delta_1) * i;
    out[3] = gamma_h * theta_1 * i - (gamma_dh * delta_2 + gamma_ih * (-delta_2 + 1.0)) * h;
    out[4] = gamma_d * not_hosp * delta_1 * i + gamma_dh * delta_2 * h - gamma_f * f;
    out[5] = gamma_i * not_hosp * (-delta_1 + 1.0) * i + gamma_ih * (-delta_2 + 1.0) * h + gamma_f * f;
}

// Sh, Eh, Ih, Rh, Sv, Ev, Iv;
// pi_h, pi_v, lambda_h, lambda_v*, delta_h, delta_v, mu_h, mu_v, sigma_h, sigma_v, tau_h  (* table-only)
fn dengue<S: Scalar>(y: &[S], p: &[S], out: &mut [S]) {
    let (sh, eh, ih, rh, sv, ev, iv) = (y[0], y[1], y[2], y[3], y[4], y[5], y[6]);
    let (pi_h, pi_v, lambda_h, delta_h, delta_v, mu_h, mu_v, sigma_h, sigma_v, tau_h) =
        (p[0], p[1], p[2], p[4], p[5], p[6], p[7], p[8], p[9], p[10]);
    out[0] = pi_h - lambda_h * sh - mu_h * sh;
    out[1] = lambda_h * sh - (sigma_h * mu_h) * eh;
    out[2] = sigma_h * eh - (tau_h + mu_h + delta_h) * ih;
    out[3] = tau_h * ih - mu_h * rh;
    out[4] = pi_v - delta_v * sv - mu_v * sv;
    out[5] = delta_v * sv - (sigma_v + mu_v) * ev;
    out[6] = sigma_v * ev - (mu_v + delta_v) * iv;
}

// S, I, A, C; r, mu, kappa, eta_a, eta_c, eta_i, tau, gamma, delta, K, beta, sigma
fn anthrax<S: Scalar>(y: &[S], p: &[S], out: &mut [S]) {
    let (s, i, a, c) = (y[0], y[1], y[2], y[3]);
    let (r, mu, kappa, eta_a, eta_c, eta_i, tau, gamma, delta, k, beta, sigma) =
        (p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7], p[8], p[9], p[10], p[11]);
    let host = s + i;
    out[0] = r * host * (-(host / k) + 1.0) - eta_a * a * s - eta_c * s * c - eta_i * (s * i) / host - mu * s + tau * i;
    out[1] = eta_a * a * s + eta_c * s * c + (eta_i * (s * i) / host - (gamma + mu + tau)) * i;
    out[2] = -sigma * a + beta * c;
    out[3] = (gamma + mu) * i - delta * host * c - kappa * c;
}

// Sc, Sa, Ic, Ia, Rc, Ra; mu, alpha, gamma_a, gamma_c, beta_aa, beta_cc, beta_ac, beta_ca
fn polio<S: Scalar>(n: f64, nc: f64, na: f64, y: &[S], p: &[S], out: &mut [S]) {
    let (sc, sa, ic, ia, rc, ra) = (y[0], y[1], y[2], y[3], y[4], y[5]);
    let (mu, alpha, gamma_a, gamma_c, beta_aa, beta_cc, beta_ac, beta_ca) =
        (p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7]);
    let force_c = beta_cc / nc * ic + beta_ca / nc * ia;
    let force_a = beta_aa / na * ia + beta_ac / na * ic;
    out[0] = mu * n - (alpha + mu + force_c) * sc;
    out[1] = alpha * sc - (mu + force_a) * sa;
    out[2] = force_c * sc - (gamma_c + alpha + mu) * ic;
    out[3] = (beta_ac / na * ic + beta_aa / na * ia) * sa - (gamma_a + mu) * ia + alpha * ic;
    out[4] = gamma_c * ic - mu * rc - alpha * rc;
    out[5] = gamma_a * ia - mu * ra + alpha * rc;
}

// S, E, I; mu, beta, gamma, sigma
fn measles<S: Scalar>(n: f64, y: &[S], p: &[S], out: &mut [S]) {
    let (s, e, i) = (y[0], y[1], y[2]);
    let (mu, beta, gamma, sigma) = (p[0], p[1], p[2], p[3]);
    let infection = beta * s * i / n;
    out[0] = mu * (-s + n) - infection;
    out[1] = infection - (mu * sigma) * e;
    out[2] = sigma * e - (mu + gamma) * i;
}

// Sh, Eh, Ih1, Ih2, Ah, Rh, Sv, Ev, Iv;
// a, b, c, eta, beta, kappa, tau, theta, m*, V_h, V_v, gamma_h1, gamma_h2, gamma_h, mu_v  (* table-only)
fn zika<S: Scalar>(nh: f64, nv: f64, y: &[S], p: &[S], out: &mut [S]) {
    let (sh, eh, ih1, ih2, ah, sv, ev, iv) = (y[0], y[1], y[2], y[3], y[4], y[6], y[7], y[8]);
    let (a, b, c, eta, beta, kappa, tau, theta) = (p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7]);
    let (v_h, v_v, gamma_h1, gamma_h2, gamma_h, mu_v) = (p[9], p[10], p[11], p[12], p[13], p[14]);
    let vector_force = a * b * (iv / nh) * sh;
    let human_force = beta * ((kappa * eh + ih1 + tau * ih2) / nh) * sh;
    let vector_infection = a * c * ((eta * eh + ih1) / nh);
    out[0] = -vector_force - human_force;
    out[1] = theta * (-vector_force - human_force) - v_h * eh;
    out[2] = v_h * eh - gamma_h1 * ih1;
    out[3] = gamma_h1 * ih1 - gamma_h2 * ih2;
    out[4] = (-theta + 1.0) * (vector_force - human_force) - gamma_h * ah;
    out[5] = gamma_h2 * ih2 + gamma_h * ah;
    out[6] = mu_v * nv - vector_infection * sv - mu_v * sv;
    out[7] = vector_infection - (v_v + mu_v) * ev;
    out[8] = v_v * ev - mu_v * iv;
}
