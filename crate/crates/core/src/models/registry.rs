//! Literature parameter tables.
//!
//! Values and ranges are copied from the published tables. Initial states and
//! horizons are not published; the ones below are chosen so that each system
//! shows its characteristic transient within the horizon.

use super::{CompartmentModel, Constant, ParamSpec, System};
use crate::error::{Error, Result};

pub const REGISTRY_NAMES: [&str; 12] = [
    "covid_sird",
    "hiv",
    "smallpox",
    "tuberculosis",
    "pneumonia",
    "ebola",
    "dengue",
    "anthrax",
    "polio",
    "measles",
    "zika",
    "sir",
];

pub fn registry_names() -> &'static [&'static str] {
    &REGISTRY_NAMES
}

/// Looks up a model by name.
pub fn registry_get(name: &str) -> Result<CompartmentModel> {
    let model = match name {
        "sir" => sir(),
        "covid_sird" => covid_sird(),
        "hiv" => hiv(),
        "smallpox" => smallpox(),
        "tuberculosis" => tuberculosis(),
        "pneumonia" => pneumonia(),
        "ebola" => ebola(),
        "dengue" => dengue(),
        "anthrax" => anthrax(),
        "polio" => polio(),
        "measles" => measles(),
        "zika" => zika(),
        _ => {
            return Err(Error::UnknownModel { name: name.to_string(), valid: REGISTRY_NAMES.join(", ") });
        }
    };
    Ok(model)
}

fn p(name: &str, v: f64, lo: f64, hi: f64) -> ParamSpec {
    ParamSpec::new(name, v, lo, hi)
}

fn c(name: &str, value: f64) -> Constant {
    Constant { name: name.to_string(), value }
}

fn names(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn build(
    name: &str,
    system: System,
    compartments: &[&str],
    params: Vec<ParamSpec>,
    constants: Vec<Constant>,
    y0: Vec<f64>,
    horizon: f64,
) -> CompartmentModel {
    CompartmentModel {
        name: name.to_string(),
        system,
        compartments: names(compartments),
        params,
        constants,
        default_y0: y0,
        horizon,
    }
}

fn sir() -> CompartmentModel {
    build(
        "sir",
        System::Sir,
        &["S", "I", "R"],
        vec![p("beta", 0.002, -0.004, 0.004), p("alpha", 0.5, -1.0, 1.0)],
        vec![],
        vec![999.0, 1.0, 0.0],
        30.0,
    )
}

fn covid_sird() -> CompartmentModel {
    build(
        "covid_sird",
        System::CovidSird,
        &["S", "I", "D", "R"],
        vec![p("alpha", 0.191, -1.0, 1.0), p("beta", 0.05, -1.0, 1.0), p("gamma", 0.0294, -1.0, 1.0)],
        vec![c("N", 1000.0)],
        vec![990.0, 10.0, 0.0, 0.0],
        120.0,
    )
}

fn hiv() -> CompartmentModel {
    build(
        "hiv",
        System::Hiv,
        &["T", "I", "V"],
        vec![
            p("s", 10.0, 9.9, 10.1),
            p("mu_T", 0.02, 0.018, 0.022),
            p("mu_I", 0.26, 0.255, 0.265),
            p("mu_b", 0.24, 0.235, 0.245),
            p("mu_V", 2.4, 2.5, 2.3),
            p("r", 0.03, 0.029, 0.031),
            p("N", 250.0, 247.5, 252.5),
            p("T_max", 1500.0, 1485.0, 1515.0),
            p("k1", 2.4e-4, 2.3e-4, 2.6e-4),
            p("k1_prime", 2e-4, 1.9e-4, 2.1e-4),
        ],
        vec![],
        vec![1000.0, 0.0, 1.0],
        60.0,
    )
}

fn smallpox() -> CompartmentModel {
    build(
        "smallpox",
        System::Smallpox,
        &["S", "En", "Ei", "Ci", "I", "Q", "U", "V"],
        vec![
            p("chi1", 0.06, 0.054, 0.066),
            p("chi2", 0.04, 0.036, 0.044),
            p("epsilon1", 0.975, 0.86, 1.04),
            p("epsilon2", 0.3, 0.27, 0.33),
            p("rho", 0.975, 0.86, 1.04),
            p("theta", 0.95, 0.86, 1.04),
            p("alpha", 0.068, 0.061, 0.075),
            p("gamma", 0.11, 0.10, 0.12),
            // appear in the equations but not in the table
            p("beta", 0.002, 0.0018, 0.0022).known(),
            p("phi", 0.5, 0.45, 0.55).known(),
        ],
        vec![],
        vec![1000.0, 0.0, 0.0, 0.0, 10.0, 0.0, 0.0, 0.0],
        100.0,
    )
}

fn tuberculosis() -> CompartmentModel {
    build(
        "tuberculosis",
        System::Tuberculosis,
        &["S", "L", "I", "T"],
        vec![
            p("delta", 500.0, 480.0, 520.0),
            p("beta", 13.0, 9.0, 15.0),
            p("c", 1.0, -1.0, 3.0),
            p("mu", 0.143, 0.1, 0.3),
            p("k", 0.5, 0.0, 1.0),
            p("r1", 2.0, 1.0, 3.0),
            p("r2", 1.0, -1.0, 3.0),
            p("beta_prime", 13.0, 9.0, 15.0),
            p("d", 0.0, -0.4, 0.4),
        ],
        vec![c("N", 3500.0)],
        vec![3000.0, 300.0, 200.0, 0.0],
        20.0,
    )
}

fn pneumonia() -> CompartmentModel {
    build(
        "pneumonia",
        System::Pneumonia,
        &["S", "V", "C", "I", "R"],
        vec![
            p("pi", 0.01, 0.0099, 0.011),
            p("lambda", 0.1, 0.099, 0.11),
            p("k", 0.5, 0.49, 0.51).table_only(),
            p("epsilon", 0.002, 0.001, 0.003),
            p("tau", 0.89, 0.87, 0.91).table_only(),
            p("phi", 0.0025, 0.0023, 0.0027),
            p("chi", 0.001, 0.0009, 0.0011),
            p("p", 0.2, 0.19, 0.21),
            p("theta", 0.008, 0.0075, 0.0085),
            p("mu", 0.01, 0.009, 0.011),
            p("alpha", 0.057, 0.056, 0.058),
            p("rho", 0.05, 0.049, 0.051),
            p("beta", 0.0115, 0.0105, 0.0125),
            p("eta", 0.2, 0.19, 0.21),
            p("q", 0.5, 0.49, 0.51),
            p("delta", 0.1, 0.09, 0.11),
        ],
        vec![],
        vec![0.8, 0.1, 0.05, 0.05, 0.0],
        100.0,
    )
}

fn ebola() -> CompartmentModel {
    build(
        "ebola",
        System::Ebola,
        &["S", "E", "I", "H", "F", "R"],
        vec![
            p("beta_1", 3.532, 3.5, 3.56),
            p("beta_h", 0.012, 0.011, 0.013),
            p("beta_f", 0.462, 0.455, 0.465),
            p("alpha", 1.0 / 12.0, 0.072, 0.088),
            p("gamma_h", 1.0 / 4.2, 0.22, 0.28),
            p("theta_1", 0.65, 0.643, 0.657),
            p("gamma_i", 0.1, 0.099, 0.11),
            p("delta_1", 0.47, 0.465, 0.475),
            p("gamma_d", 1.0 / 8.0, 0.118, 0.122),
            p("delta_2", 0.42, 0.415, 0.425),
            p("gamma_f", 0.5, 0.45, 0.55),
            p("gamma_ih", 0.082, 0.081, 0.083),
            p("gamma_dh", 0.07, 0.069, 0.071),
        ],
        vec![c("N", 1000.0)],
        vec![990.0, 0.0, 10.0, 0.0, 0.0, 0.0],
        100.0,
    )
}

fn dengue() -> CompartmentModel {
    build(
        "dengue",
        System::Dengue,
        &["Sh", "Eh", "Ih", "Rh", "Sv", "Ev", "Iv"],
        vec![
            p("pi_h", 10.0, 9.9, 10.1),
            p("pi_v", 30.0, 29.7, 30.3),
            p("lambda_h", 0.055, 0.054, 0.056),
            p("lambda_v", 0.05, 0.049, 0.051).table_only(),
            p("delta_h", 0.99, 0.9, 1.1),
            p("delta_v", 0.057, 0.056, 0.058),
            p("mu_h", 0.0195, 0.0194, 0.0196),
            p("mu_v", 0.016, 0.015, 0.017),
            p("sigma_h", 0.53, 0.52, 0.54),
            p("sigma_v", 0.2, 0.19, 0.21),
            p("tau_h", 0.1, 0.05, 0.15),
        ],
        vec![],
        vec![500.0, 10.0, 5.0, 0.0, 1000.0, 20.0, 10.0],
        100.0,
    )
}

fn anthrax() -> CompartmentModel {
    build(
        "anthrax",
        System::Anthrax,
        &["S", "I", "A", "C"],
        vec![
            p("r", 1.0 / 300.0, 0.003, 0.0036),
            p("mu", 1.0 / 600.0, 0.0014, 0.0018),
            p("kappa", 0.1, 0.99, 0.11),
            p("eta_a", 0.5, 0.49, 0.51),
            p("eta_c", 0.1, 0.09, 0.11),
            p("eta_i", 0.01, 0.09, 0.011),
            p("tau", 0.1, 0.09, 0.11),
            p("gamma", 1.0 / 7.0, 0.13, 0.15),
            p("delta", 1.0 / 64.0, 0.03, 0.07),
            p("K", 100.0, 98.0, 102.0),
            p("beta", 0.02, 0.0018, 0.0022),
            p("sigma", 0.1, 0.09, 0.11),
        ],
        vec![],
        vec![90.0, 5.0, 1.0, 1.0],
        100.0,
    )
}

fn polio() -> CompartmentModel {
    build(
        "polio",
        System::Polio,
        &["Sc", "Sa", "Ic", "Ia", "Rc", "Ra"],
        vec![
            p("mu", 0.02, 0.018, 0.022),
            p("alpha", 0.5, 0.495, 0.505),
            p("gamma_a", 18.0, 17.9, 18.1),
            p("gamma_c", 36.0, 35.8, 36.2),
            p("beta_aa", 40.0, 39.0, 41.0),
            p("beta_cc", 90.0, 89.0, 91.0),
            p("beta_ac", 0.0, -0.001, 0.001),
            p("beta_ca", 0.0, -0.001, 0.001),
        ],
        vec![c("N", 1000.0), c("Nc", 300.0), c("Na", 700.0)],
        vec![290.0, 690.0, 10.0, 10.0, 0.0, 0.0],
        1.0,
    )
}

fn measles() -> CompartmentModel {
    build(
        "measles",
        System::Measles,
        &["S", "E", "I"],
        vec![
            p("mu", 0.02, 0.01, 0.03),
            p("beta", 0.28, 0.27, 0.37),
            p("gamma", 100.0, 97.0, 103.0),
            p("sigma", 35.84, 33.0, 37.0),
        ],
        vec![c("N", 1000.0)],
        vec![990.0, 5.0, 5.0],
        10.0,
    )
}

fn zika() -> CompartmentModel {
    build(
        "zika",
        System::Zika,
        &["Sh", "Eh", "Ih1", "Ih2", "Ah", "Rh", "Sv", "Ev", "Iv"],
        vec![
            p("a", 0.5, 0.49, 0.51),
            p("b", 0.4, 0.39, 0.41),
            p("c", 0.5, 0.49, 0.51),
            p("eta", 0.1, 0.09, 0.11),
            p("beta", 0.05, 0.0495, 0.0505),
            p("kappa", 0.6, 0.594, 0.606),
            p("tau", 0.3, 0.27, 0.33),
            p("theta", 18.0, 17.8, 18.2),
            p("m", 5.0, 4.5, 5.5).table_only(),
            p("V_h", 1.0 / 5.0, 0.198, 0.202),
            p("V_v", 10.0, 9.9, 10.1),
            p("gamma_h1", 1.0 / 5.0, 0.18, 0.22),
            p("gamma_h2", 1.0 / 64.0, 0.045, 0.055),
            p("gamma_h", 1.0 / 7.0, 0.139, 0.141),
            p("mu_v", 1.0 / 14.0, 0.063, 0.077),
        ],
        vec![c("Nh", 1000.0), c("Nv", 5000.0)],
        vec![990.0, 0.0, 10.0, 0.0, 0.0, 0.0, 5000.0, 0.0, 10.0],
        60.0,
    )
}
