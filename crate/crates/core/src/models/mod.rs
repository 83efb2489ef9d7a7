//! Compartmental ODE systems and their literature parameters.

mod registry;
mod systems;

pub use registry::{registry_get, registry_names, REGISTRY_NAMES};

use serde::{Deserialize, Serialize};

use crate::autodiff::Scalar;
use crate::error::{Error, Result};

/// Which right-hand side a model evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum System {
    Sir,
    CovidSird,
    Hiv,
    Smallpox,
    Tuberculosis,
    Pneumonia,
    Ebola,
    Dengue,
    Anthrax,
    Polio,
    Measles,
    Zika,
}

/// What, if anything, the right-hand side conserves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conservation {
    None,
    /// Sum of all derivatives is identically zero.
    Exact,
    /// Sum of all derivatives vanishes when the total equals the population constant `N`.
    AtPopulation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub true_value: f64,
    pub search_lo: f64,
    pub search_hi: f64,
    /// Fixed at `true_value` during estimation.
    pub known: bool,
    /// False for parameters that appear in a published table but not in the displayed equations.
    pub in_rhs: bool,
    /// Set when the published row is internally inconsistent (e.g. true value outside its range).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<String>,
}

impl ParamSpec {
    pub fn new(name: &str, true_value: f64, lo: f64, hi: f64) -> Self {
        let (search_lo, search_hi, flag) =
            if lo <= hi { (lo, hi, None) } else { (hi, lo, Some(format!("range printed reversed as ({lo}, {hi})"))) };
        let mut spec =
            Self { name: name.to_string(), true_value, search_lo, search_hi, known: false, in_rhs: true, flag };
        if !(spec.search_lo..=spec.search_hi).contains(&true_value) {
            let msg = format!("true value {true_value} outside range ({}, {})", spec.search_lo, spec.search_hi);
            spec.flag = Some(match spec.flag.take() {
                Some(prev) => format!("{prev}; {msg}"),
                None => msg,
            });
        }
        spec
    }

    pub fn table_only(mut self) -> Self {
        self.in_rhs = false;
        self.known = true;
        self
    }

    pub fn known(mut self) -> Self {
        self.known = true;
        self
    }

    /// A parameter is estimated only if it is unknown and its range is not degenerate.
    pub fn is_learnable(&self) -> bool {
        !self.known && self.search_lo < self.search_hi
    }

    pub fn contains_truth(&self) -> bool {
        (self.search_lo..=self.search_hi).contains(&self.true_value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constant {
    pub name: String,
    pub value: f64,
}

/// Per-compartment values ordered as in [`CompartmentModel::compartments`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector(pub Vec<f64>);

impl StateVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for StateVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompartmentModel {
    pub name: String,
    pub system: System,
    pub compartments: Vec<String>,
    pub params: Vec<ParamSpec>,
    /// Fixed structural constants such as population sizes.
    pub constants: Vec<Constant>,
    pub default_y0: Vec<f64>,
    /// Time span used by experiments and oracle checks.
    pub horizon: f64,
}

/// JSON-friendly summary for documentation tooling.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDescriptor {
    pub name: String,
    pub compartments: Vec<String>,
    pub params: Vec<ParamSpec>,
    pub constants: Vec<Constant>,
    pub default_y0: Vec<f64>,
    pub horizon: f64,
    pub conservation: Conservation,
}

impl CompartmentModel {
    pub fn dim(&self) -> usize {
        self.compartments.len()
    }

    pub fn compartment_index(&self, name: &str) -> Result<usize> {
        self.compartments.iter().position(|c| c == name).ok_or_else(|| Error::UnknownCompartment(name.to_string()))
    }

    pub fn param_index(&self, name: &str) -> Result<usize> {
        self.params.iter().position(|p| p.name == name).ok_or_else(|| Error::UnknownParameter(name.to_string()))
    }

    pub fn constant(&self, name: &str) -> f64 {
        self.constants
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.value)
            .unwrap_or_else(|| panic!("model {} has no constant {name}", self.name))
    }

    pub fn set_constant(&mut self, name: &str, value: f64) -> Result<()> {
        let c = self
            .constants
            .iter_mut()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))?;
        c.value = value;
        Ok(())
    }

    /// Total population constant `N`, when the system has one.
    pub fn population(&self) -> Option<f64> {
        self.constants.iter().find(|c| c.name == "N").map(|c| c.value)
    }

    pub fn true_params(&self) -> Vec<f64> {
        self.params.iter().map(|p| p.true_value).collect()
    }

    pub fn learnable_names(&self) -> Vec<String> {
        self.params.iter().filter(|p| p.is_learnable()).map(|p| p.name.clone()).collect()
    }

    pub fn conservation(&self) -> Conservation {
        match self.system {
            System::Sir | System::CovidSird | System::Smallpox | System::Ebola => Conservation::Exact,
            System::Polio => Conservation::AtPopulation,
            _ => Conservation::None,
        }
    }

    pub fn descriptor(&self) -> ModelDescriptor {
        ModelDescriptor {
            name: self.name.clone(),
            compartments: self.compartments.clone(),
            params: self.params.clone(),
            constants: self.constants.clone(),
            default_y0: self.default_y0.clone(),
            horizon: self.horizon,
            conservation: self.conservation(),
        }
    }

    /// Marks every parameter as known.
    pub fn with_all_known(mut self) -> Self {
        for p in &mut self.params {
            p.known = true;
        }
        self
    }

    /// Replaces the search range of every in-equation parameter by the
    /// percentage band of [`crate::dinn::make_range`]; 0% fixes it.
    pub fn with_range_pct(mut self, pct: f64) -> Self {
        for p in self.params.iter_mut().filter(|p| p.in_rhs) {
            let (lo, hi) = crate::dinn::make_range(p.true_value, pct);
            p.search_lo = lo;
            p.search_hi = hi;
            p.known = lo >= hi;
            p.flag = None;
        }
        self
    }

    /// Evaluates the right-hand side into `out`.
    ///
    /// `p` holds every parameter in registry order, including table-only ones.
    pub fn rhs<S: Scalar>(&self, t: f64, y: &[S], p: &[S], out: &mut [S]) {
        debug_assert_eq!(y.len(), self.dim());
        debug_assert_eq!(p.len(), self.params.len());
        debug_assert_eq!(out.len(), self.dim());
        systems::eval(self, t, y, p, out);
    }
}

/// Checked, allocating right-hand side evaluation.
pub fn rhs_eval(model: &CompartmentModel, t: f64, y: &StateVector, p: &[f64]) -> Result<StateVector> {
    if y.len() != model.dim() {
        return Err(Error::Dimension(format!(
            "state has {} entries, model {} has {}",
            y.len(),
            model.name,
            model.dim()
        )));
    }
    if p.len() != model.params.len() {
        return Err(Error::Dimension(format!(
            "{} parameter values given, model {} has {}",
            p.len(),
            model.name,
            model.params.len()
        )));
    }
    if !t.is_finite() || y.0.iter().chain(p).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("rhs input for {}", model.name)));
    }
    let mut out = vec![0.0; model.dim()];
    model.rhs(t, &y.0, p, &mut out);
    Ok(StateVector(out))
}
