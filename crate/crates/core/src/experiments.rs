//! Config-driven studies over the network and baseline fits, with tabular reports.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{gauss_newton, nelder_mead, GaussNewtonConfig, LsqProblem, NelderMeadConfig};
use crate::dataset::{ingest_real_csv, mask_compartments, synthesize, uniform_grid, Dataset, NoiseSpec};
use crate::dinn::{error_learnable, evaluate, relative_errors, train, Activation, DinnModel, FitReport, TrainConfig};
use crate::error::{Error, Result};
use crate::integrate::{integrate, IntegratorConfig, Trajectory};
use crate::models::{registry_get, CompartmentModel, StateVector};

pub const EXPERIMENT_IDS: [&str; 8] = ["range", "noise", "data", "architecture", "lr", "missing", "diseases", "real"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    pub seed: u64,
    pub model: String,
    pub n_points: usize,
    /// Base network settings; studies override the swept field.
    pub train: TrainConfig,
    /// Multiplies every iteration budget toward published run lengths.
    pub full_scale: bool,
    pub pcts: Vec<f64>,
    pub noise_levels: Vec<f64>,
    pub sizes: Vec<usize>,
    pub layers: Vec<usize>,
    pub neurons: Vec<usize>,
    pub lrs: Vec<f64>,
    pub steps: Vec<usize>,
    pub lr_iteration_cap: usize,
    pub lr_loss_threshold: f64,
    pub hidden: Vec<String>,
    pub diseases: Vec<String>,
    pub csv_path: Option<PathBuf>,
    pub train_cutoff: f64,
    pub subsample_every: f64,
    pub baseline_x0: Vec<f64>,
    pub baseline_bounds: (f64, f64),
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            model: "covid_sird".into(),
            n_points: 100,
            train: TrainConfig {
                iterations: 50_000,
                activation: Activation::Tanh,
                log_every: 5000,
                ..TrainConfig::default()
            },
            full_scale: false,
            pcts: vec![0.0, 100.0, 1000.0, 10_000.0, 100_000.0],
            noise_levels: vec![0.01, 0.05, 0.10, 0.20],
            sizes: vec![10, 20, 100, 1000],
            layers: vec![2, 4, 8, 12],
            neurons: vec![10, 20, 64],
            lrs: vec![1e-5, 1e-6, 1e-8],
            steps: vec![100, 1000, 10_000],
            lr_iteration_cap: 50_000,
            lr_loss_threshold: 4e-4,
            hidden: vec!["R".into()],
            diseases: vec![
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
            ]
            .into_iter()
            .map(String::from)
            .collect(),
            csv_path: None,
            train_cutoff: 280.0,
            subsample_every: 10.0,
            baseline_x0: vec![0.1, 0.1, 0.1],
            baseline_bounds: (0.0, 2.0),
        }
    }
}

impl StudyConfig {
    fn train_cfg(&self) -> TrainConfig {
        let mut t = self.train.clone();
        t.seed = self.seed;
        if self.full_scale {
            t.iterations = t.iterations.max(700_000);
        }
        t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Num(Option<f64>),
    Text(String),
}

impl Cell {
    fn num(v: f64) -> Self {
        Cell::Num(v.is_finite().then_some(v))
    }

    fn opt(v: Option<f64>) -> Self {
        Cell::Num(v.filter(|x| x.is_finite()))
    }

    fn text(s: impl Into<String>) -> Self {
        Cell::Text(s.into())
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => *v,
            Cell::Text(_) => None,
        }
    }

    fn csv(&self) -> String {
        match self {
            Cell::Num(Some(v)) => format!("{v}"),
            Cell::Num(None) => String::new(),
            Cell::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(name: &str, columns: Vec<String>) -> Self {
        Self { name: name.into(), columns, rows: Vec::new() }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Value at `row`, `column`, when numeric.
    pub fn get(&self, row: usize, column: &str) -> Option<f64> {
        self.rows.get(row)?.get(self.column(column)?)?.as_f64()
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.iter().map(Cell::csv).collect::<Vec<_>>().join(","));
            s.push('\n');
        }
        s
    }
}

/// One fit inside a study; `label` ties aggregate rows back to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub label: String,
    pub report: Option<FitReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub code_version: String,
    pub inputs: Vec<String>,
}

/// Truth versus prediction time series for external plotting.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSeries {
    pub name: String,
    pub truth: Trajectory,
    pub pred: Trajectory,
}

impl PlotSeries {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t");
        for c in &self.truth.compartments {
            s.push_str(&format!(",{c}_truth,{c}_pred"));
        }
        s.push('\n');
        for (i, t) in self.truth.times.iter().enumerate() {
            s.push_str(&format!("{t:.16e}"));
            for c in 0..self.truth.compartments.len() {
                s.push_str(&format!(",{:.16e},{:.16e}", self.truth.states[i][c], self.pred.states[i][c]));
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment_id: String,
    pub config: StudyConfig,
    pub runs: Vec<RunRecord>,
    pub tables: Vec<Table>,
    pub provenance: Provenance,
    #[serde(skip)]
    pub plots: Vec<PlotSeries>,
}

impl ExperimentReport {
    fn new(id: &str, cfg: &StudyConfig) -> Self {
        let mut inputs = Vec::new();
        if id == "real" {
            if let Some(p) = &cfg.csv_path {
                inputs.push(p.display().to_string());
            }
        }
        Self {
            experiment_id: id.into(),
            config: cfg.clone(),
            runs: Vec::new(),
            tables: Vec::new(),
            provenance: Provenance { seed: cfg.seed, code_version: env!("CARGO_PKG_VERSION").into(), inputs },
            plots: Vec::new(),
        }
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn run(&self, label: &str) -> Option<&FitReport> {
        self.runs.iter().find(|r| r.label == label)?.report.as_ref()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes `report.json`, one CSV per table and one `plot_<name>.csv` per series.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.to_json()?)?;
        for t in &self.tables {
            std::fs::write(dir.join(format!("{}.csv", t.name)), t.to_csv())?;
        }
        for p in &self.plots {
            std::fs::write(dir.join(format!("plot_{}.csv", p.name)), p.to_csv())?;
        }
        let timings: BTreeMap<&str, f64> =
            self.runs.iter().filter_map(|r| r.report.as_ref().map(|rep| (r.label.as_str(), rep.wall_time))).collect();
        std::fs::write(dir.join("timings.json"), serde_json::to_string_pretty(&timings)?)?;
        Ok(())
    }
}

/// Median with the mean of the two central values for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Clean synthetic data for a registry model plus its truth on the same grid.
#[derive(Clone)]
struct Scenario {
    model: CompartmentModel,
    y0: StateVector,
    ds: Dataset,
    truth: Trajectory,
}

fn scenario(model: &CompartmentModel, n_points: usize, noise: &NoiseSpec) -> Result<Scenario> {
    let y0: StateVector = model.default_y0.clone().into();
    let ds = synthesize(model, &model.true_params(), &y0, n_points, model.horizon, noise)?;
    let truth = integrate(model, &model.true_params(), &y0, &ds.times, &IntegratorConfig::default())?;
    Ok(Scenario { model: model.clone(), y0, ds, truth })
}

struct DinnRun {
    dm: DinnModel,
    report: FitReport,
}

fn fit_dinn(sc: &Scenario, cfg: &TrainConfig) -> Result<DinnRun> {
    let (dm, mut report) = train(&sc.model, &sc.ds, cfg)?;
    evaluate(&dm, &sc.truth, &sc.y0, &mut report)?;
    Ok(DinnRun { dm, report })
}

fn record(label: String, res: &Result<DinnRun>) -> RunRecord {
    match res {
        Ok(r) => RunRecord { label, report: Some(r.report.clone()), error: None },
        Err(e) => RunRecord { label, report: None, error: Some(e.to_string()) },
    }
}

fn plot(name: String, sc: &Scenario, run: &DinnRun) -> PlotSeries {
    PlotSeries { name, truth: sc.truth.clone(), pred: run.dm.predict_trajectory(&sc.truth.times) }
}

fn error_cells(errs: &[Option<f64>], dim: usize) -> Vec<Cell> {
    (0..dim).map(|c| Cell::opt(errs.get(c).copied().flatten())).collect()
}

fn prefixed(prefix: &str, names: &[String]) -> Vec<String> {
    names.iter().map(|n| format!("{prefix}{n}")).collect()
}

/// Normalized sum of squared differences between two trajectories on one grid.
pub fn normalized_sse(pred: &Trajectory, truth: &Trajectory, scale: &[f64]) -> f64 {
    pred.states
        .iter()
        .zip(&truth.states)
        .map(|(p, t)| p.iter().zip(t).zip(scale).map(|((a, b), s)| ((a - b) / s).powi(2)).sum::<f64>())
        .sum()
}

/// Registry model by name, cloned.
fn model(name: &str) -> Result<CompartmentModel> {
    registry_get(name)
}

/// Search-range sweep on the configured model.
pub fn run_range_study(cfg: &StudyConfig) -> Result<ExperimentReport> {
    let m = model(&cfg.model)?;
    let sc = scenario(&m, cfg.n_points, &NoiseSpec::none())?;
    let names = m.learnable_names();
    let runs: Vec<Result<DinnRun>> = cfg
        .pcts
        .par_iter()
        .map(|pct| fit_dinn(&sc, &TrainConfig { param_range_pct: Some(*pct), ..cfg.train_cfg() }))
        .collect();

    let mut rep = ExperimentReport::new("range", cfg);
    let mut cols = vec!["run".to_string(), "range_pct".into()];
    cols.extend(names.iter().cloned());
    cols.extend(prefixed("error_nn_", &m.compartments));
    cols.extend(prefixed("error_learnable_", &m.compartments));
    let mut table = Table::new("ranges", cols);
    for (pct, res) in cfg.pcts.iter().zip(&runs) {
        let label = format!("range_{pct}");
        let mut row = vec![Cell::text(&label), Cell::num(*pct)];
        match res {
            Ok(run) => {
                let p = run.dm.params();
                row.extend(names.iter().map(|n| Cell::num(p[m.param_index(n).expect("registry name")])));
                row.extend(error_cells(&run.report.error_nn, m.dim()));
                row.extend(error_cells(&run.report.error_learnable, m.dim()));
                rep.plots.push(plot(label.clone(), &sc, run));
            }
            Err(_) => row.resize(table.columns.len(), Cell::Num(None)),
        }
        table.rows.push(row);
        rep.runs.push(record(label, res));
    }
    rep.tables.push(table);
    Ok(rep)
}

/// Multiplicative-noise sweep; errors are measured against the clean trajectory.
pub fn run_noise_study(cfg: &StudyConfig) -> Result<ExperimentReport> {
    let m = model(&cfg.model)?;
    let clean = scenario(&m, cfg.n_points, &NoiseSpec::none())?;
    let runs: Vec<Result<DinnRun>> = cfg
        .noise_levels
        .par_iter()
        .map(|level| {
            let noisy = synthesize(
                &m,
                &m.true_params(),
                &clean.y0,
                cfg.n_points,
                m.horizon,
                &NoiseSpec::multiplicative(*level, cfg.seed),
            )?;
            let sc = Scenario { ds: noisy, ..clean.clone() };
            fit_dinn(&sc, &cfg.train_cfg())
        })
        .collect();

    let names = m.learnable_names();
    let mut rep = ExperimentReport::new("noise", cfg);
    let mut cols = vec!["run".to_string(), "noise".into()];
    cols.extend(names.iter().cloned());
    cols.extend(prefixed("error_nn_", &m.compartments));
    cols.push("max_error_nn".into());
    let mut table = Table::new("noise", cols);
    for (level, res) in cfg.noise_levels.iter().zip(&runs) {
        let label = format!("noise_{level}");
        let mut row = vec![Cell::text(&label), Cell::num(*level)];
        match res {
            Ok(run) => {
                row.extend(names.iter().map(|n| Cell::num(run.report.found_params[n])));
                row.extend(error_cells(&run.report.error_nn, m.dim()));
                let max = run.report.error_nn.iter().flatten().fold(0.0f64, |a, b| a.max(*b));
                row.push(Cell::num(max));
                rep.plots.push(plot(label.clone(), &clean, run));
            }
            Err(_) => row.resize(table.columns.len(), Cell::Num(None)),
        }
        table.rows.push(row);
        rep.runs.push(record(label, res));
    }
    rep.tables.push(table);
    Ok(rep)
}

/// Dense clean trajectory used to score every method on equal terms.
fn reference_grid(m: &CompartmentModel) -> Vec<f64> {
    uniform_grid(1000, m.horizon)
}

/// Network and both baselines across dataset sizes.
pub fn run_data_study(cfg: &StudyConfig) -> Result<ExperimentReport> {
    let m = model(&cfg.model)?;
    let names = m.learnable_names();
    if cfg.baseline_x0.len() != names.len() {
        return Err(Error::Config(format!("baseline_x0 needs {} values", names.len())));
    }
    let y0: StateVector = m.default_y0.clone().into();
    let grid = reference_grid(&m);
    let reference = integrate(&m, &m.true_params(), &y0, &grid, &IntegratorConfig::default())?;
    let ref_scale: Vec<f64> =
        (0..m.dim()).map(|c| reference.column(c).iter().fold(0.0f64, |a, b| a.max(b.abs())).max(1e-300)).collect();

    struct SizeResult {
        dinn: Result<DinnRun>,
        baselines: Vec<(String, Result<FitReport>)>,
    }
    let per_size: Vec<Result<SizeResult>> = cfg
        .sizes
        .par_iter()
        .map(|&n| {
            let sc = scenario(&m, n, &NoiseSpec::none())?;
            let dinn = fit_dinn(&sc, &cfg.train_cfg());
            let bounds = vec![cfg.baseline_bounds; names.len()];
            let prob = LsqProblem::all_learnable(&m, &sc.ds, &cfg.baseline_x0, &bounds)?;
            let mut baselines = Vec::new();
            let nm = nelder_mead(&prob, &NelderMeadConfig::default()).map(|r| prob.report("nelder_mead", &r));
            baselines.push(("nelder_mead".to_string(), nm));
            let gn = match gauss_newton(&prob, &GaussNewtonConfig::default()) {
                Ok(r) => Ok(prob.report("gauss_newton", &r)),
                Err(Error::Stall { best_x, best_sse }) => {
                    let r = crate::baselines::LsqResult {
                        x: best_x,
                        sse: best_sse,
                        iterations: 0,
                        evaluations: 0,
                        converged: false,
                        wall_time: 0.0,
                    };
                    Ok(prob.report("gauss_newton", &r))
                }
                Err(e) => Err(e),
            };
            baselines.push(("gauss_newton".to_string(), gn));
            Ok(SizeResult { dinn, baselines })
        })
        .collect();

    let mut rep = ExperimentReport::new("data", cfg);
    let mut cols = vec!["run".to_string(), "points".into(), "method".into()];
    cols.extend(names.iter().cloned());
    cols.extend(prefixed("param_error_", &names));
    cols.push("max_param_error".into());
    cols.push("sse_vs_truth".into());
    cols.push("sse_nn_vs_truth".into());
    cols.extend(prefixed("error_learnable_", &m.compartments));
    let mut table = Table::new("data_variability", cols);

    let learnable_row = |label: &str, n: usize, method: &str, report: &FitReport| -> Result<Vec<Cell>> {
        let mut p = m.true_params();
        for (k, v) in &report.found_params {
            p[m.param_index(k)?] = *v;
        }
        let regenerated = integrate(&m, &p, &y0, &grid, &IntegratorConfig::default());
        let sse = regenerated.as_ref().map_or(f64::INFINITY, |tr| normalized_sse(tr, &reference, &ref_scale));
        let err = error_learnable(&m, &p, &y0, &grid, &reference).unwrap_or_else(|_| vec![None; m.dim()]);
        let mut row = vec![Cell::text(label), Cell::num(n as f64), Cell::text(method)];
        row.extend(names.iter().map(|k| Cell::num(report.found_params[k])));
        row.extend(names.iter().map(|k| Cell::num(report.param_errors[k])));
        row.push(Cell::num(report.max_param_error()));
        row.push(Cell::num(sse));
        row.extend(err.iter().map(|e| Cell::opt(*e)));
        Ok(row)
    };

    for (&n, res) in cfg.sizes.iter().zip(per_size) {
        let size = res?;
        let label = format!("dinn_{n}");
        match &size.dinn {
            Ok(run) => {
                let mut row = learnable_row(&label, n, "dinn", &run.report)?;
                let nn = run.dm.predict_trajectory(&grid);
                row.insert(
                    table.column("sse_nn_vs_truth").expect("column"),
                    Cell::num(normalized_sse(&nn, &reference, &ref_scale)),
                );
                table.rows.push(row);
            }
            Err(_) => {
                let mut row = vec![Cell::text(&label), Cell::num(n as f64), Cell::text("dinn")];
                row.resize(table.columns.len(), Cell::Num(None));
                table.rows.push(row);
            }
        }
        rep.runs.push(record(label, &size.dinn));
        for (method, r) in size.baselines {
            let label = format!("{method}_{n}");
            match &r {
                Ok(report) => {
                    let mut row = learnable_row(&label, n, &method, report)?;
                    row.insert(table.column("sse_nn_vs_truth").expect("column"), Cell::Num(None));
                    table.rows.push(row);
                    rep.runs.push(RunRecord { label, report: Some(report.clone()), error: None });
                }
                Err(e) => {
                    let mut row = vec![Cell::text(&label), Cell::num(n as f64), Cell::text(&method)];
                    row.resize(table.columns.len(), Cell::Num(None));
                    table.rows.push(row);
                    rep.runs.push(RunRecord { label, report: None, error: Some(e.to_string()) });
                }
            }
        }
    }
    rep.tables.push(table);
    Ok(rep)
}

/// Depth by width grid with known parameters fixed to the table ranges.
pub fn run_architecture_study(cfg: &StudyConfig) -> Result<ExperimentReport> {
    let m = model(&cfg.model)?;
    let sc = scenario(&m, cfg.n_points, &NoiseSpec::none())?;
    let cells: Vec<(usize, usize)> =
        cfg.layers.iter().flat_map(|l| cfg.neurons.iter().map(move |n| (*l, *n))).collect();
    let runs: Vec<Result<DinnRun>> = cells
        .par_iter()
        .map(|&(l, n)| fit_dinn(&sc, &TrainConfig { hidden_layers: l, neurons: n, ..cfg.train_cfg() }))
        .collect();
    let mut rep = ExperimentReport::new("architecture", cfg);
    let mut cols = vec!["run".to_string(), "layers".into(), "neurons".into()];
    cols.extend(prefixed("error_nn_", &m.compartments));
    cols.extend(prefixed("error_learnable_", &m.compartments));
    let mut table = Table::new("architecture", cols);
    for (&(l, n), res) in cells.iter().zip(&runs) {
        let label = format!("arch_{l}x{n}");
        let mut row = vec![Cell::text(&label), Cell::num(l as f64), Cell::num(n as f64)];
        match res {
            Ok(run) => {
                row.extend(error_cells(&run.report.error_nn, m.dim()));
                row.extend(error_cells(&run.report.error_learnable, m.dim()));
            }
            Err(_) => row.resize(table.columns.len(), Cell::Num(None)),
        }
        table.rows.push(row);
        rep.runs.push(record(label, res));
    }
    rep.tables.push(table);
    Ok(rep)
}

/// Iterations needed to reach the loss threshold per (lr_min, step size) cell.
pub fn run_lr_study(cfg: &StudyConfig) -> Result<ExperimentReport> {
    let m = model(&cfg.model)?;
    let sc = scenario(&m, cfg.n_points, &NoiseSpec::none())?;
    let cells: Vec<(f64, usize)> = cfg.lrs.iter().flat_map(|l| cfg.steps.iter().map(move |s| (*l, *s))).collect();
    let runs: Vec<Result<DinnRun>> = cells
        .par_iter()
        .map(|&(lr, step)| {
            let t = TrainConfig {
                lr_min: lr,
                step_size_up: step,
                iterations: cfg.lr_iteration_cap,
                loss_threshold: Some(cfg.lr_loss_threshold),
                ..cfg.train_cfg()
            };
            fit_dinn(&sc, &t)
        })
        .collect();
    let mut rep = ExperimentReport::new("lr", cfg);
    let cols = ["run", "lr_min", "step_size_up", "iterations_to_threshold", "censored", "final_loss", "wall_time_s"];
    let mut table = Table::new("learning_rate", cols.iter().map(|s| s.to_string()).collect());
    for (&(lr, step), res) in cells.iter().zip(&runs) {
        let label = format!("lr_{lr:e}_step_{step}");
        let mut row = vec![Cell::text(&label), Cell::num(lr), Cell::num(step as f64)];
        match res {
            Ok(run) => {
                let reached = run.report.reached_threshold_at;
                row.push(Cell::opt(reached.map(|i| i as f64)));
                row.push(Cell::text(if reached.is_some() { "no" } else { "yes" }));
                row.push(Cell::num(run.report.final_loss));
                // informational only; excluded from the deterministic report
                row.push(Cell::Num(None));
            }
            Err(_) => row.resize(table.columns.len(), Cell::Num(None)),
        }
        table.rows.push(row);
        rep.runs.push(record(label, res));
    }
    rep.tables.push(table);
    Ok(rep)
}

/// Known parameters, selected compartments reduced to their initial value.
pub fn run_missing_data(cfg: &StudyConfig) -> Result<ExperimentReport> {
    let m = model(&cfg.model)?.with_all_known();
    let sc = scenario(&m, cfg.n_points, &NoiseSpec::none())?;
    let hidden: Vec<&str> = cfg.hidden.iter().map(String::as_str).collect();
    let masked = mask_compartments(&sc.ds, &hidden)?;
    let sc = Scenario { ds: masked, ..sc };
    let res = fit_dinn(&sc, &cfg.train_cfg());

    let mut rep = ExperimentReport::new("missing", cfg);
    let mut table =
        Table::new("missing_data", vec!["run".into(), "compartment".into(), "hidden".into(), "error_nn".into()]);
    let label = format!("missing_{}", if hidden.is_empty() { "none".to_string() } else { hidden.join("_") });
    if let Ok(run) = &res {
        for (c, name) in m.compartments.iter().enumerate() {
            table.rows.push(vec![
                Cell::text(&label),
                Cell::text(name),
                Cell::text(if hidden.contains(&name.as_str()) { "yes" } else { "no" }),
                Cell::opt(run.report.error_nn[c]),
            ]);
        }
        rep.plots.push(plot(label.clone(), &sc, run));
    }
    rep.runs.push(record(label, &res));
    rep.tables.push(table);
    Ok(rep)
}

/// Every listed disease with its table ranges; best, worst and median parameter error.
pub fn run_disease_suite(cfg: &StudyConfig) -> Result<ExperimentReport> {
    let models: Vec<CompartmentModel> = cfg.diseases.iter().map(|n| model(n)).collect::<Result<_>>()?;
    let runs: Vec<Result<DinnRun>> = models
        .par_iter()
        .map(|m| {
            let sc = scenario(m, cfg.n_points, &NoiseSpec::none())?;
            fit_dinn(&sc, &cfg.train_cfg())
        })
        .collect();
    let mut rep = ExperimentReport::new("diseases", cfg);
    let mut summary = Table::new(
        "disease_summary",
        ["run", "disease", "learnable", "best", "worst", "median"].iter().map(|s| s.to_string()).collect(),
    );
    let mut detail = Table::new(
        "disease_parameters",
        ["run", "disease", "parameter", "actual", "lo", "hi", "found", "param_error"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
    );
    for (m, res) in models.iter().zip(&runs) {
        let label = format!("disease_{}", m.name);
        if let Ok(run) = res {
            let errs: Vec<f64> = run.report.param_errors.values().copied().collect();
            let best = errs.iter().copied().fold(f64::INFINITY, f64::min);
            let worst = errs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            summary.rows.push(vec![
                Cell::text(&label),
                Cell::text(&m.name),
                Cell::num(errs.len() as f64),
                Cell::num(best),
                Cell::num(worst),
                Cell::opt(median(&errs)),
            ]);
            for (name, found) in &run.report.found_params {
                let spec = &m.params[m.param_index(name)?];
                detail.rows.push(vec![
                    Cell::text(&label),
                    Cell::text(&m.name),
                    Cell::text(name),
                    Cell::num(spec.true_value),
                    Cell::num(spec.search_lo),
                    Cell::num(spec.search_hi),
                    Cell::num(*found),
                    Cell::num(run.report.param_errors[name]),
                ]);
            }
        } else {
            let mut row = vec![Cell::text(&label), Cell::text(&m.name)];
            row.resize(summary.columns.len(), Cell::Num(None));
            summary.rows.push(row);
        }
        rep.runs.push(record(label, res));
    }
    rep.tables.push(summary);
    rep.tables.push(detail);
    Ok(rep)
}

/// Fit on the training window of a case file and forecast the held-out days.
pub fn run_real_forecast(cfg: &StudyConfig) -> Result<ExperimentReport> {
    let path =
        cfg.csv_path.as_ref().ok_or_else(|| Error::Config("csv_path is required for the real-data study".into()))?;
    let (train_ds, holdout) = ingest_real_csv(path, cfg.subsample_every, cfg.train_cutoff)?;
    let mut m = model("covid_sird")?;
    let n: f64 = train_ds.observations[0].iter().sum();
    m.set_constant("N", n)?;
    let y0 = StateVector(train_ds.observations[0].clone());
    let (dm, mut report) = train(&m, &train_ds, &cfg.train_cfg())?;
    let fit = train_ds.to_trajectory();
    evaluate(&dm, &fit, &y0, &mut report)?;

    let mut rep = ExperimentReport::new("real", cfg);
    let mut table = Table::new(
        "forecast",
        vec!["run".into(), "compartment".into(), "holdout_error_nn".into(), "holdout_error_learnable".into()],
    );
    let label = "real_forecast".to_string();
    if !holdout.is_empty() {
        let truth = holdout.to_trajectory();
        let nn = relative_errors(&dm.predict_trajectory(&truth.times).states, &truth);
        let mut grid = vec![train_ds.times[0]];
        grid.extend(truth.times.iter().copied());
        let regenerated = integrate(&m, &dm.params(), &y0, &grid, &IntegratorConfig::default()).ok();
        let learn = regenerated.map(|tr| {
            let tr = Trajectory { times: tr.times[1..].to_vec(), states: tr.states[1..].to_vec(), ..tr };
            relative_errors(&tr.states, &truth)
        });
        for (c, name) in m.compartments.iter().enumerate() {
            table.rows.push(vec![
                Cell::text(&label),
                Cell::text(name),
                Cell::opt(nn[c]),
                Cell::opt(learn.as_ref().and_then(|l| l[c])),
            ]);
        }
        rep.plots.push(PlotSeries { name: "holdout".into(), pred: dm.predict_trajectory(&truth.times), truth });
    }
    rep.plots.push(PlotSeries { name: "train".into(), pred: dm.predict_trajectory(&fit.times), truth: fit });
    rep.runs.push(RunRecord { label, report: Some(report), error: None });
    rep.tables.push(table);
    Ok(rep)
}

/// Dispatches a study by identifier.
pub fn run_experiment(id: &str, cfg: &StudyConfig) -> Result<ExperimentReport> {
    match id {
        "range" => run_range_study(cfg),
        "noise" => run_noise_study(cfg),
        "data" => run_data_study(cfg),
        "architecture" => run_architecture_study(cfg),
        "lr" => run_lr_study(cfg),
        "missing" => run_missing_data(cfg),
        "diseases" => run_disease_suite(cfg),
        "real" => run_real_forecast(cfg),
        other => Err(Error::Config(format!("unknown experiment `{other}`; valid: {}", EXPERIMENT_IDS.join(", ")))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> StudyConfig {
        StudyConfig {
            n_points: 20,
            train: TrainConfig {
                iterations: 300,
                hidden_layers: 2,
                neurons: 8,
                activation: Activation::Tanh,
                log_every: 100,
                ..TrainConfig::default()
            },
            ..StudyConfig::default()
        }
    }

    #[test]
    fn median_definition() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn range_study_rows_and_fixed_cell() {
        let cfg = StudyConfig { pcts: vec![0.0, 1000.0], ..quick() };
        let rep = run_range_study(&cfg).unwrap();
        let t = rep.table("ranges").unwrap();
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.get(0, "alpha"), Some(0.191));
        for c in ["S", "I", "D", "R"] {
            assert!(t.get(0, &format!("error_learnable_{c}")).unwrap() < 1e-8);
        }
        let json = rep.to_json().unwrap();
        let back: ExperimentReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_json().unwrap(), json);
    }

    #[test]
    fn reports_are_reproducible() {
        let cfg = StudyConfig { noise_levels: vec![0.05], ..quick() };
        let a = run_noise_study(&cfg).unwrap().to_json().unwrap();
        let b = run_noise_study(&cfg).unwrap().to_json().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn data_study_has_three_methods_per_size() {
        let cfg = StudyConfig { sizes: vec![10, 20], ..quick() };
        let rep = run_data_study(&cfg).unwrap();
        assert_eq!(rep.table("data_variability").unwrap().rows.len(), 6);
        assert_eq!(rep.runs.len(), 6);
    }

    #[test]
    fn architecture_and_lr_grids() {
        let cfg = StudyConfig { layers: vec![1, 2], neurons: vec![4, 6], ..quick() };
        assert_eq!(run_architecture_study(&cfg).unwrap().table("architecture").unwrap().rows.len(), 4);
        let cfg = StudyConfig { lrs: vec![1e-5], steps: vec![100], lr_iteration_cap: 50, ..quick() };
        let rep = run_lr_study(&cfg).unwrap();
        let t = rep.table("learning_rate").unwrap();
        assert_eq!(t.get(0, "iterations_to_threshold"), None);
        assert_eq!(t.rows[0][4], Cell::text("yes"));
    }

    #[test]
    fn missing_data_marks_hidden() {
        let rep = run_missing_data(&quick()).unwrap();
        let t = rep.table("missing_data").unwrap();
        assert_eq!(t.rows.len(), 4);
        assert_eq!(t.rows[3][2], Cell::text("yes"));
    }

    #[test]
    fn disease_suite_summary() {
        let cfg = StudyConfig { diseases: vec!["measles".into(), "polio".into()], ..quick() };
        let rep = run_disease_suite(&cfg).unwrap();
        let t = rep.table("disease_summary").unwrap();
        assert_eq!(t.rows.len(), 2);
        let detail = rep.table("disease_parameters").unwrap();
        let measles: Vec<f64> =
            detail.rows.iter().filter(|r| r[1] == Cell::text("measles")).map(|r| r[7].as_f64().unwrap()).collect();
        assert_eq!(t.get(0, "median"), median(&measles));
    }

    #[test]
    fn real_forecast_requires_file() {
        let cfg = StudyConfig { csv_path: Some("/nonexistent/cases.csv".into()), ..quick() };
        assert!(matches!(run_real_forecast(&cfg), Err(Error::Io(_))));
        assert!(matches!(run_real_forecast(&quick()), Err(Error::Config(_))));
        assert!(matches!(run_experiment("bogus", &quick()), Err(Error::Config(_))));
    }

    #[test]
    fn writes_report_tables_and_plots() {
        let cfg = StudyConfig { pcts: vec![100.0], ..quick() };
        let rep = run_range_study(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        rep.write(dir.path()).unwrap();
        for f in ["report.json", "ranges.csv", "plot_range_100.csv", "timings.json"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let plot = std::fs::read_to_string(dir.path().join("plot_range_100.csv")).unwrap();
        assert!(plot.starts_with("t,S_truth,S_pred,I_truth"));
    }
}
