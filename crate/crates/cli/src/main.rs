//! `dinn-lab`: generate data, train networks, fit baselines and run the studies.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use dinn_core::analytic::sir_summary;
use dinn_core::baselines::{gauss_newton, nelder_mead, GaussNewtonConfig, LsqProblem, LsqResult, NelderMeadConfig};
use dinn_core::dataset::{mask_compartments, synthesize, Dataset, NoiseKind, NoiseSpec};
use dinn_core::dinn::{evaluate, train, Checkpoint, TrainConfig};
use dinn_core::experiments::{run_experiment, StudyConfig, EXPERIMENT_IDS};
use dinn_core::integrate::{integrate, IntegratorConfig};
use dinn_core::models::{registry_get, registry_names, StateVector};
use dinn_core::Error;

#[derive(Parser)]
#[command(name = "dinn-lab", version, about = "Disease-informed neural networks and least-squares baselines")]
struct Cli {
    /// TOML file with settings for the chosen command; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a dataset from a registry model.
    Generate {
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        points: Option<usize>,
        /// Noise level, e.g. 0.05 for 5%.
        #[arg(long)]
        noise: Option<f64>,
        /// Compartments to keep only at t0, comma separated.
        #[arg(long, value_delimiter = ',')]
        hide: Vec<String>,
    },
    /// Train a network on a dataset written by `generate`.
    Train {
        /// Dataset CSV; its `.mask.json` sidecar must sit next to it.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        iterations: Option<usize>,
        /// Replace the table search ranges by a percentage range.
        #[arg(long)]
        range_pct: Option<f64>,
    },
    /// Least-squares fit of the learnable rates.
    FitBaseline {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Both)]
        method: Method,
    },
    /// Run one of the studies.
    Experiment {
        /// One of: range, noise, data, architecture, lr, missing, diseases, real.
        id: String,
        /// Use published-length training budgets.
        #[arg(long)]
        full_scale: bool,
    },
    /// Final size, peak and ratio of the SIR model, printed as JSON.
    Analytic {
        #[arg(long)]
        s0: f64,
        #[arg(long)]
        i0: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        alpha: f64,
    },
    /// Registry inspection.
    Models {
        #[command(subcommand)]
        action: ModelsAction,
    },
}

#[derive(Subcommand)]
enum ModelsAction {
    /// Names of the registry models.
    List,
    /// Print one model's descriptor as JSON.
    Show { name: String },
    /// Write every descriptor to `<out>/models/<name>.json`.
    Export,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    NelderMead,
    GaussNewton,
    Both,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct GenerateConfig {
    model: String,
    points: usize,
    noise: f64,
    noise_kind: NoiseKind,
    hide: Vec<String>,
    seed: u64,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            model: "covid_sird".into(),
            points: 100,
            noise: 0.0,
            noise_kind: NoiseKind::default(),
            hide: Vec::new(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct BaselineConfig {
    /// Starting point for the learnable rates; defaults to 0.1 each.
    x0: Option<Vec<f64>>,
    bounds: Option<(f64, f64)>,
    seed: u64,
    nelder_mead: NelderMeadConfig,
    gauss_newton: GaussNewtonConfig,
}

fn read_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        }
    }
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let stem = path
        .file_name()
        .and_then(|s| s.to_str())
        .map(|s| s.strip_suffix(".csv").unwrap_or(s))
        .context("dataset path has no file name")?;
    Dataset::load(dir, stem).with_context(|| format!("loading dataset {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

/// Writes one line to stdout; a closed pipe (e.g. `| head`) ends quietly.
fn emit(line: String) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{line}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => std::process::exit(0),
        r => Ok(r?),
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let cfg_path = cli.config.as_deref();
    match cli.command {
        Command::Generate { model, points, noise, hide } => {
            let mut g: GenerateConfig = read_config(cfg_path)?;
            if let Some(m) = model {
                g.model = m;
            }
            if let Some(n) = points {
                g.points = n;
            }
            if let Some(l) = noise {
                g.noise = l;
            }
            if !hide.is_empty() {
                g.hide = hide;
            }
            if let Some(s) = cli.seed {
                g.seed = s;
            }
            generate(&g, &cli.out)
        }
        Command::Train { data, iterations, range_pct } => {
            let mut t: TrainConfig = read_config(cfg_path)?;
            if let Some(s) = cli.seed {
                t.seed = s;
            }
            if let Some(n) = iterations {
                t.iterations = n;
            }
            if range_pct.is_some() {
                t.param_range_pct = range_pct;
            }
            train_cmd(&data, &t, &cli.out)
        }
        Command::FitBaseline { data, method } => {
            let mut b: BaselineConfig = read_config(cfg_path)?;
            if let Some(s) = cli.seed {
                b.seed = s;
            }
            fit_baseline(&data, method, &b, &cli.out)
        }
        Command::Experiment { id, full_scale } => {
            if !EXPERIMENT_IDS.contains(&id.as_str()) {
                bail!("unknown experiment `{id}`; valid: {}", EXPERIMENT_IDS.join(", "));
            }
            let mut s: StudyConfig = read_config(cfg_path)?;
            if let Some(seed) = cli.seed {
                s.seed = seed;
            }
            s.full_scale |= full_scale;
            let rep = run_experiment(&id, &s)?;
            let dir = cli.out.join(&id);
            rep.write(&dir)?;
            emit(dir.display().to_string())?;
            Ok(())
        }
        Command::Analytic { s0, i0, beta, alpha } => {
            emit(serde_json::to_string_pretty(&sir_summary(s0, i0, beta, alpha)?)?)?;
            Ok(())
        }
        Command::Models { action } => models(action, &cli.out),
    }
}

fn generate(g: &GenerateConfig, out: &Path) -> Result<()> {
    let m = registry_get(&g.model)?;
    let y0: StateVector = m.default_y0.clone().into();
    let noise = NoiseSpec { level: g.noise, seed: g.seed, kind: g.noise_kind };
    let mut ds = synthesize(&m, &m.true_params(), &y0, g.points, m.horizon, &noise)?;
    if !g.hide.is_empty() {
        let hide: Vec<&str> = g.hide.iter().map(String::as_str).collect();
        ds = mask_compartments(&ds, &hide)?;
    }
    ds.save(out, &m.name)?;
    let truth = integrate(&m, &m.true_params(), &y0, &ds.times, &IntegratorConfig::default())?;
    truth.save_csv(&out.join(format!("{}.truth.csv", m.name)))?;
    emit(out.join(format!("{}.csv", m.name)).display().to_string())?;
    Ok(())
}

fn train_cmd(data: &Path, cfg: &TrainConfig, out: &Path) -> Result<()> {
    let ds = load_dataset(data)?;
    let m = registry_get(&ds.model_name)?;
    let (dm, mut report) = train(&m, &ds, cfg)?;
    // score against the clean system when generate left one next to the data
    let truth_path = data.with_file_name(format!("{}.truth.csv", ds.model_name));
    if let Ok(f) = std::fs::File::open(&truth_path) {
        let truth = dinn_core::integrate::Trajectory::read_csv(&ds.model_name, f)?;
        if truth.times == ds.times {
            evaluate(&dm, &truth, &StateVector(truth.states[0].clone()), &mut report)?;
        }
    }
    std::fs::create_dir_all(out)?;
    Checkpoint::new(dm.clone(), cfg.clone()).save(&out.join("checkpoint.json"))?;
    write_json(&out.join("report.json"), &report)?;
    dm.predict_trajectory(&ds.times).save_csv(&out.join("prediction.csv"))?;
    emit(serde_json::to_string_pretty(&report.found_params)?)?;
    Ok(())
}

fn fit_baseline(data: &Path, method: Method, cfg: &BaselineConfig, out: &Path) -> Result<()> {
    let ds = load_dataset(data)?;
    let m = registry_get(&ds.model_name)?;
    let k = m.learnable_names().len();
    let x0 = cfg.x0.clone().unwrap_or_else(|| vec![0.1; k]);
    let bounds = vec![cfg.bounds.unwrap_or((0.0, 2.0)); k];
    let prob = LsqProblem::all_learnable(&m, &ds, &x0, &bounds)?;
    let mut reports = BTreeMap::new();
    if matches!(method, Method::NelderMead | Method::Both) {
        let r = nelder_mead(&prob, &cfg.nelder_mead)?;
        reports.insert("nelder_mead", prob.report("nelder_mead", &r));
    }
    if matches!(method, Method::GaussNewton | Method::Both) {
        let r = match gauss_newton(&prob, &cfg.gauss_newton) {
            Ok(r) => r,
            Err(Error::Stall { best_x, best_sse }) => {
                eprintln!("gauss-newton stalled; reporting the best point found");
                LsqResult { x: best_x, sse: best_sse, iterations: 0, evaluations: 0, converged: false, wall_time: 0.0 }
            }
            Err(e) => return Err(e.into()),
        };
        reports.insert("gauss_newton", prob.report("gauss_newton", &r));
    }
    std::fs::create_dir_all(out)?;
    write_json(&out.join("report.json"), &reports)?;
    let found: BTreeMap<_, _> = reports.iter().map(|(k, r)| (*k, &r.found_params)).collect();
    emit(serde_json::to_string_pretty(&found)?)?;
    Ok(())
}

fn models(action: ModelsAction, out: &Path) -> Result<()> {
    match action {
        ModelsAction::List => {
            for name in registry_names() {
                let m = registry_get(name)?;
                emit(format!("{name}\t{}", m.compartments.join(",")))?;
            }
        }
        ModelsAction::Show { name } => {
            emit(serde_json::to_string_pretty(&registry_get(&name)?.descriptor())?)?;
        }
        ModelsAction::Export => {
            let dir = out.join("models");
            std::fs::create_dir_all(&dir)?;
            for name in registry_names() {
                write_json(&dir.join(format!("{name}.json")), &registry_get(name)?.descriptor())?;
            }
            emit(dir.display().to_string())?;
        }
    }
    Ok(())
}
