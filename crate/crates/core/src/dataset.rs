//! Training sets: synthetic generation, compartment masking and real-data ingestion.

use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{integrate, IntegratorConfig, Trajectory};
use crate::models::{CompartmentModel, StateVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub model_name: String,
    pub compartments: Vec<String>,
    pub times: Vec<f64>,
    /// Rows per time, columns per compartment.
    pub observations: Vec<Vec<f64>>,
    /// Compartment observed at every time.
    pub mask: Vec<bool>,
    /// Compartment observed at the first time only.
    pub init_only: Vec<bool>,
    /// Per-compartment normalization constant.
    pub scale: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// `x (1 + level z)`.
    #[default]
    Multiplicative,
    /// `x + level max|x| z`, per compartment.
    AdditiveMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub level: f64,
    pub seed: u64,
    #[serde(default)]
    pub kind: NoiseKind,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self { level: 0.0, seed: 0, kind: NoiseKind::Multiplicative }
    }

    pub fn multiplicative(level: f64, seed: u64) -> Self {
        Self { level, seed, kind: NoiseKind::Multiplicative }
    }
}

/// Sidecar metadata written next to a dataset CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskMeta {
    pub model_name: String,
    pub hidden: Vec<String>,
    pub scale: Vec<f64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.compartments.len()
    }

    /// Builds a fully observed dataset from a trajectory.
    pub fn from_trajectory(tr: &Trajectory) -> Self {
        let dim = tr.compartments.len();
        let mut ds = Self {
            model_name: tr.model_name.clone(),
            compartments: tr.compartments.clone(),
            times: tr.times.clone(),
            observations: tr.states.clone(),
            mask: vec![true; dim],
            init_only: vec![false; dim],
            scale: vec![1.0; dim],
        };
        ds.recompute_scale();
        ds
    }

    pub fn to_trajectory(&self) -> Trajectory {
        Trajectory {
            model_name: self.model_name.clone(),
            compartments: self.compartments.clone(),
            times: self.times.clone(),
            states: self.observations.clone(),
        }
    }

    /// Observed compartments use max |obs|; an all-zero column falls back to 1.
    /// Hidden compartments borrow the largest observed scale (or their own
    /// initial magnitude if larger).
    pub fn recompute_scale(&mut self) {
        let dim = self.dim();
        let col_max =
            |c: usize, rows: usize| self.observations.iter().take(rows).fold(0.0f64, |m, r| m.max(r[c].abs()));
        let mut scale = vec![0.0; dim];
        for c in 0..dim {
            if self.mask[c] {
                let m = col_max(c, self.len());
                scale[c] = if m > 0.0 { m } else { 1.0 };
            }
        }
        let observed_max = (0..dim).filter(|&c| self.mask[c]).map(|c| scale[c]).fold(0.0f64, f64::max);
        for c in 0..dim {
            if !self.mask[c] {
                let own = col_max(c, 1);
                let s = own.max(observed_max);
                scale[c] = if s > 0.0 { s } else { 1.0 };
            }
        }
        self.scale = scale;
    }

    pub fn hidden(&self) -> Vec<String> {
        self.compartments.iter().zip(&self.mask).filter(|(_, m)| !**m).map(|(c, _)| c.clone()).collect()
    }

    /// Writes `t,<compartments...>`; hidden compartments after t0 are left empty.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,{}", self.compartments.join(","))?;
        for (i, (t, row)) in self.times.iter().zip(&self.observations).enumerate() {
            write!(w, "{t:.16e}")?;
            for (c, v) in row.iter().enumerate() {
                if self.mask[c] || (i == 0 && self.init_only[c]) {
                    write!(w, ",{v:.16e}")?;
                } else {
                    write!(w, ",")?;
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn mask_meta(&self) -> MaskMeta {
        MaskMeta { model_name: self.model_name.clone(), hidden: self.hidden(), scale: self.scale.clone() }
    }

    /// Writes `<stem>.csv` and `<stem>.mask.json` into `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let f = std::fs::File::create(dir.join(format!("{stem}.csv")))?;
        self.write_csv(std::io::BufWriter::new(f))?;
        let meta = serde_json::to_string_pretty(&self.mask_meta())?;
        std::fs::write(dir.join(format!("{stem}.mask.json")), meta)?;
        Ok(())
    }

    /// Reads a dataset written by [`Dataset::save`].
    pub fn load(dir: &Path, stem: &str) -> Result<Self> {
        let meta: MaskMeta = serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{stem}.mask.json")))?)?;
        let mut rdr = csv::Reader::from_path(dir.join(format!("{stem}.csv")))?;
        let compartments: Vec<String> = rdr.headers()?.iter().skip(1).map(str::to_string).collect();
        let mut times = Vec::new();
        let mut observations = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let parse = |s: &str| -> Result<f64> {
                if s.trim().is_empty() {
                    return Ok(f64::NAN);
                }
                s.trim().parse::<f64>().map_err(|e| Error::Ingestion { line, msg: format!("`{s}`: {e}") })
            };
            times.push(parse(&rec[0])?);
            observations.push(rec.iter().skip(1).map(parse).collect::<Result<Vec<_>>>()?);
        }
        let mask: Vec<bool> = compartments.iter().map(|c| !meta.hidden.contains(c)).collect();
        let init_only = mask.iter().map(|m| !m).collect();
        let ds =
            Self { model_name: meta.model_name, compartments, times, observations, mask, init_only, scale: meta.scale };
        Ok(ds)
    }
}

/// Uniform grid of `n_points` over `[0, horizon]`.
pub fn uniform_grid(n_points: usize, horizon: f64) -> Vec<f64> {
    (0..n_points).map(|i| horizon * i as f64 / (n_points - 1) as f64).collect()
}

/// Integrates the model on a uniform grid and perturbs it with seeded Gaussian noise.
pub fn synthesize(
    model: &CompartmentModel,
    p_true: &[f64],
    y0: &StateVector,
    n_points: usize,
    horizon: f64,
    noise: &NoiseSpec,
) -> Result<Dataset> {
    if n_points < 2 {
        return Err(Error::Config("a dataset needs at least 2 points".into()));
    }
    if !(noise.level >= 0.0) {
        return Err(Error::Config("noise level must be non-negative".into()));
    }
    let grid = uniform_grid(n_points, horizon);
    let tr = integrate(model, p_true, y0, &grid, &IntegratorConfig::default())?;
    let mut ds = Dataset::from_trajectory(&tr);
    if noise.level > 0.0 {
        apply_noise(&mut ds.observations, noise);
        ds.recompute_scale();
    }
    Ok(ds)
}

fn apply_noise(obs: &mut [Vec<f64>], noise: &NoiseSpec) {
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let dim = obs.first().map_or(0, Vec::len);
    let col_max: Vec<f64> = (0..dim).map(|c| obs.iter().fold(0.0f64, |m, r| m.max(r[c].abs()))).collect();
    for row in obs.iter_mut() {
        for (c, x) in row.iter_mut().enumerate() {
            let z: f64 = StandardNormal.sample(&mut rng);
            let noisy = match noise.kind {
                NoiseKind::Multiplicative => *x * (1.0 + noise.level * z),
                NoiseKind::AdditiveMax => *x + noise.level * col_max[c] * z,
            };
            *x = noisy.max(0.0);
        }
    }
}

/// Hides compartments: only their first observation is kept.
pub fn mask_compartments(ds: &Dataset, hidden: &[&str]) -> Result<Dataset> {
    let mut out = ds.clone();
    for name in hidden {
        let c = ds
            .compartments
            .iter()
            .position(|x| x == name)
            .ok_or_else(|| Error::UnknownCompartment(name.to_string()))?;
        out.mask[c] = false;
        out.init_only[c] = true;
    }
    if !hidden.is_empty() {
        out.recompute_scale();
    }
    Ok(out)
}

/// Reads `date,S,I,D,R` cumulative case counts and splits them at `train_cutoff` days.
///
/// Times are days since the first row. Training rows are thinned greedily to
/// at most one per `subsample_every` days; every row after the cutoff goes to
/// the holdout set.
pub fn ingest_real_csv(path: &Path, subsample_every: f64, train_cutoff: f64) -> Result<(Dataset, Dataset)> {
    let text = std::fs::read_to_string(path)?;
    ingest_real_str(&text, subsample_every, train_cutoff)
}

pub fn ingest_real_str(text: &str, subsample_every: f64, train_cutoff: f64) -> Result<(Dataset, Dataset)> {
    if !(subsample_every > 0.0) {
        return Err(Error::Config("subsample_every must be positive".into()));
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let expected = ["date", "S", "I", "D", "R"];
    if headers != expected {
        return Err(Error::Ingestion {
            line: 1,
            msg: format!("expected header {}, got {}", expected.join(","), headers.join(",")),
        });
    }
    let mut rows: Vec<(NaiveDate, Vec<f64>)> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Ingestion { line, msg: e.to_string() })?;
        if rec.len() != 5 {
            return Err(Error::Ingestion { line, msg: format!("expected 5 fields, got {}", rec.len()) });
        }
        let date = NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d")
            .map_err(|e| Error::Ingestion { line, msg: format!("bad date `{}`: {e}", &rec[0]) })?;
        let vals = (1..5)
            .map(|k| {
                rec[k]
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Ingestion { line, msg: format!("bad count `{}`", &rec[k]) })
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some((prev, _)) = rows.last() {
            if date <= *prev {
                return Err(Error::Ordering { line });
            }
        }
        rows.push((date, vals));
    }
    if rows.len() < 2 {
        return Err(Error::Ingestion { line: rows.len() + 1, msg: "need at least 2 data rows".into() });
    }
    let first = rows[0].0;
    let timed: Vec<(f64, Vec<f64>)> = rows.into_iter().map(|(d, v)| ((d - first).num_days() as f64, v)).collect();

    let mut train = Vec::new();
    let mut next_keep = 0.0;
    for (t, v) in timed.iter().filter(|(t, _)| *t <= train_cutoff) {
        if *t >= next_keep {
            train.push((*t, v.clone()));
            next_keep = t + subsample_every;
        }
    }
    let holdout: Vec<(f64, Vec<f64>)> = timed.iter().filter(|(t, _)| *t > train_cutoff).cloned().collect();

    let build = |rows: Vec<(f64, Vec<f64>)>| {
        let comps = expected[1..].iter().map(|s| s.to_string()).collect();
        let mut ds = Dataset {
            model_name: "covid_sird".into(),
            compartments: comps,
            times: rows.iter().map(|r| r.0).collect(),
            observations: rows.into_iter().map(|r| r.1).collect(),
            mask: vec![true; 4],
            init_only: vec![false; 4],
            scale: vec![1.0; 4],
        };
        ds.recompute_scale();
        ds
    };
    Ok((build(train), build(holdout)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::registry_get;
    use proptest::prelude::*;

    fn sird() -> (CompartmentModel, StateVector) {
        let m = registry_get("covid_sird").unwrap();
        let y0 = StateVector(m.default_y0.clone());
        (m, y0)
    }

    #[test]
    fn zero_noise_equals_integrator_output() {
        let (m, y0) = sird();
        let ds = synthesize(&m, &m.true_params(), &y0, 50, 100.0, &NoiseSpec::none()).unwrap();
        let tr = integrate(&m, &m.true_params(), &y0, &uniform_grid(50, 100.0), &IntegratorConfig::default()).unwrap();
        assert_eq!(ds.observations, tr.states);
        let unmasked = mask_compartments(&ds, &[]).unwrap();
        assert_eq!(unmasked, ds);
        assert_eq!(unmasked.to_trajectory(), tr);
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let (m, y0) = sird();
        let noise = NoiseSpec::multiplicative(0.2, 42);
        let a = synthesize(&m, &m.true_params(), &y0, 100, 100.0, &noise).unwrap();
        let b = synthesize(&m, &m.true_params(), &y0, 100, 100.0, &noise).unwrap();
        let bits = |d: &Dataset| d.observations.iter().flatten().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        let c = synthesize(&m, &m.true_params(), &y0, 100, 100.0, &NoiseSpec::multiplicative(0.2, 43)).unwrap();
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn multiplicative_noise_has_requested_relative_spread() {
        let m = registry_get("sir").unwrap();
        // no transmission, no recovery: every compartment is constant
        let p = vec![0.0, 0.0];
        let y0 = StateVector(vec![500.0, 10.0, 0.0]);
        let ds = synthesize(&m, &p, &y0, 10_000, 10.0, &NoiseSpec::multiplicative(0.10, 7)).unwrap();
        let col = ds.to_trajectory().column(0);
        let n = col.len() as f64;
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let cv = var.sqrt() / mean;
        assert!((cv - 0.10).abs() < 0.005, "cv = {cv}");
    }

    #[test]
    fn additive_noise_scales_with_column_max() {
        let m = registry_get("sir").unwrap();
        let y0 = StateVector(vec![500.0, 10.0, 0.0]);
        let noise = NoiseSpec { level: 0.1, seed: 1, kind: NoiseKind::AdditiveMax };
        let ds = synthesize(&m, &[0.0, 0.0], &y0, 5000, 10.0, &noise).unwrap();
        let col = ds.to_trajectory().column(0);
        let sd = (col.iter().map(|x| (x - 500.0).powi(2)).sum::<f64>() / col.len() as f64).sqrt();
        assert!((sd / 50.0 - 1.0).abs() < 0.05);
    }

    #[test]
    fn masking_keeps_initial_value_only() {
        let (m, y0) = sird();
        let ds = synthesize(&m, &m.true_params(), &y0, 20, 100.0, &NoiseSpec::none()).unwrap();
        let masked = mask_compartments(&ds, &["R"]).unwrap();
        let r = m.compartment_index("R").unwrap();
        assert!(!masked.mask[r] && masked.init_only[r]);
        assert_eq!(masked.observations, ds.observations);
        assert_eq!(masked.hidden(), vec!["R".to_string()]);
        assert!(masked.scale[r] > 0.0);

        let tb = registry_get("tuberculosis").unwrap();
        let ds = synthesize(&tb, &tb.true_params(), &StateVector(tb.default_y0.clone()), 20, 10.0, &NoiseSpec::none())
            .unwrap();
        let masked = mask_compartments(&ds, &["L", "I"]).unwrap();
        assert_eq!(masked.init_only.iter().filter(|x| **x).count(), 2);
        assert!(matches!(mask_compartments(&ds, &["Q"]), Err(Error::UnknownCompartment(_))));
    }

    #[test]
    fn save_and_load_preserve_mask() {
        let (m, y0) = sird();
        let ds = synthesize(&m, &m.true_params(), &y0, 10, 50.0, &NoiseSpec::none()).unwrap();
        let masked = mask_compartments(&ds, &["D"]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        masked.save(dir.path(), "train").unwrap();
        let back = Dataset::load(dir.path(), "train").unwrap();
        assert_eq!(back.mask, masked.mask);
        assert_eq!(back.scale, masked.scale);
        let d = m.compartment_index("D").unwrap();
        assert_eq!(back.observations[0][d], masked.observations[0][d]);
        assert!(back.observations[1][d].is_nan());
    }

    fn daily_csv(days: usize) -> String {
        let start = NaiveDate::from_ymd_opt(2020, 4, 12).unwrap();
        let mut s = String::from("date,S,I,D,R\n");
        for d in 0..days {
            let date = start + chrono::Duration::days(d as i64);
            s.push_str(&format!("{date},{},{},{},{}\n", 1000 - d, d, d / 10, d / 2));
        }
        s
    }

    #[test]
    fn published_window_splits_into_29_and_30() {
        // 2020-04-12 ..= 2021-02-16 is 311 daily rows (t = 0..=310)
        let text = daily_csv(311);
        assert!(text.trim_end().ends_with(&format!("2021-02-16,{},{},{},{}", 1000 - 310, 310, 31, 155)));
        let (train, hold) = ingest_real_str(&text, 10.0, 280.0).unwrap();
        assert_eq!(train.len(), 29);
        assert_eq!(train.times.first(), Some(&0.0));
        assert_eq!(train.times.last(), Some(&280.0));
        assert_eq!(hold.len(), 30);
        // thinning the whole window instead gives the 31 points of the original run
        let (all, _) = ingest_real_str(&text, 10.0, 310.0).unwrap();
        assert_eq!(all.len(), 32);
        let (to300, _) = ingest_real_str(&text, 10.0, 300.0).unwrap();
        assert_eq!(to300.len(), 31);
    }

    #[test]
    fn cutoff_past_end_gives_empty_holdout() {
        let (train, hold) = ingest_real_str(&daily_csv(40), 10.0, 1000.0).unwrap();
        assert_eq!(train.len(), 4);
        assert!(hold.is_empty());
    }

    #[test]
    fn ingestion_errors() {
        let one = "date,S,I,D,R\n2020-04-12,1,2,3,4\n";
        assert!(matches!(ingest_real_str(one, 10.0, 280.0), Err(Error::Ingestion { .. })));
        let bad = "date,S,I,D,R\n2020-04-12,1,2,3,4\n2020-04-13,1,x,3,4\n";
        assert!(matches!(ingest_real_str(bad, 10.0, 280.0), Err(Error::Ingestion { line: 3, .. })));
        let unordered = "date,S,I,D,R\n2020-04-12,1,2,3,4\n2020-04-11,1,2,3,4\n";
        assert!(matches!(ingest_real_str(unordered, 10.0, 280.0), Err(Error::Ordering { line: 3 })));
        assert!(matches!(ingest_real_csv(Path::new("/nonexistent/cases.csv"), 10.0, 280.0), Err(Error::Io(_))));
    }

    proptest! {
        #[test]
        fn normalized_observations_lie_in_unit_box(level in 0.0f64..0.3, seed in 0u64..1000, n in 2usize..60) {
            let (m, y0) = sird();
            let ds = synthesize(&m, &m.true_params(), &y0, n, 80.0, &NoiseSpec::multiplicative(level, seed)).unwrap();
            for row in &ds.observations {
                for (c, v) in row.iter().enumerate() {
                    prop_assert!((v / ds.scale[c]).abs() <= 1.0);
                }
            }
            for c in 0..ds.dim() {
                let m = ds.observations.iter().fold(0.0f64, |a, r| a.max(r[c].abs()));
                prop_assert!(m == ds.scale[c] || (m == 0.0 && ds.scale[c] == 1.0));
            }
        }
    }
}
