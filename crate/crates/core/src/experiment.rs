//! Measurement-rate sweeps: many seeded trials per solver and rate, reduced
//! to mean/median/std of the clamped reconstruction error.

use std::io::Write;
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{sample_ensemble, MAX_QUBITS};
use crate::seed::{self, Stream};
use crate::solvers::{solve, SolverConfig, SolverKind};
use crate::states::{random_density, reconstruction_error, simulate_measurements, NoiseModel};

fn default_trials() -> usize {
    20
}

fn default_eta_grid() -> Vec<f64> {
    (1..=10).map(|k| k as f64 / 10.0).collect()
}

fn default_solvers() -> Vec<SolverKind> {
    SolverKind::ALL.to_vec()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub q: usize,
    pub r: usize,
    /// Measurement rates `M/d²`, strictly increasing in `(0, 1]`.
    #[serde(default = "default_eta_grid")]
    pub eta_grid: Vec<f64>,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_solvers")]
    pub solvers: Vec<SolverKind>,
    #[serde(default)]
    pub solver_config: SolverConfig,
}

impl ExperimentSpec {
    /// Gaussian noise of relative std 0.001, no outliers.
    pub fn gaussian_sweep(q: usize, r: usize, master_seed: u64) -> Self {
        ExperimentSpec {
            q,
            r,
            eta_grid: default_eta_grid(),
            noise: NoiseModel::gaussian(1e-3),
            trials: default_trials(),
            master_seed,
            solvers: vec![SolverKind::Ls, SolverKind::AdmmSimple],
            solver_config: SolverConfig::default(),
        }
    }

    /// Gaussian noise plus `0.01·d²` outliers of relative std 0.1.
    pub fn outlier_sweep(q: usize, r: usize, master_seed: u64) -> Self {
        ExperimentSpec {
            noise: NoiseModel::gaussian(1e-3).with_outliers(0.01, 0.1),
            solvers: vec![SolverKind::Ls, SolverKind::AdmmRobust],
            ..Self::gaussian_sweep(q, r, master_seed)
        }
    }

    pub fn dim(&self) -> usize {
        1 << self.q
    }

    /// `M = round(η·d²)`.
    pub fn measurements(&self, eta: f64) -> usize {
        let d2 = (self.dim() * self.dim()) as f64;
        (eta * d2).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let spec = |msg: String| Err(Error::Spec(msg));
        if self.q == 0 || self.q > MAX_QUBITS {
            return spec(format!("q must be in 1..={MAX_QUBITS}, got {}", self.q));
        }
        let d = self.dim();
        if self.r == 0 || self.r > d {
            return spec(format!("r must be in 1..={d}, got {}", self.r));
        }
        if self.trials == 0 {
            return spec("trials must be at least 1".into());
        }
        if self.solvers.is_empty() {
            return spec("no solvers requested".into());
        }
        let mut seen = self.solvers.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.solvers.len() {
            return spec("solver list contains duplicates".into());
        }
        for pair in self.eta_grid.windows(2) {
            if pair[0].partial_cmp(&pair[1]) != Some(std::cmp::Ordering::Less) {
                return spec(format!("eta grid must be strictly increasing ({} then {})", pair[0], pair[1]));
            }
        }
        for &eta in &self.eta_grid {
            if !(eta > 0.0 && eta <= 1.0) {
                return spec(format!("eta {eta} outside (0, 1]"));
            }
            let m = self.measurements(eta);
            if m == 0 || m > d * d {
                return spec(format!("eta {eta} gives infeasible M = {m}"));
            }
        }
        self.noise.validate().map_err(|e| Error::Spec(e.to_string()))?;
        self.solver_config.validate().map_err(|e| Error::Spec(e.to_string()))?;
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(s).map_err(|e| Error::Spec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Seeds for one trial at one rate.
///
/// The ground-truth state depends on the trial only, so all rates in a trial
/// reconstruct the same state. Ensemble and noise seeds depend on both.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrialSeeds {
    pub state: u64,
    pub ensemble: u64,
    pub noise: u64,
}

pub fn trial_seeds(master_seed: u64, trial: usize, eta_index: usize) -> TrialSeeds {
    let trial_seed = seed::derive(master_seed, trial as u64);
    let point = seed::derive(trial_seed, eta_index as u64);
    TrialSeeds {
        state: seed::stream_seed(trial_seed, Stream::State),
        ensemble: seed::stream_seed(point, Stream::Ensemble),
        noise: point,
    }
}

/// Errors of every requested solver for one trial, indexed `[eta][solver]`.
fn run_trial(spec: &ExperimentSpec, trial: usize) -> Vec<Vec<(f64, bool)>> {
    let d = spec.dim();
    let state_seed = trial_seeds(spec.master_seed, trial, 0).state;
    let truth = match random_density(d, spec.r, state_seed) {
        Ok(t) => t,
        Err(e) => {
            warn!("trial {trial}: state generation failed: {e}");
            return vec![vec![(1.0, false); spec.solvers.len()]; spec.eta_grid.len()];
        }
    };
    spec.eta_grid
        .iter()
        .enumerate()
        .map(|(j, &eta)| {
            let seeds = trial_seeds(spec.master_seed, trial, j);
            let data = sample_ensemble(spec.q, spec.measurements(eta), seeds.ensemble).and_then(|ens| {
                let data = simulate_measurements(&ens, &truth, &spec.noise, seeds.noise)?;
                Ok((ens, data))
            });
            let (ens, data) = match data {
                Ok(v) => v,
                Err(e) => {
                    warn!("trial {trial}, eta {eta}: data generation failed: {e}");
                    return vec![(1.0, false); spec.solvers.len()];
                }
            };
            spec.solvers
                .iter()
                .map(|&kind| {
                    match solve(kind, &ens, &data.record, &spec.solver_config)
                        .and_then(|res| reconstruction_error(&truth, &res.rho_hat))
                    {
                        Ok(err) => (err, true),
                        Err(e) => {
                            warn!("trial {trial}, eta {eta}, {kind}: {e}; recording error 1");
                            (1.0, false)
                        }
                    }
                })
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub solver: SolverKind,
    pub eta: f64,
    pub m: usize,
    pub mean_error: f64,
    pub median_error: f64,
    /// Sample standard deviation (`n − 1` denominator); 0 for a single trial.
    pub std_error: f64,
    pub trials: usize,
    /// Trials whose solve or data generation failed and were recorded as 1.
    pub failures: usize,
    /// Per-trial errors in trial order.
    pub errors: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub spec: ExperimentSpec,
    /// Sorted by solver name, then eta.
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn row(&self, solver: SolverKind, eta: f64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.solver == solver && r.eta == eta)
    }

    /// Median errors for one solver in eta order.
    pub fn medians(&self, solver: SolverKind) -> Vec<f64> {
        self.rows.iter().filter(|r| r.solver == solver).map(|r| r.median_error).collect()
    }
}

fn summarize(errors: &[f64]) -> (f64, f64, f64) {
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let std = if n > 1 {
        (sorted.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    (mean, median, std)
}

/// Run every trial and reduce per (solver, eta). Trials run on the rayon pool;
/// the result does not depend on scheduling.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<SweepResult> {
    spec.validate()?;
    let per_trial: Vec<Vec<Vec<(f64, bool)>>> = (0..spec.trials).into_par_iter().map(|t| run_trial(spec, t)).collect();

    let mut rows = Vec::new();
    for (j, &eta) in spec.eta_grid.iter().enumerate() {
        for (k, &solver) in spec.solvers.iter().enumerate() {
            let outcomes: Vec<(f64, bool)> = per_trial.iter().map(|t| t[j][k]).collect();
            let errors: Vec<f64> = outcomes.iter().map(|o| o.0.min(1.0)).collect();
            let (mean_error, median_error, std_error) = summarize(&errors);
            rows.push(SweepRow {
                solver,
                eta,
                m: spec.measurements(eta),
                mean_error,
                median_error,
                std_error,
                trials: spec.trials,
                failures: outcomes.iter().filter(|o| !o.1).count(),
                errors,
            });
        }
    }
    rows.sort_by(|a, b| a.solver.name().cmp(b.solver.name()).then(a.eta.total_cmp(&b.eta)));
    Ok(SweepResult { spec: spec.clone(), rows })
}

/// `min(d², ⌈4·r·d·log₂ d⌉)`: a quick-start measurement count.
pub fn default_measurement_budget(q: usize, r: usize) -> usize {
    let d = 1usize << q;
    let heuristic = (4.0 * r as f64 * d as f64 * q as f64).ceil() as usize;
    heuristic.min(d * d)
}

pub const CSV_HEADER: [&str; 7] = ["solver", "eta", "M", "mean_error", "median_error", "std_error", "trials"];

pub fn write_csv(result: &SweepResult, w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for row in &result.rows {
        out.write_record([
            row.solver.name().to_string(),
            format!("{:.9e}", row.eta),
            row.m.to_string(),
            format!("{:.9e}", row.mean_error),
            format!("{:.9e}", row.median_error),
            format!("{:.9e}", row.std_error),
            row.trials.to_string(),
        ])?;
    }
    out.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn emit_csv(result: &SweepResult, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(result, std::io::BufWriter::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        Error::Csv(c) => match c.into_kind() {
            csv::ErrorKind::Io(source) => Error::io(path, source),
            other => Error::Format(format!("{}: {other:?}", path.display())),
        },
        other => other,
    })
}
