//! Reconstruction algorithms: projected least squares and two ADMM variants.
//!
//! All solvers start from zero iterates and report one [`IterationRecord`]
//! per iteration. The returned estimate is trace-normalized according to
//! [`SolverConfig::trace_mode`].

mod admm;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::pauli::{MeasurementEnsemble, MeasurementRecord};
use crate::prox::{project_psd, trace_normalize, TraceMode};

pub use admm::{
    solve_admm_robust, solve_admm_robust_observed, solve_admm_simple, solve_admm_simple_observed,
    default_tau_prime, RobustStep, SimpleStep,
};

/// Iterations with primal residual above `DIVERGENCE_FACTOR` times the first
/// one before a run is declared divergent.
pub const DIVERGENCE_PATIENCE: usize = 10;
pub const DIVERGENCE_FACTOR: f64 = 10.0;

fn default_lambda() -> f64 {
    1.0
}
fn default_max_iters() -> usize {
    100
}
fn default_eps_primal() -> f64 {
    1e-4
}
fn default_eps_step() -> f64 {
    1e-6
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Augmented-Lagrangian weight.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Eigenvalue shrink; `None` means `1/lambda`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    /// Outlier shrink for the robust solver; `None` means `2·tau/√d`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_prime: Option<f64>,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_eps_primal")]
    pub eps_primal: f64,
    #[serde(default = "default_eps_step")]
    pub eps_rho: f64,
    #[serde(default = "default_eps_step")]
    pub eps_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_cap: Option<usize>,
    #[serde(default)]
    pub trace_mode: TraceMode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lambda: default_lambda(),
            tau: None,
            tau_prime: None,
            max_iters: default_max_iters(),
            eps_primal: default_eps_primal(),
            eps_rho: default_eps_step(),
            eps_s: default_eps_step(),
            rank_cap: None,
            trace_mode: TraceMode::Scale,
        }
    }
}

impl SolverConfig {
    pub fn tau(&self) -> f64 {
        self.tau.unwrap_or(1.0 / self.lambda)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::param(format!("{name} must be finite and > 0, got {v}")))
            }
        };
        let nonneg = |name: &str, v: Option<f64>| match v {
            Some(v) if !(v.is_finite() && v >= 0.0) => {
                Err(Error::param(format!("{name} must be finite and ≥ 0, got {v}")))
            }
            _ => Ok(()),
        };
        positive("lambda", self.lambda)?;
        positive("eps_primal", self.eps_primal)?;
        positive("eps_rho", self.eps_rho)?;
        positive("eps_s", self.eps_s)?;
        nonneg("tau", self.tau)?;
        nonneg("tau_prime", self.tau_prime)?;
        if self.max_iters == 0 {
            return Err(Error::param("max_iters must be at least 1"));
        }
        if self.rank_cap == Some(0) {
            return Err(Error::param("rank_cap must be at least 1"));
        }
        Ok(())
    }

    fn check_rank(&self, d: usize) -> Result<()> {
        match self.rank_cap {
            Some(r) if r > d => Err(Error::param(format!("rank_cap {r} exceeds dimension {d}"))),
            _ => Ok(()),
        }
    }
}

/// Diagnostics for one iteration.
///
/// `primal` is the constraint residual the dual variable integrates:
/// `‖ρ − z‖_F` for the simple solver, `‖y − A vec(ρ + S)‖₂` for the robust one,
/// and the maximum agent disagreement for consensus. `d_rho` and `d_s` are
/// the step lengths of the primal blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub primal: f64,
    pub d_rho: f64,
    pub d_s: f64,
    /// `‖y − A vec(estimate)‖₂`.
    pub measurement_residual: f64,
    /// Nuclear norm of the thresholded iterate, plus `‖S‖₁` for the robust solver.
    pub objective: f64,
}

impl IterationRecord {
    fn is_finite(&self) -> bool {
        [self.primal, self.d_rho, self.d_s, self.measurement_residual, self.objective]
            .iter()
            .all(|v| v.is_finite())
    }
}

#[derive(Clone, Debug)]
pub struct SolverResult {
    pub rho_hat: ComplexMatrix,
    pub s_hat: Option<ComplexMatrix>,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<IterationRecord>,
}

/// `primal² ≤ ε₁‖y‖₂`, `d_rho ≤ ε₂` and `d_s ≤ ε₃`, all inclusive.
pub fn stopping_check(record: &IterationRecord, cfg: &SolverConfig, y_norm: f64) -> bool {
    record.primal * record.primal <= cfg.eps_primal * y_norm
        && record.d_rho <= cfg.eps_rho
        && record.d_s <= cfg.eps_s
}

/// Tracks the primal residual for runaway growth.
pub(crate) struct DivergenceGuard {
    first: Option<f64>,
    streak: usize,
}

impl DivergenceGuard {
    pub(crate) fn new() -> Self {
        DivergenceGuard { first: None, streak: 0 }
    }

    pub(crate) fn check(&mut self, record: &IterationRecord, history: &[IterationRecord]) -> Result<()> {
        let fail = |reason: String| Error::Divergence {
            iteration: record.iter,
            reason,
            history: history.to_vec(),
        };
        if !record.is_finite() {
            return Err(fail("non-finite residual".into()));
        }
        let first = *self.first.get_or_insert(record.primal);
        if record.primal > DIVERGENCE_FACTOR * first {
            self.streak += 1;
            if self.streak >= DIVERGENCE_PATIENCE {
                return Err(fail(format!(
                    "primal residual {:e} stayed above {}x its initial value {:e} for {} iterations",
                    record.primal, DIVERGENCE_FACTOR, first, DIVERGENCE_PATIENCE
                )));
            }
        } else {
            self.streak = 0;
        }
        Ok(())
    }
}

pub(crate) fn check_inputs(ens: &MeasurementEnsemble, y: &MeasurementRecord, cfg: &SolverConfig) -> Result<()> {
    cfg.validate()?;
    cfg.check_rank(ens.dim())?;
    y.check_against(ens)
}

pub(crate) fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Pseudoinverse, PSD projection, then trace normalization.
pub fn solve_least_squares(ens: &MeasurementEnsemble, y: &MeasurementRecord, cfg: &SolverConfig) -> Result<SolverResult> {
    check_inputs(ens, y, cfg)?;
    let raw = ens.pseudoinverse_apply(&y.y)?;
    let projected = match cfg.rank_cap {
        Some(r) => crate::prox::project_rank(&raw, r)?,
        None => project_psd(&raw)?,
    };
    let fit = ens.forward_real_part(&projected)?;
    let record = IterationRecord {
        iter: 1,
        primal: 0.0,
        d_rho: 0.0,
        d_s: 0.0,
        measurement_residual: l2(&y.y.iter().zip(&fit).map(|(a, b)| a - b).collect::<Vec<_>>()),
        objective: crate::linalg::trace(&projected)?.re,
    };
    Ok(SolverResult {
        rho_hat: trace_normalize(&projected, cfg.trace_mode)?,
        s_hat: None,
        iterations: 1,
        converged: true,
        history: vec![record],
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Ls,
    AdmmSimple,
    AdmmRobust,
}

impl SolverKind {
    pub const ALL: [SolverKind; 3] = [SolverKind::Ls, SolverKind::AdmmSimple, SolverKind::AdmmRobust];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Ls => "ls",
            SolverKind::AdmmSimple => "admm_simple",
            SolverKind::AdmmRobust => "admm_robust",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SolverKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::param(format!("unknown solver {s:?} (expected ls, admm_simple or admm_robust)")))
    }
}

pub fn solve(kind: SolverKind, ens: &MeasurementEnsemble, y: &MeasurementRecord, cfg: &SolverConfig) -> Result<SolverResult> {
    match kind {
        SolverKind::Ls => solve_least_squares(ens, y, cfg),
        SolverKind::AdmmSimple => solve_admm_simple(ens, y, cfg),
        SolverKind::AdmmRobust => solve_admm_robust(ens, y, cfg),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iter: usize,
    pub primal: f64,
    pub d_rho: f64,
    pub d_s: f64,
}

/// JSON summary of a solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub solver: SolverKind,
    pub converged: bool,
    pub iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<f64>,
    pub history: Vec<HistoryEntry>,
    pub config: SolverConfig,
    pub ensemble_seed: Option<u64>,
    pub rho_hat: ComplexMatrix,
}

impl SolveReport {
    pub fn new(
        solver: SolverKind,
        result: &SolverResult,
        cfg: &SolverConfig,
        ens: &MeasurementEnsemble,
        error: Option<f64>,
    ) -> Self {
        SolveReport {
            solver,
            converged: result.converged,
            iterations: result.iterations,
            error,
            history: result
                .history
                .iter()
                .map(|r| HistoryEntry {
                    iter: r.iter,
                    primal: r.primal,
                    d_rho: r.d_rho,
                    d_s: r.d_s,
                })
                .collect(),
            config: cfg.clone(),
            ensemble_seed: ens.seed(),
            rho_hat: result.rho_hat.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::sample_ensemble;
    use crate::states::{random_density, reconstruction_error, validate_state};

    fn record(primal: f64, d_rho: f64, d_s: f64) -> IterationRecord {
        IterationRecord {
            iter: 2,
            primal,
            d_rho,
            d_s,
            measurement_residual: 0.0,
            objective: 0.0,
        }
    }

    #[test]
    fn stopping_check_cases() {
        let cfg = SolverConfig::default();
        assert!(stopping_check(&record(0.0, 0.0, 0.0), &cfg, 1.0));
        assert!(!stopping_check(&record(1.0, 0.0, 0.0), &cfg, 1.0));
        // primal² = 1e-4 = ε₁·‖y‖ exactly
        assert!(stopping_check(&record(1e-2, 1e-6, 1e-6), &cfg, 1.0));
        assert!(!stopping_check(&record(0.0, 2e-6, 0.0), &cfg, 1.0));
        assert!(!stopping_check(&record(0.0, 0.0, 2e-6), &cfg, 1.0));
    }

    #[test]
    fn config_defaults_and_validation() {
        let cfg: SolverConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, SolverConfig::default());
        assert_eq!(cfg.tau(), 1.0);
        let cfg: SolverConfig = serde_json::from_str(r#"{"lambda": 4.0, "trace_mode": "none"}"#).unwrap();
        assert_eq!(cfg.tau(), 0.25);
        assert_eq!(cfg.trace_mode, TraceMode::None);
        assert!(serde_json::from_str::<SolverConfig>(r#"{"lamda": 1}"#).is_err());
        for bad in [
            SolverConfig { lambda: 0.0, ..Default::default() },
            SolverConfig { eps_rho: -1.0, ..Default::default() },
            SolverConfig { tau: Some(-0.5), ..Default::default() },
            SolverConfig { max_iters: 0, ..Default::default() },
            SolverConfig { rank_cap: Some(0), ..Default::default() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Parameter(_))));
        }
    }

    #[test]
    fn divergence_guard() {
        let mut guard = DivergenceGuard::new();
        let mut history = Vec::new();
        for (k, primal) in [1.0, 5.0, 11.0, 20.0, 0.5].into_iter().enumerate() {
            let r = IterationRecord { iter: k + 1, ..record(primal, 0.0, 0.0) };
            guard.check(&r, &history).unwrap();
            history.push(r);
        }
        for k in 0..DIVERGENCE_PATIENCE {
            let r = IterationRecord { iter: 6 + k, ..record(10.5, 0.0, 0.0) };
            let out = guard.check(&r, &history);
            if k + 1 < DIVERGENCE_PATIENCE {
                out.unwrap();
                history.push(r);
            } else {
                match out {
                    Err(Error::Divergence { iteration, history: h, .. }) => {
                        assert_eq!(iteration, 6 + k);
                        assert_eq!(h.len(), history.len());
                    }
                    other => panic!("expected divergence, got {other:?}"),
                }
            }
        }
        let mut guard = DivergenceGuard::new();
        let nan = record(f64::NAN, 0.0, 0.0);
        assert!(matches!(guard.check(&nan, &[]), Err(Error::Divergence { .. })));
    }

    #[test]
    fn solver_kind_names_round_trip() {
        for k in SolverKind::ALL {
            assert_eq!(k.name().parse::<SolverKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{}\"", k.name()));
        }
        assert!("cvx".parse::<SolverKind>().is_err());
    }

    #[test]
    fn least_squares_exact_at_full_sampling() {
        let ens = sample_ensemble(3, 64, 11).unwrap();
        let truth = random_density(8, 2, 12).unwrap();
        let y = ens.measure(truth.matrix()).unwrap();
        let res = solve_least_squares(&ens, &y, &SolverConfig::default()).unwrap();
        assert!(reconstruction_error(&truth, &res.rho_hat).unwrap() <= 1e-12);
        assert!(validate_state(&res.rho_hat, 1e-6).unwrap().is_valid());
    }

    #[test]
    fn least_squares_zero_input() {
        let ens = sample_ensemble(2, 8, 1).unwrap();
        let y = ens.record(vec![0.0; 8]).unwrap();
        let none = SolverConfig { trace_mode: TraceMode::None, ..Default::default() };
        assert_eq!(solve_least_squares(&ens, &y, &none).unwrap().rho_hat.max_abs(), 0.0);
        assert!(matches!(
            solve_least_squares(&ens, &y, &SolverConfig::default()),
            Err(Error::DegenerateState { .. })
        ));
    }

    #[test]
    fn mismatched_record_is_rejected() {
        let ens = sample_ensemble(2, 8, 1).unwrap();
        let other = sample_ensemble(2, 8, 2).unwrap();
        let y = other.record(vec![0.1; 8]).unwrap();
        for kind in SolverKind::ALL {
            assert!(matches!(solve(kind, &ens, &y, &SolverConfig::default()), Err(Error::Dimension(_))));
        }
    }

    #[test]
    fn report_json_shape() {
        let ens = sample_ensemble(2, 16, 3).unwrap();
        let truth = random_density(4, 1, 4).unwrap();
        let y = ens.measure(truth.matrix()).unwrap();
        let cfg = SolverConfig::default();
        let res = solve_admm_simple(&ens, &y, &cfg).unwrap();
        let report = SolveReport::new(SolverKind::AdmmSimple, &res, &cfg, &ens, Some(0.0));
        let v: serde_json::Value = serde_json::from_str(&report.to_json().unwrap()).unwrap();
        for key in ["converged", "iterations", "error", "history", "config", "ensemble_seed"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["ensemble_seed"], 3);
        let h = &v["history"][0];
        for key in ["iter", "primal", "d_rho", "d_s"] {
            assert!(h.get(key).is_some());
        }
        let back: SolveReport = serde_json::from_value(v).unwrap();
        assert_eq!(back, report);
    }
}
