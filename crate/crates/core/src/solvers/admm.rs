use log::{debug, warn};

use super::{check_inputs, l2, stopping_check, DivergenceGuard, IterationRecord, SolverConfig, SolverResult};
use crate::error::Result;
use crate::linalg::{frobenius_norm, ComplexMatrix};
use crate::pauli::{MeasurementEnsemble, MeasurementRecord};
use crate::prox::{shrink_matrix, threshold_spectrum, trace_normalize};

/// State exposed to observers after each simple-ADMM iteration.
pub struct SimpleStep<'a> {
    pub iter: usize,
    /// `ρ^{k+1}` from the regularized normal equations.
    pub rho: &'a ComplexMatrix,
    /// `z^{k+1}`, the thresholded iterate.
    pub z: &'a ComplexMatrix,
    pub u_prev: &'a ComplexMatrix,
    pub u: &'a ComplexMatrix,
    pub record: &'a IterationRecord,
}

/// State exposed to observers after each robust-ADMM iteration.
pub struct RobustStep<'a> {
    pub iter: usize,
    pub rho: &'a ComplexMatrix,
    pub s: &'a ComplexMatrix,
    pub u_prev: &'a [f64],
    pub u: &'a [f64],
    /// `y − A vec(ρ^{k+1}) − A vec(S^{k+1})`.
    pub residual: &'a [f64],
    pub tau_prime: f64,
    pub record: &'a IterationRecord,
}

fn residual(y: &[f64], a: &[f64]) -> Vec<f64> {
    y.iter().zip(a).map(|(y, a)| y - a).collect()
}

fn l1(m: &ComplexMatrix) -> f64 {
    m.as_slice().iter().map(|z| z.norm()).sum()
}

/// ADMM for `min ‖y − A vec(ρ)‖² + I_C(z)` subject to `ρ = z`, with eigenvalue
/// shrinkage in the `z` step.
///
/// The `ρ` step solves `(A*A + λI) ρ = A*y + λ(z − u)` through Woodbury using
/// `A A* = c²d·I`, so each iteration costs two sparse Pauli passes and one
/// eigendecomposition. Convergence is tested on `‖ρ − z‖_F` and `‖z^k − z^{k−1}‖_F`.
pub fn solve_admm_simple(ens: &MeasurementEnsemble, y: &MeasurementRecord, cfg: &SolverConfig) -> Result<SolverResult> {
    solve_admm_simple_observed(ens, y, cfg, |_| {})
}

pub fn solve_admm_simple_observed(
    ens: &MeasurementEnsemble,
    y: &MeasurementRecord,
    cfg: &SolverConfig,
    mut observe: impl FnMut(&SimpleStep<'_>),
) -> Result<SolverResult> {
    check_inputs(ens, y, cfg)?;
    let d = ens.dim();
    let lam = cfg.lambda;
    let tau = cfg.tau();
    let g = ens.gram_scale();
    let y_norm = y.norm();
    let aty = ens.adjoint(&y.y)?;

    let mut z = ComplexMatrix::zeros(d, d);
    let mut u = ComplexMatrix::zeros(d, d);
    let mut history = Vec::new();
    let mut guard = DivergenceGuard::new();
    let mut converged = false;

    for iter in 1..=cfg.max_iters {
        let w = &aty + &(&(&z - &u) * lam);
        let atw = ens.adjoint(&ens.forward_real_part(&w)?)?;
        let rho = &(&w - &(&atw * (1.0 / (g + lam)))) * (1.0 / lam);
        let (z_new, _, kept) = threshold_spectrum(&(&rho + &u), tau, cfg.rank_cap)?;
        let diff = &rho - &z_new;
        let u_new = &u + &diff;

        let record = IterationRecord {
            iter,
            primal: frobenius_norm(&diff),
            d_rho: z_new.frobenius_distance(&z),
            d_s: 0.0,
            measurement_residual: l2(&residual(&y.y, &ens.forward_real_part(&z_new)?)),
            objective: kept.iter().sum(),
        };
        guard.check(&record, &history)?;
        observe(&SimpleStep {
            iter,
            rho: &rho,
            z: &z_new,
            u_prev: &u,
            u: &u_new,
            record: &record,
        });
        let done = stopping_check(&record, cfg, y_norm);
        history.push(record);
        z = z_new;
        u = u_new;
        if done {
            converged = true;
            break;
        }
    }
    debug!("admm_simple: {} iterations, converged={converged}", history.len());

    Ok(SolverResult {
        rho_hat: trace_normalize(&z, cfg.trace_mode)?,
        s_hat: None,
        iterations: history.len(),
        converged,
        history,
    })
}

/// Outlier threshold used when the config leaves `tau_prime` unset.
pub fn default_tau_prime(tau: f64, d: usize) -> f64 {
    2.0 * tau / (d as f64).sqrt()
}

/// ADMM for `min ‖ρ‖_* + I_C(ρ) + ‖S‖₁` subject to `y = A vec(ρ + S)`.
///
/// Each iteration takes a least-squares step for `ρ` followed by eigenvalue
/// thresholding, a least-squares step for `S` followed by a single entrywise
/// shrink, and a dual step on the measurement residual.
///
/// Without an explicit `tau_prime` the outlier threshold is `2τ/√d`. Smaller
/// values let `S` absorb the low-rank part of the state.
pub fn solve_admm_robust(ens: &MeasurementEnsemble, y: &MeasurementRecord, cfg: &SolverConfig) -> Result<SolverResult> {
    solve_admm_robust_observed(ens, y, cfg, |_| {})
}

pub fn solve_admm_robust_observed(
    ens: &MeasurementEnsemble,
    y: &MeasurementRecord,
    cfg: &SolverConfig,
    mut observe: impl FnMut(&RobustStep<'_>),
) -> Result<SolverResult> {
    check_inputs(ens, y, cfg)?;
    let d = ens.dim();
    let m = ens.len();
    let tau = cfg.tau();
    let tau_prime = cfg.tau_prime.unwrap_or_else(|| default_tau_prime(tau, d));
    if tau_prime == 0.0 {
        warn!("tau_prime = 0: the outlier estimate will not be sparsified");
    }
    let y_norm = y.norm();

    let mut rho = ComplexMatrix::zeros(d, d);
    let mut s = ComplexMatrix::zeros(d, d);
    let mut u = vec![0.0; m];
    let mut history = Vec::new();
    let mut guard = DivergenceGuard::new();
    let mut converged = false;

    for iter in 1..=cfg.max_iters {
        // Step 1: ρ from the residual left by S, then eigenvalue thresholding.
        let a_s = ens.forward_real_part(&s)?;
        let v: Vec<f64> = (0..m).map(|k| y.y[k] + u[k] - a_s[k]).collect();
        let rho1 = ens.pseudoinverse_apply(&v)?;
        let (rho_new, _, kept) = threshold_spectrum(&rho1, tau, cfg.rank_cap)?;

        // Step 2: S from the residual left by the new ρ, one shrink pass.
        let a_rho = ens.forward_real_part(&rho_new)?;
        let v: Vec<f64> = (0..m).map(|k| y.y[k] + u[k] - a_rho[k]).collect();
        let s1 = ens.pseudoinverse_apply(&v)?;
        let s_new = shrink_matrix(&s1, tau_prime)?;

        // Step 3: dual ascent on the measurement residual.
        let a_s_new = ens.forward_real_part(&s_new)?;
        let res: Vec<f64> = (0..m).map(|k| y.y[k] - a_rho[k] - a_s_new[k]).collect();
        let u_new: Vec<f64> = u.iter().zip(&res).map(|(u, r)| u + r).collect();

        let primal = l2(&res);
        let record = IterationRecord {
            iter,
            primal,
            d_rho: rho_new.frobenius_distance(&rho),
            d_s: s_new.frobenius_distance(&s),
            measurement_residual: primal,
            objective: kept.iter().sum::<f64>() + l1(&s_new),
        };
        guard.check(&record, &history)?;
        observe(&RobustStep {
            iter,
            rho: &rho_new,
            s: &s_new,
            u_prev: &u,
            u: &u_new,
            residual: &res,
            tau_prime,
            record: &record,
        });
        let done = stopping_check(&record, cfg, y_norm);
        history.push(record);
        rho = rho_new;
        s = s_new;
        u = u_new;
        if done {
            converged = true;
            break;
        }
    }
    debug!("admm_robust: {} iterations, converged={converged}", history.len());

    Ok(SolverResult {
        rho_hat: trace_normalize(&rho, cfg.trace_mode)?,
        s_hat: Some(s),
        iterations: history.len(),
        converged,
        history,
    })
}
