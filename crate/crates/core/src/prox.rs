//! Shrinkage and projections onto the Hermitian PSD cone.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, trace, ComplexMatrix, EigenDecomposition};

/// Trace below which [`trace_normalize`] refuses to rescale.
pub const DEGENERATE_TRACE: f64 = 1e-12;

fn check_tau(tau: f64) -> Result<()> {
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::param(format!("shrink threshold must be finite and ≥ 0, got {tau}")));
    }
    Ok(())
}

/// Soft threshold `sgn(x)·max(|x| − τ, 0)`.
#[inline]
pub fn soft_threshold(x: f64, tau: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

/// Complex soft threshold `(z/|z|)·max(|z| − τ, 0)`, zero at `z = 0`.
#[inline]
pub fn soft_threshold_complex(z: Complex64, tau: f64) -> Complex64 {
    let mag = z.norm();
    if mag <= tau || mag == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        z * ((mag - tau) / mag)
    }
}

pub fn shrink(x: &[f64], tau: f64) -> Result<Vec<f64>> {
    check_tau(tau)?;
    Ok(x.iter().map(|&v| soft_threshold(v, tau)).collect())
}

pub fn shrink_complex(x: &[Complex64], tau: f64) -> Result<Vec<Complex64>> {
    check_tau(tau)?;
    Ok(x.iter().map(|&z| soft_threshold_complex(z, tau)).collect())
}

/// Entrywise complex shrink of a matrix.
pub fn shrink_matrix(m: &ComplexMatrix, tau: f64) -> Result<ComplexMatrix> {
    check_tau(tau)?;
    Ok(m.map(|z| soft_threshold_complex(z, tau)))
}

/// Symmetrize, eigendecompose, clamp at zero, soft-threshold by `tau`, and
/// optionally keep only the `rank` largest survivors.
///
/// Returns the reconstructed matrix together with the decomposition and the
/// kept spectrum so callers can report the nuclear norm without a second
/// eigensolve.
pub fn threshold_spectrum(
    m: &ComplexMatrix,
    tau: f64,
    rank: Option<usize>,
) -> Result<(ComplexMatrix, EigenDecomposition, Vec<f64>)> {
    check_tau(tau)?;
    if !m.is_square() {
        return Err(Error::dim(format!(
            "spectral projection needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let n = m.rows();
    if let Some(r) = rank {
        if r == 0 || r > n {
            return Err(Error::param(format!("rank cap must satisfy 1 ≤ r ≤ {n}, got {r}")));
        }
    }
    let h = m.hermitian_part()?;
    let eig = hermitian_eig(&h)?;
    // clamp first, then shrink
    let mut kept: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&l| soft_threshold(l.max(0.0), tau))
        .collect();
    if let Some(r) = rank {
        // Ascending order: the r largest sit at the end. Among ties the
        // higher column index wins, which is deterministic.
        for v in kept.iter_mut().take(n - r) {
            *v = 0.0;
        }
    }
    let out = eig.reconstruct_with(|k, _| kept[k]);
    Ok((out, eig, kept))
}

/// Positive eigenvalue thresholding `V·S_τ(Σ⁺)·V*` of the Hermitian part of `m`.
pub fn eig_threshold(m: &ComplexMatrix, tau: f64) -> Result<ComplexMatrix> {
    threshold_spectrum(m, tau, None).map(|(out, _, _)| out)
}

/// Frobenius-nearest Hermitian PSD matrix.
pub fn project_psd(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    eig_threshold(m, 0.0)
}

/// Nearest PSD matrix of rank at most `r`.
pub fn project_rank(m: &ComplexMatrix, r: usize) -> Result<ComplexMatrix> {
    threshold_spectrum(m, 0.0, Some(r)).map(|(out, _, _)| out)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceMode {
    /// Divide by the trace.
    #[default]
    Scale,
    /// Leave the matrix as is.
    None,
}

pub fn trace_normalize(m: &ComplexMatrix, mode: TraceMode) -> Result<ComplexMatrix> {
    match mode {
        TraceMode::None => Ok(m.clone()),
        TraceMode::Scale => {
            let t = trace(m)?;
            if t.re <= DEGENERATE_TRACE || !t.re.is_finite() {
                return Err(Error::DegenerateState { trace: t.re });
            }
            Ok(m.scale(1.0 / t.re))
        }
    }
}
