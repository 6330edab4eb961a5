//! Compressive quantum state tomography.
//!
//! A rank-`r` density matrix on `q` qubits is observed through `m` random
//! Pauli expectation values `y = A vec(ρ) + e (+ outliers)` and recovered
//! with projected least squares, a simple ADMM scheme, or a robust ADMM
//! scheme that also separates a sparse outlier matrix. A consensus variant
//! spreads the measurements across simulated agents, and [`experiment`]
//! runs seeded measurement-rate sweeps over all of them.
//!
//! ```
//! use qst_core::{pauli, solvers, states};
//!
//! let ens = pauli::sample_ensemble(3, 64, 1)?;
//! let truth = states::random_density(8, 1, 2)?;
//! let y = ens.measure(truth.matrix())?;
//! let res = solvers::solve_admm_simple(&ens, &y, &solvers::SolverConfig::default())?;
//! assert!(states::reconstruction_error(&truth, &res.rho_hat)? < 1e-6);
//! # Ok::<(), qst_core::Error>(())
//! ```

pub mod consensus;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod pauli;
pub mod prox;
pub mod seed;
pub mod solvers;
pub mod states;

pub use consensus::{consensus_solve, shard_measurements, AgentShard, Topology};
pub use error::{Error, Result};
pub use experiment::{default_measurement_budget, emit_csv, run_experiment, ExperimentSpec, SweepResult};
pub use linalg::{hermitian_eig, ComplexMatrix, EigenDecomposition};
pub use num_complex::Complex64;
pub use pauli::{sample_ensemble, MeasurementEnsemble, MeasurementRecord, Pauli, PauliWord};
pub use prox::{eig_threshold, project_psd, project_rank, shrink, trace_normalize, TraceMode};
pub use solvers::{
    solve, solve_admm_robust, solve_admm_simple, solve_least_squares, IterationRecord, SolverConfig, SolverKind,
    SolverResult,
};
pub use states::{random_density, reconstruction_error, DensityMatrix, NoiseModel, OutlierMatrix};

#[cfg(test)]
pub(crate) mod testutil {
    use num_complex::Complex64;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    use crate::linalg::ComplexMatrix;

    pub fn random_hermitian(n: usize, rng: &mut impl Rng) -> ComplexMatrix {
        crate::states::random_hermitian_perturbation(n, 1.0, rng)
    }

    /// `G G*` for an `n×r` complex Gaussian `G`.
    pub fn random_psd(n: usize, r: usize, rng: &mut impl Rng) -> ComplexMatrix {
        let g: Vec<Complex64> = (0..n * r)
            .map(|_| Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
            .collect();
        let mut out = ComplexMatrix::zeros(n, n);
        for j in 0..n {
            for i in 0..n {
                out[(i, j)] = (0..r).map(|k| g[k * n + i] * g[k * n + j].conj()).sum();
            }
        }
        out
    }
}
