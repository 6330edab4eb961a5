//! Fixtures shared by the kernel benchmarks.

use qst_core::pauli::{sample_ensemble, MeasurementEnsemble};
use qst_core::states::{random_density, simulate_measurements, DensityMatrix, NoiseModel, SimulatedData};
use qst_core::Result;

pub struct Instance {
    pub ensemble: MeasurementEnsemble,
    pub truth: DensityMatrix,
    pub data: SimulatedData,
}

/// Rank-`r` state on `q` qubits observed at rate `eta` with the given noise.
pub fn instance(q: usize, r: usize, eta: f64, noise: &NoiseModel, seed: u64) -> Result<Instance> {
    let d = 1usize << q;
    let m = ((eta * (d * d) as f64).round() as usize).max(1);
    let ensemble = sample_ensemble(q, m, seed)?;
    let truth = random_density(d, r, seed ^ 0x5eed)?;
    let data = simulate_measurements(&ensemble, &truth, noise, seed.wrapping_add(1))?;
    Ok(Instance { ensemble, truth, data })
}
