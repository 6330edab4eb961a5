//! Ground-truth states, noise injection and the reconstruction error metric.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{frobenius_norm, hermitian_eig, trace, ComplexMatrix};
use crate::pauli::{MeasurementEnsemble, MeasurementRecord};
use crate::seed::{self, Stream};

pub const DENSITY_HERMITIAN_TOL: f64 = 1e-10;
pub const DENSITY_PSD_TOL: f64 = 1e-9;
pub const DENSITY_TRACE_TOL: f64 = 1e-9;

/// A Hermitian, positive semidefinite, unit-trace matrix.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates the density-matrix invariants at the crate's fixed tolerances.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let report = validate_state(&matrix, DENSITY_PSD_TOL)?;
        if report.hermitian_deviation > DENSITY_HERMITIAN_TOL {
            return Err(Error::NotHermitian {
                residue: report.hermitian_deviation,
                tolerance: DENSITY_HERMITIAN_TOL,
            });
        }
        if report.min_eigenvalue < -DENSITY_PSD_TOL {
            return Err(Error::param(format!(
                "density matrix has negative eigenvalue {:e}",
                report.min_eigenvalue
            )));
        }
        if report.trace_deviation > DENSITY_TRACE_TOL {
            return Err(Error::param(format!(
                "density matrix trace deviates from 1 by {:e}",
                report.trace_deviation
            )));
        }
        Ok(DensityMatrix { matrix })
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }
}

impl AsRef<ComplexMatrix> for DensityMatrix {
    fn as_ref(&self) -> &ComplexMatrix {
        &self.matrix
    }
}

/// Normalized Wishart state `ΨΨ*/tr(ΨΨ*)` with `Ψ` a `d×r` matrix of
/// i.i.d. standard complex Gaussians (independent N(0,1) real and imaginary parts).
pub fn random_density(d: usize, r: usize, seed: u64) -> Result<DensityMatrix> {
    if d == 0 || r == 0 || r > d {
        return Err(Error::param(format!("rank must satisfy 1 ≤ r ≤ d, got r = {r}, d = {d}")));
    }
    let mut rng = seed::rng(seed);
    let psi: Vec<Complex64> = (0..d * r)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im)
        })
        .collect();
    // ΨΨ*, column-major Ψ with column k = psi[k*d..(k+1)*d]
    let mut rho = ComplexMatrix::zeros(d, d);
    for k in 0..r {
        let col = &psi[k * d..(k + 1) * d];
        for j in 0..d {
            let cj = col[j].conj();
            for i in 0..=j {
                rho[(i, j)] += col[i] * cj;
            }
        }
    }
    for j in 0..d {
        rho[(j, j)].im = 0.0;
        for i in 0..j {
            rho[(j, i)] = rho[(i, j)].conj();
        }
    }
    let t = trace(&rho)?.re;
    DensityMatrix::new(rho.scale(1.0 / t))
}

/// A sparse corruption matrix `S`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutlierMatrix {
    matrix: ComplexMatrix,
    support_size: usize,
}

impl OutlierMatrix {
    pub fn new(matrix: ComplexMatrix) -> Self {
        let support_size = matrix.nonzero_count();
        OutlierMatrix {
            matrix,
            support_size,
        }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn support_size(&self) -> usize {
        self.support_size
    }
}

/// How outlier values are drawn and placed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutlierOptions {
    /// Draw complex values (independent real and imaginary parts) instead of real ones.
    #[serde(default)]
    pub complex: bool,
    /// Mirror each entry to its conjugate-transpose position so `S` is Hermitian.
    #[serde(default)]
    pub symmetric: bool,
}

/// `count` nonzero real Gaussian entries at distinct uniformly random positions.
pub fn random_outliers(d: usize, count: usize, sigma: f64, seed: u64) -> Result<OutlierMatrix> {
    random_outliers_with(d, count, sigma, seed, OutlierOptions::default())
}

pub fn random_outliers_with(
    d: usize,
    count: usize,
    sigma: f64,
    seed: u64,
    opts: OutlierOptions,
) -> Result<OutlierMatrix> {
    if d == 0 {
        return Err(Error::param("dimension must be positive"));
    }
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::param(format!("outlier sigma must be finite and ≥ 0, got {sigma}")));
    }
    let total = (d * d) as u64;
    if count as u64 > total {
        return Err(Error::Capacity {
            requested: count as u64,
            available: total,
        });
    }
    let mut rng = seed::rng(seed);
    let positions = seed::sample_without_replacement(&mut rng, total, count);
    let mut s = ComplexMatrix::zeros(d, d);
    for pos in positions {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = if opts.complex {
            StandardNormal.sample(&mut rng)
        } else {
            0.0
        };
        let z = Complex64::new(re, im) * sigma;
        // column-major linear position
        let (i, j) = ((pos as usize) % d, (pos as usize) / d);
        if opts.symmetric {
            if i == j {
                s[(i, i)] += Complex64::new(z.re, 0.0);
            } else {
                s[(i, j)] += z;
                s[(j, i)] += z.conj();
            }
        } else {
            s[(i, j)] = z;
        }
    }
    Ok(OutlierMatrix::new(s))
}

/// Noise model, all magnitudes relative to `‖ρ*‖_F`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Standard deviation of the additive measurement noise `e_i`.
    #[serde(default)]
    pub gaussian_sigma_rel: f64,
    /// Fraction of the `d²` entries carrying an outlier.
    #[serde(default)]
    pub outlier_fraction: f64,
    /// Standard deviation of each outlier value.
    #[serde(default)]
    pub outlier_sigma_rel: f64,
    #[serde(default, flatten)]
    pub outliers: OutlierOptions,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel::noiseless()
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        NoiseModel {
            gaussian_sigma_rel: 0.0,
            outlier_fraction: 0.0,
            outlier_sigma_rel: 0.0,
            outliers: OutlierOptions::default(),
        }
    }

    pub fn gaussian(sigma_rel: f64) -> Self {
        NoiseModel {
            gaussian_sigma_rel: sigma_rel,
            ..Self::noiseless()
        }
    }

    pub fn with_outliers(mut self, fraction: f64, sigma_rel: f64) -> Self {
        self.outlier_fraction = fraction;
        self.outlier_sigma_rel = sigma_rel;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("gaussian_sigma_rel", self.gaussian_sigma_rel),
            ("outlier_fraction", self.outlier_fraction),
            ("outlier_sigma_rel", self.outlier_sigma_rel),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::param(format!("{name} must be finite and ≥ 0, got {v}")));
            }
        }
        if self.outlier_fraction > 1.0 {
            return Err(Error::param("outlier_fraction must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Number of outlier entries for dimension `d`.
    pub fn outlier_count(&self, d: usize) -> usize {
        (self.outlier_fraction * (d * d) as f64).round() as usize
    }

    pub fn has_outliers(&self) -> bool {
        self.outlier_fraction > 0.0
    }
}

/// Simulated data `y = c·Re tr(O_i(ρ + S)) + e`.
#[derive(Clone, Debug)]
pub struct SimulatedData {
    pub record: MeasurementRecord,
    pub outliers: Option<OutlierMatrix>,
}

/// Draws noise and outliers from the `Gaussian` and `Outliers` streams of `seed`.
///
/// A non-Hermitian `S` enters through its Hermitian part, which is what an
/// expectation value of a Hermitian observable can see.
pub fn simulate_measurements(
    ens: &MeasurementEnsemble,
    truth: &DensityMatrix,
    noise: &NoiseModel,
    seed: u64,
) -> Result<SimulatedData> {
    noise.validate()?;
    let d = truth.dim();
    if ens.dim() != d {
        return Err(Error::dim(format!(
            "ensemble dimension {} vs state dimension {d}",
            ens.dim()
        )));
    }
    let scale = frobenius_norm(truth.matrix());
    let outliers = if noise.has_outliers() {
        Some(random_outliers_with(
            d,
            noise.outlier_count(d),
            noise.outlier_sigma_rel * scale,
            seed::stream_seed(seed, Stream::Outliers),
            noise.outliers,
        )?)
    } else {
        None
    };
    let mut y = match &outliers {
        Some(s) => ens.forward_real_part(&(truth.matrix() + s.matrix()))?,
        None => ens.forward(truth.matrix())?,
    };
    if noise.gaussian_sigma_rel > 0.0 {
        let sigma = noise.gaussian_sigma_rel * scale;
        let mut rng = seed::rng(seed::stream_seed(seed, Stream::Gaussian));
        for v in &mut y {
            let e: f64 = StandardNormal.sample(&mut rng);
            *v += sigma * e;
        }
    }
    Ok(SimulatedData {
        record: MeasurementRecord::new(ens, y)?,
        outliers,
    })
}

/// `‖ρ* − ρ̂‖²_F / ‖ρ*‖²_F`, clamped to at most 1.
pub fn reconstruction_error(truth: &DensityMatrix, estimate: &ComplexMatrix) -> Result<f64> {
    relative_error(truth.matrix(), estimate)
}

/// The same metric against an arbitrary reference matrix.
pub fn relative_error(reference: &ComplexMatrix, estimate: &ComplexMatrix) -> Result<f64> {
    if reference.rows() != estimate.rows() || reference.cols() != estimate.cols() {
        return Err(Error::dim(format!(
            "reference {}x{} vs estimate {}x{}",
            reference.rows(),
            reference.cols(),
            estimate.rows(),
            estimate.cols()
        )));
    }
    let num = reference.frobenius_distance(estimate).powi(2);
    let den = frobenius_norm(reference).powi(2);
    if den == 0.0 {
        return Ok(if num == 0.0 { 0.0 } else { 1.0 });
    }
    let e = num / den;
    Ok(if e.is_nan() { 1.0 } else { e.min(1.0) })
}

/// Quantum-state diagnostics for a square matrix.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub hermitian_deviation: f64,
    /// Smallest eigenvalue of the Hermitian part.
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// `|tr(m) − 1|`.
    pub trace_deviation: f64,
    /// Eigenvalues above `tol · λ_max`.
    pub rank: usize,
    pub tolerance: f64,
}

impl ValidationReport {
    pub fn is_hermitian(&self) -> bool {
        self.hermitian_deviation <= self.tolerance
    }

    pub fn is_psd(&self) -> bool {
        self.min_eigenvalue >= -self.tolerance
    }

    pub fn has_unit_trace(&self) -> bool {
        self.trace_deviation <= self.tolerance
    }

    pub fn is_valid(&self) -> bool {
        self.is_hermitian() && self.is_psd() && self.has_unit_trace()
    }
}

pub fn validate_state(m: &ComplexMatrix, tol: f64) -> Result<ValidationReport> {
    if !m.is_square() {
        return Err(Error::dim(format!(
            "state must be square, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let hermitian_deviation = m.hermitian_deviation();
    let eig = hermitian_eig(&m.hermitian_part()?)?;
    let min_eigenvalue = eig.eigenvalues[0];
    let max_eigenvalue = *eig.eigenvalues.last().expect("non-empty");
    let cutoff = tol * max_eigenvalue;
    let rank = if max_eigenvalue > 0.0 {
        eig.eigenvalues.iter().filter(|&&l| l > cutoff).count()
    } else {
        0
    };
    let t = trace(m)?;
    let trace_deviation = (t - Complex64::new(1.0, 0.0)).norm();
    Ok(ValidationReport {
        hermitian_deviation,
        min_eigenvalue,
        max_eigenvalue,
        trace_deviation,
        rank,
        tolerance: tol,
    })
}

/// A stored ground-truth state with its generation metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct StateFixture {
    pub r: usize,
    pub seed: u64,
    pub state: DensityMatrix,
}

const BINARY_MAGIC: &[u8; 8] = b"QSTRHO01";

#[derive(Serialize, Deserialize)]
struct FixtureJson {
    d: usize,
    r: usize,
    seed: u64,
    /// Column-major `[re, im]` pairs.
    entries: Vec<[f64; 2]>,
}

impl StateFixture {
    pub fn generate(d: usize, r: usize, seed: u64) -> Result<Self> {
        Ok(StateFixture {
            r,
            seed,
            state: random_density(d, r, seed)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.state.dim()
    }

    /// Binary layout (little-endian): magic `QSTRHO01`, `u64 d`, `u64 r`,
    /// `u64 seed`, then `d²` pairs of `f64 (re, im)` in column-major order.
    pub fn write_binary(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(BINARY_MAGIC)?;
        for v in [self.dim() as u64, self.r as u64, self.seed] {
            w.write_all(&v.to_le_bytes())?;
        }
        for z in self.state.matrix().as_slice() {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(mut r: impl Read) -> Result<Self> {
        let fmt_err = |e: std::io::Error| Error::Format(format!("truncated state file: {e}"));
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(fmt_err)?;
        if &magic != BINARY_MAGIC {
            return Err(Error::Format("not a state file (bad magic)".into()));
        }
        let mut word = [0u8; 8];
        let mut next = |r: &mut dyn Read| -> Result<[u8; 8]> {
            r.read_exact(&mut word).map_err(fmt_err)?;
            Ok(word)
        };
        let d = u64::from_le_bytes(next(&mut r)?) as usize;
        let rank = u64::from_le_bytes(next(&mut r)?) as usize;
        let seed = u64::from_le_bytes(next(&mut r)?);
        if d == 0 || d > (1 << crate::pauli::MAX_QUBITS) {
            return Err(Error::Format(format!("implausible dimension {d}")));
        }
        let mut data = Vec::with_capacity(d * d);
        for _ in 0..d * d {
            let re = f64::from_le_bytes(next(&mut r)?);
            let im = f64::from_le_bytes(next(&mut r)?);
            data.push(Complex64::new(re, im));
        }
        let state = DensityMatrix::new(ComplexMatrix::from_col_major(d, d, data)?)?;
        Ok(StateFixture {
            r: rank,
            seed,
            state,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let repr = FixtureJson {
            d: self.dim(),
            r: self.r,
            seed: self.seed,
            entries: self
                .state
                .matrix()
                .as_slice()
                .iter()
                .map(|z| [z.re, z.im])
                .collect(),
        };
        Ok(serde_json::to_string(&repr)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let repr: FixtureJson = serde_json::from_str(s)?;
        let data = repr
            .entries
            .iter()
            .map(|&[re, im]| Complex64::new(re, im))
            .collect();
        Ok(StateFixture {
            r: repr.r,
            seed: repr.seed,
            state: DensityMatrix::new(ComplexMatrix::from_col_major(repr.d, repr.d, data)?)?,
        })
    }

    /// Writes JSON for `.json` paths and the binary layout otherwise.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        if is_json(path) {
            w.write_all(self.to_json()?.as_bytes())
                .map_err(|e| Error::io(path, e))?;
        } else {
            self.write_binary(&mut w).map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = BufReader::new(file);
        if is_json(path) {
            let mut s = String::new();
            reader
                .read_to_string(&mut s)
                .map_err(|e| Error::io(path, e))?;
            Self::from_json(&s)
        } else {
            Self::read_binary(reader)
        }
    }
}

fn is_json(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

/// Hermitian matrix with independent Gaussian entries of std `scale` (real diagonal).
pub fn random_hermitian_perturbation(d: usize, scale: f64, rng: &mut impl Rng) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(d, d);
    for j in 0..d {
        for i in 0..=j {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = if i == j { 0.0 } else { StandardNormal.sample(rng) };
            let z = Complex64::new(re, im) * scale;
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    m
}
