//! Pauli-word sampling operators.
//!
//! A Pauli word `P = P_1 ⊗ … ⊗ P_q` has exactly one nonzero entry per row:
//! `P[i, i ⊕ x] = i^{n_Y} · (−1)^{popcount((i ⊕ x) & z)}` where `x` marks the
//! positions holding X or Y, `z` those holding Y or Z, and `n_Y` counts the
//! Y letters. The first letter of a word acts on the most significant bit.
//!
//! This makes the forward map `y_k = c·tr(O_k x)` and its adjoint
//! `c·Σ_k v_k O_k` cost O(m·d) without ever forming the `m × d²` matrix `A`.
//! Distinct words are orthogonal with `tr(O_i O_j) = d·δ_ij`, hence
//! `A A* = c²d·I_m` and the pseudoinverse is `A⁺ = A*/(c²d)`.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{frobenius_norm, kron, ComplexMatrix};
use crate::seed;

/// Largest supported qubit count (dense d×d matrices beyond this are impractical).
pub const MAX_QUBITS: usize = 10;

/// Relative bound on `|Im tr(O x)|` accepted by [`MeasurementEnsemble::forward`].
pub const IMAGINARY_RESIDUE_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    /// Base-4 digit used in word indices.
    pub fn digit(self) -> u64 {
        self as u64
    }

    pub fn from_digit(d: u64) -> Pauli {
        Pauli::ALL[(d & 3) as usize]
    }

    pub fn to_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Option<Pauli> {
        match c.to_ascii_uppercase() {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn matrix(self) -> ComplexMatrix {
        let z = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        let rows = match self {
            Pauli::I => [[one, z], [z, one]],
            Pauli::X => [[z, one], [one, z]],
            Pauli::Y => [[z, -i], [i, z]],
            Pauli::Z => [[one, z], [z, -one]],
        };
        ComplexMatrix::from_rows(&rows).expect("2x2 literal")
    }
}

/// A length-`q` sequence of Pauli letters.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliWord(Vec<Pauli>);

impl PauliWord {
    pub fn new(letters: Vec<Pauli>) -> Result<Self> {
        if letters.is_empty() {
            return Err(Error::param("a Pauli word needs at least one letter"));
        }
        if letters.len() > MAX_QUBITS {
            return Err(Error::param(format!(
                "words longer than {MAX_QUBITS} qubits are not supported"
            )));
        }
        Ok(PauliWord(letters))
    }

    /// Word with base-4 index `index` (first letter most significant).
    pub fn from_index(index: u64, q: usize) -> Result<Self> {
        if q == 0 || q > MAX_QUBITS {
            return Err(Error::param(format!("qubit count {q} outside 1..={MAX_QUBITS}")));
        }
        if index >= 4u64.pow(q as u32) {
            return Err(Error::param(format!("word index {index} out of range for q = {q}")));
        }
        let letters = (0..q)
            .map(|k| Pauli::from_digit(index >> (2 * (q - 1 - k))))
            .collect();
        Ok(PauliWord(letters))
    }

    pub fn index(&self) -> u64 {
        self.0.iter().fold(0, |acc, p| acc * 4 + p.digit())
    }

    pub fn letters(&self) -> &[Pauli] {
        &self.0
    }

    pub fn qubits(&self) -> usize {
        self.0.len()
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|&p| p == Pauli::I)
    }

    pub fn matrix(&self) -> ComplexMatrix {
        pauli_word_matrix(self)
    }

    fn sparse(&self) -> SparseWord {
        let q = self.0.len();
        let mut x_mask = 0usize;
        let mut z_mask = 0usize;
        let mut y_count = 0u32;
        for (k, &p) in self.0.iter().enumerate() {
            let bit = 1usize << (q - 1 - k);
            match p {
                Pauli::I => {}
                Pauli::X => x_mask |= bit,
                Pauli::Y => {
                    x_mask |= bit;
                    z_mask |= bit;
                    y_count += 1;
                }
                Pauli::Z => z_mask |= bit,
            }
        }
        let global = match y_count % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
        SparseWord {
            x_mask,
            z_mask,
            global,
        }
    }
}

impl fmt::Display for PauliWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.0 {
            write!(f, "{}", p.to_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliWord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let letters = s
            .chars()
            .map(|c| Pauli::from_char(c).ok_or_else(|| Error::Format(format!("bad Pauli letter {c:?} in {s:?}"))))
            .collect::<Result<Vec<_>>>()?;
        PauliWord::new(letters)
    }
}

/// Dense `d×d` matrix of a Pauli word: the Kronecker product of its letters.
pub fn pauli_word_matrix(w: &PauliWord) -> ComplexMatrix {
    let mut out = ComplexMatrix::identity(1);
    for p in w.letters() {
        out = kron(&out, &p.matrix());
    }
    out
}

/// Permutation-with-phase form of a Pauli word.
#[derive(Clone, Copy, Debug)]
struct SparseWord {
    x_mask: usize,
    z_mask: usize,
    global: Complex64,
}

impl SparseWord {
    /// Column index and value of the single nonzero in `row`.
    #[inline]
    fn entry(&self, row: usize) -> (usize, Complex64) {
        let col = row ^ self.x_mask;
        let v = if (col & self.z_mask).count_ones() % 2 == 1 {
            -self.global
        } else {
            self.global
        };
        (col, v)
    }

    /// `tr(P x)` for column-major `x`.
    #[inline]
    fn trace_product(&self, x: &ComplexMatrix) -> Complex64 {
        let d = x.rows();
        let data = x.as_slice();
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..d {
            let (j, p) = self.entry(i);
            // tr(P x) = Σ_i P[i,j] x[j,i]
            acc += p * data[i * d + j];
        }
        acc
    }
}

/// The sampling operator `A`: `m` distinct Pauli words and the normalization `c`.
#[derive(Clone, Debug)]
pub struct MeasurementEnsemble {
    q: usize,
    d: usize,
    seed: Option<u64>,
    words: Vec<PauliWord>,
    c: f64,
    sparse: Vec<SparseWord>,
    fingerprint: u64,
}

impl PartialEq for MeasurementEnsemble {
    fn eq(&self, other: &Self) -> bool {
        self.q == other.q && self.words == other.words && self.c == other.c && self.seed == other.seed
    }
}

impl MeasurementEnsemble {
    /// Builds an ensemble with the default normalization `c = d/√m`.
    pub fn from_words(q: usize, words: Vec<PauliWord>, seed: Option<u64>) -> Result<Self> {
        let d = 1usize << q.min(63);
        let c = d as f64 / (words.len().max(1) as f64).sqrt();
        Self::with_normalization(q, words, c, seed)
    }

    /// Builds an ensemble with an explicit normalization constant (used for
    /// measurement shards that keep the parent's `c`).
    pub fn with_normalization(
        q: usize,
        words: Vec<PauliWord>,
        c: f64,
        seed: Option<u64>,
    ) -> Result<Self> {
        if q == 0 || q > MAX_QUBITS {
            return Err(Error::param(format!("qubit count {q} outside 1..={MAX_QUBITS}")));
        }
        let d = 1usize << q;
        let capacity = (d * d) as u64;
        if words.is_empty() {
            return Err(Error::param("an ensemble needs at least one word"));
        }
        if words.len() as u64 > capacity {
            return Err(Error::Capacity {
                requested: words.len() as u64,
                available: capacity,
            });
        }
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::param(format!("normalization constant must be positive, got {c}")));
        }
        let mut seen = HashSet::with_capacity(words.len());
        for w in &words {
            if w.qubits() != q {
                return Err(Error::dim(format!("word {w} has length {}, expected {q}", w.qubits())));
            }
            if !seen.insert(w.index()) {
                return Err(Error::param(format!("duplicate Pauli word {w}")));
            }
        }
        let sparse = words.iter().map(PauliWord::sparse).collect();
        let fingerprint = fingerprint(q, &words, c);
        Ok(MeasurementEnsemble {
            q,
            d,
            seed,
            words,
            c,
            sparse,
            fingerprint,
        })
    }

    pub fn qubits(&self) -> usize {
        self.q
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[PauliWord] {
        &self.words
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Normalization constant `c`.
    pub fn normalization(&self) -> f64 {
        self.c
    }

    /// `c²d`, the scalar with `A A* = c²d·I_m`.
    pub fn gram_scale(&self) -> f64 {
        self.c * self.c * self.d as f64
    }

    /// Stable identifier of the word list and normalization.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Sub-ensemble of the given measurement indices, keeping this ensemble's `c`.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let words = indices
            .iter()
            .map(|&i| {
                self.words
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::dim(format!("measurement index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::with_normalization(self.q, words, self.c, self.seed)
    }

    fn check_square(&self, x: &ComplexMatrix) -> Result<()> {
        if x.rows() != self.d || x.cols() != self.d {
            return Err(Error::dim(format!(
                "expected {d}x{d} matrix, got {}x{}",
                x.rows(),
                x.cols(),
                d = self.d
            )));
        }
        Ok(())
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.len() {
            return Err(Error::dim(format!(
                "expected vector of length {}, got {}",
                self.len(),
                v.len()
            )));
        }
        Ok(())
    }

    /// `y_k = c·tr(O_k* x)` for Hermitian `x`.
    ///
    /// Fails with [`Error::NotHermitian`] if any trace has an imaginary part
    /// above `1e-9·‖x‖_F`.
    pub fn forward(&self, x: &ComplexMatrix) -> Result<Vec<f64>> {
        self.check_square(x)?;
        let tol = IMAGINARY_RESIDUE_TOLERANCE * frobenius_norm(x);
        let mut out = Vec::with_capacity(self.len());
        for w in &self.sparse {
            let t = w.trace_product(x);
            if t.im.abs() > tol {
                return Err(Error::NotHermitian {
                    residue: t.im.abs(),
                    tolerance: tol,
                });
            }
            out.push(self.c * t.re);
        }
        Ok(out)
    }

    /// `y_k = c·Re tr(O_k* x)` for arbitrary `x`; equals `forward` applied to
    /// the Hermitian part `(x + x*)/2`.
    pub fn forward_real_part(&self, x: &ComplexMatrix) -> Result<Vec<f64>> {
        self.check_square(x)?;
        Ok(self
            .sparse
            .iter()
            .map(|w| self.c * w.trace_product(x).re)
            .collect())
    }

    /// `A* v = c·Σ_k v_k O_k`.
    pub fn adjoint(&self, v: &[f64]) -> Result<ComplexMatrix> {
        self.check_len(v)?;
        let d = self.d;
        let mut out = ComplexMatrix::zeros(d, d);
        let data = out.as_mut_slice();
        for (w, &vk) in self.sparse.iter().zip(v) {
            if vk == 0.0 {
                continue;
            }
            let s = self.c * vk;
            for i in 0..d {
                let (j, p) = w.entry(i);
                data[j * d + i] += p * s;
            }
        }
        Ok(out)
    }

    /// Minimum-norm least-squares inverse `A⁺ v = A*(A A*)⁻¹ v = A* v / (c²d)`.
    pub fn pseudoinverse_apply(&self, v: &[f64]) -> Result<ComplexMatrix> {
        let mut out = self.adjoint(v)?;
        let inv = 1.0 / self.gram_scale();
        for z in out.as_mut_slice() {
            *z *= inv;
        }
        Ok(out)
    }

    /// Noise-free record `y = A vec(x)` for Hermitian `x`.
    pub fn measure(&self, x: &ComplexMatrix) -> Result<MeasurementRecord> {
        Ok(MeasurementRecord {
            y: self.forward(x)?,
            ensemble_id: self.fingerprint,
        })
    }

    pub fn record(&self, y: Vec<f64>) -> Result<MeasurementRecord> {
        MeasurementRecord::new(self, y)
    }

    /// JSON form `{q, m, seed, words}`.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&EnsembleRepr::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let repr: EnsembleRepr = serde_json::from_str(s)?;
        repr.try_into()
    }
}

fn fingerprint(q: usize, words: &[PauliWord], c: f64) -> u64 {
    // FNV-1a
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut feed = |b: u64| {
        for byte in b.to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    feed(q as u64);
    feed(c.to_bits());
    for w in words {
        feed(w.index());
    }
    h
}

/// Samples `m` distinct words uniformly without replacement.
///
/// Draws base-4 word indices with a partial Fisher–Yates shuffle, O(m) memory.
pub fn sample_ensemble(q: usize, m: usize, seed: u64) -> Result<MeasurementEnsemble> {
    if q == 0 || q > MAX_QUBITS {
        return Err(Error::param(format!("qubit count {q} outside 1..={MAX_QUBITS}")));
    }
    let total = 4u64.pow(q as u32);
    if m as u64 > total {
        return Err(Error::Capacity {
            requested: m as u64,
            available: total,
        });
    }
    if m == 0 {
        return Err(Error::param("measurement count must be at least 1"));
    }
    let mut rng = seed::rng(seed);
    let words = seed::sample_without_replacement(&mut rng, total, m)
        .into_iter()
        .map(|idx| PauliWord::from_index(idx, q))
        .collect::<Result<Vec<_>>>()?;
    MeasurementEnsemble::from_words(q, words, Some(seed))
}

/// Expectation values `y` tied to the ensemble that produced them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub y: Vec<f64>,
    pub ensemble_id: u64,
}

impl MeasurementRecord {
    pub fn new(ens: &MeasurementEnsemble, y: Vec<f64>) -> Result<Self> {
        if y.len() != ens.len() {
            return Err(Error::dim(format!(
                "record has {} values for {} measurements",
                y.len(),
                ens.len()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("measurement values must be finite"));
        }
        Ok(MeasurementRecord {
            y,
            ensemble_id: ens.fingerprint(),
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.y.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn check_against(&self, ens: &MeasurementEnsemble) -> Result<()> {
        if self.y.len() != ens.len() || self.ensemble_id != ens.fingerprint() {
            return Err(Error::dim(format!(
                "measurement record ({} values, ensemble {:#x}) does not match ensemble ({} words, {:#x})",
                self.y.len(),
                self.ensemble_id,
                ens.len(),
                ens.fingerprint()
            )));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct EnsembleRepr {
    q: usize,
    m: usize,
    #[serde(default)]
    seed: Option<u64>,
    words: Vec<String>,
    /// Present only when `c` differs from `d/√m`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    normalization: Option<f64>,
}

impl From<&MeasurementEnsemble> for EnsembleRepr {
    fn from(e: &MeasurementEnsemble) -> Self {
        let default_c = e.d as f64 / (e.len() as f64).sqrt();
        EnsembleRepr {
            q: e.q,
            m: e.len(),
            seed: e.seed,
            words: e.words.iter().map(|w| w.to_string()).collect(),
            normalization: (e.c != default_c).then_some(e.c),
        }
    }
}

impl TryFrom<EnsembleRepr> for MeasurementEnsemble {
    type Error = Error;

    fn try_from(r: EnsembleRepr) -> Result<Self> {
        if r.m != r.words.len() {
            return Err(Error::Format(format!(
                "ensemble declares m = {} but lists {} words",
                r.m,
                r.words.len()
            )));
        }
        let words = r
            .words
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<PauliWord>>>()?;
        match r.normalization {
            Some(c) => MeasurementEnsemble::with_normalization(r.q, words, c, r.seed),
            None => MeasurementEnsemble::from_words(r.q, words, r.seed),
        }
    }
}
