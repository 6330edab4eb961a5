//! Dense complex linear algebra.
//!
//! [`ComplexMatrix`] stores its entries in **column-major** order. That makes
//! [`vec`] (column concatenation) a plain copy of the backing buffer and
//! [`mat`] its exact inverse.
//!
//! The Hermitian eigensolver is a cyclic complex Jacobi method. It is
//! O(d³) per sweep and typically converges in well under a dozen sweeps for
//! the matrix sizes used here (d ≤ 256).

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Off-diagonal Frobenius tolerance (relative to `max(1, ‖m‖_F)`) at which Jacobi stops.
pub const JACOBI_TOLERANCE: f64 = 1e-12;
/// Maximum number of cyclic Jacobi sweeps.
pub const JACOBI_MAX_SWEEPS: usize = 100;
/// Hermiticity deviation accepted by [`hermitian_eig`], relative to `max(1, max|m_ij|)`.
pub const HERMITIAN_TOLERANCE: f64 = 1e-8;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(v, 0.0);
        }
        m
    }

    /// Builds a matrix from a column-major buffer, rejecting non-finite entries.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::dim("matrix dimensions must be positive"));
        }
        if data.len() != rows * cols {
            return Err(Error::dim(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::param("matrix entries must be finite"));
        }
        Ok(ComplexMatrix { rows, cols, data })
    }

    /// Builds a matrix from nested rows (row-major literal order).
    pub fn from_rows<R: AsRef<[Complex64]>>(rows: &[R]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.iter().any(|r| r.as_ref().len() != ncols) {
            return Err(Error::dim("ragged rows"));
        }
        let mut data = vec![ZERO; nrows * ncols];
        for (i, row) in rows.iter().enumerate() {
            for (j, &z) in row.as_ref().iter().enumerate() {
                data[j * nrows + i] = z;
            }
        }
        Self::from_col_major(nrows, ncols, data)
    }

    /// Real-valued convenience constructor from row-major nested slices.
    pub fn from_real_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let complex: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|r| r.as_ref().iter().map(|&x| Complex64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&complex)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Column-major entries.
    #[inline]
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    #[inline]
    pub fn column(&self, j: usize) -> &[Complex64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|z| z * s)
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `max |m − m*|` over all entries. Non-square matrices report `+∞`.
    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut dev = 0.0f64;
        for j in 0..n {
            for i in 0..=j {
                dev = dev.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        dev
    }

    /// Hermitian part `(m + m*)/2`.
    pub fn hermitian_part(&self) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::dim(format!(
                "Hermitian part needs a square matrix, got {}x{}",
                self.rows, self.cols
            )));
        }
        let n = self.rows;
        let mut out = Self::zeros(n, n);
        for j in 0..n {
            for i in 0..n {
                out[(i, j)] = (self[(i, j)] + self[(j, i)].conj()) * 0.5;
            }
        }
        Ok(out)
    }

    fn check_same_shape(&self, other: &Self, op: &str) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::dim(format!(
                "{op}: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other, "add")?;
        Ok(self + other)
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other, "sub")?;
        Ok(self - other)
    }

    /// Real part of the Frobenius inner product `Re tr(self* · other)`.
    pub fn real_inner(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.data.len(), other.data.len());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.re * b.re + a.im * b.im)
            .sum()
    }

    /// Frobenius distance without allocating the difference.
    pub fn frobenius_distance(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.data.len(), other.data.len());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Count of entries whose modulus is nonzero.
    pub fn nonzero_count(&self) -> usize {
        self.data.iter().filter(|z| z.norm_sqr() > 0.0).count()
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[j * self.rows + i]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[j * self.rows + i]
    }
}

// Operator impls assume matching shapes; use `try_add`/`try_sub` on untrusted input.
impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl AddAssign<&ComplexMatrix> for ComplexMatrix {
    fn add_assign(&mut self, rhs: &ComplexMatrix) {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl SubAssign<&ComplexMatrix> for ComplexMatrix {
    fn sub_assign(&mut self, rhs: &ComplexMatrix) {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
    }
}

impl Mul<f64> for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: f64) -> ComplexMatrix {
        self.scale(rhs)
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn neg(self) -> ComplexMatrix {
        self.map(|z| -z)
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    rows: usize,
    cols: usize,
    /// Column-major `[re, im]` pairs.
    entries: Vec<[f64; 2]>,
}

impl Serialize for ComplexMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixRepr {
            rows: self.rows,
            cols: self.cols,
            entries: self.data.iter().map(|z| [z.re, z.im]).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ComplexMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = MatrixRepr::deserialize(deserializer)?;
        let data = repr
            .entries
            .into_iter()
            .map(|[re, im]| Complex64::new(re, im))
            .collect();
        ComplexMatrix::from_col_major(repr.rows, repr.cols, data).map_err(serde::de::Error::custom)
    }
}

/// Column concatenation of `m`.
pub fn vec(m: &ComplexMatrix) -> Vec<Complex64> {
    m.data.clone()
}

/// Inverse of [`vec`]: reshapes a length-`d²` vector into a `d×d` matrix.
pub fn mat(v: &[Complex64], d: usize) -> Result<ComplexMatrix> {
    if d == 0 || v.len() != d * d {
        return Err(Error::dim(format!(
            "mat: expected {} entries for d = {d}, got {}",
            d * d,
            v.len()
        )));
    }
    Ok(ComplexMatrix {
        rows: d,
        cols: d,
        data: v.to_vec(),
    })
}

pub fn frobenius_norm(m: &ComplexMatrix) -> f64 {
    m.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn trace(m: &ComplexMatrix) -> Result<Complex64> {
    if !m.is_square() {
        return Err(Error::dim(format!(
            "trace of non-square {}x{} matrix",
            m.rows, m.cols
        )));
    }
    Ok((0..m.rows).map(|i| m[(i, i)]).sum())
}

/// Conjugate transpose.
pub fn adjoint(m: &ComplexMatrix) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(m.cols, m.rows);
    for j in 0..m.cols {
        for i in 0..m.rows {
            out[(j, i)] = m[(i, j)].conj();
        }
    }
    out
}

pub fn matmul(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.cols != b.rows {
        return Err(Error::dim(format!(
            "matmul: {}x{} times {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut out = ComplexMatrix::zeros(a.rows, b.cols);
    for j in 0..b.cols {
        let out_col = &mut out.data[j * a.rows..(j + 1) * a.rows];
        for k in 0..a.cols {
            let bkj = b[(k, j)];
            if bkj == ZERO {
                continue;
            }
            let a_col = &a.data[k * a.rows..(k + 1) * a.rows];
            for (o, &x) in out_col.iter_mut().zip(a_col) {
                *o += x * bkj;
            }
        }
    }
    Ok(out)
}

/// Kronecker product; block `(i, j)` of the result is `a[i,j]·b`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let rows = a.rows * b.rows;
    let cols = a.cols * b.cols;
    let mut out = ComplexMatrix::zeros(rows, cols);
    for ja in 0..a.cols {
        for ia in 0..a.rows {
            let s = a[(ia, ja)];
            for jb in 0..b.cols {
                for ib in 0..b.rows {
                    out[(ia * b.rows + ib, ja * b.cols + jb)] = s * b[(ib, jb)];
                }
            }
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Unitary; column `k` pairs with `eigenvalues[k]`.
    pub eigenvectors: ComplexMatrix,
}

impl EigenDecomposition {
    /// `V · diag(f(λ)) · V*`, made exactly Hermitian.
    pub fn reconstruct_with(&self, f: impl Fn(usize, f64) -> f64) -> ComplexMatrix {
        let n = self.eigenvalues.len();
        let weights: Vec<f64> = self
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(k, &l)| f(k, l))
            .collect();
        let v = &self.eigenvectors;
        let mut out = ComplexMatrix::zeros(n, n);
        for (k, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let col = v.column(k);
            for j in 0..n {
                let cj = col[j].conj() * w;
                let out_col = &mut out.data[j * n..(j + 1) * n];
                // upper triangle including diagonal; mirrored below
                for i in 0..=j {
                    out_col[i] += col[i] * cj;
                }
            }
        }
        for j in 0..n {
            out[(j, j)].im = 0.0;
            for i in 0..j {
                out[(j, i)] = out[(i, j)].conj();
            }
        }
        out
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.reconstruct_with(|_, l| l)
    }
}

fn off_diagonal_norm(a: &ComplexMatrix) -> f64 {
    let n = a.rows;
    let mut s = 0.0;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                s += a[(i, j)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi rotations.
///
/// Each rotation acts on the `(p, q)` plane with the unitary
///
/// ```text
/// G = [ c          s·e^{iφ} ]
///     [ −s·e^{−iφ}  c       ]
/// ```
///
/// where `φ = arg(a_pq)` and `(c, s)` is the real Jacobi rotation for the
/// block `[[a_pp, |a_pq|], [|a_pq|, a_qq]]`. `G* A G` has a zero `(p, q)` entry.
///
/// Eigenvalues come back ascending; equal eigenvalues keep the order in which
/// the sweep left them, which is deterministic for a given input.
pub fn hermitian_eig(m: &ComplexMatrix) -> Result<EigenDecomposition> {
    if !m.is_square() {
        return Err(Error::dim(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            m.rows, m.cols
        )));
    }
    let tol_herm = HERMITIAN_TOLERANCE * m.max_abs().max(1.0);
    let dev = m.hermitian_deviation();
    if dev > tol_herm || !dev.is_finite() {
        return Err(Error::NotHermitian {
            residue: dev,
            tolerance: tol_herm,
        });
    }

    let n = m.rows;
    // Work on the exact Hermitian part so tiny asymmetries do not accumulate.
    let mut a = m.hermitian_part()?;
    let mut v = ComplexMatrix::identity(n);
    let threshold = JACOBI_TOLERANCE * frobenius_norm(m).max(1.0);

    let mut sweeps = 0;
    let mut off = off_diagonal_norm(&a);
    while off > threshold {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NotConverged {
                sweeps,
                off_norm: off,
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
        off = off_diagonal_norm(&a);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re).then(i.cmp(&j)));
    let eigenvalues = order.iter().map(|&k| a[(k, k)].re).collect();
    let mut eigenvectors = ComplexMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.data[dst * n..(dst + 1) * n].copy_from_slice(v.column(src));
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

fn rotate(a: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let n = a.rows;
    let apq = a[(p, q)];
    let mag = apq.norm();
    if mag == 0.0 {
        return;
    }
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    // Skip rotations that cannot change the diagonal in floating point.
    if mag < f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
        a[(p, q)] = ZERO;
        a[(q, p)] = ZERO;
        return;
    }
    let phase = apq / mag;
    let theta = (aqq - app) / (2.0 * mag);
    let t = if theta.is_finite() {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    } else {
        0.0
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    // G columns: g_p = (c, −s·conj(phase)), g_q = (s·phase, c) on rows (p, q).
    let gpp = Complex64::new(c, 0.0);
    let gqp = -phase.conj() * s;
    let gpq = phase * s;
    let gqq = Complex64::new(c, 0.0);

    // A ← A·G (columns p and q)
    for i in 0..n {
        let aip = a[(i, p)];
        let aiq = a[(i, q)];
        a[(i, p)] = aip * gpp + aiq * gqp;
        a[(i, q)] = aip * gpq + aiq * gqq;
    }
    // A ← G*·A (rows p and q)
    for j in 0..n {
        let apj = a[(p, j)];
        let aqj = a[(q, j)];
        a[(p, j)] = gpp.conj() * apj + gqp.conj() * aqj;
        a[(q, j)] = gpq.conj() * apj + gqq.conj() * aqj;
    }
    a[(p, q)] = ZERO;
    a[(q, p)] = ZERO;
    a[(p, p)].im = 0.0;
    a[(q, q)].im = 0.0;

    for i in 0..n {
        let vip = v[(i, p)];
        let viq = v[(i, q)];
        v[(i, p)] = vip * gpp + viq * gqp;
        v[(i, q)] = vip * gpq + viq * gqq;
    }
}
