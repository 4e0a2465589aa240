//! Dense complex linear algebra with explicit tolerances.
//!
//! Everything here works on small row-major matrices (at most
//! [`MAX_DIM`] in either direction). Spectral routines delegate to
//! `nalgebra`; the tensor and trace machinery is written out directly.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported row or column count.
pub const MAX_DIM: usize = 64;

/// Max-entry deviation from hermiticity tolerated before symmetrizing.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Default relative threshold for [`numeric_rank`].
pub const DEFAULT_RANK_REL_TOL: f64 = 1e-9;

/// Entries whose modulus is within this relative distance of the largest
/// modulus are candidates for the phase pivot.
const PHASE_PIVOT_REL_TOL: f64 = 1e-10;

const EIG_MAX_ITER: usize = 10_000;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Dense complex matrix in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<Complex64>>", into = "Vec<Vec<Complex64>>")]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        check_shape(rows, cols)?;
        if data.len() != rows * cols {
            return Err(Error::EntryCount {
                expected: rows * cols,
                found: data.len(),
            });
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch {
                context: "matrix row length",
                expected: cols,
                found: bad.len(),
            });
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    /// Real-valued convenience constructor, mostly for tests and fixtures.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let rows: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for k in 0..dim {
            m[(k, k)] = ONE;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (k, &v) in values.iter().enumerate() {
            m[(k, k)] = Complex64::new(v, 0.0);
        }
        m
    }

    /// `|ket⟩⟨bra|`.
    pub fn outer(ket: &[Complex64], bra: &[Complex64]) -> Self {
        let mut data = Vec::with_capacity(ket.len() * bra.len());
        for a in ket {
            for b in bra {
                data.push(a * b.conj());
            }
        }
        Self {
            rows: ket.len(),
            cols: bra.len(),
            data,
        }
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vec<Complex64>]) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        if let Some(bad) = columns.iter().find(|c| c.len() != rows) {
            return Err(Error::DimensionMismatch {
                context: "column vectors",
                expected: rows,
                found: bad.len(),
            });
        }
        let mut m = Self::zeros(rows, columns.len());
        for (c, col) in columns.iter().enumerate() {
            for (r, z) in col.iter().enumerate() {
                m[(r, c)] = *z;
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<Complex64>> {
        self.data
            .chunks(self.cols.max(1))
            .map(<[_]>::to_vec)
            .collect()
    }

    pub fn column(&self, c: usize) -> Vec<Complex64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                m[(c, r)] = self[(r, c)].conj();
            }
        }
        m
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|k| self[(k, k)]).sum()
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * factor).collect(),
        }
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        self.scale(Complex64::new(factor, 0.0))
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Max-entry distance to another matrix of the same shape.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Max-entry deviation `|m - m†|`.
    pub fn hermitian_deviation(&self) -> f64 {
        let mut worst = 0.0_f64;
        for r in 0..self.rows {
            for c in r..self.cols {
                worst = worst.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        worst
    }

    /// `(m + m†) / 2`.
    pub fn hermitian_part(&self) -> Self {
        let mut m = self.clone();
        for r in 0..self.rows {
            for c in r..self.cols {
                let avg = (self[(r, c)] + self[(c, r)].conj()) * 0.5;
                m[(r, c)] = avg;
                m[(c, r)] = avg.conj();
            }
        }
        m
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols, v.len(), "matrix-vector dimension mismatch");
        self.data
            .chunks(self.cols)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn checked_mul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch {
                context: "matrix product",
                expected: self.cols,
                found: rhs.rows,
            });
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == ZERO {
                    continue;
                }
                for c in 0..rhs.cols {
                    out.data[r * rhs.cols + c] += a * rhs.data[k * rhs.cols + c];
                }
            }
        }
        Ok(out)
    }

    fn to_nalgebra(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

fn check_shape(rows: usize, cols: usize) -> Result<()> {
    if rows == 0 || cols == 0 || rows > MAX_DIM || cols > MAX_DIM {
        return Err(Error::BadShape {
            rows,
            cols,
            max: MAX_DIM,
        });
    }
    Ok(())
}

impl TryFrom<Vec<Vec<Complex64>>> for ComplexMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<Complex64>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl From<ComplexMatrix> for Vec<Vec<Complex64>> {
    fn from(m: ComplexMatrix) -> Self {
        m.to_rows()
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.cols + c]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

/// Panics on a shape mismatch; use [`ComplexMatrix::checked_mul`] otherwise.
impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.checked_mul(rhs)
            .expect("matrix product shape mismatch")
    }
}

/// Tensor product `a ⊗ b`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let rows = a.rows * b.rows;
    let cols = a.cols * b.cols;
    let mut out = ComplexMatrix::zeros(rows, cols);
    for ar in 0..a.rows {
        for ac in 0..a.cols {
            let x = a[(ar, ac)];
            for br in 0..b.rows {
                for bc in 0..b.cols {
                    out[(ar * b.rows + br, ac * b.cols + bc)] = x * b[(br, bc)];
                }
            }
        }
    }
    out
}

/// Traces out the first factor of an operator on `C^dim_a ⊗ C^dim_b`.
pub fn partial_trace_first(m: &ComplexMatrix, dim_a: usize, dim_b: usize) -> Result<ComplexMatrix> {
    let n = dim_a * dim_b;
    if dim_a == 0 || dim_b == 0 || m.rows != n || m.cols != n {
        return Err(Error::DimensionMismatch {
            context: "bipartite operator",
            expected: n,
            found: if m.rows != n { m.rows } else { m.cols },
        });
    }
    let mut out = ComplexMatrix::zeros(dim_b, dim_b);
    for r in 0..dim_b {
        for c in 0..dim_b {
            out[(r, c)] = (0..dim_a).map(|k| m[(k * dim_b + r, k * dim_b + c)]).sum();
        }
    }
    Ok(out)
}

/// Singular spectrum and the rank it implies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankResult {
    pub rank: usize,
    pub singular_values: Vec<f64>,
    pub threshold_used: f64,
}

/// Rank of the span of `columns`, counting singular values strictly above
/// `rel_tol * σ_max`.
pub fn numeric_rank(columns: &[Vec<Complex64>], rel_tol: f64) -> Result<RankResult> {
    if rel_tol.is_nan() || rel_tol <= 0.0 {
        return Err(Error::OutOfRange {
            name: "rank_rel_tol",
            value: rel_tol,
            range: "(0, inf)",
        });
    }
    if columns.is_empty() {
        return Ok(RankResult {
            rank: 0,
            singular_values: Vec::new(),
            threshold_used: 0.0,
        });
    }
    let m = ComplexMatrix::from_columns(columns)?;
    check_shape(m.rows, m.cols)?;
    let singular_values = singular_values(&m)?;
    let threshold_used = rel_tol * singular_values[0];
    let rank = singular_values
        .iter()
        .filter(|&&s| s > threshold_used)
        .count();
    Ok(RankResult {
        rank,
        singular_values,
        threshold_used,
    })
}

/// Singular values, sorted non-increasing.
pub fn singular_values(m: &ComplexMatrix) -> Result<Vec<f64>> {
    let svd = m
        .to_nalgebra()
        .try_svd(false, false, f64::EPSILON, EIG_MAX_ITER)
        .ok_or(Error::NoConvergence("singular value decomposition"))?;
    let mut values: Vec<f64> = svd.singular_values.iter().map(|s| s.max(0.0)).collect();
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(values)
}

/// Spectral decomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Sorted descending.
    pub values: Vec<f64>,
    /// Orthonormal, phase-canonicalized, aligned with `values`.
    pub vectors: Vec<Vec<Complex64>>,
}

impl HermitianEigen {
    /// `V Λ V†`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let n = self.values.len();
        let mut m = ComplexMatrix::zeros(n, n);
        for (lambda, v) in self.values.iter().zip(&self.vectors) {
            m = &m + &ComplexMatrix::outer(v, v).scale_real(*lambda);
        }
        m
    }
}

pub fn hermitian_eig(m: &ComplexMatrix) -> Result<HermitianEigen> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.rows,
            cols: m.cols,
        });
    }
    let deviation = m.hermitian_deviation();
    if deviation > HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    let h = m.hermitian_part();
    let eig = SymmetricEigen::try_new(h.to_nalgebra(), f64::EPSILON, EIG_MAX_ITER)
        .ok_or(Error::NoConvergence("hermitian eigensolver"))?;
    let mut pairs: Vec<(f64, Vec<Complex64>)> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(k, &value)| {
            let mut v: Vec<Complex64> = eig.eigenvectors.column(k).iter().copied().collect();
            canonicalize_phase(&mut v);
            (value, v)
        })
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (values, vectors) = pairs.into_iter().unzip();
    Ok(HermitianEigen { values, vectors })
}

/// Sum of singular values.
pub fn trace_norm(m: &ComplexMatrix) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.rows,
            cols: m.cols,
        });
    }
    Ok(singular_values(m)?.iter().sum())
}

/// Gram matrix `G[k][l] = ⟨s_k|s_l⟩`.
pub fn gram(states: &[Vec<Complex64>]) -> Result<ComplexMatrix> {
    let dim = states.first().map_or(0, Vec::len);
    if let Some(bad) = states.iter().find(|s| s.len() != dim) {
        return Err(Error::DimensionMismatch {
            context: "gram vectors",
            expected: dim,
            found: bad.len(),
        });
    }
    let n = states.len();
    let mut g = ComplexMatrix::zeros(n, n);
    for k in 0..n {
        for l in 0..n {
            g[(k, l)] = inner(&states[k], &states[l]);
        }
    }
    Ok(g)
}

/// `⟨a|b⟩`, conjugate-linear in the first argument.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt()
}

/// Multiplies `v` by a unit phase so that the first entry of largest
/// modulus is real and positive. Zero vectors are left alone.
pub fn canonicalize_phase(v: &mut [Complex64]) {
    let largest = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if largest == 0.0 {
        return;
    }
    let cutoff = largest * (1.0 - PHASE_PIVOT_REL_TOL);
    let Some(pivot) = v.iter().position(|z| z.norm() >= cutoff) else {
        return;
    };
    let phase = v[pivot].conj() / v[pivot].norm();
    for z in v.iter_mut() {
        *z *= phase;
    }
    v[pivot] = Complex64::new(v[pivot].norm(), 0.0);
}

/// `min_φ ‖a − e^{iφ} b‖₂`, evaluated at the optimal phase directly.
pub fn phase_aligned_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    let overlap = inner(b, a);
    let phase = if overlap.norm() > 0.0 {
        overlap / overlap.norm()
    } else {
        ONE
    };
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - phase * y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

fn standard_complex<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Haar-uniform unit vector, phase-canonicalized.
pub fn haar_random_pure<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<Vec<Complex64>> {
    if dim == 0 || dim > MAX_DIM {
        return Err(Error::BadShape {
            rows: dim,
            cols: 1,
            max: MAX_DIM,
        });
    }
    loop {
        let mut v: Vec<Complex64> = (0..dim).map(|_| standard_complex(rng)).collect();
        let n = norm(&v);
        if n > 1e-150 {
            v.iter_mut().for_each(|z| *z /= n);
            canonicalize_phase(&mut v);
            return Ok(v);
        }
    }
}

/// Haar-random unitary from Gram-Schmidt on a complex Ginibre matrix.
pub fn haar_random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<ComplexMatrix> {
    if dim == 0 || dim > MAX_DIM {
        return Err(Error::BadShape {
            rows: dim,
            cols: dim,
            max: MAX_DIM,
        });
    }
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(dim);
    while basis.len() < dim {
        let mut v: Vec<Complex64> = (0..dim).map(|_| standard_complex(rng)).collect();
        // two passes keep the basis orthonormal to working precision
        for _ in 0..2 {
            for q in &basis {
                let c = inner(q, &v);
                v.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
        }
        let n = norm(&v);
        if n > 1e-8 {
            v.iter_mut().for_each(|z| *z /= n);
            basis.push(v);
        }
    }
    ComplexMatrix::from_columns(&basis)
}

/// Complex Ginibre matrix with standard normal entries.
pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Result<ComplexMatrix> {
    let data = (0..rows * cols).map(|_| standard_complex(rng)).collect();
    ComplexMatrix::new(rows, cols, data)
}
