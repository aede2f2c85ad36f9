//! Dense complex matrices and the handful of factorizations the rest of the
//! crate needs.
//!
//! [`ComplexMatrix`] wraps an `nalgebra` dense matrix and guarantees a
//! non-empty shape with finite entries. Arithmetic operators panic on shape
//! mismatch, like the underlying library; public entry points that accept
//! user data check shapes first and return [`Error::DimMismatch`].

use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerance;

pub type C64 = Complex64;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Dense complex matrix with at least one row and one column and finite
/// entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct ComplexMatrix(DMatrix<C64>);

/// Wire form: explicit shape plus row-major `[re, im]` pairs.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixRepr {
    rows: usize,
    cols: usize,
    data: Vec<[f64; 2]>,
}

impl TryFrom<MatrixRepr> for ComplexMatrix {
    type Error = Error;

    fn try_from(repr: MatrixRepr) -> Result<Self> {
        let entries = repr.data.into_iter().map(|[re, im]| c(re, im)).collect();
        ComplexMatrix::from_row_major(repr.rows, repr.cols, entries)
    }
}

impl From<ComplexMatrix> for MatrixRepr {
    fn from(m: ComplexMatrix) -> Self {
        MatrixRepr {
            rows: m.rows(),
            cols: m.cols(),
            data: m.to_row_major().into_iter().map(|z| [z.re, z.im]).collect(),
        }
    }
}

impl ComplexMatrix {
    pub fn from_row_major(rows: usize, cols: usize, entries: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::BadShape {
                rows,
                cols,
                reason: "rows and cols must be at least 1",
            });
        }
        match rows.checked_mul(cols) {
            Some(n) if n == entries.len() => {}
            _ => {
                return Err(Error::BadShape {
                    rows,
                    cols,
                    reason: "entry count does not equal rows * cols",
                })
            }
        }
        let m = DMatrix::from_row_iterator(rows, cols, entries);
        Self::from_dmatrix(m)
    }

    /// Builds from real row slices; handy for fixtures.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let cols = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != cols) {
            return Err(Error::BadShape {
                rows: r,
                cols,
                reason: "ragged rows",
            });
        }
        let entries = rows
            .iter()
            .flat_map(|row| row.iter().map(|&x| c(x, 0.0)))
            .collect();
        Self::from_row_major(r, cols, entries)
    }

    pub fn from_complex_rows(rows: &[&[C64]]) -> Result<Self> {
        let r = rows.len();
        let cols = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != cols) {
            return Err(Error::BadShape {
                rows: r,
                cols,
                reason: "ragged rows",
            });
        }
        let entries = rows.iter().flat_map(|row| row.iter().copied()).collect();
        Self::from_row_major(r, cols, entries)
    }

    pub fn from_dmatrix(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(Error::BadShape {
                rows: m.nrows(),
                cols: m.ncols(),
                reason: "rows and cols must be at least 1",
            });
        }
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let z = m[(i, j)];
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(ComplexMatrix(m))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "empty matrix");
        ComplexMatrix(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        assert!(n > 0, "empty matrix");
        ComplexMatrix(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m.0[(i, i)] = d;
        }
        m
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d: Vec<C64> = diag.iter().map(|&x| c(x, 0.0)).collect();
        Self::from_diagonal(&d)
    }

    /// Column vector |v><v| outer product.
    pub fn outer(ket: &[C64], bra: &[C64]) -> Self {
        let mut m = Self::zeros(ket.len(), bra.len());
        for (i, k) in ket.iter().enumerate() {
            for (j, b) in bra.iter().enumerate() {
                m.0[(i, j)] = k * b.conj();
            }
        }
        m
    }

    pub fn projector(ket: &[C64]) -> Self {
        Self::outer(ket, ket)
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.0[(row, col)]
    }

    pub(crate) fn set(&mut self, row: usize, col: usize, value: C64) {
        self.0[(row, col)] = value;
    }

    pub fn as_dmatrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_dmatrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn to_row_major(&self) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        ComplexMatrix(self.0.adjoint())
    }

    pub fn scale(&self, factor: C64) -> Self {
        ComplexMatrix(&self.0 * factor)
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        self.scale(c(factor, 0.0))
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest elementwise modulus of `self - other`. Shapes must agree.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.shape(), other.shape(), "shape mismatch");
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Largest elementwise distance from the identity. Square only.
    pub fn identity_deviation(&self) -> f64 {
        assert!(self.is_square());
        let n = self.rows();
        let mut dev: f64 = 0.0;
        for j in 0..n {
            for i in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                dev = dev.max((self.0[(i, j)] - c(target, 0.0)).norm());
            }
        }
        dev
    }

    /// max |m_st - conj(m_ts)|; infinite for non-square input.
    pub fn hermiticity_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows();
        let mut dev: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                dev = dev.max((self.0[(i, j)] - self.0[(j, i)].conj()).norm());
            }
        }
        dev
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_deviation() <= tolerance::HERMITIAN * self.max_abs().max(1.0)
    }

    /// `(m + m^dagger) / 2`.
    pub fn hermitian_part(&self) -> Self {
        ComplexMatrix((&self.0 + self.0.adjoint()) * c(0.5, 0.0))
    }

    /// Row-orthonormality deviation `max |U U^dagger - I|`.
    pub fn row_orthonormality_deviation(&self) -> f64 {
        (self * &self.adjoint()).identity_deviation()
    }

    /// Eigen-decomposition of the Hermitian part. Eigenvalues ascending,
    /// eigenvectors as matching columns.
    pub fn hermitian_eigen(&self) -> (Vec<f64>, ComplexMatrix) {
        assert!(self.is_square(), "eigen-decomposition of non-square matrix");
        let h = self.hermitian_part().0;
        let eig = h.symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let n = self.rows();
        let vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
        (values, ComplexMatrix(vectors))
    }

    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let h = self.hermitian_part().0;
        let mut values: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
        values.sort_by(f64::total_cmp);
        values
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.hermitian_eigenvalues()
            .first()
            .copied()
            .unwrap_or(f64::NAN)
    }

    /// Schatten 1-norm of a Hermitian matrix: sum of |eigenvalues|.
    pub fn hermitian_trace_norm(&self) -> f64 {
        self.hermitian_eigenvalues().iter().map(|x| x.abs()).sum()
    }

    /// `V diag(f(lambda)) V^dagger` for the Hermitian part.
    pub fn hermitian_function(&self, f: impl Fn(f64) -> f64) -> Self {
        let (values, vectors) = self.hermitian_eigen();
        let n = self.rows();
        let mut scaled = vectors.0.clone();
        for (j, &lambda) in values.iter().enumerate() {
            let w = f(lambda);
            for i in 0..n {
                scaled[(i, j)] *= w;
            }
        }
        ComplexMatrix(scaled * vectors.0.adjoint())
    }
}

impl<'a> Mul<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &'a ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 * &rhs.0)
    }
}

impl<'a> Add<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &'a ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 + &rhs.0)
    }
}

impl<'a> Sub<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &'a ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 - &rhs.0)
    }
}

/// Kronecker product with the default dimension cap.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    tensor_with_cap(a, b, tolerance::DEFAULT_DIM_CAP)
}

/// Kronecker product. Entry `((i1*b.rows + i2), (j1*b.cols + j2))` is
/// `a[i1,j1] * b[i2,j2]`.
pub fn tensor_with_cap(a: &ComplexMatrix, b: &ComplexMatrix, cap: usize) -> Result<ComplexMatrix> {
    for dim in [
        a.rows().checked_mul(b.rows()),
        a.cols().checked_mul(b.cols()),
    ] {
        match dim {
            Some(d) if d <= cap => {}
            Some(d) => return Err(Error::DimensionCap { dim: d, cap }),
            None => {
                return Err(Error::DimensionCap {
                    dim: usize::MAX,
                    cap,
                })
            }
        }
    }
    Ok(ComplexMatrix(a.0.kronecker(&b.0)))
}

/// Hermitian PSD square root by eigen-decomposition. Eigenvalues in
/// `[-PSD, 0)` are clamped to zero; anything more negative is rejected.
pub fn psd_sqrt(e: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !e.is_square() {
        return Err(Error::BadShape {
            rows: e.rows(),
            cols: e.cols(),
            reason: "square root needs a square matrix",
        });
    }
    if !e.is_hermitian() {
        return Err(Error::NotHermitian {
            deviation: e.hermiticity_deviation(),
        });
    }
    let (values, vectors) = e.hermitian_eigen();
    let min = values[0];
    if min < -tolerance::PSD {
        return Err(Error::NotPositive {
            min_eigenvalue: min,
        });
    }
    let n = e.rows();
    let mut scaled = vectors.0.clone();
    for (j, &lambda) in values.iter().enumerate() {
        let root = lambda.max(0.0).sqrt();
        for i in 0..n {
            scaled[(i, j)] *= root;
        }
    }
    let root = ComplexMatrix(scaled * vectors.0.adjoint());
    Ok(root.hermitian_part())
}

/// Unitary polar factor `W` of a square invertible `a = W P`.
pub(crate) fn polar_unitary(a: &ComplexMatrix) -> Option<ComplexMatrix> {
    let gram = &a.adjoint() * a;
    let (values, _) = gram.hermitian_eigen();
    if values[0] <= 1e-14 * values[values.len() - 1].max(1.0) {
        return None;
    }
    let inv_root = gram.hermitian_function(|x| 1.0 / x.sqrt());
    Some(a * &inv_root)
}
