//! Dense real-matrix primitives.
//!
//! Everything downstream works on [`Mat`] (a plain dynamically sized
//! `nalgebra` matrix) and [`SymMat`], a square matrix whose storage is
//! canonicalized to `(M + Mᵀ)/2` when it is built.

use std::ops::Deref;

use nalgebra::{DMatrix, Schur, SymmetricEigen};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;

/// Relative slack below zero tolerated before a symmetric matrix is declared indefinite.
pub const PSD_SLACK: f64 = 1e-12;

/// Symmetric matrix with exact storage symmetry.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMat(Mat);

impl SymMat {
    /// Symmetrizes `m` as `(m + mᵀ)/2`.
    pub fn new(m: Mat) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension(format!(
                "symmetric matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        ensure_finite(&m)?;
        Ok(Self::symmetrize(m))
    }

    /// Same as [`SymMat::new`] for values already known to be square and finite.
    pub(crate) fn symmetrize(m: Mat) -> Self {
        let n = m.nrows();
        let mut s = m;
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (s[(i, j)] + s[(j, i)]);
                s[(i, j)] = avg;
                s[(j, i)] = avg;
            }
        }
        SymMat(s)
    }

    pub fn identity(n: usize) -> Self {
        SymMat(Mat::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        SymMat(Mat::zeros(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Result<Self> {
        let n = d.len();
        let mut m = Mat::zeros(n, n);
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        Self::new(m)
    }

    pub fn scaled(&self, c: f64) -> Self {
        SymMat(&self.0 * c)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_mat(&self) -> &Mat {
        &self.0
    }

    pub fn into_inner(self) -> Mat {
        self.0
    }
}

impl Deref for SymMat {
    type Target = Mat;

    fn deref(&self) -> &Mat {
        &self.0
    }
}

impl AsRef<Mat> for SymMat {
    fn as_ref(&self) -> &Mat {
        &self.0
    }
}

pub fn ensure_finite(m: &Mat) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput("matrix has non-finite entries".into()))
    }
}

pub(crate) fn ensure_square(m: &Mat, what: &str) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )))
    }
}

/// Operator 2-norm (largest singular value).
pub fn op_norm(m: &Mat) -> Result<f64> {
    ensure_finite(m)?;
    Ok(norm2(m))
}

/// Unchecked operator norm for values produced inside the crate.
pub(crate) fn norm2(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    if m.nrows() == 1 || m.ncols() == 1 {
        return m.norm();
    }
    m.singular_values().max()
}

/// Largest eigenvalue modulus of a square matrix.
pub fn spectral_radius(m: &Mat) -> Result<f64> {
    ensure_square(m, "spectral radius argument")?;
    ensure_finite(m)?;
    let n = m.nrows();
    if n == 0 {
        return Ok(0.0);
    }
    if n == 1 {
        return Ok(m[(0, 0)].abs());
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or(Error::NoConvergence { iterations: 10_000, last_update: f64::NAN })?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}

/// `Tr(AᵀB)`, the Frobenius inner product.
pub fn trace_dot(a: &Mat, b: &Mat) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension(format!(
            "trace_dot shapes {:?} and {:?} differ",
            a.shape(),
            b.shape()
        )));
    }
    Ok(a.dot(b))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eig_sym(p: &SymMat) -> f64 {
    if p.dim() == 0 {
        return 0.0;
    }
    p.symmetric_eigenvalues().min()
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_eig_sym(p: &SymMat) -> f64 {
    if p.dim() == 0 {
        return 0.0;
    }
    p.symmetric_eigenvalues().max()
}

/// Both extreme eigenvalues from a single decomposition, `(min, max)`.
pub fn extreme_eigs_sym(p: &SymMat) -> (f64, f64) {
    if p.dim() == 0 {
        return (0.0, 0.0);
    }
    let ev = p.symmetric_eigenvalues();
    (ev.min(), ev.max())
}

/// Symmetric square root of a PSD matrix, with its inverse when `P` is PD.
#[derive(Debug, Clone)]
pub struct SymSqrt {
    pub root: SymMat,
    pub inv_root: Option<SymMat>,
}

pub fn sym_sqrt(p: &SymMat) -> Result<SymSqrt> {
    let n = p.dim();
    if n == 0 {
        return Ok(SymSqrt { root: SymMat::zeros(0), inv_root: Some(SymMat::zeros(0)) });
    }
    let eig = SymmetricEigen::new(p.as_mat().clone());
    let scale = eig.eigenvalues.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let min = eig.eigenvalues.min();
    if min < -PSD_SLACK * scale {
        return Err(Error::NotPsd { min_eig: min });
    }
    let v = &eig.eigenvectors;
    let roots: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).collect();
    let rebuild = |d: &[f64]| {
        let mut scaled = v.clone();
        for (j, &dj) in d.iter().enumerate() {
            scaled.column_mut(j).scale_mut(dj);
        }
        SymMat::symmetrize(scaled * v.transpose())
    };
    let root = rebuild(&roots);
    let inv_root = if min > 0.0 {
        let inv: Vec<f64> = roots.iter().map(|r| 1.0 / r).collect();
        Some(rebuild(&inv))
    } else {
        None
    };
    Ok(SymSqrt { root, inv_root })
}

/// True when `p ⪰ 0` up to the relative slack [`PSD_SLACK`].
pub fn is_psd(p: &SymMat) -> bool {
    let (min, max) = extreme_eigs_sym(p);
    min >= -PSD_SLACK * max.abs().max(min.abs())
}
