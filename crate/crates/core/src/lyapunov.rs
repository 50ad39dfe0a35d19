//! Discrete Lyapunov (Stein) equations.
//!
//! Two orientations are needed: value matrices solve `P = FᵀPF + V`, steady
//! covariances solve `X = FXFᵀ + V`. Small problems go through a direct solve
//! of the vectorized `n²×n²` system; larger ones use the doubling iteration.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::matcore::{ensure_finite, ensure_square, norm2, spectral_radius, Mat, SymMat};

/// Closed loops with spectral radius above `1 - STABILITY_MARGIN` are rejected.
pub const STABILITY_MARGIN: f64 = 1e-9;

/// Largest dimension handled by the Kronecker backend under [`SteinBackend::Auto`].
pub const DIRECT_MAX_DIM: usize = 20;

const DOUBLING_TOL: f64 = 1e-14;
const DOUBLING_MAX_ITER: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SteinBackend {
    #[default]
    Auto,
    Direct,
    Doubling,
}

/// Solves `P = FᵀPF + V`.
pub fn solve_stein_transposed(f: &Mat, v: &SymMat) -> Result<SymMat> {
    solve_stein_transposed_with(f, v, SteinBackend::Auto)
}

/// Solves `X = FXFᵀ + V`.
pub fn solve_stein(f: &Mat, v: &SymMat) -> Result<SymMat> {
    solve_stein_with(f, v, SteinBackend::Auto)
}

pub fn solve_stein_with(f: &Mat, v: &SymMat, backend: SteinBackend) -> Result<SymMat> {
    solve_stein_transposed_with(&f.transpose(), v, backend)
}

pub fn solve_stein_transposed_with(f: &Mat, v: &SymMat, backend: SteinBackend) -> Result<SymMat> {
    ensure_square(f, "Stein closed-loop matrix")?;
    ensure_finite(f)?;
    if f.nrows() != v.dim() {
        return Err(Error::Dimension(format!(
            "Stein closed loop is {}x{} but forcing term is {}x{}",
            f.nrows(),
            f.ncols(),
            v.dim(),
            v.dim()
        )));
    }
    let rho = spectral_radius(f)?;
    if rho >= 1.0 - STABILITY_MARGIN {
        return Err(Error::UnstableClosedLoop { rho });
    }
    let n = f.nrows();
    let use_direct = match backend {
        SteinBackend::Auto => n <= DIRECT_MAX_DIM,
        SteinBackend::Direct => true,
        SteinBackend::Doubling => false,
    };
    let p = if use_direct { direct(f, v)? } else { doubling(f, v)? };
    ensure_finite(&p)?;
    Ok(SymMat::symmetrize(p))
}

/// Residual `‖P − FᵀPF − V‖` in operator norm.
pub fn stein_residual_transposed(f: &Mat, v: &SymMat, p: &SymMat) -> f64 {
    norm2(&(p.as_mat() - f.transpose() * p.as_mat() * f - v.as_mat()))
}

/// Residual `‖X − FXFᵀ − V‖` in operator norm.
pub fn stein_residual(f: &Mat, v: &SymMat, x: &SymMat) -> f64 {
    norm2(&(x.as_mat() - f * x.as_mat() * f.transpose() - v.as_mat()))
}

fn direct(f: &Mat, v: &SymMat) -> Result<Mat> {
    let n = f.nrows();
    let nn = n * n;
    // Column-major vec: (FᵀPF)_{ij} = Σ_{k,l} F_{ki} F_{lj} P_{kl}.
    let mut sys = Mat::identity(nn, nn);
    for j in 0..n {
        for i in 0..n {
            let row = i + n * j;
            for l in 0..n {
                let flj = f[(l, j)];
                if flj == 0.0 {
                    continue;
                }
                for k in 0..n {
                    sys[(row, k + n * l)] -= f[(k, i)] * flj;
                }
            }
        }
    }
    let lu = sys.lu();
    let rhs = DVector::from_column_slice(v.as_slice());
    let mut sol = lu
        .solve(&rhs)
        .ok_or(Error::UnstableClosedLoop { rho: f64::NAN })?;
    // one step of iterative refinement on the unsymmetrized residual
    let p = Mat::from_column_slice(n, n, sol.as_slice());
    let resid = v.as_mat() + f.transpose() * &p * f - &p;
    if let Some(corr) = lu.solve(&DVector::from_column_slice(resid.as_slice())) {
        sol += corr;
    }
    Ok(Mat::from_column_slice(n, n, sol.as_slice()))
}

fn doubling(f: &Mat, v: &SymMat) -> Result<Mat> {
    let mut p = v.as_mat().clone();
    let mut g = f.clone();
    let mut last = f64::INFINITY;
    for _ in 0..DOUBLING_MAX_ITER {
        let update = g.transpose() * &p * &g;
        p += &update;
        last = norm2(&update);
        if last <= DOUBLING_TOL * norm2(&p) || last == 0.0 {
            return Ok(p);
        }
        g = &g * &g;
    }
    Err(Error::NoConvergence { iterations: DOUBLING_MAX_ITER, last_update: last })
}
