//! Discrete algebraic Riccati equation machinery.
//!
//! The solver bootstraps a stabilizing gain by value iteration (the forward
//! Riccati difference map) and then runs Newton-Hewer policy iteration,
//! which converges quadratically once started from any stabilizing gain.

use crate::error::{Error, Result};
use crate::lyapunov::solve_stein_transposed;
use crate::matcore::{ensure_finite, min_eig_sym, norm2, spectral_radius, Mat, SymMat};

#[derive(Debug, Clone)]
pub struct DareProblem {
    pub a: Mat,
    pub b: Mat,
    pub q: SymMat,
    pub r: SymMat,
}

impl DareProblem {
    pub fn new(a: Mat, b: Mat, q: SymMat, r: SymMat) -> Result<Self> {
        ensure_finite(&a)?;
        ensure_finite(&b)?;
        let n = a.nrows();
        if !a.is_square() || b.nrows() != n || q.dim() != n || r.dim() != b.ncols() {
            return Err(Error::Dimension(format!(
                "DARE shapes A {:?}, B {:?}, Q {n}x{n}, R {}x{}",
                a.shape(),
                b.shape(),
                r.dim(),
                r.dim()
            )));
        }
        if min_eig_sym(&q) <= 0.0 {
            return Err(Error::InvalidCost("Q must be positive definite".into()));
        }
        if min_eig_sym(&r) <= 0.0 {
            return Err(Error::InvalidCost("R must be positive definite".into()));
        }
        Ok(Self { a, b, q, r })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn closed_loop(&self, k: &Mat) -> Mat {
        &self.a - &self.b * k
    }
}

#[derive(Debug, Clone)]
pub struct DareSolution {
    pub p: SymMat,
    pub k: Mat,
    /// Newton-Hewer steps taken after the bootstrap.
    pub iterations: usize,
    /// Value-iteration steps spent finding the first stabilizing gain.
    pub bootstrap_steps: usize,
    /// `‖P − riccati_step(P)‖`.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct DareOptions {
    /// Relative DARE residual accepted at the end, scaled by `max(1, ‖P‖)`.
    pub residual_tol: f64,
    /// Hewer stops once `‖P_k − P_{k−1}‖ ≤ step_tol·max(1, ‖P_k‖)`.
    pub step_tol: f64,
    pub max_iter: usize,
    pub bootstrap_max_steps: usize,
    /// Bootstrap accepts a gain once `ρ(A − BK) ≤ 1 − bootstrap_margin`.
    pub bootstrap_margin: f64,
}

impl Default for DareOptions {
    fn default() -> Self {
        Self {
            residual_tol: 1e-11,
            step_tol: 1e-12,
            max_iter: 100,
            bootstrap_max_steps: 10_000,
            bootstrap_margin: 1e-6,
        }
    }
}

/// `K = (BᵀPB + R)⁻¹BᵀPA`, through a Cholesky solve.
pub fn gain(p: &SymMat, a: &Mat, b: &Mat, r: &SymMat) -> Result<Mat> {
    if r.as_mat().clone().cholesky().is_none() {
        return Err(Error::InvalidCost("R must be positive definite".into()));
    }
    gain_unchecked(p, a, b, r)
}

pub(crate) fn gain_unchecked(p: &SymMat, a: &Mat, b: &Mat, r: &SymMat) -> Result<Mat> {
    let btp = b.transpose() * p.as_mat();
    let s = &btp * b + r.as_mat();
    let chol = s
        .cholesky()
        .ok_or_else(|| Error::InvalidCost("BᵀPB + R is not positive definite".into()))?;
    Ok(chol.solve(&(btp * a)))
}

/// One application of `P ↦ AᵀPA − AᵀPB(BᵀPB+R)⁻¹BᵀPA + Q`.
pub fn riccati_step(p: &SymMat, prob: &DareProblem) -> Result<SymMat> {
    let k = gain_unchecked(p, &prob.a, &prob.b, &prob.r)?;
    let atp = prob.a.transpose() * p.as_mat();
    let next = &atp * &prob.a - &atp * &prob.b * k + prob.q.as_mat();
    Ok(SymMat::symmetrize(next))
}

/// Policy evaluation of `k` followed by policy improvement.
///
/// Returns the value matrix `P = (A−BK)ᵀP(A−BK) + KᵀRK + Q` and the improved gain.
pub fn hewer_step(k: &Mat, prob: &DareProblem) -> Result<(SymMat, Mat)> {
    let p = policy_value(k, prob)?;
    let next = gain_unchecked(&p, &prob.a, &prob.b, &prob.r)?;
    Ok((p, next))
}

/// Value matrix of a fixed gain under `(Q, R)`.
pub fn policy_value(k: &Mat, prob: &DareProblem) -> Result<SymMat> {
    let f = prob.closed_loop(k);
    let forcing = SymMat::symmetrize(prob.q.as_mat() + k.transpose() * prob.r.as_mat() * k);
    solve_stein_transposed(&f, &forcing)
}

pub fn dare_residual(p: &SymMat, prob: &DareProblem) -> Result<f64> {
    Ok(norm2(&(p.as_mat() - riccati_step(p, prob)?.as_mat())))
}

/// Value iteration from `P₀ = Q` until the induced gain is stabilizing.
///
/// Returns the gain and the number of value-iteration steps taken.
pub fn stabilizing_gain(prob: &DareProblem, opts: &DareOptions) -> Result<(Mat, usize)> {
    let mut p = prob.q.clone();
    for step in 0..=opts.bootstrap_max_steps {
        let k = gain_unchecked(&p, &prob.a, &prob.b, &prob.r)?;
        if spectral_radius(&prob.closed_loop(&k))? <= 1.0 - opts.bootstrap_margin {
            return Ok((k, step));
        }
        p = match riccati_step(&p, prob) {
            Ok(next) if next.iter().all(|v| v.is_finite()) && next.amax() < 1e150 => next,
            _ => {
                return Err(Error::NotStabilizable(format!(
                    "value iteration diverged after {step} steps without a stabilizing gain"
                )))
            }
        };
    }
    Err(Error::NotStabilizable(format!(
        "no stabilizing gain within {} value-iteration steps",
        opts.bootstrap_max_steps
    )))
}

pub fn solve_dare(prob: &DareProblem, opts: &DareOptions) -> Result<DareSolution> {
    let (k0, steps) = stabilizing_gain(prob, opts)?;
    hewer_from(prob, k0, steps, opts)
}

/// Like [`solve_dare`] but starts Newton-Hewer from `k0` when it is stabilizing.
pub fn solve_dare_from(prob: &DareProblem, k0: &Mat, opts: &DareOptions) -> Result<DareSolution> {
    let stable = k0.shape() == (prob.input_dim(), prob.state_dim())
        && spectral_radius(&prob.closed_loop(k0))? <= 1.0 - opts.bootstrap_margin;
    if stable {
        hewer_from(prob, k0.clone(), 0, opts)
    } else {
        solve_dare(prob, opts)
    }
}

fn hewer_from(prob: &DareProblem, k0: Mat, bootstrap_steps: usize, opts: &DareOptions) -> Result<DareSolution> {
    let mut k = k0;
    let mut prev: Option<SymMat> = None;
    let mut last = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let (p, next) = hewer_step(&k, prob)?;
        k = next;
        if let Some(prev) = &prev {
            last = norm2(&(p.as_mat() - prev.as_mat()));
            if last <= opts.step_tol * norm2(p.as_mat()).max(1.0) {
                let residual = dare_residual(&p, prob)?;
                if residual > opts.residual_tol * norm2(p.as_mat()).max(1.0) {
                    return Err(Error::NoConvergence { iterations: it, last_update: residual });
                }
                return Ok(DareSolution { p, k, iterations: it, bootstrap_steps, residual });
            }
        }
        prev = Some(p);
    }
    Err(Error::NoConvergence { iterations: opts.max_iter, last_update: last })
}
