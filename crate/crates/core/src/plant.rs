//! The controlled plant `x_{t+1} = Ax_t + Bu_t + w_t`, `w_t ~ N(0, W)`.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::lyapunov::solve_stein;
use crate::matcore::{ensure_finite, is_psd, spectral_radius, sym_sqrt, trace_dot, Mat, SymMat};
use crate::riccati::gain_unchecked;

#[derive(Debug, Clone)]
pub struct SystemModel {
    pub a: Mat,
    pub b: Mat,
    pub w: SymMat,
    w_sqrt: Mat,
}

impl SystemModel {
    pub fn new(a: Mat, b: Mat, w: SymMat) -> Result<Self> {
        ensure_finite(&a)?;
        ensure_finite(&b)?;
        let n = a.nrows();
        if !a.is_square() || b.nrows() != n || w.dim() != n {
            return Err(Error::Dimension(format!(
                "system shapes A {:?}, B {:?}, W {}x{}",
                a.shape(),
                b.shape(),
                w.dim(),
                w.dim()
            )));
        }
        if !is_psd(&w) {
            return Err(Error::NotPsd { min_eig: crate::matcore::min_eig_sym(&w) });
        }
        let w_sqrt = sym_sqrt(&w)?.root.into_inner();
        Ok(Self { a, b, w, w_sqrt })
    }

    /// Unit noise covariance.
    pub fn with_identity_noise(a: Mat, b: Mat) -> Result<Self> {
        let n = a.nrows();
        Self::new(a, b, SymMat::identity(n))
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    /// `ω = Tr(W)`.
    pub fn noise_trace(&self) -> f64 {
        self.w.trace()
    }

    pub fn noise_sqrt(&self) -> &Mat {
        &self.w_sqrt
    }

    pub fn closed_loop(&self, k: &Mat) -> Mat {
        &self.a - &self.b * k
    }

    pub(crate) fn check_gain(&self, k: &Mat) -> Result<()> {
        if k.shape() != (self.input_dim(), self.state_dim()) {
            return Err(Error::Dimension(format!(
                "gain is {:?}, expected {}x{}",
                k.shape(),
                self.input_dim(),
                self.state_dim()
            )));
        }
        Ok(())
    }
}

/// Linear state feedback `u = −Kx` with its closed loop `A − BK` cached.
#[derive(Debug, Clone)]
pub struct Policy {
    pub gain: Mat,
    pub closed_loop: Mat,
}

impl Policy {
    pub fn new(gain: Mat, sys: &SystemModel) -> Result<Self> {
        sys.check_gain(&gain)?;
        let closed_loop = sys.closed_loop(&gain);
        Ok(Self { gain, closed_loop })
    }

    pub fn spectral_radius(&self) -> f64 {
        spectral_radius(&self.closed_loop).unwrap_or(f64::INFINITY)
    }

    pub fn is_stable(&self) -> bool {
        self.spectral_radius() < 1.0
    }
}

/// `(A − BK)x + W^{1/2}z` with `z` standard normal drawn from `rng`.
pub fn rollout_step<R: Rng + ?Sized>(x: &DVector<f64>, k: &Mat, sys: &SystemModel, rng: &mut R) -> Result<DVector<f64>> {
    sys.check_gain(k)?;
    if x.len() != sys.state_dim() {
        return Err(Error::Dimension(format!("state has length {}, expected {}", x.len(), sys.state_dim())));
    }
    let z = DVector::from_fn(sys.state_dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
    Ok(sys.closed_loop(k) * x + &sys.w_sqrt * z)
}

/// `X ↦ (A − BK)X(A − BK)ᵀ + W`.
pub fn propagate_cov(x: &SymMat, k: &Mat, sys: &SystemModel) -> Result<SymMat> {
    sys.check_gain(k)?;
    if x.dim() != sys.state_dim() {
        return Err(Error::Dimension("covariance does not match the state dimension".into()));
    }
    let f = sys.closed_loop(k);
    Ok(propagate_with(x, &f, &sys.w))
}

pub(crate) fn propagate_with(x: &SymMat, f: &Mat, w: &SymMat) -> SymMat {
    SymMat::symmetrize(f * x.as_mat() * f.transpose() + w.as_mat())
}

/// `(Q + KᵀRK) • X = E[xᵀQx + uᵀRu]` for `x ~ N(0, X)`, `u = −Kx`.
pub fn expected_stage_cost(x: &SymMat, q: &SymMat, r: &SymMat, k: &Mat) -> Result<f64> {
    if k.shape() != (r.dim(), q.dim()) || x.dim() != q.dim() {
        return Err(Error::Dimension("stage cost shapes are inconsistent".into()));
    }
    Ok(stage_cost(x, q, r, k))
}

pub(crate) fn stage_cost(x: &SymMat, q: &SymMat, r: &SymMat, k: &Mat) -> f64 {
    // Q•X + R•(KXKᵀ) avoids forming KᵀRK
    q.dot(x.as_mat()) + r.dot(&(k * x.as_mat() * k.transpose()))
}

/// Fixed point `X̂ = (A − BK)X̂(A − BK)ᵀ + W`.
pub fn steady_covariance(k: &Mat, sys: &SystemModel) -> Result<SymMat> {
    sys.check_gain(k)?;
    solve_stein(&sys.closed_loop(k), &sys.w)
}

/// Time-varying gains of the finite-horizon problem with terminal cost `Q_T`.
///
/// Runs `P_T = Q_T`, `K_t = (BᵀP_{t+1}B + R_t)⁻¹BᵀP_{t+1}A` backwards and
/// returns `K_1, …, K_{T−1}`.
pub fn finite_horizon_gains(sys: &SystemModel, qs: &[SymMat], rs: &[SymMat]) -> Result<Vec<Mat>> {
    let horizon = qs.len();
    if horizon == 0 || rs.len() < horizon {
        return Err(Error::InvalidInput("finite horizon needs T ≥ 1 cost pairs".into()));
    }
    let mut p = qs[horizon - 1].clone();
    let mut gains = vec![Mat::zeros(sys.input_dim(), sys.state_dim()); horizon - 1];
    for t in (0..horizon - 1).rev() {
        let k = gain_unchecked(&p, &sys.a, &sys.b, &rs[t])?;
        let f = sys.closed_loop(&k);
        p = SymMat::symmetrize(
            f.transpose() * p.as_mat() * &f + k.transpose() * rs[t].as_mat() * &k + qs[t].as_mat(),
        );
        gains[t] = k;
    }
    Ok(gains)
}

/// `E[x_TᵀQ_Tx_T + Σ_{t<T}(x_tᵀQ_tx_t + u_tᵀR_tu_t)]` for gains `K_1, …, K_{T−1}`.
pub fn finite_horizon_cost(
    sys: &SystemModel,
    gains: &[Mat],
    qs: &[SymMat],
    rs: &[SymMat],
    x1: &SymMat,
) -> Result<f64> {
    let horizon = qs.len();
    if gains.len() + 1 != horizon || rs.len() < horizon {
        return Err(Error::InvalidInput("need T−1 gains for T cost pairs".into()));
    }
    let mut x = x1.clone();
    let mut total = 0.0;
    for (t, k) in gains.iter().enumerate() {
        total += expected_stage_cost(&x, &qs[t], &rs[t], k)?;
        x = propagate_cov(&x, k, sys)?;
    }
    Ok(total + trace_dot(qs[horizon - 1].as_mat(), x.as_mat())?)
}
