use crate::error::{Error, Result};
use crate::matcore::{Mat, SymMat};
use crate::plant::{stage_cost, steady_covariance, SystemModel};

use super::comparator::neumaier;
use super::costs::CostPair;
use super::experiment::{Checkpoint, RegretLedger};

/// The four-way split of `R(T)` at one horizon.
///
/// With `X̂_t`, `X̂⋆`, `X̂†` the steady covariances of `K_t`, `K⋆`, `K†`:
///
/// - `online_transient = Σ_t (Q_t + K_tᵀR_tK_t)•(X_t − X̂_t)`
/// - `tracking = Σ_t (Q_t + K_tᵀR_tK_t)•X̂_t − Σ_t (Q_t + K⋆ᵀR_tK⋆)•X̂⋆`
/// - `comparator_gap = Σ_t (Q_t + K⋆ᵀR_tK⋆)•X̂⋆ − Σ_t (Q_t + K†ᵀR_tK†)•X̂†`
/// - `comparator_transient = Σ_t (Q_t + K†ᵀR_tK†)•(X̂† − X_t†)`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition {
    pub horizon: usize,
    pub online_transient: f64,
    pub tracking: f64,
    pub comparator_gap: f64,
    pub comparator_transient: f64,
    /// `R(T)` computed directly from the two cost series.
    pub regret: f64,
}

impl Decomposition {
    pub fn sum(&self) -> f64 {
        neumaier([self.online_transient, self.tracking, self.comparator_gap, self.comparator_transient])
    }

    /// `|sum − R(T)| / max(|R(T)|, ε)` with `ε` guarding an exactly zero regret.
    pub fn relative_error(&self) -> f64 {
        (self.sum() - self.regret).abs() / self.regret.abs().max(f64::MIN_POSITIVE)
    }
}

/// `T(Q̄_T + KᵀR̄_TK)•X̂` from summed costs.
fn steady_total(q_sum: &Mat, r_sum: &Mat, k: &Mat, x_hat: &SymMat) -> f64 {
    q_sum.dot(x_hat.as_mat()) + r_sum.dot(&(k * x_hat.as_mat() * k.transpose()))
}

/// Splits the online regret at every checkpoint the online series reached.
pub fn regret_decomposition(ledger: &RegretLedger) -> Result<Vec<Decomposition>> {
    let sys = &ledger.system;
    let gains = &ledger.online_gains;
    let played = ledger.online.costs.len();
    let mut steady = Vec::with_capacity(played);
    for (k, c) in gains.iter().zip(&ledger.costs).take(played) {
        let x_hat = steady_covariance(k, sys)?;
        steady.push(stage_cost(&x_hat, &c.q, &c.r, k));
    }
    ledger
        .checkpoints
        .iter()
        .filter(|cp| cp.horizon <= played)
        .map(|cp| split(sys, &ledger.costs, &ledger.online.costs, &steady, cp))
        .collect()
}

fn split(sys: &SystemModel, costs: &[CostPair], online: &[f64], steady: &[f64], cp: &Checkpoint) -> Result<Decomposition> {
    let h = cp.horizon;
    let (n, m) = (sys.state_dim(), sys.input_dim());
    let (mut q_sum, mut r_sum) = (Mat::zeros(n, n), Mat::zeros(m, m));
    for c in &costs[..h] {
        q_sum += c.q.as_mat();
        r_sum += c.r.as_mat();
    }
    let cmp = &cp.comparator;
    let x_star = steady_covariance(&cmp.k_star, sys)?;
    let x_dagger = steady_covariance(&cmp.k_dagger, sys)?;
    let s_star = steady_total(&q_sum, &r_sum, &cmp.k_star, &x_star);
    let s_dagger = steady_total(&q_sum, &r_sum, &cmp.k_dagger, &x_dagger);
    let total_online = neumaier(online[..h].iter().copied());
    let total_steady = neumaier(steady[..h].iter().copied());
    let d = Decomposition {
        horizon: h,
        online_transient: total_online - total_steady,
        tracking: total_steady - s_star,
        comparator_gap: s_star - s_dagger,
        comparator_transient: s_dagger - cmp.total,
        regret: total_online - cmp.total,
    };
    if [d.online_transient, d.tracking, d.comparator_gap, d.comparator_transient].iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate(format!("non-finite decomposition term at T = {h}")));
    }
    Ok(d)
}

/// Bound `σ(1+κ²)κ²‖X̂ − X₁‖ / (1 − e^{−2γ})` on the comparator transient of a `(κ, γ)`-strongly stable fixed gain.
pub fn comparator_transient_bound(sigma: f64, kappa: f64, gamma: f64, init_gap: f64) -> f64 {
    sigma * (1.0 + kappa * kappa) * kappa * kappa * init_gap / (1.0 - (-2.0 * gamma).exp())
}
