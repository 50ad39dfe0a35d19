//! The online Riccati update.
//!
//! At round `t` the learner plays `u_t = −K_t x_t`, then receives `(Q_t, R_t)`.
//! It folds them into running averages `Q̄_t`, `R̄_t`, evaluates the current gain
//! against those averages with one Stein solve,
//!
//! ```text
//! P_t = (A − BK_t)ᵀ P_t (A − BK_t) + Q̄_t + K_tᵀ R̄_t K_t,
//! ```
//!
//! and emits `K_{t+1} = (BᵀP_tB + R̄_t)⁻¹BᵀP_tA`. Once, at round `t⋆`, the
//! averages are frozen and Newton-Hewer is iterated until consecutive value
//! matrices are within a `1/t⋆` threshold (the reset step).

use crate::error::{Error, Result};
use crate::lyapunov::{solve_stein_transposed, STABILITY_MARGIN};
use crate::matcore::{extreme_eigs_sym, min_eig_sym, norm2, spectral_radius, Mat, SymMat};
use crate::plant::SystemModel;
use crate::riccati::gain_unchecked;

pub const RESET_MAX_ITER: usize = 1_000_000;
/// Relative floor on the reset threshold, scaled by `max(1, ‖P‖)`.
pub const RESET_THRESHOLD_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OnlineParams {
    /// Cost floor: `μI ⪯ Q_t, R_t`.
    pub mu: f64,
    /// Trace ceiling: `Tr Q_t, Tr R_t ≤ σ`.
    pub sigma: f64,
    /// Estimate of the uniform bound `P_t ⪯ νI`.
    pub nu_estimate: f64,
    pub horizon: usize,
    /// Forces the reset to fire at this round instead of the computed `t⋆`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reset_round: Option<usize>,
}

impl OnlineParams {
    pub fn new(mu: f64, sigma: f64, nu_estimate: f64, horizon: usize) -> Result<Self> {
        let p = Self { mu, sigma, nu_estimate, horizon, reset_round: None };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.sigma > self.mu && self.sigma.is_finite()) {
            return Err(Error::Config(format!(
                "need sigma > mu > 0, got mu={}, sigma={}",
                self.mu, self.sigma
            )));
        }
        if !(self.nu_estimate >= self.mu && self.nu_estimate.is_finite()) {
            return Err(Error::Config(format!(
                "need nu_estimate >= mu, got nu_estimate={}, mu={}",
                self.nu_estimate, self.mu
            )));
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        Ok(())
    }

    pub fn kappa(&self) -> f64 {
        (self.nu_estimate / self.mu).sqrt()
    }

    pub fn gamma(&self) -> f64 {
        let k = self.kappa();
        1.0 / (2.0 * k * k)
    }

    pub fn with_nu(&self, nu: f64) -> Self {
        Self { nu_estimate: nu, ..*self }
    }

    /// Reset round `⌈(4κ³‖B‖/(γμ))(2σκ + 2κ³‖B‖σ(1+κ²)/γ) + 1⌉`.
    pub fn t_star(&self, b_norm: f64) -> usize {
        let (k, g, mu, sigma) = (self.kappa(), self.gamma(), self.mu, self.sigma);
        let k3 = k * k * k;
        let value = (4.0 * k3 * b_norm / (g * mu)) * (2.0 * sigma * k + 2.0 * k3 * b_norm * sigma * (1.0 + k * k) / g) + 1.0;
        // `as` saturates huge values at usize::MAX
        (value.ceil() as usize).max(1)
    }

    /// `2σ/‖B‖ + 4κ²σ(1+κ²)/γ`, the budget `m` on `t·‖P_{t+1} − P_t‖` after the reset.
    pub fn increment_budget(&self, b_norm: f64) -> Result<f64> {
        if !(b_norm > 0.0) {
            return Err(Error::Degenerate("reset threshold is undefined for ‖B‖ = 0".into()));
        }
        let (k, g, sigma) = (self.kappa(), self.gamma(), self.sigma);
        Ok(2.0 * sigma / b_norm + 4.0 * k * k * sigma * (1.0 + k * k) / g)
    }

    /// Stop level of the reset loop: the increment budget divided by `t⋆`.
    pub fn reset_threshold(&self, b_norm: f64, t_star: usize) -> Result<f64> {
        Ok(self.increment_budget(b_norm)? / t_star as f64)
    }
}

/// Per-round diagnostics. Increments are zero at `t = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub t: usize,
    /// `‖P_t − P_{t−1}‖`.
    pub dp_norm: f64,
    /// `‖K_t − K_{t−1}‖`.
    pub dk_norm: f64,
    /// `ρ(A − BK_t)` for the gain played this round.
    pub rho: f64,
    /// `ρ(A − BK_{t+1})` for the gain emitted this round.
    pub rho_next: f64,
    pub p_max_eig: f64,
    pub p_min_eig: f64,
    /// `‖K_t‖`.
    pub k_norm: f64,
    /// `‖A − BK_t‖`.
    pub closed_loop_norm: f64,
    /// `‖Q̄_t − Q̄_{t−1}‖`.
    pub dq_norm: f64,
    /// `‖R̄_t − R̄_{t−1}‖`.
    pub dr_norm: f64,
    pub rbar_min_eig: f64,
    /// Inner Newton-Hewer iterations when the reset fired this round.
    pub reset_iterations: Option<usize>,
    /// `λ_max(P_t)` exceeded the running `ν` estimate this round.
    pub bound_violation: bool,
}

#[derive(Debug, Clone)]
pub struct OnlineState {
    sys: SystemModel,
    params: OnlineParams,
    b_norm: f64,
    t: usize,
    qbar: Option<SymMat>,
    rbar: Option<SymMat>,
    p: Option<SymMat>,
    /// Gain played in round `t`.
    k_played: Mat,
    /// Gain for round `t + 1`.
    k_next: Mat,
    nu: f64,
    t_star: usize,
    reset_done: bool,
    diagnostics: Vec<RoundRecord>,
}

impl OnlineState {
    /// Starts the algorithm from a stabilizing initial gain `K_1`.
    pub fn new(sys: SystemModel, initial_gain: Mat, params: OnlineParams) -> Result<Self> {
        params.validate()?;
        sys.check_gain(&initial_gain)?;
        let rho = spectral_radius(&sys.closed_loop(&initial_gain))?;
        if rho >= 1.0 - STABILITY_MARGIN {
            return Err(Error::UnstableClosedLoop { rho });
        }
        let b_norm = norm2(&sys.b);
        let t_star = params.reset_round.unwrap_or_else(|| params.t_star(b_norm));
        Ok(Self {
            b_norm,
            t: 0,
            qbar: None,
            rbar: None,
            p: None,
            k_played: initial_gain.clone(),
            k_next: initial_gain,
            nu: params.nu_estimate,
            t_star,
            reset_done: false,
            diagnostics: Vec::new(),
            sys,
            params,
        })
    }

    pub fn system(&self) -> &SystemModel {
        &self.sys
    }

    pub fn params(&self) -> &OnlineParams {
        &self.params
    }

    /// Number of rounds observed so far.
    pub fn round(&self) -> usize {
        self.t
    }

    /// Gain to play in the next round.
    pub fn gain(&self) -> &Mat {
        &self.k_next
    }

    /// `P_t` of the last observed round.
    pub fn value(&self) -> Option<&SymMat> {
        self.p.as_ref()
    }

    pub fn qbar(&self) -> Option<&SymMat> {
        self.qbar.as_ref()
    }

    pub fn rbar(&self) -> Option<&SymMat> {
        self.rbar.as_ref()
    }

    pub fn t_star(&self) -> usize {
        self.t_star
    }

    pub fn reset_done(&self) -> bool {
        self.reset_done
    }

    /// Current `ν`: the estimate, enlarged by any observed violation.
    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn diagnostics(&self) -> &[RoundRecord] {
        &self.diagnostics
    }

    pub fn into_diagnostics(self) -> Vec<RoundRecord> {
        self.diagnostics
    }

    /// Processes the costs revealed after round `t + 1` was played.
    pub fn observe(&mut self, q: &SymMat, r: &SymMat) -> Result<&RoundRecord> {
        let (n, m) = (self.sys.state_dim(), self.sys.input_dim());
        if q.dim() != n || r.dim() != m {
            return Err(Error::Dimension(format!(
                "costs are {}x{} / {}x{}, expected {n}x{n} / {m}x{m}",
                q.dim(),
                q.dim(),
                r.dim(),
                r.dim()
            )));
        }
        if q.as_mat().clone().cholesky().is_none() || r.as_mat().clone().cholesky().is_none() {
            return Err(Error::InvalidCost(format!("round {} costs are not positive definite", self.t + 1)));
        }
        self.t += 1;
        let t = self.t;
        let k_prev = std::mem::replace(&mut self.k_played, self.k_next.clone());

        let w_old = (t - 1) as f64 / t as f64;
        let w_new = 1.0 / t as f64;
        let average = |old: &Option<SymMat>, new: &SymMat| match old {
            None => new.clone(),
            Some(o) => SymMat::symmetrize(o.as_mat() * w_old + new.as_mat() * w_new),
        };
        let qbar = average(&self.qbar, q);
        let rbar = average(&self.rbar, r);
        let dq_norm = self.qbar.as_ref().map_or(0.0, |o| norm2(&(qbar.as_mat() - o.as_mat())));
        let dr_norm = self.rbar.as_ref().map_or(0.0, |o| norm2(&(rbar.as_mat() - o.as_mat())));

        let k = &self.k_played;
        let f = self.sys.closed_loop(k);
        let rho = spectral_radius(&f)?;
        let mut p = evaluate(&f, k, &qbar, &rbar).map_err(|e| violation(t, e))?;

        let mut reset_iterations = None;
        if !self.reset_done && t >= self.t_star {
            self.reset_done = true;
            if self.b_norm > 0.0 {
                let (p_hat, iters) = self.reset(p, &qbar, &rbar)?;
                p = p_hat;
                reset_iterations = Some(iters);
            }
        }

        let k_next = gain_unchecked(&p, &self.sys.a, &self.sys.b, &rbar)?;
        let rho_next = spectral_radius(&self.sys.closed_loop(&k_next))?;
        if rho_next >= 1.0 - STABILITY_MARGIN {
            return Err(Error::InvariantViolation {
                round: t,
                detail: format!("emitted gain has closed-loop spectral radius {rho_next}"),
            });
        }

        let (p_min_eig, p_max_eig) = extreme_eigs_sym(&p);
        let bound_violation = p_max_eig > self.nu;
        if bound_violation {
            self.nu = p_max_eig;
            if !self.reset_done && self.params.reset_round.is_none() {
                self.t_star = self.params.with_nu(self.nu).t_star(self.b_norm);
            }
        }

        let record = RoundRecord {
            t,
            dp_norm: self.p.as_ref().map_or(0.0, |old| norm2(&(p.as_mat() - old.as_mat()))),
            dk_norm: if t == 1 { 0.0 } else { norm2(&(k - &k_prev)) },
            rho,
            rho_next,
            p_max_eig,
            p_min_eig,
            k_norm: norm2(k),
            closed_loop_norm: norm2(&f),
            dq_norm,
            dr_norm,
            rbar_min_eig: min_eig_sym(&rbar),
            reset_iterations,
            bound_violation,
        };
        self.qbar = Some(qbar);
        self.rbar = Some(rbar);
        self.p = Some(p);
        self.k_next = k_next;
        self.diagnostics.push(record);
        Ok(self.diagnostics.last().expect("just pushed"))
    }

    /// Newton-Hewer on the frozen averages until `‖P̂_ℓ − P̂_{ℓ−1}‖` drops below threshold.
    fn reset(&self, p0: SymMat, qbar: &SymMat, rbar: &SymMat) -> Result<(SymMat, usize)> {
        let params = self.params.with_nu(self.nu);
        let threshold = params
            .reset_threshold(self.b_norm, self.t_star)?
            .max(RESET_THRESHOLD_FLOOR * norm2(p0.as_mat()).max(1.0));
        let mut prev = p0;
        let mut last_step = f64::INFINITY;
        for ell in 1..=RESET_MAX_ITER {
            let k_hat = gain_unchecked(&prev, &self.sys.a, &self.sys.b, rbar)?;
            let f = self.sys.closed_loop(&k_hat);
            let next = evaluate(&f, &k_hat, qbar, rbar).map_err(|e| violation(self.t, e))?;
            last_step = norm2(&(next.as_mat() - prev.as_mat()));
            if last_step <= threshold {
                return Ok((next, ell));
            }
            prev = next;
        }
        Err(Error::ResetDivergence { iterations: RESET_MAX_ITER, last_step })
    }
}

fn evaluate(f: &Mat, k: &Mat, qbar: &SymMat, rbar: &SymMat) -> Result<SymMat> {
    let forcing = SymMat::symmetrize(qbar.as_mat() + k.transpose() * rbar.as_mat() * k);
    solve_stein_transposed(f, &forcing)
}

fn violation(round: usize, e: Error) -> Error {
    match e {
        Error::UnstableClosedLoop { rho } => Error::InvariantViolation {
            round,
            detail: format!("closed loop lost stability (spectral radius {rho})"),
        },
        other => other,
    }
}

/// Smallest scalar value `P` achievable by any stable gain for costs `(q, r)`.
pub fn scalar_min_value(a: f64, b: f64, q: f64, r: f64) -> f64 {
    let b2 = b * b;
    let a2 = a * a;
    (a2 * r - r + q * b2 + ((r - a2 * r - q * b2).powi(2) + 4.0 * b2 * q * r).sqrt()) / (2.0 * b2)
}

/// Uniform bound `ν` on the scalar value sequence for averaged costs in the given ranges.
///
/// `ν = max{(A²/B²)R_max + Q_max, [Q_max(B²P̃ + R_min)² + B²P̃²A²R_max] / [(B²P̃ + R_min)² − A²R_min²]}`
/// with `P̃` the minimum admissible value at `(Q_min, R_min)`.
pub fn scalar_bound(a: f64, b: f64, q_min: f64, q_max: f64, r_min: f64, r_max: f64) -> Result<f64> {
    if b == 0.0 || !b.is_finite() || !a.is_finite() {
        return Err(Error::InvalidInput("scalar bound needs a finite A and non-zero B".into()));
    }
    if !(q_min > 0.0 && q_min <= q_max && r_min > 0.0 && r_min <= r_max) {
        return Err(Error::InvalidInput(format!(
            "cost ranges must satisfy 0 < min <= max, got Q [{q_min}, {q_max}], R [{r_min}, {r_max}]"
        )));
    }
    let (a2, b2) = (a * a, b * b);
    let p_tilde = scalar_min_value(a, b, q_min, r_min);
    let far = a2 / b2 * r_max + q_max;
    let s = b2 * p_tilde + r_min;
    let den = s * s - a2 * r_min * r_min;
    if !(den > 0.0) {
        return Err(Error::Degenerate(format!("second branch denominator is {den:e}")));
    }
    let near = (q_max * s * s + b2 * p_tilde * p_tilde * a2 * r_max) / den;
    Ok(far.max(near))
}
