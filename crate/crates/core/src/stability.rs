//! Strong-stability certificates.
//!
//! A gain `K` is `(κ, γ)`-strongly stable when `‖K‖ ≤ κ` and the closed loop
//! factors as `A − BK = HLH⁻¹` with `‖L‖ ≤ 1 − γ` and `‖H‖‖H⁻¹‖ ≤ κ`.
//! Certificates here are always built from a value matrix `P` through the
//! similarity `H = P^{−1/2}`, `L = P^{1/2}(A − BK)P^{−1/2}`.

use crate::error::{Error, Result};
use crate::matcore::{extreme_eigs_sym, norm2, spectral_radius, sym_sqrt, Mat, SymMat};

/// Additive slack on every certificate inequality.
pub const CERT_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityParams {
    /// Lower bound on the value matrices (and on the costs).
    pub mu: f64,
    /// Upper bound on the value matrices.
    pub nu: f64,
}

impl StabilityParams {
    pub fn new(mu: f64, nu: f64) -> Result<Self> {
        if !(mu > 0.0 && nu >= mu && nu.is_finite()) {
            return Err(Error::InvalidInput(format!("need 0 < mu <= nu, got mu={mu}, nu={nu}")));
        }
        Ok(Self { mu, nu })
    }

    pub fn kappa(&self) -> f64 {
        (self.nu / self.mu).sqrt()
    }

    pub fn gamma(&self) -> f64 {
        let k = self.kappa();
        1.0 / (2.0 * k * k)
    }
}

#[derive(Debug, Clone)]
pub struct StrongStabilityCert {
    pub kappa: f64,
    pub gamma: f64,
    pub h: Mat,
    pub l: Mat,
    pub k: Mat,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// `‖A − BK − HLH⁻¹‖ / max(1, ‖A − BK‖)` too large.
    Similarity { rel_err: f64 },
    /// `H` could not be inverted.
    SingularSimilarity,
    LNorm { norm: f64, limit: f64 },
    Conditioning { value: f64, limit: f64 },
    GainNorm { norm: f64, limit: f64 },
    Parameters { kappa: f64, gamma: f64 },
    Shape(String),
}

impl Violation {
    pub fn margin(&self) -> f64 {
        match *self {
            Violation::Similarity { rel_err } => rel_err - CERT_SLACK,
            Violation::LNorm { norm, limit }
            | Violation::Conditioning { value: norm, limit }
            | Violation::GainNorm { norm, limit } => norm - limit,
            _ => f64::INFINITY,
        }
    }
}

/// Outcome of [`verify_cert`].
///
/// `violations` holds failures of the similarity, `‖L‖` and conditioning
/// conditions. The gain-norm condition `‖K‖ ≤ κ` is not implied by the
/// P-based construction, so its failure is reported separately in
/// `gain_norm` and does not by itself fail [`CertReport::holds`].
#[derive(Debug, Clone, PartialEq)]
pub struct CertReport {
    pub violations: Vec<Violation>,
    pub gain_norm: Option<Violation>,
}

impl CertReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }

    /// Every condition including `‖K‖ ≤ κ`.
    pub fn holds_strictly(&self) -> bool {
        self.holds() && self.gain_norm.is_none()
    }
}

pub fn cert_from_value_matrix(
    p: &SymMat,
    a: &Mat,
    b: &Mat,
    k: &Mat,
    params: &StabilityParams,
) -> Result<StrongStabilityCert> {
    let n = a.nrows();
    if p.dim() != n || b.nrows() != n || k.shape() != (b.ncols(), n) {
        return Err(Error::Dimension("certificate inputs have inconsistent shapes".into()));
    }
    let (lo, hi) = extreme_eigs_sym(p);
    if lo < params.mu - 1e-9 * params.mu.max(1.0) || hi > params.nu + 1e-9 * params.nu.max(1.0) {
        return Err(Error::BoundViolation(format!(
            "value matrix spectrum [{lo:.6e}, {hi:.6e}] outside [mu, nu] = [{:.6e}, {:.6e}]",
            params.mu, params.nu
        )));
    }
    let f = a - b * k;
    let rho = spectral_radius(&f)?;
    if rho >= 1.0 {
        return Err(Error::UnstableClosedLoop { rho });
    }
    let roots = sym_sqrt(p)?;
    let inv = roots.inv_root.ok_or(Error::NotPsd { min_eig: lo })?;
    let l = roots.root.as_mat() * &f * inv.as_mat();
    Ok(StrongStabilityCert {
        kappa: params.kappa(),
        gamma: params.gamma(),
        h: inv.into_inner(),
        l,
        k: k.clone(),
    })
}

pub fn verify_cert(cert: &StrongStabilityCert, a: &Mat, b: &Mat) -> CertReport {
    let mut violations = Vec::new();
    let n = a.nrows();
    if cert.h.shape() != (n, n) || cert.l.shape() != (n, n) || cert.k.shape() != (b.ncols(), n) {
        violations.push(Violation::Shape("certificate shapes do not match the system".into()));
        return CertReport { violations, gain_norm: None };
    }
    if !(cert.kappa > 0.0) || !(cert.gamma > 0.0 && cert.gamma <= 1.0) {
        violations.push(Violation::Parameters { kappa: cert.kappa, gamma: cert.gamma });
    }
    let f = a - b * &cert.k;
    match cert.h.clone().try_inverse() {
        None => violations.push(Violation::SingularSimilarity),
        Some(h_inv) => {
            let rebuilt = &cert.h * &cert.l * &h_inv;
            let rel_err = norm2(&(&f - rebuilt)) / norm2(&f).max(1.0);
            if rel_err > CERT_SLACK {
                violations.push(Violation::Similarity { rel_err });
            }
            let cond = norm2(&cert.h) * norm2(&h_inv);
            if cond > cert.kappa + CERT_SLACK {
                violations.push(Violation::Conditioning { value: cond, limit: cert.kappa });
            }
        }
    }
    let l_norm = norm2(&cert.l);
    if l_norm > 1.0 - cert.gamma + CERT_SLACK {
        violations.push(Violation::LNorm { norm: l_norm, limit: 1.0 - cert.gamma });
    }
    let k_norm = norm2(&cert.k);
    let gain_norm = (k_norm > cert.kappa + CERT_SLACK)
        .then_some(Violation::GainNorm { norm: k_norm, limit: cert.kappa });
    CertReport { violations, gain_norm }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequentialReport {
    /// Index of the first certificate that fails, on its own or against its predecessor.
    pub first_failure: Option<usize>,
    /// `max_t ‖H_{t+1}⁻¹H_t‖` over the sequence.
    pub max_link: f64,
    /// `β = max_t ‖H_t‖`.
    pub beta: f64,
    /// `α = min_t 1/‖H_t⁻¹‖`.
    pub alpha: f64,
}

impl SequentialReport {
    pub fn holds(&self) -> bool {
        self.first_failure.is_none()
    }
}

/// Checks that a certificate sequence is sequentially `(κ, γ)`-strongly stable.
///
/// All certificates must share `(κ, γ)`.
pub fn verify_sequential(certs: &[StrongStabilityCert], a: &Mat, b: &Mat) -> SequentialReport {
    let mut first_failure = None;
    let mut max_link: f64 = 0.0;
    let mut beta: f64 = 0.0;
    let mut inv_max: f64 = 0.0;
    let Some(head) = certs.first() else {
        return SequentialReport { first_failure: None, max_link: 0.0, beta: 0.0, alpha: f64::INFINITY };
    };
    let (kappa, gamma) = (head.kappa, head.gamma);
    let mut prev_h: Option<&Mat> = None;
    for (idx, cert) in certs.iter().enumerate() {
        let shared = (cert.kappa - kappa).abs() <= 1e-12 * kappa && (cert.gamma - gamma).abs() <= 1e-12 * gamma;
        let mut ok = shared && verify_cert(cert, a, b).holds();
        match cert.h.clone().try_inverse() {
            Some(h_inv) => {
                beta = beta.max(norm2(&cert.h));
                inv_max = inv_max.max(norm2(&h_inv));
                if let Some(prev) = prev_h {
                    let link = norm2(&(&h_inv * prev));
                    max_link = max_link.max(link);
                    ok &= link <= 1.0 + gamma + CERT_SLACK;
                }
            }
            None => ok = false,
        }
        // shared α, β must reproduce κ = β/α
        ok &= beta * inv_max <= kappa + CERT_SLACK;
        if !ok && first_failure.is_none() {
            first_failure = Some(idx);
        }
        prev_h = Some(&cert.h);
    }
    SequentialReport { first_failure, max_link, beta, alpha: 1.0 / inv_max }
}

/// `κ² e^{−2γt} · gap`: bound on `‖X_{t+1} − X̂‖` under a fixed strongly stable gain.
pub fn covariance_decay_bound(kappa: f64, gamma: f64, t: usize, init_gap: f64) -> f64 {
    kappa * kappa * (-2.0 * gamma * t as f64).exp() * init_gap
}

/// Bound on `‖X_{t+1} − X̂_{t+1}‖` for a sequentially strongly stable gain sequence.
///
/// `etas[i]` is `η_{i+1}`, a bound on `‖X̂_{i+2} − X̂_{i+1}‖`; at least `t` entries are needed.
pub fn sequential_covariance_bound(kappa: f64, gamma: f64, t: usize, init_gap: f64, etas: &[f64]) -> f64 {
    assert!(etas.len() >= t, "need {t} eta values, got {}", etas.len());
    let k2 = kappa * kappa;
    let rate = 2.0 * gamma * gamma;
    let drift: f64 = (0..t).map(|s| (-rate * s as f64).exp() * etas[t - s - 1]).sum();
    k2 * (-rate * t as f64).exp() * init_gap + k2 * drift
}
