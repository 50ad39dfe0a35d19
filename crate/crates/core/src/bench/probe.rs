use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{Mat, SymMat};
use crate::online::{scalar_bound, OnlineParams, OnlineState};
use crate::plant::SystemModel;

use super::costs::{cost_bounds, generate_costs, CostKind};
use super::system::{initial_gain, InitialGain, SystemSource};
use super::{trial_rng, STREAM_COSTS, STREAM_INIT, STREAM_SYSTEM};

/// Trials whose `λ_max(P_t)` exceeds this are flagged as unbounded.
pub const PROBE_FLAG_LEVEL: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    #[serde(with = "super::seed_repr")]
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub horizon: usize,
    pub trials: usize,
    pub costs: CostKind,
    pub system: SystemSource,
    pub initial: InitialGain,
    /// Draw a fresh system per trial instead of sharing trial 0's.
    pub vary_system: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu_estimate: Option<f64>,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n: 7,
            m: 5,
            horizon: 1000,
            trials: 100,
            costs: CostKind::Wishart { dof: 20 },
            system: SystemSource::default(),
            initial: InitialGain::RandomDare,
            vary_system: false,
            nu_estimate: None,
        }
    }
}

impl ProbeConfig {
    /// Scalar systems with costs uniform on `[0.5, 1.5]`.
    pub fn scalar(trials: usize) -> Self {
        Self {
            n: 1,
            m: 1,
            trials,
            costs: CostKind::BoxUniform { low: 0.5, high: 1.5 },
            vary_system: true,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.trials == 0 || self.n == 0 || self.m == 0 {
            return Err(Error::Config("probe horizon, trials and dimensions must be positive".into()));
        }
        self.costs.validate(self.n, self.m)?;
        self.system.validate(self.n, self.m)?;
        self.initial.validate(self.n, self.m)
    }
}

#[derive(Debug, Clone)]
pub struct ProbeTrial {
    pub trial: usize,
    /// `λ_max(P_t)` for each completed round.
    pub series: Vec<f64>,
    pub max_eig: f64,
    /// `max_{t ≥ 2} λ_max(P_t)`.
    pub max_after_first: f64,
    pub flagged: bool,
    pub failure: Option<Error>,
    /// Scalar runs only: the bound evaluated on the realized averaged-cost ranges.
    pub bound: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ProbeReport {
    pub trials: Vec<ProbeTrial>,
}

impl ProbeReport {
    pub fn flagged(&self) -> usize {
        self.trials.iter().filter(|t| t.flagged).count()
    }
}

pub fn probe_boundedness(config: &ProbeConfig) -> Result<ProbeReport> {
    config.validate()?;
    let shared = config.system.build(config.n, config.m, &mut trial_rng(config.seed, 0, STREAM_SYSTEM))?;
    let mut trials = Vec::with_capacity(config.trials);
    for trial in 0..config.trials {
        let sys = if config.vary_system && trial > 0 {
            config.system.build(config.n, config.m, &mut trial_rng(config.seed, trial, STREAM_SYSTEM))?
        } else {
            shared.clone()
        };
        trials.push(probe_trial(config, trial, sys)?);
    }
    Ok(ProbeReport { trials })
}

fn probe_trial(config: &ProbeConfig, trial: usize, sys: SystemModel) -> Result<ProbeTrial> {
    let costs = generate_costs(&config.costs, config.n, config.m, config.horizon, &mut trial_rng(config.seed, trial, STREAM_COSTS))?;
    let k1 = initial_gain(&config.initial, &sys, &mut trial_rng(config.seed, trial, STREAM_INIT))?;
    let scalar = config.n == 1 && config.m == 1;
    let (mu, sigma) = cost_bounds(&costs);
    let nu = match (config.nu_estimate, scalar, &config.costs) {
        (Some(nu), _, _) => nu,
        (None, true, CostKind::BoxUniform { low, high }) => {
            scalar_bound(sys.a[(0, 0)], sys.b[(0, 0)], *low, *high, *low, *high).unwrap_or(1e6)
        }
        _ => 1e6,
    }
    .max(mu);
    let params = OnlineParams { mu, sigma: sigma.max(mu * (1.0 + 1e-9)), nu_estimate: nu, horizon: config.horizon, reset_round: None };
    let mut state = OnlineState::new(sys.clone(), k1, params)?;

    let mut series = Vec::with_capacity(costs.len());
    let mut failure = None;
    let (mut q_lo, mut q_hi, mut r_lo, mut r_hi) = (f64::INFINITY, 0.0f64, f64::INFINITY, 0.0f64);
    for c in &costs {
        match state.observe(&c.q, &c.r) {
            Ok(rec) => series.push(rec.p_max_eig),
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
        if scalar {
            let (q, r) = (state.qbar().map_or(0.0, avg), state.rbar().map_or(0.0, avg));
            q_lo = q_lo.min(q);
            q_hi = q_hi.max(q);
            r_lo = r_lo.min(r);
            r_hi = r_hi.max(r);
        }
    }
    let max_eig = series.iter().copied().fold(0.0, f64::max);
    let max_after_first = series.iter().skip(1).copied().fold(0.0, f64::max);
    let bound = if scalar && !series.is_empty() && sys.b[(0, 0)] != 0.0 {
        scalar_bound(sys.a[(0, 0)], sys.b[(0, 0)], q_lo, q_hi, r_lo, r_hi).ok()
    } else {
        None
    };
    Ok(ProbeTrial {
        trial,
        flagged: failure.is_some() || !(max_eig <= PROBE_FLAG_LEVEL),
        series,
        max_eig,
        max_after_first,
        failure,
        bound,
    })
}

fn avg(m: &SymMat) -> f64 {
    let inner: &Mat = m.as_mat();
    inner[(0, 0)]
}
