use crate::error::{Error, Result};
use crate::matcore::{max_eig_sym, spectral_radius, Mat, SymMat};
use crate::online::{OnlineParams, OnlineState, RoundRecord};
use crate::plant::{propagate_with, stage_cost, SystemModel};
use crate::riccati::{solve_dare_from, DareOptions, DareProblem};

use super::comparator::{comparator_fixed, fixed_gain_costs, neumaier, Comparator};
use super::costs::{cost_bounds, generate_costs, CostPair};
use super::system::initial_gain;
use super::{trial_rng, ExperimentConfig, STREAM_COSTS, STREAM_INIT, STREAM_SYSTEM};

/// Expected stage costs of one algorithm, possibly cut short by a failure.
#[derive(Debug, Clone)]
pub struct AlgorithmSeries {
    pub name: &'static str,
    pub costs: Vec<f64>,
    /// Set when the algorithm stopped before the horizon.
    pub failure: Option<Error>,
    /// `max_t ρ(A − BK_t)` over the gains it played.
    pub max_rho: f64,
}

impl AlgorithmSeries {
    pub fn completed(&self, horizon: usize) -> bool {
        self.failure.is_none() && self.costs.len() >= horizon
    }

    /// Total cost over the first `horizon` rounds, if the series reaches that far.
    pub fn total(&self, horizon: usize) -> Option<f64> {
        (self.costs.len() >= horizon).then(|| neumaier(self.costs[..horizon].iter().copied()))
    }
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub horizon: usize,
    pub comparator: Comparator,
    pub regret_online: Option<f64>,
    pub regret_fll: Option<f64>,
    pub regret_recent: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RegretLedger {
    pub config: ExperimentConfig,
    pub trial: usize,
    pub system: SystemModel,
    pub costs: Vec<CostPair>,
    pub x1: SymMat,
    pub params: OnlineParams,
    pub initial_gain: Mat,
    pub online: AlgorithmSeries,
    pub fll: Option<AlgorithmSeries>,
    pub recent: Option<AlgorithmSeries>,
    /// `K_1, …, K_t` played by the online algorithm.
    pub online_gains: Vec<Mat>,
    pub diagnostics: Vec<RoundRecord>,
    pub t_star: usize,
    pub reset_done: bool,
    /// Per-round costs of the final-horizon comparator `K†`.
    pub comparator_costs: Vec<f64>,
    pub checkpoints: Vec<Checkpoint>,
}

impl RegretLedger {
    pub fn horizon(&self) -> usize {
        self.costs.len()
    }

    /// Final-horizon checkpoint.
    pub fn final_checkpoint(&self) -> &Checkpoint {
        self.checkpoints.last().expect("at least one checkpoint")
    }

    pub fn checkpoint(&self, horizon: usize) -> Option<&Checkpoint> {
        self.checkpoints.iter().find(|c| c.horizon == horizon)
    }

    /// Cumulative regret against the final-horizon comparator, round by round.
    pub fn cumulative_regret(&self, series: &AlgorithmSeries) -> Vec<f64> {
        let mut acc = Vec::with_capacity(series.costs.len());
        let (mut sum, mut comp) = (0.0, 0.0);
        for (c, k) in series.costs.iter().zip(&self.comparator_costs) {
            sum += c;
            comp += k;
            acc.push(sum - comp);
        }
        acc
    }

    pub fn max_p_eig(&self) -> f64 {
        self.diagnostics.iter().map(|r| r.p_max_eig).fold(0.0, f64::max)
    }
}

/// `10, 100, …` up to `T`, then `T` itself.
pub fn checkpoint_horizons(horizon: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut h = 10usize;
    while h < horizon {
        out.push(h);
        h = h.saturating_mul(10);
    }
    out.push(horizon);
    out
}

/// Expected stage costs of a gain sequence by covariance propagation from `X₁`.
pub fn policy_costs(sys: &SystemModel, gains: &[Mat], costs: &[CostPair], x1: &SymMat) -> Vec<f64> {
    let mut x = x1.clone();
    let mut out = Vec::with_capacity(gains.len());
    for (k, c) in gains.iter().zip(costs) {
        out.push(stage_cost(&x, &c.q, &c.r, k));
        x = propagate_with(&x, &sys.closed_loop(k), &sys.w);
    }
    out
}

/// Runs trial 0 of a configuration.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RegretLedger> {
    run_trial(config, 0)
}

/// Runs every enabled algorithm on one trial's system and cost stream.
pub fn run_trial(config: &ExperimentConfig, trial: usize) -> Result<RegretLedger> {
    config.validate()?;
    let (n, m, horizon) = (config.n, config.m, config.horizon);
    let system = config.system.build(n, m, &mut trial_rng(config.seed, trial, STREAM_SYSTEM))?;
    let costs = generate_costs(&config.costs, n, m, horizon, &mut trial_rng(config.seed, trial, STREAM_COSTS))?;
    let k1 = initial_gain(&config.initial.gain, &system, &mut trial_rng(config.seed, trial, STREAM_INIT))?;
    let x1 = SymMat::identity(n).scaled(config.initial.x1_scale);

    let final_cmp = comparator_fixed(&system, &costs, &x1, &config.comparator, None)?;
    let params = resolve_params(config, &costs, &final_cmp);

    let (online, online_gains, state) = run_online(&system, &k1, params, &costs, &x1)?;
    let fll = config.baselines.fll.then(|| {
        let (mut q_sum, mut r_sum) = (Mat::zeros(n, n), Mat::zeros(m, m));
        run_dare_baseline("fll", &system, &k1, &costs, &x1, |t| {
            q_sum += costs[t].q.as_mat();
            r_sum += costs[t].r.as_mat();
            let w = 1.0 / (t + 1) as f64;
            (SymMat::symmetrize(&q_sum * w), SymMat::symmetrize(&r_sum * w))
        })
    });
    let recent = config
        .baselines
        .recent
        .then(|| run_dare_baseline("recent", &system, &k1, &costs, &x1, |t| (costs[t].q.clone(), costs[t].r.clone())));

    let comparator_costs = fixed_gain_costs(&system, &final_cmp.k_dagger, &costs, &x1);
    let mut checkpoints = Vec::new();
    for h in checkpoint_horizons(horizon) {
        let comparator = if h == horizon {
            final_cmp.clone()
        } else {
            let warm = online_gains.get(h - 1).unwrap_or(&k1);
            comparator_fixed(&system, &costs[..h], &x1, &config.comparator, Some(warm))?
        };
        let regret = |s: &AlgorithmSeries| s.total(h).map(|t| t - comparator.total);
        checkpoints.push(Checkpoint {
            horizon: h,
            regret_online: regret(&online),
            regret_fll: fll.as_ref().and_then(regret),
            regret_recent: recent.as_ref().and_then(regret),
            comparator,
        });
    }

    Ok(RegretLedger {
        config: config.clone(),
        trial,
        t_star: state.t_star(),
        reset_done: state.reset_done(),
        diagnostics: state.into_diagnostics(),
        system,
        costs,
        x1,
        params,
        initial_gain: k1,
        online,
        fll,
        recent,
        online_gains,
        comparator_costs,
        checkpoints,
    })
}

/// Fills in `μ`, `σ` and `ν` from the realized stream where the config leaves them open.
fn resolve_params(config: &ExperimentConfig, costs: &[CostPair], cmp: &Comparator) -> OnlineParams {
    let (mu_real, sigma_real) = cost_bounds(costs);
    let mu = config.online.mu.unwrap_or(mu_real);
    // σ > μ is required; equal only for constant scalar-identity streams
    let sigma = config.online.sigma.unwrap_or(sigma_real).max(mu * (1.0 + 1e-9));
    let nu = config.online.nu_estimate.unwrap_or(10.0 * max_eig_sym(&cmp.p_star)).max(mu);
    OnlineParams { mu, sigma, nu_estimate: nu, horizon: config.horizon, reset_round: config.online.reset_round }
}

fn run_online(
    sys: &SystemModel,
    k1: &Mat,
    params: OnlineParams,
    costs: &[CostPair],
    x1: &SymMat,
) -> Result<(AlgorithmSeries, Vec<Mat>, OnlineState)> {
    let mut state = OnlineState::new(sys.clone(), k1.clone(), params)?;
    let mut gains = Vec::with_capacity(costs.len());
    let mut failure = None;
    for c in costs {
        gains.push(state.gain().clone());
        if let Err(e) = state.observe(&c.q, &c.r) {
            failure = Some(e);
            break;
        }
    }
    let max_rho = state.diagnostics().iter().map(|r| r.rho).fold(0.0, f64::max);
    let series = AlgorithmSeries { name: "online", costs: policy_costs(sys, &gains, costs, x1), failure, max_rho };
    Ok((series, gains, state))
}

/// Plays `K_{t+1} = DARE(targets(t))` after each round, warm-started from `K_t`.
fn run_dare_baseline(
    name: &'static str,
    sys: &SystemModel,
    k1: &Mat,
    costs: &[CostPair],
    x1: &SymMat,
    mut targets: impl FnMut(usize) -> (SymMat, SymMat),
) -> AlgorithmSeries {
    let opts = DareOptions::default();
    let mut gains = Vec::with_capacity(costs.len());
    let mut k = k1.clone();
    let mut failure = None;
    let mut max_rho: f64 = 0.0;
    for t in 0..costs.len() {
        match spectral_radius(&sys.closed_loop(&k)) {
            Ok(rho) if rho < 1.0 => max_rho = max_rho.max(rho),
            Ok(rho) => {
                failure = Some(Error::UnstableClosedLoop { rho });
                break;
            }
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
        gains.push(k.clone());
        if t + 1 == costs.len() {
            break;
        }
        let (q, r) = targets(t);
        let next = DareProblem::new(sys.a.clone(), sys.b.clone(), q, r).and_then(|p| solve_dare_from(&p, &k, &opts));
        match next {
            Ok(sol) => k = sol.k,
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    AlgorithmSeries { name, costs: policy_costs(sys, &gains, costs, x1), failure, max_rho }
}
