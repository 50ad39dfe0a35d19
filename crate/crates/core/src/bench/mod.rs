//! Experiment harness: cost streams, random systems, hindsight comparators,
//! regret ledgers and the boundedness probe.

mod comparator;
mod costs;
mod decomposition;
mod experiment;
mod probe;
mod system;

pub use comparator::{comparator_fixed, nelder_mead, Comparator, FixedCostEvaluator};
pub use costs::{cost_bounds, generate_costs, CostGenerator, CostKind, CostPair};
pub use decomposition::{comparator_transient_bound, regret_decomposition, Decomposition};
pub use experiment::{
    checkpoint_horizons, policy_costs, run_experiment, run_trial, AlgorithmSeries, Checkpoint, RegretLedger,
};
pub use probe::{probe_boundedness, ProbeConfig, ProbeReport, ProbeTrial, PROBE_FLAG_LEVEL};
pub use system::{gen_system, initial_gain, is_admissible, InitialGain, SystemSource};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Named presets for the three cost scenarios plus a constant-cost control.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    /// Wishart costs.
    One,
    /// `Q = I`, part of `R`'s diagonal i.i.d. uniform.
    Two,
    /// `Q = I`, part of `R`'s diagonal following a bounded random walk.
    Three,
    Constant,
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" => Ok(Self::One),
            "2" => Ok(Self::Two),
            "3" => Ok(Self::Three),
            "constant" => Ok(Self::Constant),
            other => Err(Error::Config(format!("unknown experiment kind `{other}` (expected 1, 2, 3 or constant)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OnlineConfig {
    /// Cost floor; inferred from the realized stream when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    /// Trace ceiling; inferred from the realized stream when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Bound estimate for `P_t`; defaults to ten times `λ_max` of the hindsight DARE solution.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu_estimate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reset_round: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConfig {
    pub gain: InitialGain,
    /// `X₁ = x1_scale · I`.
    pub x1_scale: f64,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self { gain: InitialGain::DareIdentity, x1_scale: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ComparatorConfig {
    /// Refine `K⋆` by local search.
    pub search: bool,
    pub iterations: usize,
    /// Candidates with `ρ(A − BK) ≥ 1 − margin` are rejected.
    pub margin: f64,
}

impl Default for ComparatorConfig {
    fn default() -> Self {
        Self { search: true, iterations: 200, margin: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineConfig {
    pub fll: bool,
    pub recent: bool,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self { fll: true, recent: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    #[serde(with = "seed_repr")]
    pub seed: u64,
    pub horizon: usize,
    pub n: usize,
    pub m: usize,
    pub trials: usize,
    pub costs: CostKind,
    pub system: SystemSource,
    pub online: OnlineConfig,
    pub initial: InitialConfig,
    pub comparator: ComparatorConfig,
    pub baselines: BaselineConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::preset(ExperimentKind::One)
    }
}

/// Seeds above `i64::MAX` are stored as decimal strings so that formats with
/// signed 64-bit integers (TOML) can hold every seed.
pub(crate) mod seed_repr {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(seed: &u64, s: S) -> Result<S::Ok, S::Error> {
        if *seed <= i64::MAX as u64 {
            s.serialize_u64(*seed)
        } else {
            s.serialize_str(&seed.to_string())
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Int(u64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Int(v) => Ok(v),
            Repr::Text(t) => t.parse().map_err(|_| de::Error::custom(format!("seed `{t}` is not a 64-bit unsigned integer"))),
        }
    }
}

/// RNG stream offsets within a trial.
pub(crate) const STREAM_SYSTEM: u64 = 0;
pub(crate) const STREAM_COSTS: u64 = 1;
pub(crate) const STREAM_INIT: u64 = 2;
const STREAMS_PER_TRIAL: u64 = 4;

/// Generator for one purpose within one trial. All randomness derives from `seed`.
pub fn trial_rng(seed: u64, trial: usize, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64 * STREAMS_PER_TRIAL + purpose);
    rng
}

impl ExperimentConfig {
    /// Desk-scale defaults: `n = 4`, `m = 3`, `T = 10⁴`.
    pub fn preset(kind: ExperimentKind) -> Self {
        let costs = match kind {
            ExperimentKind::One => CostKind::Wishart { dof: 20 },
            ExperimentKind::Two => CostKind::DiagUniform { low: 0.1, high: 1.0 },
            ExperimentKind::Three => CostKind::DiagRandomWalk { low: 0.1, high: 1.0, step: 0.1, p_up: 0.1, p_down: 0.1 },
            ExperimentKind::Constant => CostKind::Constant { q_scale: 1.0, r_scale: 1.0 },
        };
        Self {
            seed: 0,
            horizon: 10_000,
            n: 4,
            m: 3,
            trials: 1,
            costs,
            system: SystemSource::default(),
            online: OnlineConfig::default(),
            initial: InitialConfig::default(),
            comparator: ComparatorConfig::default(),
            baselines: BaselineConfig::default(),
        }
    }

    /// Full-size dimensions `n = 10`, `m = 7`.
    pub fn full_scale(mut self) -> Self {
        self.n = 10;
        self.m = 7;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.n == 0 || self.m == 0 {
            return Err(Error::Config("dimensions must be positive".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        self.costs.validate(self.n, self.m)?;
        self.system.validate(self.n, self.m)?;
        self.initial.gain.validate(self.n, self.m)?;
        if !(self.initial.x1_scale >= 0.0 && self.initial.x1_scale.is_finite()) {
            return Err(Error::Config("x1_scale must be finite and nonnegative".into()));
        }
        if !(self.comparator.margin > 0.0 && self.comparator.margin < 1.0) {
            return Err(Error::Config("comparator margin must lie in (0, 1)".into()));
        }
        let o = &self.online;
        for (name, v) in [("mu", o.mu), ("sigma", o.sigma), ("nu_estimate", o.nu_estimate)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::Config(format!("online.{name} must be positive and finite")));
                }
            }
        }
        if o.reset_round == Some(0) {
            return Err(Error::Config("online.reset_round must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for kind in [ExperimentKind::One, ExperimentKind::Two, ExperimentKind::Three, ExperimentKind::Constant] {
            ExperimentConfig::preset(kind).validate().unwrap();
        }
        let full = ExperimentConfig::preset(ExperimentKind::One).full_scale();
        assert_eq!((full.n, full.m), (10, 7));
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = ExperimentConfig::default();
        c.horizon = 0;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.costs = CostKind::Wishart { dof: 2 };
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        assert!("4".parse::<ExperimentKind>().is_err());
    }

    #[test]
    fn streams_are_distinct_and_reproducible() {
        use rand::Rng;
        let a: u64 = trial_rng(7, 0, STREAM_COSTS).random();
        let b: u64 = trial_rng(7, 0, STREAM_COSTS).random();
        let c: u64 = trial_rng(7, 1, STREAM_COSTS).random();
        let d: u64 = trial_rng(7, 0, STREAM_SYSTEM).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}
