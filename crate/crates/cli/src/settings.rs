use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::Context;
use online_riccati::bench::{ExperimentConfig, ExperimentKind, ProbeConfig};
use online_riccati::Error;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::{CommonArgs, Failure};

fn load<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())).into())
}

/// Config file (or the preset), then `--experiment` costs, then the scalar overrides.
pub fn experiment_config(args: &CommonArgs, experiment: Option<&str>) -> Result<ExperimentConfig, Failure> {
    let kind = experiment.map(str::parse::<ExperimentKind>).transpose()?;
    let mut cfg = match &args.config {
        Some(path) => {
            let mut cfg: ExperimentConfig = load(path)?;
            if let Some(kind) = kind {
                cfg.costs = ExperimentConfig::preset(kind).costs;
            }
            cfg
        }
        None => ExperimentConfig::preset(kind.unwrap_or(ExperimentKind::One)),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(h) = args.horizon {
        cfg.horizon = h;
    }
    if let Some((n, m)) = args.dims {
        cfg.n = n;
        cfg.m = m;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Starts from the scalar preset when `--dims 1,1` is given without a config file.
pub fn probe_config(args: &CommonArgs) -> Result<ProbeConfig, Failure> {
    let mut cfg = match (&args.config, args.dims) {
        (Some(path), _) => load(path)?,
        (None, Some((1, 1))) => ProbeConfig::scalar(100),
        (None, _) => ProbeConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(h) = args.horizon {
        cfg.horizon = h;
    }
    if let Some((n, m)) = args.dims {
        cfg.n = n;
        cfg.m = m;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn dump<T: Serialize>(cfg: &T, out: Option<&Path>) -> Result<(), Failure> {
    let text = toml::to_string(cfg).context("serializing configuration")?;
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().write_all(text.as_bytes()).context("writing to stdout")?,
    }
    Ok(())
}
