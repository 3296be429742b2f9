//! Flat `key = value` configuration documents for the experiment runners.
//! Every key is optional; omitted keys take the runner's default.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::harness::fig1::{EpsilonMode, EpsilonSweep, Fig1Config};
use crate::harness::theorem1::SweepConfig;
use crate::mdp::PerturbMode;

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct Fig1Doc {
    grid_side: Option<usize>,
    gamma: Option<f64>,
    delta_targets: Option<Vec<f64>>,
    /// Absolute precisions; exclusive with `epsilon_multipliers`.
    epsilon_sweep: Option<Vec<f64>>,
    epsilon_multipliers: Option<Vec<f64>>,
    tasks_per_delta: Option<usize>,
    base_seed: Option<u64>,
    epsilon_mode: Option<String>,
    perturbation: Option<String>,
    rel_tol: Option<f64>,
    max_attempts: Option<u64>,
}

pub fn parse_fig1_config(text: &str) -> Result<Fig1Config> {
    let doc: Fig1Doc = toml::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    let mut config = Fig1Config::default();
    if let Some(v) = doc.grid_side {
        config.grid_side = v;
    }
    if let Some(v) = doc.gamma {
        config.gamma = v;
    }
    if let Some(v) = doc.delta_targets {
        config.delta_targets = v;
    }
    config.epsilon_sweep = match (doc.epsilon_sweep, doc.epsilon_multipliers) {
        (Some(_), Some(_)) => {
            return Err(Error::validation(
                "set either epsilon_sweep or epsilon_multipliers, not both",
            ))
        }
        (Some(abs), None) => EpsilonSweep::Absolute(abs),
        (None, Some(rel)) => EpsilonSweep::RelativeToCritical(rel),
        (None, None) => config.epsilon_sweep,
    };
    if let Some(v) = doc.tasks_per_delta {
        config.tasks_per_delta = v;
    }
    if let Some(v) = doc.base_seed {
        config.base_seed = v;
    }
    let perturbation = doc.perturbation.as_deref().map(str::parse::<PerturbMode>).transpose()?;
    config.epsilon_mode = match doc.epsilon_mode.as_deref() {
        None | Some("iteration_truncation") => {
            if perturbation.is_some() {
                return Err(Error::validation(
                    "`perturbation` only applies with epsilon_mode = \"perturbation\"",
                ));
            }
            EpsilonMode::IterationTruncation
        }
        Some("perturbation") => EpsilonMode::Perturbation(perturbation.unwrap_or(PerturbMode::Uniform)),
        Some(other) => return Err(Error::validation(format!("unknown epsilon_mode `{other}`"))),
    };
    if let Some(v) = doc.rel_tol {
        config.rel_tol = v;
    }
    if let Some(v) = doc.max_attempts {
        config.max_attempts = v;
    }
    config.validate()?;
    Ok(config)
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SweepDoc {
    gammas: Option<Vec<f64>>,
    ls: Option<Vec<f64>>,
    epsilons: Option<Vec<f64>>,
    seeds_per_cell: Option<usize>,
    base_seed: Option<u64>,
    num_segments: Option<usize>,
    num_queries: Option<usize>,
}

pub fn parse_sweep_config(text: &str) -> Result<SweepConfig> {
    let doc: SweepDoc = toml::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    let d = SweepConfig::default();
    Ok(SweepConfig {
        gammas: doc.gammas.unwrap_or(d.gammas),
        ls: doc.ls.unwrap_or(d.ls),
        epsilons: doc.epsilons.unwrap_or(d.epsilons),
        seeds_per_cell: doc.seeds_per_cell.unwrap_or(d.seeds_per_cell),
        base_seed: doc.base_seed.unwrap_or(d.base_seed),
        num_segments: doc.num_segments.unwrap_or(d.num_segments),
        num_queries: doc.num_queries.unwrap_or(d.num_queries),
    })
}
