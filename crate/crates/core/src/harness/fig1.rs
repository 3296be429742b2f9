//! Model accuracy against value-function precision for tasks of fixed value gap.
//!
//! For each gap target, reward-varying tasks on a shared empty grid are found
//! by rejection sampling. Each task is then solved to a range of precisions
//! and the inferred model is scored against the true transitions.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gridworld::{make_empty_grid, RewardSearch, RewardSearchResult, GAP_SOLVE_EPSILON};
use crate::harness::seeds::derive_seed;
use crate::inference::{infer_model, model_accuracy};
use crate::mdp::{
    perturb_values, value_iteration, BellmanIteration, PerturbMode, Selector, TabularMdp, ValueTable,
    DEFAULT_MAX_ITERATIONS,
};
use crate::separability::identifiability_threshold;

/// How an `eps`-accurate table is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpsilonMode {
    /// Stop value iteration at the first certificate `<= eps`.
    IterationTruncation,
    /// Precise solve followed by an `eps` perturbation.
    Perturbation(PerturbMode),
}

#[derive(Debug, Clone, PartialEq)]
pub enum EpsilonSweep {
    /// Same absolute precisions for every gap target.
    Absolute(Vec<f64>),
    /// Multiples of each target's critical precision.
    RelativeToCritical(Vec<f64>),
}

impl EpsilonSweep {
    /// `points` log-spaced multipliers from `lo` to `hi`, endpoints exact.
    pub fn log_spaced(lo: f64, hi: f64, points: usize) -> Self {
        let (a, b) = (lo.log10(), hi.log10());
        let multipliers = (0..points)
            .map(|i| match i {
                0 => lo,
                i if i + 1 == points => hi,
                i => 10f64.powf(a + (b - a) * i as f64 / (points - 1) as f64),
            })
            .collect();
        EpsilonSweep::RelativeToCritical(multipliers)
    }

    fn is_empty(&self) -> bool {
        match self {
            EpsilonSweep::Absolute(v) | EpsilonSweep::RelativeToCritical(v) => v.is_empty(),
        }
    }

    fn resolve(&self, critical: f64) -> Vec<f64> {
        match self {
            EpsilonSweep::Absolute(v) => v.clone(),
            EpsilonSweep::RelativeToCritical(m) => m.iter().map(|m| m * critical).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig1Config {
    pub grid_side: usize,
    pub gamma: f64,
    pub delta_targets: Vec<f64>,
    pub epsilon_sweep: EpsilonSweep,
    pub tasks_per_delta: usize,
    pub base_seed: u64,
    pub epsilon_mode: EpsilonMode,
    /// Relative acceptance window on the achieved gap.
    pub rel_tol: f64,
    pub max_attempts: u64,
}

impl Default for Fig1Config {
    fn default() -> Self {
        Self {
            grid_side: 5,
            gamma: 0.99,
            delta_targets: vec![0.01, 0.02, 0.03],
            epsilon_sweep: EpsilonSweep::log_spaced(0.1, 10.0, 12),
            tasks_per_delta: 20,
            base_seed: 0,
            epsilon_mode: EpsilonMode::IterationTruncation,
            rel_tol: 0.01,
            max_attempts: 100_000,
        }
    }
}

impl Fig1Config {
    pub fn validate(&self) -> Result<()> {
        if self.grid_side == 0 {
            return Err(Error::validation("grid_side must be positive"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::validation(format!(
                "gamma must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        if self.delta_targets.is_empty() || self.epsilon_sweep.is_empty() {
            return Err(Error::validation("delta targets and epsilon sweep must be non-empty"));
        }
        if self.delta_targets.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return Err(Error::validation("delta targets must be positive"));
        }
        let eps = match &self.epsilon_sweep {
            EpsilonSweep::Absolute(v) | EpsilonSweep::RelativeToCritical(v) => v,
        };
        if eps.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(Error::validation("epsilon sweep entries must be positive"));
        }
        if self.tasks_per_delta == 0 {
            return Err(Error::validation("tasks_per_delta must be positive"));
        }
        Ok(())
    }

    pub fn critical_epsilon(&self, delta_target: f64) -> Result<f64> {
        identifiability_threshold(delta_target, self.gamma)
    }
}

/// One point of an accuracy curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub delta_target: f64,
    pub epsilon: f64,
    pub mean_accuracy: f64,
    /// Sample standard deviation (`n - 1`) over tasks divided by `sqrt(n)`.
    pub standard_error: f64,
    pub critical_epsilon: f64,
}

/// A task slot: which gap target it serves and the seed its search starts from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskPlan {
    pub delta_index: usize,
    pub task_index: usize,
    pub delta_target: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskOutcome {
    pub plan: TaskPlan,
    pub search: RewardSearchResult,
    pub epsilons: Vec<f64>,
    pub accuracies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig1Run {
    pub tasks: Vec<TaskOutcome>,
    pub points: Vec<CurvePoint>,
}

pub fn plan_tasks(config: &Fig1Config) -> Vec<TaskPlan> {
    config
        .delta_targets
        .iter()
        .enumerate()
        .flat_map(|(d, &delta_target)| {
            (0..config.tasks_per_delta).map(move |t| TaskPlan {
                delta_index: d,
                task_index: t,
                delta_target,
                seed: derive_seed(config.base_seed, d as u64, t as u64),
            })
        })
        .collect()
}

/// Finds the task for `plan` and scores its inferred model at every sweep precision.
pub fn run_task(config: &Fig1Config, plan: &TaskPlan) -> Result<TaskOutcome> {
    let search = RewardSearch::new(config.grid_side, config.gamma, plan.delta_target, plan.seed)
        .rel_tol(config.rel_tol)
        .max_attempts(config.max_attempts)
        .run()?;
    let mdp = make_empty_grid(config.grid_side, config.gamma)?.with_state_reward(&search.reward)?;
    let epsilons = config
        .epsilon_sweep
        .resolve(config.critical_epsilon(plan.delta_target)?);
    let tables = match config.epsilon_mode {
        EpsilonMode::IterationTruncation => truncated_tables(&mdp, &epsilons)?,
        EpsilonMode::Perturbation(mode) => {
            let (exact, _) = value_iteration(&mdp, GAP_SOLVE_EPSILON, Selector::Greedy)?;
            epsilons
                .iter()
                .enumerate()
                .map(|(i, &eps)| perturb_values(&exact, eps, mode, derive_seed(search.seed, 1, i as u64)))
                .collect::<Result<Vec<_>>>()?
        }
    };
    let accuracies = tables
        .iter()
        .map(|q| model_accuracy(&infer_model(q, &mdp, Selector::Greedy)?, &mdp))
        .collect::<Result<Vec<_>>>()?;
    Ok(TaskOutcome {
        plan: *plan,
        search,
        epsilons,
        accuracies,
    })
}

/// Value-iteration snapshots at the first certificate `<= eps` for each `eps`,
/// taken from a single run. Matches separate solves at each target.
fn truncated_tables(mdp: &TabularMdp, epsilons: &[f64]) -> Result<Vec<ValueTable>> {
    let mut order: Vec<usize> = (0..epsilons.len()).collect();
    order.sort_by(|&a, &b| epsilons[b].total_cmp(&epsilons[a]));
    let mut iter = BellmanIteration::new(mdp, Selector::Greedy)?;
    let mut tables = vec![None; epsilons.len()];
    for i in order {
        while iter.iterations() == 0 || iter.certificate() > epsilons[i] {
            if iter.iterations() >= DEFAULT_MAX_ITERATIONS {
                return Err(Error::NonConvergence {
                    target: epsilons[i],
                    iterations: DEFAULT_MAX_ITERATIONS,
                    last_certificate: iter.certificate(),
                });
            }
            iter.step();
        }
        tables[i] = Some(iter.snapshot());
    }
    Ok(tables.into_iter().map(|t| t.expect("every slot filled")).collect())
}

/// Mean accuracy and standard error per `(delta target, epsilon index)`.
pub fn aggregate(config: &Fig1Config, tasks: &[TaskOutcome]) -> Result<Vec<CurvePoint>> {
    let mut points = Vec::new();
    for (d, &delta_target) in config.delta_targets.iter().enumerate() {
        let group: Vec<&TaskOutcome> = tasks.iter().filter(|t| t.plan.delta_index == d).collect();
        let Some(first) = group.first() else { continue };
        let critical = config.critical_epsilon(delta_target)?;
        for (i, &epsilon) in first.epsilons.iter().enumerate() {
            let acc: Vec<f64> = group.iter().map(|t| t.accuracies[i]).collect();
            let (mean, standard_error) = mean_and_standard_error(&acc);
            points.push(CurvePoint {
                delta_target,
                epsilon,
                mean_accuracy: mean,
                standard_error,
                critical_epsilon: critical,
            });
        }
    }
    Ok(points)
}

fn mean_and_standard_error(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs every task (in parallel) and aggregates in plan order.
pub fn run_fig1_detailed(config: &Fig1Config) -> Result<Fig1Run> {
    config.validate()?;
    let plans = plan_tasks(config);
    let tasks = plans
        .par_iter()
        .map(|plan| run_task(config, plan))
        .collect::<Result<Vec<_>>>()?;
    let points = aggregate(config, &tasks)?;
    Ok(Fig1Run { tasks, points })
}

pub fn run_fig1(config: &Fig1Config) -> Result<Vec<CurvePoint>> {
    Ok(run_fig1_detailed(config)?.points)
}
