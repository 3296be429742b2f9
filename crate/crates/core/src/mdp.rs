//! Finite deterministic MDPs, Bellman backups and certified value iteration.
//!
//! Tables are stored row-major: entry `(s, a)` lives at `s * num_actions + a`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::separability;

/// Default cap on Bellman iterations before reporting non-convergence.
pub const DEFAULT_MAX_ITERATIONS: u64 = 10_000_000;

/// Tolerance on policy row sums.
pub const POLICY_SUM_TOLERANCE: f64 = 1e-12;

/// The quantities an observer knows about a task without knowing its dynamics:
/// the reward table and the discount factor.
pub trait KnownTask {
    fn num_states(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn reward(&self, state: usize, action: usize) -> f64;
    fn gamma(&self) -> f64;
}

/// Finite MDP with deterministic transitions `s' = f(s, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    transition: Vec<usize>,
    reward: Vec<f64>,
    gamma: f64,
}

impl TabularMdp {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        transition: Vec<usize>,
        reward: Vec<f64>,
        gamma: f64,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::validation("an MDP needs at least one state and one action"));
        }
        let cells = num_states * num_actions;
        check_len("transition table", cells, transition.len())?;
        check_len("reward table", cells, reward.len())?;
        if let Some(pos) = transition.iter().position(|&t| t >= num_states) {
            return Err(Error::validation(format!(
                "transition ({}, {}) targets state {} outside [0, {num_states})",
                pos / num_actions,
                pos % num_actions,
                transition[pos]
            )));
        }
        if reward.iter().any(|r| !r.is_finite()) {
            return Err(Error::validation("reward entries must be finite"));
        }
        validate_gamma(gamma)?;
        Ok(Self {
            num_states,
            num_actions,
            transition,
            reward,
            gamma,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn next_state(&self, state: usize, action: usize) -> usize {
        self.transition[state * self.num_actions + action]
    }

    pub fn reward(&self, state: usize, action: usize) -> f64 {
        self.reward[state * self.num_actions + action]
    }

    pub fn transitions(&self) -> &[usize] {
        &self.transition
    }

    pub fn rewards(&self) -> &[f64] {
        &self.reward
    }

    /// Same dynamics and discount, new action-indexed reward table.
    pub fn with_reward(&self, reward: Vec<f64>) -> Result<Self> {
        Self::new(
            self.num_states,
            self.num_actions,
            self.transition.clone(),
            reward,
            self.gamma,
        )
    }

    /// Installs a state-only reward as `r(s, a) = rho(s)` for every action.
    pub fn with_state_reward(&self, rho: &[f64]) -> Result<Self> {
        check_len("state reward", self.num_states, rho.len())?;
        let reward = rho
            .iter()
            .flat_map(|&r| std::iter::repeat_n(r, self.num_actions))
            .collect();
        self.with_reward(reward)
    }
}

impl KnownTask for TabularMdp {
    fn num_states(&self) -> usize {
        self.num_states
    }
    fn num_actions(&self) -> usize {
        self.num_actions
    }
    fn reward(&self, state: usize, action: usize) -> f64 {
        TabularMdp::reward(self, state, action)
    }
    fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// Stochastic policy `pi(a | s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    num_states: usize,
    num_actions: usize,
    probs: Vec<f64>,
}

impl Policy {
    pub fn new(num_states: usize, num_actions: usize, probs: Vec<f64>) -> Result<Self> {
        check_len("policy table", num_states * num_actions, probs.len())?;
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::validation("policy probabilities must lie in [0, 1]"));
        }
        for (s, row) in probs.chunks(num_actions).enumerate() {
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > POLICY_SUM_TOLERANCE {
                return Err(Error::validation(format!(
                    "policy row for state {s} sums to {total}, not 1"
                )));
            }
        }
        Ok(Self {
            num_states,
            num_actions,
            probs,
        })
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        let p = 1.0 / num_actions as f64;
        Self {
            num_states,
            num_actions,
            probs: vec![p; num_states * num_actions],
        }
    }

    /// One action per state, taken with probability one.
    pub fn deterministic(actions: &[usize], num_actions: usize) -> Result<Self> {
        let mut probs = vec![0.0; actions.len() * num_actions];
        for (s, &a) in actions.iter().enumerate() {
            if a >= num_actions {
                return Err(Error::validation(format!(
                    "action {a} for state {s} outside [0, {num_actions})"
                )));
            }
            probs[s * num_actions + a] = 1.0;
        }
        Ok(Self {
            num_states: actions.len(),
            num_actions,
            probs,
        })
    }

    /// Deterministic greedy policy of `q`, ties to the lowest action index.
    pub fn greedy(q: &ValueTable) -> Self {
        let actions: Vec<usize> = (0..q.num_states()).map(|s| q.greedy_action(s)).collect();
        Self::deterministic(&actions, q.num_actions()).expect("greedy actions are in range")
    }

    pub fn prob(&self, state: usize, action: usize) -> f64 {
        self.probs[state * self.num_actions + action]
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn row(&self, state: usize) -> &[f64] {
        let start = state * self.num_actions;
        &self.probs[start..start + self.num_actions]
    }
}

/// How a row of action values collapses to a state value.
#[derive(Debug, Clone, Copy)]
pub enum Selector<'a> {
    /// `V(s) = max_a Q(s, a)`; Bellman optimality.
    Greedy,
    /// `V(s) = sum_a pi(a|s) Q(s, a)`; policy evaluation.
    Policy(&'a Policy),
}

impl Selector<'_> {
    fn check_shape(&self, num_states: usize, num_actions: usize) -> Result<()> {
        if let Selector::Policy(pi) = self {
            if pi.num_states != num_states || pi.num_actions != num_actions {
                return Err(Error::Dimension {
                    expected: format!("{num_states}x{num_actions} policy"),
                    actual: format!("{}x{}", pi.num_states, pi.num_actions),
                });
            }
        }
        Ok(())
    }

    fn collapse(&self, state: usize, row: &[f64]) -> f64 {
        match self {
            Selector::Greedy => row.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Selector::Policy(pi) => pi.row(state).iter().zip(row).map(|(p, q)| p * q).sum(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueSource {
    Solved,
    Perturbed,
    Loaded,
}

impl ValueSource {
    pub fn as_str(self) -> &'static str {
        match self {
            ValueSource::Solved => "solved",
            ValueSource::Perturbed => "perturbed",
            ValueSource::Loaded => "loaded",
        }
    }
}

impl std::str::FromStr for ValueSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "solved" => Ok(ValueSource::Solved),
            "perturbed" => Ok(ValueSource::Perturbed),
            "loaded" => Ok(ValueSource::Loaded),
            other => Err(Error::Format(format!("unknown value source `{other}`"))),
        }
    }
}

/// Action-value table together with its accuracy certificate: when
/// `certified_epsilon` is `Some(eps)`, every entry is within `eps` of the
/// true action value.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    num_states: usize,
    num_actions: usize,
    q: Vec<f64>,
    certified_epsilon: Option<f64>,
    source: ValueSource,
}

impl ValueTable {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        q: Vec<f64>,
        certified_epsilon: Option<f64>,
        source: ValueSource,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::validation("value table needs at least one state and action"));
        }
        check_len("value table", num_states * num_actions, q.len())?;
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("value table entries must be finite"));
        }
        if let Some(eps) = certified_epsilon {
            if !(eps >= 0.0 && eps.is_finite()) {
                return Err(Error::validation(format!(
                    "certified epsilon must be finite and non-negative, got {eps}"
                )));
            }
        }
        Ok(Self {
            num_states,
            num_actions,
            q,
            certified_epsilon,
            source,
        })
    }

    pub fn zeros(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_states,
            num_actions,
            q: vec![0.0; num_states * num_actions],
            certified_epsilon: None,
            source: ValueSource::Solved,
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.q[state * self.num_actions + action]
    }

    pub fn row(&self, state: usize) -> &[f64] {
        let start = state * self.num_actions;
        &self.q[start..start + self.num_actions]
    }

    pub fn entries(&self) -> &[f64] {
        &self.q
    }

    pub fn certified_epsilon(&self) -> Option<f64> {
        self.certified_epsilon
    }

    pub fn source(&self) -> ValueSource {
        self.source
    }

    pub fn with_source(mut self, source: ValueSource) -> Self {
        self.source = source;
        self
    }

    /// Lowest-index action attaining the row maximum.
    pub fn greedy_action(&self, state: usize) -> usize {
        let row = self.row(state);
        let mut best = 0;
        for (a, &v) in row.iter().enumerate().skip(1) {
            if v > row[best] {
                best = a;
            }
        }
        best
    }

    /// Sup-norm distance between two same-shaped tables.
    pub fn sup_distance(&self, other: &ValueTable) -> Result<f64> {
        self.check_same_shape(other.num_states, other.num_actions)?;
        Ok(sup_distance(&self.q, &other.q))
    }

    fn check_same_shape(&self, num_states: usize, num_actions: usize) -> Result<()> {
        if self.num_states != num_states || self.num_actions != num_actions {
            return Err(Error::Dimension {
                expected: format!("{num_states}x{num_actions}"),
                actual: format!("{}x{}", self.num_states, self.num_actions),
            });
        }
        Ok(())
    }
}

/// Iteration count, last residual and the resulting accuracy certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub iterations: u64,
    /// `||q_{k+1} - q_k||_inf` for the final backup.
    pub final_residual: f64,
    /// `gamma * final_residual / (1 - gamma)`.
    pub certified_epsilon: f64,
}

/// Bellman optimality backup: `out(s,a) = r(s,a) + gamma * max_a' q(f(s,a), a')`.
pub fn bellman_optimality_backup(mdp: &TabularMdp, q: &ValueTable) -> Result<ValueTable> {
    backup(mdp, q, Selector::Greedy)
}

/// Policy backup: `out(s,a) = r(s,a) + gamma * sum_a' pi(a'|f(s,a)) q(f(s,a), a')`.
pub fn bellman_policy_backup(mdp: &TabularMdp, policy: &Policy, q: &ValueTable) -> Result<ValueTable> {
    backup(mdp, q, Selector::Policy(policy))
}

/// Applies one backup using `selector` to evaluate successor states.
/// The output carries no certificate.
pub fn backup(mdp: &TabularMdp, q: &ValueTable, selector: Selector<'_>) -> Result<ValueTable> {
    q.check_same_shape(mdp.num_states, mdp.num_actions)?;
    selector.check_shape(mdp.num_states, mdp.num_actions)?;
    let mut out = vec![0.0; q.q.len()];
    let mut scratch = vec![0.0; mdp.num_states];
    backup_into(mdp, &q.q, selector, &mut scratch, &mut out);
    Ok(ValueTable {
        num_states: q.num_states,
        num_actions: q.num_actions,
        q: out,
        certified_epsilon: None,
        source: q.source,
    })
}

fn backup_into(mdp: &TabularMdp, q: &[f64], selector: Selector<'_>, state_values: &mut [f64], out: &mut [f64]) {
    let na = mdp.num_actions;
    for (s, v) in state_values.iter_mut().enumerate() {
        *v = selector.collapse(s, &q[s * na..(s + 1) * na]);
    }
    for ((o, &next), &r) in out.iter_mut().zip(&mdp.transition).zip(&mdp.reward) {
        *o = r + mdp.gamma * state_values[next];
    }
}

/// Step-by-step Bellman iteration from `q = 0`.
///
/// After each [`step`](Self::step), [`current`](Self::current) holds `q_k` and
/// the returned certificate bounds `||q_k - q*||_inf`.
pub struct BellmanIteration<'a> {
    mdp: &'a TabularMdp,
    selector: Selector<'a>,
    current: Vec<f64>,
    next: Vec<f64>,
    scratch: Vec<f64>,
    iterations: u64,
    residual: f64,
    certificate: f64,
}

impl<'a> BellmanIteration<'a> {
    pub fn new(mdp: &'a TabularMdp, selector: Selector<'a>) -> Result<Self> {
        selector.check_shape(mdp.num_states, mdp.num_actions)?;
        let cells = mdp.num_states * mdp.num_actions;
        Ok(Self {
            mdp,
            selector,
            current: vec![0.0; cells],
            next: vec![0.0; cells],
            scratch: vec![0.0; mdp.num_states],
            iterations: 0,
            residual: f64::INFINITY,
            certificate: f64::INFINITY,
        })
    }

    /// Applies one backup and returns `gamma * residual / (1 - gamma)`.
    pub fn step(&mut self) -> f64 {
        backup_into(
            self.mdp,
            &self.current,
            self.selector,
            &mut self.scratch,
            &mut self.next,
        );
        self.residual = sup_distance(&self.current, &self.next);
        self.certificate = self.mdp.gamma / (1.0 - self.mdp.gamma) * self.residual;
        std::mem::swap(&mut self.current, &mut self.next);
        self.iterations += 1;
        self.certificate
    }

    pub fn current(&self) -> &[f64] {
        &self.current
    }

    pub fn iterations(&self) -> u64 {
        self.iterations
    }

    pub fn certificate(&self) -> f64 {
        self.certificate
    }

    pub fn report(&self) -> SolveReport {
        SolveReport {
            iterations: self.iterations,
            final_residual: self.residual,
            certified_epsilon: self.certificate,
        }
    }

    /// Copies the current iterate out as a certified table.
    pub fn snapshot(&self) -> ValueTable {
        ValueTable {
            num_states: self.mdp.num_states,
            num_actions: self.mdp.num_actions,
            q: self.current.clone(),
            certified_epsilon: Some(self.certificate),
            source: ValueSource::Solved,
        }
    }
}

/// Value iteration from `q = 0`, stopped by the contraction certificate.
#[derive(Debug, Clone, Copy)]
pub struct ValueIteration {
    epsilon_target: f64,
    max_iterations: u64,
}

impl ValueIteration {
    pub fn new(epsilon_target: f64) -> Self {
        Self {
            epsilon_target,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }

    pub fn max_iterations(mut self, max_iterations: u64) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    /// Iterates until `gamma * ||q_{k+1} - q_k|| / (1 - gamma) <= epsilon_target`
    /// and returns `q_{k+1}`, which is then within the certificate of the fixed point.
    pub fn solve(&self, mdp: &TabularMdp, selector: Selector<'_>) -> Result<(ValueTable, SolveReport)> {
        if !(self.epsilon_target > 0.0 && self.epsilon_target.is_finite()) {
            return Err(Error::validation(format!(
                "epsilon target must be positive, got {}",
                self.epsilon_target
            )));
        }
        let mut iter = BellmanIteration::new(mdp, selector)?;
        while iter.iterations() < self.max_iterations {
            if iter.step() <= self.epsilon_target {
                return Ok((iter.snapshot(), iter.report()));
            }
        }
        Err(Error::NonConvergence {
            target: self.epsilon_target,
            iterations: self.max_iterations,
            last_certificate: iter.certificate(),
        })
    }
}

/// Value iteration with the default iteration cap.
pub fn value_iteration(
    mdp: &TabularMdp,
    epsilon_target: f64,
    selector: Selector<'_>,
) -> Result<(ValueTable, SolveReport)> {
    ValueIteration::new(epsilon_target).solve(mdp, selector)
}

/// Collapses each row of `q` to a state value.
pub fn state_values(q: &ValueTable, selector: Selector<'_>) -> Result<Vec<f64>> {
    selector.check_shape(q.num_states, q.num_actions)?;
    Ok((0..q.num_states).map(|s| selector.collapse(s, q.row(s))).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbMode {
    /// Independent uniform noise in `[-eps, eps]` on every entry.
    Uniform,
    /// Moves the closest pair of greedy state values toward each other by
    /// `eps` each: the higher state's row gets `-eps`, the lower's `+eps`.
    AdversarialPair,
}

impl std::str::FromStr for PerturbMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(PerturbMode::Uniform),
            "adversarial_pair" => Ok(PerturbMode::AdversarialPair),
            other => Err(Error::validation(format!("unknown perturbation mode `{other}`"))),
        }
    }
}

/// Produces an `eps`-perturbed copy of `q`; the certificate grows by `eps`.
pub fn perturb_values(q: &ValueTable, epsilon: f64, mode: PerturbMode, seed: u64) -> Result<ValueTable> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::validation(format!(
            "perturbation epsilon must be finite and non-negative, got {epsilon}"
        )));
    }
    let mut out = q.clone();
    out.source = ValueSource::Perturbed;
    out.certified_epsilon = Some(q.certified_epsilon.unwrap_or(0.0) + epsilon);
    if epsilon == 0.0 {
        return Ok(out);
    }
    match mode {
        PerturbMode::Uniform => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for v in &mut out.q {
                *v += rng.gen_range(-epsilon..=epsilon);
            }
        }
        PerturbMode::AdversarialPair => {
            let values = state_values(q, Selector::Greedy)?;
            let gap = separability::value_gap(&values)?;
            let (i, j) = gap.argpair;
            let (high, low) = if values[i] > values[j] { (i, j) } else { (j, i) };
            let na = q.num_actions;
            for v in &mut out.q[high * na..(high + 1) * na] {
                *v -= epsilon;
            }
            for v in &mut out.q[low * na..(low + 1) * na] {
                *v += epsilon;
            }
        }
    }
    Ok(out)
}

pub(crate) fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub(crate) fn validate_gamma(gamma: f64) -> Result<()> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::validation(format!("gamma must lie in [0, 1), got {gamma}")));
    }
    Ok(())
}

fn check_len(what: &str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::Dimension {
            expected: format!("{what} of {expected} entries"),
            actual: actual.to_string(),
        });
    }
    Ok(())
}
