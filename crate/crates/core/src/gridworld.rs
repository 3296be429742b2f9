//! Empty square gridworlds with cardinal moves and random state rewards.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mdp::{state_values, value_iteration, BellmanIteration, Selector, TabularMdp, DEFAULT_MAX_ITERATIONS};
use crate::separability::value_gap;

/// Solve precision used when measuring the gap of a candidate reward.
pub const GAP_SOLVE_EPSILON: f64 = 1e-12;

/// Screening stops refining a candidate once its certificate reaches this.
const SCREEN_EPSILON: f64 = 1e-7;

/// Iterations between gap checks while screening.
const SCREEN_STRIDE: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    North,
    South,
    East,
    West,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::North, Action::South, Action::East, Action::West];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Geometry of an `N x N` grid; states are numbered row-major, row 0 at the top.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    side: usize,
}

impl GridSpec {
    pub fn new(side: usize) -> Result<Self> {
        if side == 0 {
            return Err(Error::validation("grid side must be at least 1"));
        }
        Ok(Self { side })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn num_states(&self) -> usize {
        self.side * self.side
    }

    pub fn actions(&self) -> &'static [Action; 4] {
        &Action::ALL
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.side + col
    }

    pub fn coords(&self, state: usize) -> (usize, usize) {
        (state / self.side, state % self.side)
    }

    /// Moves that would leave the grid keep the agent in place.
    pub fn step(&self, state: usize, action: Action) -> usize {
        let (row, col) = self.coords(state);
        let last = self.side - 1;
        let (row, col) = match action {
            Action::North => (row.saturating_sub(1), col),
            Action::South => ((row + 1).min(last), col),
            Action::East => (row, (col + 1).min(last)),
            Action::West => (row, col.saturating_sub(1)),
        };
        self.index(row, col)
    }

    pub fn manhattan(&self, a: usize, b: usize) -> usize {
        let (ra, ca) = self.coords(a);
        let (rb, cb) = self.coords(b);
        ra.abs_diff(rb) + ca.abs_diff(cb)
    }

    pub fn contains(&self, state: usize) -> bool {
        state < self.num_states()
    }
}

/// Dynamics of an empty grid with zero rewards.
pub fn make_empty_grid(side: usize, gamma: f64) -> Result<TabularMdp> {
    let grid = GridSpec::new(side)?;
    let transition = (0..grid.num_states())
        .flat_map(|s| Action::ALL.iter().map(move |&a| grid.step(s, a)))
        .collect();
    TabularMdp::new(
        grid.num_states(),
        Action::ALL.len(),
        transition,
        vec![0.0; grid.num_states() * Action::ALL.len()],
        gamma,
    )
}

/// `side * side` independent draws strictly inside `(-1, 1)`.
pub fn sample_reward(side: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..side * side)
        .map(|_| loop {
            let r: f64 = rng.gen_range(-1.0..1.0);
            if r > -1.0 {
                break r;
            }
        })
        .collect()
}

/// Minimum gap between greedy state values of the task, solved to
/// [`GAP_SOLVE_EPSILON`].
pub fn optimal_value_gap(mdp: &TabularMdp) -> Result<f64> {
    let (q, _) = value_iteration(mdp, GAP_SOLVE_EPSILON, Selector::Greedy)?;
    let v = state_values(&q, Selector::Greedy)?;
    Ok(value_gap(&v)?.delta)
}

enum Screen {
    Reject(f64),
    Candidate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardSearchResult {
    /// State reward `rho(s)`, installed as `r(s, a) = rho(s)`.
    pub reward: Vec<f64>,
    pub achieved_delta: f64,
    pub attempts: u64,
    /// Seed of the accepted sample (`search seed + attempt index`).
    pub seed: u64,
}

/// Rejection sampler for rewards whose optimal values have a prescribed gap.
#[derive(Debug, Clone, Copy)]
pub struct RewardSearch {
    pub side: usize,
    pub gamma: f64,
    pub target_delta: f64,
    pub rel_tol: f64,
    pub seed: u64,
    pub max_attempts: u64,
}

impl RewardSearch {
    pub fn new(side: usize, gamma: f64, target_delta: f64, seed: u64) -> Self {
        Self {
            side,
            gamma,
            target_delta,
            rel_tol: 0.01,
            seed,
            max_attempts: 100_000,
        }
    }

    pub fn rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn max_attempts(mut self, max_attempts: u64) -> Self {
        self.max_attempts = max_attempts;
        self
    }

    fn accepts(&self, delta: f64) -> bool {
        delta > 0.0 && (delta - self.target_delta).abs() <= self.rel_tol * self.target_delta
    }

    /// Iterates the candidate's Bellman operator only until its gap is
    /// certainly outside the acceptance window. The gap of an iterate with
    /// certificate `c` is within `2c` of the gap at the fixed point.
    fn screen(&self, mdp: &TabularMdp) -> Result<Screen> {
        let window = self.rel_tol * self.target_delta;
        let na = mdp.num_actions();
        let mut iter = BellmanIteration::new(mdp, Selector::Greedy)?;
        let mut values = vec![0.0; mdp.num_states()];
        while iter.iterations() < DEFAULT_MAX_ITERATIONS {
            let cert = iter.step();
            let refined = cert <= SCREEN_EPSILON;
            if iter.iterations() % SCREEN_STRIDE != 0 && !refined {
                continue;
            }
            for (v, row) in values.iter_mut().zip(iter.current().chunks(na)) {
                *v = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            }
            let gap = value_gap(&values)?.delta;
            let slack = 2.0 * (cert + GAP_SOLVE_EPSILON);
            if gap + slack < self.target_delta - window || gap - slack > self.target_delta + window {
                return Ok(Screen::Reject(gap));
            }
            if refined {
                return Ok(Screen::Candidate);
            }
        }
        Err(Error::NonConvergence {
            target: SCREEN_EPSILON,
            iterations: DEFAULT_MAX_ITERATIONS,
            last_certificate: iter.certificate(),
        })
    }

    pub fn run(&self) -> Result<RewardSearchResult> {
        if !(self.target_delta > 0.0 && self.target_delta.is_finite()) {
            return Err(Error::validation(format!(
                "target delta must be positive, got {}",
                self.target_delta
            )));
        }
        if !(self.rel_tol >= 0.0) {
            return Err(Error::validation("relative tolerance must be non-negative"));
        }
        let dynamics = make_empty_grid(self.side, self.gamma)?;
        let mut best: Option<(f64, u64)> = None;
        let mut keep_best = |delta: f64, seed: u64| {
            let off = (delta - self.target_delta).abs();
            if best.is_none_or(|(d, _)| off < (d - self.target_delta).abs()) {
                best = Some((delta, seed));
            }
        };
        for attempt in 0..self.max_attempts {
            let seed = self.seed.wrapping_add(attempt);
            let reward = sample_reward(self.side, seed);
            let mdp = dynamics.with_state_reward(&reward)?;

            if let Screen::Reject(approx) = self.screen(&mdp)? {
                keep_best(approx, seed);
                continue;
            }
            let delta = optimal_value_gap(&mdp)?;
            if self.accepts(delta) {
                return Ok(RewardSearchResult {
                    reward,
                    achieved_delta: delta,
                    attempts: attempt + 1,
                    seed,
                });
            }
            keep_best(delta, seed);
        }
        let (best_delta, best_seed) = best.unwrap_or((f64::NAN, self.seed));
        Err(Error::SearchFailure {
            target: self.target_delta,
            attempts: self.max_attempts,
            best_delta,
            best_seed,
        })
    }
}

pub fn find_reward_with_gap(
    side: usize,
    gamma: f64,
    target_delta: f64,
    rel_tol: f64,
    seed: u64,
    max_attempts: u64,
) -> Result<RewardSearchResult> {
    RewardSearch::new(side, gamma, target_delta, seed)
        .rel_tol(rel_tol)
        .max_attempts(max_attempts)
        .run()
}
