//! One-dimensional continuous-state check of the successor-error bound.
//!
//! A strictly increasing value function `V` on `[0, 1]` is reverse Lipschitz
//! with constant equal to its smallest slope. Given `eps`-accurate `Q` and `V`,
//! inverting the perturbed `V` at the scanned value `(Q - r) / gamma` lands
//! within `(1 + gamma) eps / (gamma L)` of the true successor.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// State-space tolerance used by [`run_continuous_trial`] when inverting.
pub const BISECTION_TOL: f64 = 1e-10;

/// Upper end of sampled slopes, as a multiple of the requested constant.
const SLOPE_SPREAD: f64 = 10.0;

/// Fraction of each segment's rise kept when re-clipping a perturbed function.
const RECLIP_FRACTION: f64 = 0.5;

/// Continuous piecewise-linear function given by its nodes `(s, V(s))`.
///
/// Coordinates are strictly increasing inside `[0, 1]`. Monotonicity of the
/// values is not enforced here; [`reverse_lipschitz_constant`] reports a
/// function that is not strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearValue {
    nodes: Vec<(f64, f64)>,
}

impl PiecewiseLinearValue {
    pub fn new(nodes: Vec<(f64, f64)>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::validation("a piecewise-linear value needs at least two nodes"));
        }
        if nodes.iter().any(|&(s, v)| !(0.0..=1.0).contains(&s) || !v.is_finite()) {
            return Err(Error::validation(
                "node coordinates must lie in [0, 1] with finite values",
            ));
        }
        if nodes.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::validation("node coordinates must be strictly increasing"));
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[(f64, f64)] {
        &self.nodes
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.nodes[0].0, self.nodes[self.nodes.len() - 1].0)
    }

    pub fn range(&self) -> (f64, f64) {
        (self.nodes[0].1, self.nodes[self.nodes.len() - 1].1)
    }

    pub fn slopes(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
    }

    pub fn max_slope(&self) -> f64 {
        self.slopes().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Linear interpolation; arguments outside the domain are clamped.
    pub fn eval(&self, s: f64) -> f64 {
        let (lo, hi) = self.domain();
        let s = s.clamp(lo, hi);
        // First node strictly right of `s`, kept inside so the segment exists.
        let k = self
            .nodes
            .partition_point(|&(x, _)| x <= s)
            .clamp(1, self.nodes.len() - 1);
        let (x0, y0) = self.nodes[k - 1];
        let (x1, y1) = self.nodes[k];
        y0 + (y1 - y0) * (s - x0) / (x1 - x0)
    }
}

/// Random strictly increasing function on `[0, 1]` with every slope in `[l, 10 l]`.
pub fn build_monotone_value(num_segments: usize, l: f64, seed: u64) -> Result<PiecewiseLinearValue> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::validation(format!(
            "reverse Lipschitz constant must be positive, got {l}"
        )));
    }
    build_with_slopes(num_segments, l, SLOPE_SPREAD * l, seed)
}

/// As [`build_monotone_value`] with slopes drawn from `[slope_lo, slope_hi]`.
pub fn build_with_slopes(num_segments: usize, slope_lo: f64, slope_hi: f64, seed: u64) -> Result<PiecewiseLinearValue> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    build_from_rng(num_segments, slope_lo, slope_hi, &mut rng)
}

fn build_from_rng(
    num_segments: usize,
    slope_lo: f64,
    slope_hi: f64,
    rng: &mut ChaCha8Rng,
) -> Result<PiecewiseLinearValue> {
    if num_segments == 0 {
        return Err(Error::validation("need at least one segment"));
    }
    if !(slope_lo > 0.0 && slope_lo <= slope_hi && slope_hi.is_finite()) {
        return Err(Error::validation(format!(
            "slope range [{slope_lo}, {slope_hi}] must be positive and ordered"
        )));
    }
    let breaks = loop {
        let mut b: Vec<f64> = (1..num_segments).map(|_| rng.gen::<f64>()).collect();
        b.push(0.0);
        b.push(1.0);
        b.sort_by(f64::total_cmp);
        if b.windows(2).all(|w| w[1] > w[0]) {
            break b;
        }
    };
    let mut value = rng.gen_range(-1.0..1.0);
    let mut nodes = Vec::with_capacity(breaks.len());
    nodes.push((breaks[0], value));
    for w in breaks.windows(2) {
        let slope = rng.gen_range(slope_lo..=slope_hi);
        value += slope * (w[1] - w[0]);
        nodes.push((w[1], value));
    }
    PiecewiseLinearValue::new(nodes)
}

/// Smallest segment slope; errors when any segment fails to increase.
pub fn reverse_lipschitz_constant(v: &PiecewiseLinearValue) -> Result<f64> {
    let min = v.slopes().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) {
        return Err(Error::validation(format!(
            "function is not strictly increasing (minimum slope {min})"
        )));
    }
    Ok(min)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inversion {
    pub state: f64,
    /// The target lay outside the function's range and was clamped to the
    /// nearer domain endpoint.
    pub extrapolated: bool,
}

/// Bisection for `s` with `V(s) = y`, accurate to `tol` in state space.
pub fn invert_value(v: &PiecewiseLinearValue, y: f64, tol: f64) -> Result<Inversion> {
    if !(tol > 0.0) {
        return Err(Error::validation(format!(
            "inversion tolerance must be positive, got {tol}"
        )));
    }
    if !y.is_finite() {
        return Err(Error::validation("cannot invert a non-finite value"));
    }
    reverse_lipschitz_constant(v)?;
    let (mut lo, mut hi) = v.domain();
    let (v_lo, v_hi) = v.range();
    if y < v_lo {
        return Ok(Inversion {
            state: lo,
            extrapolated: true,
        });
    }
    if y > v_hi {
        return Ok(Inversion {
            state: hi,
            extrapolated: true,
        });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if v.eval(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Inversion {
        state: 0.5 * (lo + hi),
        extrapolated: false,
    })
}

/// `(1 + gamma) eps / (gamma L)`.
pub fn theorem1_bound(epsilon: f64, gamma: f64, l: f64) -> Result<f64> {
    if !(epsilon >= 0.0) {
        return Err(Error::validation(format!(
            "epsilon must be non-negative, got {epsilon}"
        )));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::validation(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    if !(l > 0.0) {
        return Err(Error::validation(format!("L must be positive, got {l}")));
    }
    Ok((1.0 + gamma) * epsilon / (gamma * l))
}

/// Reverse Lipschitz constant `L_r / (1 - gamma L_p (1 + L_pi))` of the
/// action-value function induced by reverse Lipschitz rewards and dynamics.
pub fn lemma1_constant(l_r: f64, l_p: f64, l_pi: f64, gamma: f64) -> Result<f64> {
    if !(l_r > 0.0 && l_p > 0.0 && l_pi >= 0.0) {
        return Err(Error::validation("need L_r > 0, L_p > 0 and L_pi >= 0"));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::validation(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    let denom = 1.0 - gamma * l_p * (1.0 + l_pi);
    if !(denom > 0.0) {
        return Err(Error::Domain(format!(
            "gamma * L_p * (1 + L_pi) = {} must be below 1",
            1.0 - denom
        )));
    }
    Ok(l_r / denom)
}

/// Adds node-wise noise in `[-eps, eps]`, then raises any node that would
/// break monotonicity to keep half of the original rise above its
/// predecessor. The result stays strictly increasing and within `eps` of `v`
/// everywhere.
pub fn perturb_monotone(v: &PiecewiseLinearValue, epsilon: f64, seed: u64) -> Result<PiecewiseLinearValue> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    perturb_from_rng(v, epsilon, &mut rng)
}

fn perturb_from_rng(v: &PiecewiseLinearValue, epsilon: f64, rng: &mut ChaCha8Rng) -> Result<PiecewiseLinearValue> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::validation(format!(
            "epsilon must be non-negative, got {epsilon}"
        )));
    }
    reverse_lipschitz_constant(v)?;
    let mut nodes: Vec<(f64, f64)> = Vec::with_capacity(v.nodes.len());
    for (i, &(s, y)) in v.nodes.iter().enumerate() {
        let noisy = y + rng.gen_range(-epsilon..=epsilon);
        let y = match i {
            0 => noisy,
            _ => {
                let rise = y - v.nodes[i - 1].1;
                noisy.max(nodes[i - 1].1 + RECLIP_FRACTION * rise)
            }
        };
        nodes.push((s, y));
    }
    PiecewiseLinearValue::new(nodes)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialConfig {
    pub num_segments: usize,
    /// Lower end of the slope range of the true function.
    pub l: f64,
    pub epsilon: f64,
    pub gamma: f64,
    pub num_queries: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousTrialReport {
    pub seed: u64,
    pub epsilon: f64,
    pub gamma: f64,
    pub l: f64,
    /// Reverse Lipschitz constant of the perturbed function; the bound uses this.
    pub effective_l: f64,
    /// Reverse Lipschitz constant of the unperturbed function.
    pub true_l: f64,
    pub max_observed_error: f64,
    pub bound: f64,
    /// `max_observed_error >= bound + BISECTION_TOL`.
    pub violated: bool,
    pub extrapolated_queries: usize,
}

/// Samples successors, builds `eps`-accurate `Q` and `V`, inverts, and
/// compares the worst successor error against the bound.
pub fn run_continuous_trial(config: &TrialConfig) -> Result<ContinuousTrialReport> {
    if config.num_queries == 0 {
        return Err(Error::validation("a trial needs at least one query"));
    }
    if !(config.l > 0.0 && config.l.is_finite()) {
        return Err(Error::validation(format!("L must be positive, got {}", config.l)));
    }
    // Validates gamma and epsilon before any sampling.
    theorem1_bound(config.epsilon, config.gamma, config.l)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let truth = build_from_rng(config.num_segments, config.l, SLOPE_SPREAD * config.l, &mut rng)?;
    let estimate = perturb_from_rng(&truth, config.epsilon, &mut rng)?;
    let true_l = reverse_lipschitz_constant(&truth)?;
    let effective_l = reverse_lipschitz_constant(&estimate)?;

    let eps = config.epsilon;
    let gamma = config.gamma;
    let mut max_err: f64 = 0.0;
    let mut extrapolated = 0;
    for _ in 0..config.num_queries {
        let successor: f64 = rng.gen();
        let reward: f64 = rng.gen_range(-1.0..1.0);
        let q = reward + gamma * truth.eval(successor);
        let q_hat = q + rng.gen_range(-eps..=eps);
        let scanned = (q_hat - reward) / gamma;
        let inv = invert_value(&estimate, scanned, BISECTION_TOL)?;
        extrapolated += usize::from(inv.extrapolated);
        max_err = max_err.max((inv.state - successor).abs());
    }
    let bound = theorem1_bound(eps, gamma, effective_l)?;
    Ok(ContinuousTrialReport {
        seed: config.seed,
        epsilon: eps,
        gamma,
        l: config.l,
        effective_l,
        true_l,
        max_observed_error: max_err,
        bound,
        violated: max_err >= bound + BISECTION_TOL,
        extrapolated_queries: extrapolated,
    })
}
