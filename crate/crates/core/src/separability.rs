//! Minimum state-value gaps and the identifiability threshold for tabular
//! successor-state recovery.

use crate::error::{Error, Result};

/// Smallest pairwise gap between state values and the pair attaining it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueGap {
    pub delta: f64,
    /// Lexicographically smallest `(i, j)`, `i < j`, with `|v[i] - v[j]| == delta`.
    pub argpair: (usize, usize),
}

impl ValueGap {
    /// A zero gap means two states share a value and cannot be told apart.
    pub fn is_separable(&self) -> bool {
        self.delta > 0.0
    }
}

/// Gap report bound to a discount factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparabilityReport {
    pub delta: f64,
    pub argpair: (usize, usize),
    pub gamma: f64,
    /// `delta / (2 / gamma + 2)`; zero when the values are not separable.
    pub threshold: f64,
}

impl SeparabilityReport {
    pub fn new(gap: ValueGap, gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(Self {
            delta: gap.delta,
            argpair: gap.argpair,
            gamma,
            threshold: gap.delta / (2.0 / gamma + 2.0),
        })
    }

    /// Whether an `epsilon`-accurate estimate still identifies every successor.
    pub fn identifiable_at(&self, epsilon: f64) -> bool {
        self.delta > 0.0 && epsilon < self.threshold
    }
}

pub fn value_gap(values: &[f64]) -> Result<ValueGap> {
    if values.len() < 2 {
        return Err(Error::validation(format!(
            "value gap needs at least two states, got {}",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("state values must be finite"));
    }
    let mut best = ValueGap {
        delta: f64::INFINITY,
        argpair: (0, 1),
    };
    // Strict `<` while scanning in lexicographic order keeps the first pair on ties.
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            let d = (values[i] - values[j]).abs();
            if d < best.delta {
                best = ValueGap {
                    delta: d,
                    argpair: (i, j),
                };
            }
        }
    }
    Ok(best)
}

/// Gap report for `values` under discount `gamma`.
pub fn separability_report(values: &[f64], gamma: f64) -> Result<SeparabilityReport> {
    SeparabilityReport::new(value_gap(values)?, gamma)
}

/// Critical accuracy `delta / (2 / gamma + 2)` below which the model is identifiable.
pub fn identifiability_threshold(delta: f64, gamma: f64) -> Result<f64> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::validation(format!("delta must be positive, got {delta}")));
    }
    check_gamma(gamma)?;
    Ok(delta / (2.0 / gamma + 2.0))
}

/// Strict test `epsilon < identifiability_threshold(delta, gamma)`.
pub fn is_identifiable(delta: f64, epsilon: f64, gamma: f64) -> Result<bool> {
    if !(epsilon >= 0.0) {
        return Err(Error::validation(format!(
            "epsilon must be non-negative, got {epsilon}"
        )));
    }
    Ok(epsilon < identifiability_threshold(delta, gamma)?)
}

/// Worst-case gap `delta - 2 epsilon` after an `epsilon` perturbation.
/// Negative values mean the perturbed values may overlap.
pub fn perturbed_gap_lower_bound(delta: f64, epsilon: f64) -> f64 {
    delta - 2.0 * epsilon
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::validation(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    Ok(())
}
