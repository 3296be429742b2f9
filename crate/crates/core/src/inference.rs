//! Successor-state recovery from value tables.
//!
//! For deterministic dynamics the Bellman equation rearranges to
//! `V(f(s, a)) = (Q(s, a) - r(s, a)) / gamma`. The right-hand side, the
//! *scanned value*, is computable from the table and the known reward, so the
//! successor is whichever state's value lies closest to it.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::gridworld::GridSpec;
use crate::mdp::{state_values, KnownTask, Selector, TabularMdp, ValueTable};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InferenceResult {
    pub predicted_state: usize,
    pub scanned_value: f64,
    /// `|V(predicted) - scanned|`.
    pub value_distance: f64,
    /// Distance of the runner-up minus `value_distance`; infinite with one state.
    pub runner_up_margin: f64,
    pub ambiguous: bool,
}

/// `(Q(s, a) - r(s, a)) / gamma`.
pub fn scanned_value<T: KnownTask + ?Sized>(q: &ValueTable, task: &T, state: usize, action: usize) -> Result<f64> {
    let gamma = task.gamma();
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::validation(format!(
            "scanned values need gamma in (0, 1), got {gamma}"
        )));
    }
    if state >= q.num_states() || action >= q.num_actions() {
        return Err(Error::validation(format!(
            "pair ({state}, {action}) outside the {}x{} table",
            q.num_states(),
            q.num_actions()
        )));
    }
    Ok((q.get(state, action) - task.reward(state, action)) / gamma)
}

/// Nearest state value to `scanned`; ties go to the lowest state index.
pub fn infer_next_state(values: &[f64], scanned: f64, ambiguity_margin: f64) -> Result<InferenceResult> {
    if values.is_empty() {
        return Err(Error::validation("cannot infer a successor from an empty value vector"));
    }
    let mut best = (0, f64::INFINITY);
    let mut second = f64::INFINITY;
    for (s, &v) in values.iter().enumerate() {
        let d = (v - scanned).abs();
        if d < best.1 {
            second = best.1;
            best = (s, d);
        } else if d < second {
            second = d;
        }
    }
    let runner_up_margin = second - best.1;
    Ok(InferenceResult {
        predicted_state: best.0,
        scanned_value: scanned,
        value_distance: best.1,
        runner_up_margin,
        ambiguous: runner_up_margin <= ambiguity_margin,
    })
}

/// Predicted successor for every state-action pair.
#[derive(Debug, Clone, PartialEq)]
pub struct InferredModel {
    num_states: usize,
    num_actions: usize,
    per_pair: Vec<InferenceResult>,
}

impl InferredModel {
    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn next_state(&self, state: usize, action: usize) -> usize {
        self.per_pair[state * self.num_actions + action].predicted_state
    }

    pub fn pair(&self, state: usize, action: usize) -> &InferenceResult {
        &self.per_pair[state * self.num_actions + action]
    }

    pub fn pairs(&self) -> &[InferenceResult] {
        &self.per_pair
    }

    /// Text table `state,action,predicted_next,true_next,value_distance,ambiguous`.
    /// `true_next` is left empty when no ground truth is supplied.
    pub fn to_table(&self, truth: Option<&TabularMdp>) -> String {
        let mut out = String::from("state,action,predicted_next,true_next,value_distance,ambiguous\n");
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                let r = self.pair(s, a);
                let truth = truth.map(|m| m.next_state(s, a).to_string()).unwrap_or_default();
                let _ = writeln!(
                    out,
                    "{s},{a},{},{truth},{:.16e},{}",
                    r.predicted_state, r.value_distance, r.ambiguous
                );
            }
        }
        out
    }
}

/// Runs the scan over all pairs, using the state values picked by `selector`.
/// The ambiguity margin is `2 * certified_epsilon / gamma`.
pub fn infer_model<T: KnownTask + ?Sized>(q: &ValueTable, task: &T, selector: Selector<'_>) -> Result<InferredModel> {
    if q.num_states() != task.num_states() || q.num_actions() != task.num_actions() {
        return Err(Error::Dimension {
            expected: format!("{}x{} table", task.num_states(), task.num_actions()),
            actual: format!("{}x{}", q.num_states(), q.num_actions()),
        });
    }
    let values = state_values(q, selector)?;
    let margin = 2.0 * q.certified_epsilon().unwrap_or(0.0) / task.gamma();
    let mut per_pair = Vec::with_capacity(q.num_states() * q.num_actions());
    for s in 0..q.num_states() {
        for a in 0..q.num_actions() {
            let scanned = scanned_value(q, task, s, a)?;
            per_pair.push(infer_next_state(&values, scanned, margin)?);
        }
    }
    Ok(InferredModel {
        num_states: q.num_states(),
        num_actions: q.num_actions(),
        per_pair,
    })
}

/// Fraction of pairs whose predicted successor matches the true transition.
pub fn model_accuracy(model: &InferredModel, mdp: &TabularMdp) -> Result<f64> {
    if model.num_states != mdp.num_states() || model.num_actions != mdp.num_actions() {
        return Err(Error::validation(format!(
            "model is {}x{} but the MDP is {}x{}",
            model.num_states,
            model.num_actions,
            mdp.num_states(),
            mdp.num_actions()
        )));
    }
    let hits = model
        .per_pair
        .iter()
        .zip(mdp.transitions())
        .filter(|(r, &t)| r.predicted_state == t)
        .count();
    Ok(hits as f64 / model.per_pair.len() as f64)
}

/// States whose value lies within `tolerance` of `center_value`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSet {
    pub members: BTreeSet<usize>,
    pub center_value: f64,
    pub tolerance: f64,
}

pub fn level_set(values: &[f64], center: f64, tolerance: f64) -> Result<LevelSet> {
    if !(tolerance >= 0.0) {
        return Err(Error::validation(format!(
            "level-set tolerance must be non-negative, got {tolerance}"
        )));
    }
    let members = values
        .iter()
        .enumerate()
        .filter(|(_, &v)| (v - center).abs() <= tolerance)
        .map(|(s, _)| s)
        .collect();
    Ok(LevelSet {
        members,
        center_value: center,
        tolerance,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Intersection {
    pub members: BTreeSet<usize>,
    /// Set when the intersection is empty: the value functions disagree or
    /// the tolerances are too tight.
    pub inconsistent: bool,
}

pub fn intersect_level_sets(sets: &[LevelSet]) -> Result<Intersection> {
    let (first, rest) = sets
        .split_first()
        .ok_or_else(|| Error::validation("need at least one level set to intersect"))?;
    let mut members = first.members.clone();
    for set in rest {
        members.retain(|s| set.members.contains(s));
    }
    let inconsistent = members.is_empty();
    Ok(Intersection { members, inconsistent })
}

/// Keeps members within Manhattan distance `radius` of `current`.
pub fn prune_by_locality(set: &LevelSet, current: usize, radius: usize, grid: &GridSpec) -> BTreeSet<usize> {
    set.members
        .iter()
        .copied()
        .filter(|&s| grid.contains(s) && grid.manhattan(s, current) <= radius)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{value_iteration, Policy, ValueSource};

    fn chain() -> TabularMdp {
        TabularMdp::new(2, 1, vec![1, 1], vec![0.0, 1.0], 0.5).unwrap()
    }

    fn set(members: &[usize]) -> LevelSet {
        LevelSet {
            members: members.iter().copied().collect(),
            center_value: 0.0,
            tolerance: 0.0,
        }
    }

    #[test]
    fn scanned_value_examples() {
        let mdp = chain();
        let q = ValueTable::new(2, 1, vec![1.0, 2.0], None, ValueSource::Solved).unwrap();
        assert_eq!(scanned_value(&q, &mdp, 0, 0).unwrap(), 2.0);

        let mdp = TabularMdp::new(1, 1, vec![0], vec![0.7], 0.9).unwrap();
        let q = ValueTable::new(1, 1, vec![0.7], None, ValueSource::Solved).unwrap();
        assert_eq!(scanned_value(&q, &mdp, 0, 0).unwrap(), 0.0);

        let mdp = TabularMdp::new(1, 1, vec![0], vec![1.0], 0.25).unwrap();
        let q = ValueTable::new(1, 1, vec![2.0], None, ValueSource::Solved).unwrap();
        assert_eq!(scanned_value(&q, &mdp, 0, 0).unwrap(), 4.0);
    }

    #[test]
    fn scanned_value_rejects_zero_gamma() {
        let mdp = TabularMdp::new(1, 1, vec![0], vec![1.0], 0.0).unwrap();
        let q = ValueTable::zeros(1, 1);
        assert!(matches!(scanned_value(&q, &mdp, 0, 0), Err(Error::Validation(_))));
    }

    #[test]
    fn nearest_value_examples() {
        let r = infer_next_state(&[1.0, 2.0], 2.0, 0.0).unwrap();
        assert_eq!(r.predicted_state, 1);
        assert_eq!(r.value_distance, 0.0);

        let r = infer_next_state(&[0.0, 1.0], 0.4, 0.0).unwrap();
        assert_eq!(r.predicted_state, 0);
        assert!((r.runner_up_margin - 0.2).abs() < 1e-15);
        assert!(!r.ambiguous);

        let r = infer_next_state(&[0.0, 1.0], 0.5, 0.0).unwrap();
        assert_eq!(r.predicted_state, 0);
        assert_eq!(r.runner_up_margin, 0.0);
        assert!(r.ambiguous);

        assert!(infer_next_state(&[], 0.0, 0.0).is_err());
        let r = infer_next_state(&[3.0], 0.0, 1.0).unwrap();
        assert_eq!(r.runner_up_margin, f64::INFINITY);
        assert!(!r.ambiguous);
    }

    #[test]
    fn chain_model_recovered() {
        let mdp = chain();
        let (q, _) = value_iteration(&mdp, 1e-12, Selector::Greedy).unwrap();
        let model = infer_model(&q, &mdp, Selector::Greedy).unwrap();
        assert_eq!(model.next_state(0, 0), 1);
        assert_eq!(model.next_state(1, 0), 1);
        assert_eq!(model_accuracy(&model, &mdp).unwrap(), 1.0);

        let pi = Policy::uniform(2, 1);
        let (q, _) = value_iteration(&mdp, 1e-12, Selector::Policy(&pi)).unwrap();
        let model = infer_model(&q, &mdp, Selector::Policy(&pi)).unwrap();
        assert_eq!(model_accuracy(&model, &mdp).unwrap(), 1.0);
    }

    #[test]
    fn all_wrong_gives_zero_accuracy() {
        let mdp = chain();
        let model = InferredModel {
            num_states: 2,
            num_actions: 1,
            per_pair: vec![infer_next_state(&[0.0], 0.0, 0.0).unwrap(); 2],
        };
        assert_eq!(model_accuracy(&model, &mdp).unwrap(), 0.0);
        let other = TabularMdp::new(3, 1, vec![0, 0, 0], vec![0.0; 3], 0.5).unwrap();
        assert!(model_accuracy(&model, &other).is_err());
    }

    #[test]
    fn level_set_examples() {
        let v = [0.0, 0.5, 0.5, 1.0];
        assert_eq!(level_set(&v, 0.5, 1e-9).unwrap().members, BTreeSet::from([1, 2]));
        assert_eq!(level_set(&v, 0.5, 1.0).unwrap().members.len(), 4);
        assert!(level_set(&v, 50.0, 1e-3).unwrap().members.is_empty());
        assert!(level_set(&v, 0.0, -1.0).is_err());
    }

    #[test]
    fn intersection_examples() {
        let i = intersect_level_sets(&[set(&[1, 3, 5]), set(&[2, 3])]).unwrap();
        assert_eq!(i.members, BTreeSet::from([3]));
        assert!(!i.inconsistent);

        let i = intersect_level_sets(&[set(&[4, 7])]).unwrap();
        assert_eq!(i.members, BTreeSet::from([4, 7]));

        let i = intersect_level_sets(&[set(&[1]), set(&[2])]).unwrap();
        assert!(i.members.is_empty());
        assert!(i.inconsistent);

        assert!(intersect_level_sets(&[]).is_err());
    }

    #[test]
    fn locality_pruning() {
        let grid = GridSpec::new(5).unwrap();
        let s = set(&[grid.index(0, 0), grid.index(4, 4)]);
        let current = grid.index(0, 1);
        assert_eq!(
            prune_by_locality(&s, current, 1, &grid),
            BTreeSet::from([grid.index(0, 0)])
        );
        assert!(prune_by_locality(&s, current, 0, &grid).is_empty());
        let s0 = set(&[current, grid.index(3, 3)]);
        assert_eq!(prune_by_locality(&s0, current, 0, &grid), BTreeSet::from([current]));
        assert_eq!(prune_by_locality(&s, current, 8, &grid), s.members);
    }

    #[test]
    fn model_table_layout() {
        let mdp = chain();
        let (q, _) = value_iteration(&mdp, 1e-12, Selector::Greedy).unwrap();
        let model = infer_model(&q, &mdp, Selector::Greedy).unwrap();
        let text = model.to_table(Some(&mdp));
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "state,action,predicted_next,true_next,value_distance,ambiguous"
        );
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0,0,1,1,"));
        let blind = model.to_table(None);
        assert!(blind.lines().nth(1).unwrap().starts_with("0,0,1,,"));
    }
}
