#![allow(dead_code)]

use inverse_bellman::mdp::{Policy, TabularMdp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random deterministic MDP with `2..=max_states` states and `1..=max_actions` actions.
pub fn random_mdp(rng: &mut ChaCha8Rng, max_states: usize, max_actions: usize) -> TabularMdp {
    let ns = rng.gen_range(2..=max_states);
    let na = rng.gen_range(1..=max_actions);
    let transition = (0..ns * na).map(|_| rng.gen_range(0..ns)).collect();
    let reward = (0..ns * na).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let gamma = rng.gen_range(0.05..0.95);
    TabularMdp::new(ns, na, transition, reward, gamma).unwrap()
}

pub fn random_policy(rng: &mut ChaCha8Rng, ns: usize, na: usize) -> Policy {
    let mut probs = Vec::with_capacity(ns * na);
    for _ in 0..ns {
        let w: Vec<f64> = (0..na).map(|_| rng.gen_range(0.0..1.0)).collect();
        let total: f64 = w.iter().sum();
        probs.extend(w.iter().map(|x| x / total));
    }
    // Renormalised rows can miss 1 by a few ulps; fix the last entry.
    for row in probs.chunks_mut(na) {
        let head: f64 = row[..na - 1].iter().sum();
        row[na - 1] = (1.0 - head).max(0.0);
    }
    Policy::new(ns, na, probs).unwrap()
}

pub fn random_table(rng: &mut ChaCha8Rng, cells: usize, scale: f64) -> Vec<f64> {
    (0..cells).map(|_| rng.gen_range(-scale..scale)).collect()
}

/// Independent optimal action values: plain nested loops over `(s, a)`,
/// iterated until an exact floating-point fixed point or `max_sweeps`.
pub fn reference_q(mdp: &TabularMdp, max_sweeps: usize) -> Vec<Vec<f64>> {
    let ns = mdp.num_states();
    let na = mdp.num_actions();
    let mut q = vec![vec![0.0; na]; ns];
    for _ in 0..max_sweeps {
        let v: Vec<f64> = q
            .iter()
            .map(|row| row.iter().cloned().fold(f64::MIN, f64::max))
            .collect();
        let mut changed = false;
        let mut next = vec![vec![0.0; na]; ns];
        for s in 0..ns {
            for a in 0..na {
                let x = mdp.reward(s, a) + mdp.gamma() * v[mdp.next_state(s, a)];
                changed |= x != q[s][a];
                next[s][a] = x;
            }
        }
        q = next;
        if !changed {
            break;
        }
    }
    q
}

/// Minimum pairwise gap by direct enumeration.
pub fn brute_gap(v: &[f64]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..v.len() {
        for j in 0..v.len() {
            if i != j {
                best = best.min((v[i] - v[j]).abs());
            }
        }
    }
    best
}
