//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::{brute_gap, random_mdp, random_policy, random_table, rng};
use inverse_bellman::gridworld::{make_empty_grid, sample_reward};
use inverse_bellman::harness::fig1::{EpsilonMode, Fig1Config};
use inverse_bellman::harness::output::curve_svg;
use inverse_bellman::harness::{
    curve_csv, load_value_table, run_fig1, run_theorem1_sweep, save_value_table, StoredValueTable, SweepConfig,
};
use inverse_bellman::inference::{infer_model, intersect_level_sets, level_set, model_accuracy, scanned_value};
use inverse_bellman::mdp::{
    backup, perturb_values, state_values, value_iteration, PerturbMode, Selector, TabularMdp, ValueSource, ValueTable,
};
use inverse_bellman::separability::value_gap;
use rand::Rng;

/// Slack for floating-point rounding where a bound is compared after
/// re-evaluating both sides in f64.
const FP_SLACK: f64 = 1e-12;

type Outcome = Result<String, String>;
type Check = fn() -> Outcome;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn grid_task(seed: u64) -> TabularMdp {
    make_empty_grid(5, 0.99)
        .unwrap()
        .with_state_reward(&sample_reward(5, seed))
        .unwrap()
}

fn exact(mdp: &TabularMdp) -> ValueTable {
    value_iteration(mdp, 1e-12, Selector::Greedy).unwrap().0
}

fn greedy_values(q: &ValueTable) -> Vec<f64> {
    state_values(q, Selector::Greedy).unwrap()
}

fn exact_recovery() -> Outcome {
    let start = Instant::now();
    let mut solved = 0;
    for seed in 0.. {
        if solved == 20 {
            break;
        }
        let mdp = grid_task(1000 + seed);
        let (q, report) = value_iteration(&mdp, 1e-12, Selector::Greedy).map_err(|e| e.to_string())?;
        if value_gap(&greedy_values(&q)).unwrap().delta <= 0.0 {
            continue;
        }
        ensure(report.certified_epsilon <= 1e-12, || {
            format!("task {seed}: certificate {}", report.certified_epsilon)
        })?;
        let model = infer_model(&q, &mdp, Selector::Greedy).map_err(|e| e.to_string())?;
        let acc = model_accuracy(&model, &mdp).unwrap();
        ensure(acc == 1.0, || format!("task {seed}: accuracy {acc}"))?;
        solved += 1;
    }
    let elapsed = start.elapsed().as_secs_f64();
    ensure(elapsed < 10.0, || format!("took {elapsed:.2} s"))?;
    Ok(format!("20 tasks, accuracy 1.0 on all 100 pairs, {elapsed:.2} s"))
}

fn identifiability_guarantee() -> Outcome {
    let start = Instant::now();
    let mut r = rng(2);
    let mut checks = 0;
    for task in 0..120u64 {
        let mdp = grid_task(2000 + task);
        let q = exact(&mdp);
        let delta = value_gap(&greedy_values(&q)).unwrap().delta;
        let critical = delta / (2.0 / mdp.gamma() + 2.0);
        let mut multipliers = vec![0.999, 0.5, 1e-3];
        multipliers.extend((0..3).map(|_| r.gen_range(0.0..1.0)));
        for mode in [PerturbMode::Uniform, PerturbMode::AdversarialPair] {
            for (i, &m) in multipliers.iter().enumerate() {
                let eps = m * critical;
                if eps >= critical {
                    continue;
                }
                let p = perturb_values(&q, eps, mode, task * 16 + i as u64).unwrap();
                let acc = model_accuracy(&infer_model(&p, &mdp, Selector::Greedy).unwrap(), &mdp).unwrap();
                ensure(acc == 1.0, || {
                    format!("task {task}, {mode:?}, eps = {m} x critical: accuracy {acc}")
                })?;
                checks += 1;
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    ensure(elapsed < 60.0, || format!("took {elapsed:.2} s"))?;
    Ok(format!(
        "120 tasks, {checks} sub-critical tables, zero exceptions, {elapsed:.2} s"
    ))
}

fn perturbed_gap_inequality() -> Outcome {
    let mut r = rng(3);
    for k in 0..1000u64 {
        let n = r.gen_range(2..50);
        let v = random_table(&mut r, n, 10.0);
        let delta = brute_gap(&v);
        let eps = r.gen_range(0.0..=delta.max(1e-6));
        let mode = if k % 2 == 0 {
            PerturbMode::Uniform
        } else {
            PerturbMode::AdversarialPair
        };
        let t = ValueTable::new(n, 1, v, None, ValueSource::Loaded).unwrap();
        let p = perturb_values(&t, eps, mode, k).unwrap();
        let perturbed = brute_gap(p.entries());
        ensure(perturbed >= delta - 2.0 * eps - FP_SLACK, || {
            format!("draw {k}: gap {perturbed} < {delta} - 2 * {eps}")
        })?;
    }
    Ok("1000 vectors, zero violations".into())
}

fn scanned_value_bound() -> Outcome {
    let mut r = rng(4);
    let mut worst = 0.0f64;
    for k in 0..1000u64 {
        let mdp = if k % 4 == 0 {
            grid_task(4000 + k)
        } else {
            random_mdp(&mut r, 20, 4)
        };
        let q = exact(&mdp);
        let eps = 10f64.powf(r.gen_range(-6.0..0.0));
        let mode = if k % 2 == 0 {
            PerturbMode::Uniform
        } else {
            PerturbMode::AdversarialPair
        };
        let p = perturb_values(&q, eps, mode, k).unwrap();
        for s in 0..mdp.num_states() {
            for a in 0..mdp.num_actions() {
                let err = (scanned_value(&p, &mdp, s, a).unwrap() - scanned_value(&q, &mdp, s, a).unwrap()).abs();
                let bound = eps / mdp.gamma();
                worst = worst.max(err / bound);
                ensure(err <= bound + 1e-12, || {
                    format!("table {k} ({s},{a}): error {err} > {bound}")
                })?;
            }
        }
    }
    Ok(format!("1000 tables, worst error / (eps/gamma) = {worst:.6}"))
}

fn continuous_bound() -> Outcome {
    let start = Instant::now();
    let batch = run_theorem1_sweep(&SweepConfig::default()).map_err(|e| e.to_string())?;
    ensure(batch.rows.len() == 1800, || format!("{} rows", batch.rows.len()))?;
    for row in &batch.rows {
        let bound = (1.0 + row.gamma) * row.epsilon / (row.gamma * row.effective_l);
        ensure(row.max_observed_error < bound + 1e-9, || {
            format!(
                "seed {} gamma {} L {} eps {}: error {} vs bound {}",
                row.seed, row.gamma, row.l, row.epsilon, row.max_observed_error, bound
            )
        })?;
    }
    let elapsed = start.elapsed().as_secs_f64();
    ensure(elapsed < 60.0, || format!("took {elapsed:.2} s"))?;
    Ok(format!("1800 trials within bound, {elapsed:.2} s"))
}

fn accuracy_curves() -> Outcome {
    let truncation = Fig1Config::default();
    let perturbation = Fig1Config {
        epsilon_mode: EpsilonMode::Perturbation(PerturbMode::Uniform),
        ..Fig1Config::default()
    };
    let mut notes = Vec::new();
    for config in [&truncation, &perturbation] {
        let points = run_fig1(config).map_err(|e| e.to_string())?;
        let again = run_fig1(config).map_err(|e| e.to_string())?;
        ensure(curve_csv(&points) == curve_csv(&again), || {
            format!("{:?}: CSV differs between runs", config.epsilon_mode)
        })?;
        ensure(
            curve_svg(&points).matches("stroke-dasharray").count() == config.delta_targets.len(),
            || "one dashed critical line per target".into(),
        )?;
        for p in &points {
            let critical = p.delta_target / (2.0 / config.gamma + 2.0);
            ensure((p.critical_epsilon - critical).abs() <= 1e-15, || {
                format!("critical line at {} for delta {}", p.critical_epsilon, p.delta_target)
            })?;
            if p.epsilon < critical {
                ensure(p.mean_accuracy == 1.0, || {
                    format!(
                        "{:?}: delta {} eps {} below critical has accuracy {}",
                        config.epsilon_mode, p.delta_target, p.epsilon, p.mean_accuracy
                    )
                })?;
            }
        }
        let far: Vec<f64> = points
            .iter()
            .filter(|p| p.delta_target == 0.02 && p.epsilon >= 10.0 * p.critical_epsilon * (1.0 - 1e-12))
            .map(|p| p.mean_accuracy)
            .collect();
        let min_far = far.iter().copied().fold(f64::INFINITY, f64::min);
        notes.push(format!(
            "{:?} min accuracy at >=10x critical (delta 0.02): {min_far:.3}",
            config.epsilon_mode
        ));
        if config.epsilon_mode != EpsilonMode::IterationTruncation {
            ensure(!far.is_empty() && min_far < 1.0, || {
                format!("accuracy does not drop at >=10x critical for delta 0.02 ({min_far})")
            })?;
        }
    }
    Ok(format!("1.0 below critical, CSV byte-identical; {}", notes.join("; ")))
}

fn contraction() -> Outcome {
    let mut r = rng(7);
    let mut worst = 0.0f64;
    for k in 0..1000 {
        let mdp = random_mdp(&mut r, 20, 5);
        let (ns, na) = (mdp.num_states(), mdp.num_actions());
        let scale = 10f64.powf(r.gen_range(-2.0..3.0));
        let q1 = ValueTable::new(ns, na, random_table(&mut r, ns * na, scale), None, ValueSource::Loaded).unwrap();
        let q2 = ValueTable::new(ns, na, random_table(&mut r, ns * na, scale), None, ValueSource::Loaded).unwrap();
        let policy = random_policy(&mut r, ns, na);
        let before = q1.sup_distance(&q2).unwrap();
        for selector in [Selector::Greedy, Selector::Policy(&policy)] {
            let after = backup(&mdp, &q1, selector)
                .unwrap()
                .sup_distance(&backup(&mdp, &q2, selector).unwrap())
                .unwrap();
            worst = worst.max(after / (mdp.gamma() * before));
            ensure(after <= mdp.gamma() * before * (1.0 + 1e-12), || {
                format!("triple {k}: {after} > {} * {before}", mdp.gamma())
            })?;
        }
    }
    Ok(format!(
        "1000 triples, optimality and policy backups, worst ratio {worst:.6}"
    ))
}

fn persistence() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut r = rng(8);
    for k in 0..100u64 {
        let mdp = if k % 2 == 0 {
            grid_task(8000 + k)
        } else {
            random_mdp(&mut r, 20, 4)
        };
        let (q, _) = value_iteration(&mdp, 10f64.powf(r.gen_range(-12.0..-1.0)), Selector::Greedy).unwrap();
        let q = if k % 3 == 0 {
            perturb_values(&q, r.gen_range(0.0..0.1), PerturbMode::Uniform, k).unwrap()
        } else {
            q
        };
        let before = infer_model(&q, &mdp, Selector::Greedy).unwrap();
        let stored = StoredValueTable::from_mdp(q, &mdp).unwrap();
        let path = dir.path().join(format!("q{k}.toml"));
        save_value_table(&path, &stored).map_err(|e| e.to_string())?;
        let loaded = load_value_table(&path).map_err(|e| e.to_string())?;
        let bits = |xs: &[f64]| xs.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        ensure(bits(loaded.table.entries()) == bits(stored.table.entries()), || {
            format!("table {k}: q differs")
        })?;
        ensure(bits(&loaded.reward) == bits(&stored.reward), || {
            format!("table {k}: reward differs")
        })?;
        ensure(loaded.gamma.to_bits() == stored.gamma.to_bits(), || {
            format!("table {k}: gamma differs")
        })?;
        ensure(
            loaded.table.certified_epsilon().map(f64::to_bits) == stored.table.certified_epsilon().map(f64::to_bits),
            || format!("table {k}: certificate differs"),
        )?;
        let after = infer_model(&loaded.table, &loaded, Selector::Greedy).unwrap();
        ensure(after == before, || format!("table {k}: inferred model differs"))?;
    }
    Ok("100 tables bit-exact, inferred models identical".into())
}

fn level_set_soundness() -> Outcome {
    let mut r = rng(9);
    let mut singleton = 0usize;
    let mut pairs = 0usize;
    for draw in 0..1000u64 {
        let eps = 10f64.powf(r.gen_range(-6.0..0.0));
        let mode = if draw % 2 == 0 {
            PerturbMode::Uniform
        } else {
            PerturbMode::AdversarialPair
        };
        // Three tasks with the same dynamics and different rewards; the first is the draw's task.
        let tasks: Vec<TabularMdp> = (0..3).map(|j| grid_task(9000 + 3 * draw + j)).collect();
        let mut sets_per_pair: Vec<Vec<_>> = (0..100).map(|_| Vec::with_capacity(3)).collect();
        for (j, mdp) in tasks.iter().enumerate() {
            let p = perturb_values(&exact(mdp), eps, mode, draw * 3 + j as u64).unwrap();
            let total = p.certified_epsilon().unwrap();
            let values = greedy_values(&p);
            for s in 0..25 {
                for a in 0..4 {
                    let center = scanned_value(&p, mdp, s, a).unwrap();
                    let set = level_set(&values, center, total + total / mdp.gamma() + FP_SLACK).unwrap();
                    let truth = mdp.next_state(s, a);
                    ensure(set.members.contains(&truth), || {
                        format!("draw {draw} task {j} ({s},{a}): true successor {truth} missing")
                    })?;
                    sets_per_pair[s * 4 + a].push(set);
                }
            }
        }
        for (i, sets) in sets_per_pair.iter().enumerate() {
            let inter = intersect_level_sets(sets).unwrap();
            let truth = tasks[0].next_state(i / 4, i % 4);
            ensure(inter.members.contains(&truth), || {
                format!("draw {draw} pair {i}: intersection misses {truth}")
            })?;
            singleton += (inter.members.len() == 1) as usize;
            pairs += 1;
        }
    }
    Ok(format!(
        "1000 draws x 3 tasks; intersections always contain the successor ({:.1}% singletons)",
        100.0 * singleton as f64 / pairs as f64
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 9] = [
        ("exact-value model recovery", exact_recovery),
        ("identifiability guarantee", identifiability_guarantee),
        ("perturbed gap inequality", perturbed_gap_inequality),
        ("scanned-value bound", scanned_value_bound),
        ("continuous successor bound", continuous_bound),
        ("accuracy curve shape and reproducibility", accuracy_curves),
        ("contraction", contraction),
        ("persistence roundtrip", persistence),
        ("level-set soundness", level_set_soundness),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS criterion {}: {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
