//! End-to-end acceptance checks, one per criterion. Each test prints a
//! `PASS criterion N` line with the measured values; a failed check panics
//! with the measurement so the gap is visible in the test output.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use approx::assert_relative_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use grantsim::config::{ExperimentConfig, RewardMode, SyntheticConfig};
use grantsim::engine::Experiment;
use grantsim::output::{run_command, RunManifest};
use grantsim::policies::{ucb_index, ArmStats, PolicyKind, PolicyState};
use grantsim::qos::{GompertzParams, UtilityWeights};
use grantsim::traffic::{MtdId, Prediction, PredictorConfig};
use grantsim::{confidence_coverage_test, theoretical_regret_bound};

fn base_synthetic() -> ExperimentConfig {
    ExperimentConfig {
        horizon: 100_000,
        predictor: PredictorConfig::PERFECT,
        ..ExperimentConfig::default()
    }
}

fn imperfect(prob_lo: f64) -> PredictorConfig {
    PredictorConfig {
        prob_lo,
        prob_hi: 1.0,
        miss_rate: 0.0,
        false_positive_rate: 0.05,
    }
}

/// Mean cumulative-regret curve over replications.
fn mean_curve(cfg: &ExperimentConfig, reps: u32) -> Vec<f64> {
    let exp = Experiment::prepare(cfg.clone()).unwrap();
    let curves: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|r| exp.run_replication(u64::from(r)).cumulative_regret)
        .collect();
    let mut mean = vec![0.0; cfg.horizon as usize];
    for curve in &curves {
        for (slot, value) in curve.iter().enumerate() {
            mean[slot] += value / f64::from(reps);
        }
    }
    mean
}

fn mean_final_regret(cfg: &ExperimentConfig, reps: u32) -> f64 {
    let exp = Experiment::prepare(cfg.clone()).unwrap();
    (0..reps)
        .into_par_iter()
        .map(|r| exp.run_replication(u64::from(r)).summary.final_regret)
        .sum::<f64>()
        / f64::from(reps)
}

/// Mean of (selected-deadline, active-set-deadline, sum-rate) over replications.
fn mean_summary_stats(cfg: &ExperimentConfig, reps: u32) -> (f64, f64, f64) {
    let exp = Experiment::prepare(cfg.clone()).unwrap();
    let stats: Vec<(f64, f64, f64)> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let s = exp.run_replication(u64::from(r)).summary;
            (
                s.mean_selected_deadline_ms,
                s.mean_active_deadline_ms,
                s.mean_sum_rate_bps,
            )
        })
        .collect();
    let n = f64::from(reps);
    (
        stats.iter().map(|s| s.0).sum::<f64>() / n,
        stats.iter().map(|s| s.1).sum::<f64>() / n,
        stats.iter().map(|s| s.2).sum::<f64>() / n,
    )
}

/// Coefficient of determination of a least-squares line through the points.
fn r_squared(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let syy: f64 = points.iter().map(|p| p.1 * p.1).sum();
    let num = n * sxy - sx * sy;
    num * num / ((n * sxx - sx * sx) * (n * syy - sy * sy))
}

#[test]
fn criterion_01_sublinear_vs_linear_regret() {
    let reps = 50;
    let ucb = mean_curve(&base_synthetic(), reps);
    let rate_1e4 = ucb[9_999] / 1e4;
    let rate_1e5 = ucb[99_999] / 1e5;
    let ratio = rate_1e5 / rate_1e4;
    assert!(
        ratio < 0.5,
        "FAIL criterion 1: time-averaged regret ratio {ratio:.3} not below 0.5"
    );

    // Least-squares fit of R(t) against ln t over the last decade.
    let points: Vec<(f64, f64)> = (0..30)
        .map(|i| {
            let t = (1e4_f64 * 10f64.powf(f64::from(i) / 29.0)).round() as usize;
            ((t as f64).ln(), ucb[t.min(100_000) - 1])
        })
        .collect();
    let r2 = r_squared(&points);
    assert!(
        r2 > 0.9,
        "FAIL criterion 1: log-fit R^2 {r2:.4} not above 0.9"
    );

    let random = mean_curve(
        &ExperimentConfig {
            policy: PolicyKind::Random,
            ..base_synthetic()
        },
        reps,
    );
    let random_ratio = (random[99_999] / 1e5) / (random[9_999] / 1e4);
    assert!(
        (random_ratio - 1.0).abs() <= 0.1,
        "FAIL criterion 1: random-policy time-averaged regret drifts by {random_ratio:.3}"
    );
    println!(
        "PASS criterion 1: averaged-regret ratio {ratio:.3} < 0.5, log-fit R^2 {r2:.4} > 0.9, \
         random drift {random_ratio:.4} within 10%"
    );
}

#[test]
fn criterion_02_probabilistic_weighting_improvement() {
    let reps = 50;
    let plain = mean_final_regret(
        &ExperimentConfig {
            policy: PolicyKind::SleepingUcb,
            predictor: imperfect(0.8),
            ..base_synthetic()
        },
        reps,
    );
    let mut ratios = Vec::new();
    for (prob_lo, required) in [(0.8, 0.70), (0.9, 0.90)] {
        let prob = mean_final_regret(
            &ExperimentConfig {
                policy: PolicyKind::ProbSleepingUcb,
                predictor: imperfect(prob_lo),
                ..base_synthetic()
            },
            reps,
        );
        ratios.push((prob_lo, prob / plain, required));
    }
    let text: Vec<String> = ratios
        .iter()
        .map(|(lo, r, req)| format!("[{lo},1]: {r:.3} (required <= {req})"))
        .collect();
    let ok = ratios.iter().all(|(_, r, req)| r <= req);
    assert!(
        ok,
        "FAIL criterion 2: weighted-vs-plain final regret {}; the probability-weighting \
         advantage in this emulation is bounded by the mean-gap structure of the available \
         set and does not reach the required ratios",
        text.join(", ")
    );
    println!("PASS criterion 2: {}", text.join(", "));
}

fn delay_config() -> ExperimentConfig {
    ExperimentConfig {
        reward_mode: RewardMode::Physical,
        weights: UtilityWeights {
            alpha: 0.0,
            beta: 0.0,
            gamma: 1.0,
        },
        gompertz: GompertzParams {
            a: 1.0,
            b: 13.0,
            c: 0.025,
        },
        ..base_synthetic()
    }
}

#[test]
fn criterion_03_three_fold_delay_reduction() {
    let reps = 20;
    let (ucb_selected, _, _) = mean_summary_stats(&delay_config(), reps);
    let (rnd_selected, rnd_active, _) = mean_summary_stats(
        &ExperimentConfig {
            policy: PolicyKind::Random,
            ..delay_config()
        },
        reps,
    );
    assert!(
        ucb_selected <= 0.45 * rnd_selected,
        "FAIL criterion 3: scheduler mean deadline {ucb_selected:.1} ms not below 0.45 x random \
         {rnd_selected:.1} ms"
    );
    let drift = (rnd_selected / rnd_active - 1.0).abs();
    assert!(
        drift <= 0.05,
        "FAIL criterion 3: random mean deadline {rnd_selected:.1} differs from active-set mean \
         {rnd_active:.1} by more than 5%"
    );
    println!(
        "PASS criterion 3: scheduler {ucb_selected:.1} ms <= 0.45 x random {rnd_selected:.1} ms \
         (ratio {:.3}); random within {:.2}% of the active-set mean",
        ucb_selected / rnd_selected,
        drift * 100.0
    );
}

#[test]
fn criterion_04_throughput_gain_and_psi_monotonicity() {
    let reps = 20;
    let rate_mode = |policy: PolicyKind, psi: f64| ExperimentConfig {
        reward_mode: RewardMode::Physical,
        weights: UtilityWeights {
            alpha: 0.0,
            beta: 1.0,
            gamma: 0.0,
        },
        policy,
        psi,
        ..base_synthetic()
    };
    let rate_of =
        |policy: PolicyKind, psi: f64| mean_summary_stats(&rate_mode(policy, psi), reps).2;
    let low_psi = rate_of(PolicyKind::ProbSleepingUcb, 0.5);
    let mid_psi = rate_of(PolicyKind::ProbSleepingUcb, 2.0);
    let high_psi = rate_of(PolicyKind::ProbSleepingUcb, 4.0);
    let random = rate_of(PolicyKind::Random, 1.0);
    assert!(
        low_psi >= 1.5 * random,
        "FAIL criterion 4: sum-rate {low_psi:.3e} not at least 1.5 x random {random:.3e}"
    );
    assert!(
        mid_psi <= 1.05 * low_psi && high_psi <= 1.05 * mid_psi,
        "FAIL criterion 4: sum-rate not non-increasing in psi within 5%: \
         {low_psi:.3e}, {mid_psi:.3e}, {high_psi:.3e}"
    );
    println!(
        "PASS criterion 4: sum-rate gain {:.2}x random; psi sweep {low_psi:.3e} >= {mid_psi:.3e} \
         >= {high_psi:.3e} within the 5% band",
        low_psi / random
    );
}

#[test]
fn criterion_05_multi_grant_regret() {
    let reps = 10;
    let multi = |policy: PolicyKind, predictor: PredictorConfig| ExperimentConfig {
        population: 500,
        k_active: 50,
        grants_per_slot: 20,
        policy,
        predictor,
        ..base_synthetic()
    };
    let p80 = mean_final_regret(&multi(PolicyKind::ProbSleepingUcb, imperfect(0.8)), reps);
    let p90 = mean_final_regret(&multi(PolicyKind::ProbSleepingUcb, imperfect(0.9)), reps);
    let perfect = mean_final_regret(
        &multi(PolicyKind::ProbSleepingUcb, PredictorConfig::PERFECT),
        reps,
    );
    let random = mean_final_regret(&multi(PolicyKind::Random, imperfect(0.8)), reps);
    assert!(
        p80 <= 0.5 * random && p90 <= 0.5 * random,
        "FAIL criterion 5: multi-grant regret ratios {:.3}/{:.3} not below 0.5 x random",
        p80 / random,
        p90 / random
    );
    assert!(
        perfect < p80 && perfect < p90,
        "FAIL criterion 5: perfect prediction ({perfect:.0}) not strictly best ({p80:.0}, {p90:.0})"
    );
    println!(
        "PASS criterion 5: regret ratios vs random {:.3} and {:.3} (<= 0.5); perfect {perfect:.0} \
         strictly best",
        p80 / random,
        p90 / random
    );
}

/// Plain UCB1 over always-available arms, written against the same tie-break
/// conventions (draw only when more than one candidate): the independent
/// reference for the degenerate-equivalence check.
struct ReferenceUcb1 {
    z: Vec<f64>,
    n: Vec<u64>,
    t: u64,
    psi: f64,
}

impl ReferenceUcb1 {
    fn new(arms: usize, psi: f64) -> Self {
        Self {
            z: vec![0.0; arms],
            n: vec![0; arms],
            t: 0,
            psi,
        }
    }

    fn pick<R: Rng>(k: usize, rng: &mut R) -> usize {
        if k == 1 {
            0
        } else {
            rng.random_range(0..k)
        }
    }

    fn select<R: Rng>(&self, rng: &mut R) -> usize {
        let unplayed: Vec<usize> = (0..self.n.len()).filter(|&i| self.n[i] == 0).collect();
        if !unplayed.is_empty() {
            return unplayed[Self::pick(unplayed.len(), rng)];
        }
        let index = |i: usize| {
            let n = self.n[i] as f64;
            self.z[i] / n + (self.psi * (self.t as f64).ln() / n).sqrt()
        };
        let best = (0..self.n.len())
            .map(index)
            .fold(f64::NEG_INFINITY, f64::max);
        let ties: Vec<usize> = (0..self.n.len()).filter(|&i| index(i) == best).collect();
        ties[Self::pick(ties.len(), rng)]
    }

    fn update(&mut self, arm: usize, reward: f64) {
        self.z[arm] += reward;
        self.n[arm] += 1;
        self.t += 1;
    }
}

#[test]
fn criterion_06_ucb1_equivalence() {
    let arms = 10;
    let psi = 1.0;
    let means: Vec<f64> = (0..arms).map(|i| 0.95 - 0.09 * i as f64).collect();
    let prediction = Prediction::from_sorted((0..arms).map(|i| (MtdId(i as u32), 1.0)).collect());

    let mut policy = PolicyState::new(arms, psi).unwrap();
    let mut reference = ReferenceUcb1::new(arms, psi);
    let mut ties_policy = ChaCha8Rng::seed_from_u64(2024);
    let mut ties_reference = ChaCha8Rng::seed_from_u64(2024);
    let mut rewards = ChaCha8Rng::seed_from_u64(7);

    for slot in 0..10_000u32 {
        let chosen = policy
            .select_single(&prediction, &mut ties_policy)
            .expect("non-empty prediction");
        let expected = reference.select(&mut ties_reference);
        assert_eq!(
            chosen.0 as usize, expected,
            "FAIL criterion 6: selections diverged at slot {slot}"
        );
        let reward = if rewards.random::<f64>() < means[expected] {
            1.0
        } else {
            0.0
        };
        policy.update(chosen, reward, true).unwrap();
        policy.advance_slot();
        reference.update(expected, reward);
    }
    assert_eq!(
        ties_policy, ties_reference,
        "FAIL criterion 6: tie-break stream consumption diverged"
    );
    println!("PASS criterion 6: 10000 selections identical to the reference UCB1");
}

#[test]
fn criterion_07_regret_bound_dominance() {
    let reps = 50;
    let cfg = ExperimentConfig {
        population: 5,
        k_active: 5,
        synthetic: SyntheticConfig {
            mean_lo: 0.05,
            mean_hi: 0.95,
        },
        ..base_synthetic()
    };
    let curve = mean_curve(&cfg, reps);
    let exp = Experiment::prepare(cfg).unwrap();
    let probs = vec![1.0; 5];
    let mut report = Vec::new();
    for horizon in [1_000u64, 10_000, 100_000] {
        let bound =
            theoretical_regret_bound(exp.true_means(), &probs, 1.0, horizon, 0.0, 0.0).unwrap();
        let empirical = curve[horizon as usize - 1];
        assert!(
            empirical <= bound,
            "FAIL criterion 7: empirical regret {empirical:.1} exceeds bound {bound:.1} at T={horizon}"
        );
        report.push(format!(
            "T=1e{}: {empirical:.1} <= {bound:.1}",
            horizon.ilog10()
        ));
    }
    println!("PASS criterion 7: {}", report.join(", "));
}

#[test]
fn criterion_08_confidence_coverage() {
    let replications = 1_000;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let rates = confidence_coverage_test(1.0, 1_000, replications, &mut rng);
    let mut worst_margin = f64::INFINITY;
    for (t, rate) in rates {
        let bound = (2.0 / (t as f64).powi(2)).min(1.0);
        let stderr = (bound * (1.0 - bound) / f64::from(replications)).sqrt();
        let limit = bound + 3.0 * stderr;
        assert!(
            rate <= limit,
            "FAIL criterion 8: violation rate {rate:.4} at t={t} exceeds {limit:.4}"
        );
        worst_margin = worst_margin.min(limit - rate);
    }
    println!(
        "PASS criterion 8: coverage violations within 2/t^2 + 3 stderr for all t in [2, 1000] \
         (worst margin {worst_margin:.2e})"
    );
}

#[test]
fn criterion_09_unit_level_exactness() {
    let start = std::time::Instant::now();

    // Path loss to 1e-3 dB.
    assert_relative_eq!(
        grantsim::channel::path_loss_db(1.0).unwrap(),
        128.1,
        epsilon = 1e-3
    );
    assert_relative_eq!(
        grantsim::channel::path_loss_db(0.5).unwrap(),
        116.781,
        epsilon = 1e-3
    );
    assert_relative_eq!(
        grantsim::channel::path_loss_db(10.0).unwrap(),
        165.7,
        epsilon = 1e-3
    );

    // SNR and rate reference points.
    let link = grantsim::channel::LinkParams {
        distance_km: 0.5,
        tx_power_dbm: 10.0,
        shadowing_sigma_db: 10.0,
        bandwidth_hz: 360_000.0,
        noise_psd_dbm_hz: -174.0,
    };
    assert_relative_eq!(grantsim::channel::snr(&link, 1e-13), 0.698, epsilon = 5e-3);
    assert_relative_eq!(
        grantsim::channel::rate(&link, 3.0),
        720_000.0,
        epsilon = 1e-6
    );

    // Gompertz scores to 1e-5.
    let g = GompertzParams {
        a: 1.0,
        b: 7.0,
        c: 0.07,
    };
    assert_relative_eq!(
        grantsim::qos::gompertz_score(100.0, &g),
        0.006363,
        epsilon = 1e-5
    );
    let g0 = GompertzParams {
        a: 1.0,
        b: 8.0,
        c: 0.03,
    };
    assert_relative_eq!(
        grantsim::qos::gompertz_score(0.0, &g0),
        0.999665,
        epsilon = 1e-5
    );

    // Utility and the weighted-index reference to 5e-4.
    let w = UtilityWeights {
        alpha: 0.2,
        beta: 0.3,
        gamma: 0.5,
    };
    assert_relative_eq!(
        grantsim::qos::utility(0.5, 0.4, 0.8, &w),
        0.62,
        epsilon = 1e-12
    );
    let stats = ArmStats {
        z: 3.0,
        n: 4,
        n_active: 4,
    };
    assert_relative_eq!(ucb_index(&stats, 100, 1.0), 1.8230, epsilon = 5e-4);

    // Closed-form bound reference.
    let bound = theoretical_regret_bound(&[0.9, 0.5], &[1.0, 1.0], 1.0, 10_000, 0.0, 0.0).unwrap();
    assert_relative_eq!(bound, 460.517, epsilon = 0.5);

    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs() < 10,
        "FAIL criterion 9: exactness checks took {elapsed:?}"
    );
    println!("PASS criterion 9: reference values exact at stated tolerances ({elapsed:?})");
}

#[test]
fn criterion_10_byte_identical_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("exp.cfg");
    std::fs::write(
        &config_path,
        "sim.horizon = 2000\nsim.replications = 3\nsim.seed = 11\npredictor.prob_lo = 0.8\n",
    )
    .unwrap();

    let run = |out: &std::path::Path| {
        let manifest = RunManifest {
            config_path: config_path.clone(),
            out_dir: out.to_path_buf(),
            seed: None,
            replications: None,
            recipe: None,
        };
        run_command(&manifest).unwrap();
        let mut files: Vec<_> = std::fs::read_dir(out)
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        files.sort();
        files
            .into_iter()
            .map(|p| {
                (
                    p.file_name().unwrap().to_owned(),
                    std::fs::read(&p).unwrap(),
                )
            })
            .collect::<Vec<_>>()
    };
    let first = run(&dir.path().join("a"));
    let second = run(&dir.path().join("b"));
    assert_eq!(first.len(), second.len());
    assert!(
        first.len() >= 5,
        "expected trace, regret, scatter, and summary artifacts"
    );
    for ((name_a, bytes_a), (name_b, bytes_b)) in first.iter().zip(&second) {
        assert_eq!(name_a, name_b);
        assert_eq!(
            bytes_a, bytes_b,
            "FAIL criterion 10: {name_a:?} differs between identical runs"
        );
    }
    println!(
        "PASS criterion 10: {} artifacts byte-identical across reruns",
        first.len()
    );
}
