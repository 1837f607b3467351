//! The slot loop: bind traffic, prediction, policy, channel, and QoS
//! together, and account regret against the clairvoyant oracle.
//!
//! An [`Experiment`] is prepared once per configuration: it builds the device
//! population, fixes the network-wide maximum rate, and obtains the table of
//! true per-arm means (configured directly in synthetic mode, Monte-Carlo
//! estimated in physical mode). Replications then run independently with
//! disjoint RNG streams, so the trace of a given `(config, seed, replication)`
//! triple is bit-identical across runs and machines.

use rand::Rng;

use crate::channel::{self, LinkParams};
use crate::config::{ConfigError, ExperimentConfig, RewardMode};
use crate::policies::{oracle_policy, random_policy, PolicyKind, PolicyState};
use crate::qos::{reward, RewardInputs};
use crate::rng::{
    global_rng, replication_rng, ReplicationStream, STREAM_MEAN_ESTIMATION, STREAM_POPULATION,
};
use crate::trace::{
    cumulative_regret, delay_stats, throughput_stats, ExperimentTrace, PlayRecord, SlotRecord,
    TraceSummary,
};
use crate::traffic::{
    draw_packet, predict, MtdId, MtdProfile, Packet, PredictionErrorAccumulator, TrafficGenerator,
};

/// 99th percentile of the unit-mean exponential small-scale gain, `−ln(0.01)`.
/// Used to pin the network-wide maximum rate at experiment start.
pub const SMALL_SCALE_P99: f64 = 4.605170185988091;

/// True per-arm means of a synthetic bandit instance.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticArms {
    means: Vec<f64>,
}

impl SyntheticArms {
    /// Means must lie in `(0, 1)` and be pairwise distinct.
    pub fn new(means: Vec<f64>) -> Result<Self, ConfigError> {
        if means.is_empty() {
            return Err(ConfigError::Invariant {
                field: "synthetic means",
                message: "at least one arm required".into(),
            });
        }
        if means.iter().any(|m| !(*m > 0.0 && *m < 1.0)) {
            return Err(ConfigError::Invariant {
                field: "synthetic means",
                message: "all means must lie in (0, 1)".into(),
            });
        }
        let mut sorted = means.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(ConfigError::Invariant {
                field: "synthetic means",
                message: "means must be pairwise distinct".into(),
            });
        }
        Ok(Self { means })
    }

    /// Evenly spaced means from `hi` (arm 0) down to `lo` (last arm).
    pub fn evenly_spaced(n: usize, lo: f64, hi: f64) -> Result<Self, ConfigError> {
        if n == 1 {
            return Self::new(vec![hi]);
        }
        let step = (hi - lo) / (n as f64 - 1.0);
        Self::new((0..n).map(|i| hi - step * i as f64).collect())
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn into_means(self) -> Vec<f64> {
        self.means
    }
}

/// Place the device population inside the cell: distances area-uniform over
/// the annulus between the minimum distance and the cell radius, value means
/// uniform in `[0, 1]`, characteristic delay budgets uniform over the
/// configured range. Drawn from a dedicated stream of the master seed, so the
/// population is shared by all replications.
pub fn build_population(cfg: &ExperimentConfig) -> Vec<MtdProfile> {
    let mut rng = global_rng(cfg.seed, STREAM_POPULATION);
    let r0_sq = cfg.channel.min_distance_km * cfg.channel.min_distance_km;
    let r1_sq = cfg.channel.cell_radius_km * cfg.channel.cell_radius_km;
    let t = &cfg.traffic;
    (0..cfg.population)
        .map(|i| {
            let u: f64 = rng.random();
            let distance_km = (r0_sq + u * (r1_sq - r0_sq)).sqrt();
            let value_mean: f64 = rng.random();
            let center = if t.deadline_max_ms > t.deadline_min_ms {
                rng.random_range(t.deadline_min_ms..=t.deadline_max_ms)
            } else {
                t.deadline_min_ms
            };
            let half = t.deadline_jitter_ms / 2.0;
            MtdProfile {
                id: MtdId(i as u32),
                distance_km,
                tx_power_dbm: cfg.channel.tx_power_dbm,
                value_mean,
                deadline_min_ms: (center - half).max(t.deadline_min_ms),
                deadline_max_ms: (center + half).min(t.deadline_max_ms),
            }
        })
        .collect()
}

fn link_for(profile: &MtdProfile, cfg: &ExperimentConfig) -> LinkParams {
    LinkParams {
        distance_km: profile.distance_km,
        tx_power_dbm: profile.tx_power_dbm,
        shadowing_sigma_db: cfg.channel.shadowing_sigma_db,
        bandwidth_hz: cfg.channel.bandwidth_hz,
        noise_psd_dbm_hz: cfg.channel.noise_psd_dbm_hz,
    }
}

/// Network-wide maximum rate, fixed for the whole experiment: the rate of the
/// closest registered device with zero shadowing and the small-scale gain at
/// its 99th percentile.
pub fn max_rate(population: &[MtdProfile], cfg: &ExperimentConfig) -> f64 {
    let closest = population
        .iter()
        .min_by(|a, b| a.distance_km.partial_cmp(&b.distance_km).unwrap())
        .expect("non-empty population");
    let link = LinkParams {
        shadowing_sigma_db: 0.0,
        ..link_for(closest, cfg)
    };
    let pl_db = channel::path_loss_db(link.distance_km).expect("positive distance");
    let gain = 10f64.powf(-pl_db / 10.0) * SMALL_SCALE_P99;
    channel::rate(&link, channel::snr(&link, gain))
}

/// One grant's realized outcome.
struct PlayOutcome {
    reward: f64,
    /// Transmission delivered the packet (physical mode: both reward
    /// indicators held; synthetic mode: the device was active).
    success: bool,
    rate_bps: f64,
}

/// Monte-Carlo estimate of each device's true expected reward under the
/// physical pipeline, conditioned on being active and scheduled immediately.
pub fn estimate_true_means<R: Rng + ?Sized>(
    cfg: &ExperimentConfig,
    population: &[MtdProfile],
    c_max: f64,
    samples: u32,
    rng: &mut R,
) -> Vec<f64> {
    population
        .iter()
        .map(|profile| {
            let link = link_for(profile, cfg);
            let mut sum = 0.0;
            for _ in 0..samples {
                let packet = draw_packet(profile, 0, cfg.traffic.value_std, rng);
                sum += physical_reward(&link, &packet, 0.0, c_max, cfg, rng).reward;
            }
            sum / f64::from(samples)
        })
        .collect()
}

fn physical_reward<R: Rng + ?Sized>(
    link: &LinkParams,
    packet: &Packet,
    elapsed_ms: f64,
    c_max: f64,
    cfg: &ExperimentConfig,
    rng: &mut R,
) -> PlayOutcome {
    let ch = channel::sample_channel(link, rng).expect("validated link");
    let snr = channel::snr(link, ch.composite_gain);
    let rate_bps = channel::rate(link, snr);
    let inputs = RewardInputs {
        value: packet.value,
        norm_rate: channel::normalized_rate(rate_bps, c_max),
        rate_bps,
        deadline_ms: packet.remaining_ms,
        elapsed_ms,
        rate_threshold_bps: cfg.channel.rate_threshold_bps,
    };
    let success = inputs.indicators_pass();
    PlayOutcome {
        reward: reward(&inputs, &cfg.weights, &cfg.gompertz),
        success,
        rate_bps: if success { rate_bps } else { 0.0 },
    }
}

/// A validated experiment with its population and true-mean table, ready to
/// run replications.
#[derive(Debug, Clone)]
pub struct Experiment {
    cfg: ExperimentConfig,
    population: Vec<MtdProfile>,
    true_means: Vec<f64>,
    c_max: f64,
}

impl Experiment {
    pub fn prepare(cfg: ExperimentConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let population = build_population(&cfg);
        let c_max = max_rate(&population, &cfg);
        let true_means = match cfg.reward_mode {
            RewardMode::Synthetic => SyntheticArms::evenly_spaced(
                cfg.population,
                cfg.synthetic.mean_lo,
                cfg.synthetic.mean_hi,
            )?
            .into_means(),
            RewardMode::Physical => {
                let mut rng = global_rng(cfg.seed, STREAM_MEAN_ESTIMATION);
                estimate_true_means(&cfg, &population, c_max, cfg.mean_samples, &mut rng)
            }
        };
        Ok(Self {
            cfg,
            population,
            true_means,
            c_max,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn population(&self) -> &[MtdProfile] {
        &self.population
    }

    pub fn true_means(&self) -> &[f64] {
        &self.true_means
    }

    pub fn c_max(&self) -> f64 {
        self.c_max
    }

    /// Run one replication. Deterministic in `(config, seed, replication)`.
    pub fn run_replication(&self, replication: u64) -> ExperimentTrace {
        let cfg = &self.cfg;
        let seed = cfg.seed;
        let mut traffic_rng = replication_rng(seed, replication, ReplicationStream::Traffic);
        let mut prediction_rng = replication_rng(seed, replication, ReplicationStream::Prediction);
        let mut policy_rng = replication_rng(seed, replication, ReplicationStream::Policy);
        let mut reward_rng = replication_rng(seed, replication, ReplicationStream::Reward);

        let mut generator = TrafficGenerator::new(
            cfg.population,
            cfg.k_active,
            cfg.slot_ms,
            cfg.traffic.value_std,
        )
        .expect("validated config");
        let mut learner = PolicyState::new(cfg.population, cfg.psi).expect("validated config");
        let is_learner = matches!(
            cfg.policy,
            PolicyKind::ProbSleepingUcb | PolicyKind::SleepingUcb
        );

        let mut records = Vec::with_capacity(cfg.horizon as usize);
        let mut errors = PredictionErrorAccumulator::default();

        for slot in 0..cfg.horizon {
            let truth = generator.step(&self.population, &mut traffic_rng);
            let prediction = predict(
                &truth,
                &self.population,
                &cfg.predictor,
                &mut prediction_rng,
            );
            errors.observe(&truth, &prediction);

            let selected = match cfg.policy {
                PolicyKind::ProbSleepingUcb => {
                    learner.select_multiple(&prediction, cfg.grants_per_slot, &mut policy_rng)
                }
                PolicyKind::SleepingUcb => learner.select_multiple(
                    &prediction.with_unit_probabilities(),
                    cfg.grants_per_slot,
                    &mut policy_rng,
                ),
                PolicyKind::Random => {
                    random_policy(&prediction, cfg.grants_per_slot, &mut policy_rng)
                }
                PolicyKind::Oracle => oracle_policy(&truth, &self.true_means, cfg.grants_per_slot),
            };

            let mut plays = Vec::with_capacity(selected.len());
            for &id in &selected {
                let packet = truth.packets.get(&id);
                // The assigned activity probability binds at grant time: a
                // truly active device responds with probability P, a false
                // positive never does. The clairvoyant oracle plays ground
                // truth directly and bypasses the coin.
                let responded = packet.is_some()
                    && (cfg.policy == PolicyKind::Oracle || {
                        let p = prediction.probability(id).unwrap_or(0.0);
                        p >= 1.0 || reward_rng.random::<f64>() < p
                    });
                let (outcome, deadline_ms) = if responded {
                    let packet = packet.expect("responded device holds a packet");
                    let outcome = match cfg.reward_mode {
                        RewardMode::Synthetic => {
                            let mu = self.true_means[id.0 as usize];
                            let draw: f64 = reward_rng.random();
                            PlayOutcome {
                                reward: if draw < mu { 1.0 } else { 0.0 },
                                success: true,
                                rate_bps: 0.0,
                            }
                        }
                        RewardMode::Physical => {
                            let elapsed_ms = (slot - packet.birth_slot) as f64 * cfg.slot_ms;
                            physical_reward(
                                &link_for(&self.population[id.0 as usize], cfg),
                                packet,
                                elapsed_ms,
                                self.c_max,
                                cfg,
                                &mut reward_rng,
                            )
                        }
                    };
                    (outcome, Some(packet.initial_deadline_ms))
                } else {
                    (
                        PlayOutcome {
                            reward: 0.0,
                            success: false,
                            rate_bps: 0.0,
                        },
                        None,
                    )
                };
                if is_learner {
                    learner
                        .update(id, outcome.reward, responded)
                        .expect("updating an arm selected this slot");
                }
                if responded && !outcome.success {
                    // Transmission happened but was not delivered: the packet
                    // stays pending in the next slot.
                    generator.carry_over(id);
                }
                plays.push(PlayRecord {
                    id,
                    reward: outcome.reward,
                    was_active: responded,
                    deadline_ms,
                    rate_bps: outcome.rate_bps,
                });
            }
            if is_learner {
                learner.advance_slot();
            }

            let oracle_ids = oracle_policy(&truth, &self.true_means, cfg.grants_per_slot);
            let oracle_reward = oracle_ids
                .iter()
                .map(|id| self.true_means[id.0 as usize])
                .sum();
            let active_deadline_mean_ms = if truth.packets.is_empty() {
                None
            } else {
                let sum: f64 = truth.packets.values().map(|p| p.initial_deadline_ms).sum();
                Some(sum / truth.packets.len() as f64)
            };
            records.push(SlotRecord {
                slot,
                plays,
                oracle_ids,
                oracle_reward,
                active_deadline_mean_ms,
            });
        }

        let regret =
            cumulative_regret(&records, &self.true_means).expect("means cover the population");
        let delays = delay_stats(&records);
        let throughput = throughput_stats(&records);
        let summary = TraceSummary {
            slots: cfg.horizon,
            final_regret: regret.last().copied().unwrap_or(0.0),
            mean_selected_deadline_ms: delays.mean_selected_ms,
            mean_active_deadline_ms: delays.mean_population_ms,
            mean_sum_rate_bps: throughput.mean_sum_rate_bps,
            prediction_errors: errors.finish(),
        };
        ExperimentTrace {
            records,
            cumulative_regret: regret,
            summary,
        }
    }
}

/// Prepare and run replication 0 of a configuration.
pub fn run_experiment(cfg: ExperimentConfig) -> Result<ExperimentTrace, ConfigError> {
    Ok(Experiment::prepare(cfg)?.run_replication(0))
}
