//! Experiment configuration: the typed config, its validation, and the flat
//! key-value document format used by the CLI.
//!
//! A config document is a sequence of `section.key = value` lines; `#` starts
//! a comment and blank lines are ignored. Every key has a default, so the
//! empty document is a valid experiment. Unknown or duplicate keys, malformed
//! values, and invariant violations are rejected with the offending key
//! named.

use std::fmt::Write as _;

use thiserror::Error;

use crate::policies::PolicyKind;
use crate::qos::{GompertzParams, UtilityWeights};
use crate::traffic::PredictorConfig;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("unknown key '{key}'")]
    UnknownKey { key: String },
    #[error("duplicate key '{key}'")]
    DuplicateKey { key: String },
    #[error("line {line}: expected 'key = value'")]
    Syntax { line: usize },
    #[error("key '{key}': {message}")]
    Value { key: String, message: String },
    #[error("invalid config: {field}: {message}")]
    Invariant {
        field: &'static str,
        message: String,
    },
}

/// Whether rewards come from configured arm means or from the physical
/// channel/QoS pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardMode {
    /// Bernoulli draws from per-arm true means; clean regret semantics.
    Synthetic,
    /// Full channel + QoS reward; true means are Monte-Carlo estimated.
    Physical,
}

impl RewardMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            RewardMode::Synthetic => "synthetic",
            RewardMode::Physical => "physical",
        }
    }
}

/// Cell geometry and radio parameters shared by all devices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    pub bandwidth_hz: f64,
    pub noise_psd_dbm_hz: f64,
    pub shadowing_sigma_db: f64,
    pub tx_power_dbm: f64,
    pub cell_radius_km: f64,
    pub min_distance_km: f64,
    /// Rate threshold for a successful transmission, in bit/s.
    pub rate_threshold_bps: f64,
}

/// Packet-level traffic parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficConfig {
    /// Per-device characteristic delay budgets are spread over this range.
    pub deadline_min_ms: f64,
    pub deadline_max_ms: f64,
    /// Width of the per-device packet-deadline interval around its
    /// characteristic value (0 gives each device a fixed budget).
    pub deadline_jitter_ms: f64,
    /// Standard deviation of per-packet data values around the device mean.
    pub value_std: f64,
}

/// Range of the evenly spaced true means used in synthetic mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    pub mean_lo: f64,
    pub mean_hi: f64,
}

/// Complete description of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Number of registered devices (arms), M.
    pub population: usize,
    /// Devices holding a packet each slot, K.
    pub k_active: usize,
    /// Resource blocks granted per slot, l.
    pub grants_per_slot: usize,
    /// Horizon in slots, T.
    pub horizon: u64,
    /// Slot duration in ms.
    pub slot_ms: f64,
    pub policy: PolicyKind,
    /// Exploration strength of the confidence radius.
    pub psi: f64,
    pub weights: UtilityWeights,
    pub gompertz: GompertzParams,
    pub predictor: PredictorConfig,
    pub channel: ChannelConfig,
    pub traffic: TrafficConfig,
    pub synthetic: SyntheticConfig,
    pub reward_mode: RewardMode,
    pub seed: u64,
    pub replications: u32,
    /// Monte-Carlo draws per device when estimating physical-mode means.
    pub mean_samples: u32,
    /// Linear-regret coefficients fed to the bound evaluator.
    pub bound_f_e1: f64,
    pub bound_f_e2: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            population: 100,
            k_active: 10,
            grants_per_slot: 1,
            horizon: 100_000,
            slot_ms: 1.0,
            policy: PolicyKind::ProbSleepingUcb,
            psi: 1.0,
            weights: UtilityWeights {
                alpha: 0.2,
                beta: 0.3,
                gamma: 0.5,
            },
            gompertz: GompertzParams {
                a: 1.0,
                b: 8.0,
                c: 0.03,
            },
            predictor: PredictorConfig {
                prob_lo: 1.0,
                prob_hi: 1.0,
                miss_rate: 0.0,
                false_positive_rate: 0.05,
            },
            channel: ChannelConfig {
                bandwidth_hz: 360_000.0,
                noise_psd_dbm_hz: -174.0,
                shadowing_sigma_db: 10.0,
                tx_power_dbm: 10.0,
                cell_radius_km: 0.5,
                min_distance_km: 0.01,
                rate_threshold_bps: 0.0,
            },
            traffic: TrafficConfig {
                deadline_min_ms: 1.0,
                deadline_max_ms: 300.0,
                deadline_jitter_ms: 0.0,
                value_std: 0.1,
            },
            synthetic: SyntheticConfig {
                mean_lo: 0.05,
                mean_hi: 0.95,
            },
            reward_mode: RewardMode::Synthetic,
            seed: 1,
            replications: 50,
            mean_samples: 10_000,
            bound_f_e1: 0.0,
            bound_f_e2: 0.0,
        }
    }
}

impl ExperimentConfig {
    /// Check every structural invariant. A zero horizon is tolerated here
    /// (it yields an empty trace); the document parser additionally requires
    /// `sim.horizon >= 1`.
    pub fn validate(&self) -> Result<(), ConfigError> {
        fn invariant(field: &'static str, ok: bool, message: String) -> Result<(), ConfigError> {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::Invariant { field, message })
            }
        }

        invariant(
            "sim.population",
            self.population >= 1,
            "must be at least 1".into(),
        )?;
        invariant(
            "sim.k_active",
            self.k_active <= self.population,
            format!(
                "k_active {} exceeds population {}",
                self.k_active, self.population
            ),
        )?;
        invariant(
            "sim.grants_per_slot",
            self.grants_per_slot >= 1,
            "must be at least 1".into(),
        )?;
        invariant("sim.slot_ms", self.slot_ms > 0.0, "must be positive".into())?;
        invariant(
            "sim.replications",
            self.replications >= 1,
            "must be at least 1".into(),
        )?;
        invariant("policy.psi", self.psi > 0.0, "must be positive".into())?;
        self.weights
            .validate()
            .map_err(|e| ConfigError::Invariant {
                field: "weights",
                message: e.to_string(),
            })?;
        self.gompertz
            .validate()
            .map_err(|e| ConfigError::Invariant {
                field: "gompertz",
                message: e.to_string(),
            })?;
        self.predictor
            .validate()
            .map_err(|e| ConfigError::Invariant {
                field: "predictor",
                message: e.to_string(),
            })?;
        invariant(
            "channel.bandwidth_hz",
            self.channel.bandwidth_hz > 0.0,
            "must be positive".into(),
        )?;
        invariant(
            "channel.shadowing_sigma_db",
            self.channel.shadowing_sigma_db >= 0.0,
            "must be non-negative".into(),
        )?;
        invariant(
            "channel.min_distance_km",
            self.channel.min_distance_km > 0.0,
            "must be positive".into(),
        )?;
        invariant(
            "channel.cell_radius_km",
            self.channel.cell_radius_km >= self.channel.min_distance_km,
            "must be at least channel.min_distance_km".into(),
        )?;
        invariant(
            "channel.rate_threshold_bps",
            self.channel.rate_threshold_bps >= 0.0,
            "must be non-negative".into(),
        )?;
        invariant(
            "traffic.deadline_min_ms",
            self.traffic.deadline_min_ms > 0.0,
            "must be positive".into(),
        )?;
        invariant(
            "traffic.deadline_max_ms",
            self.traffic.deadline_max_ms >= self.traffic.deadline_min_ms,
            "must be at least traffic.deadline_min_ms".into(),
        )?;
        invariant(
            "traffic.deadline_jitter_ms",
            self.traffic.deadline_jitter_ms >= 0.0,
            "must be non-negative".into(),
        )?;
        invariant(
            "traffic.value_std",
            self.traffic.value_std >= 0.0,
            "must be non-negative".into(),
        )?;
        invariant(
            "synthetic.mean_lo",
            self.synthetic.mean_lo > 0.0 && self.synthetic.mean_lo < 1.0,
            "must lie in (0, 1)".into(),
        )?;
        invariant(
            "synthetic.mean_hi",
            self.synthetic.mean_hi > self.synthetic.mean_lo && self.synthetic.mean_hi < 1.0,
            "must lie in (mean_lo, 1)".into(),
        )?;
        invariant(
            "engine.mean_samples",
            self.mean_samples >= 1,
            "must be at least 1".into(),
        )?;
        invariant(
            "bound.f_e1",
            self.bound_f_e1 >= 0.0,
            "must be non-negative".into(),
        )?;
        invariant(
            "bound.f_e2",
            self.bound_f_e2 >= 0.0,
            "must be non-negative".into(),
        )?;
        Ok(())
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    raw.parse().map_err(|e: T::Err| ConfigError::Value {
        key: key.to_string(),
        message: format!("cannot parse '{raw}': {e}"),
    })
}

fn parse_reward_mode(key: &str, raw: &str) -> Result<RewardMode, ConfigError> {
    match raw {
        "synthetic" => Ok(RewardMode::Synthetic),
        "physical" => Ok(RewardMode::Physical),
        other => Err(ConfigError::Value {
            key: key.to_string(),
            message: format!("expected 'synthetic' or 'physical', got '{other}'"),
        }),
    }
}

/// Parse a config document, filling unset keys with defaults and validating
/// the result.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = ExperimentConfig::default();
    let mut seen: Vec<String> = Vec::new();

    for (idx, line) in text.lines().enumerate() {
        let line = match line.find('#') {
            Some(pos) => &line[..pos],
            None => line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, raw) = line
            .split_once('=')
            .ok_or(ConfigError::Syntax { line: idx + 1 })?;
        let key = key.trim();
        let raw = raw.trim();
        if key.is_empty() || raw.is_empty() {
            return Err(ConfigError::Syntax { line: idx + 1 });
        }
        if seen.iter().any(|k| k == key) {
            return Err(ConfigError::DuplicateKey {
                key: key.to_string(),
            });
        }
        seen.push(key.to_string());

        match key {
            "sim.population" => cfg.population = parse_value(key, raw)?,
            "sim.k_active" => cfg.k_active = parse_value(key, raw)?,
            "sim.grants_per_slot" => cfg.grants_per_slot = parse_value(key, raw)?,
            "sim.horizon" => {
                cfg.horizon = parse_value(key, raw)?;
                if cfg.horizon < 1 {
                    return Err(ConfigError::Value {
                        key: key.to_string(),
                        message: "must be at least 1".into(),
                    });
                }
            }
            "sim.slot_ms" => cfg.slot_ms = parse_value(key, raw)?,
            "sim.reward_mode" => cfg.reward_mode = parse_reward_mode(key, raw)?,
            "sim.seed" => cfg.seed = parse_value(key, raw)?,
            "sim.replications" => cfg.replications = parse_value(key, raw)?,
            "policy.kind" => {
                cfg.policy = raw.parse().map_err(|e| ConfigError::Value {
                    key: key.to_string(),
                    message: e,
                })?
            }
            "policy.psi" => cfg.psi = parse_value(key, raw)?,
            "weights.alpha" => cfg.weights.alpha = parse_value(key, raw)?,
            "weights.beta" => cfg.weights.beta = parse_value(key, raw)?,
            "weights.gamma" => cfg.weights.gamma = parse_value(key, raw)?,
            "gompertz.a" => cfg.gompertz.a = parse_value(key, raw)?,
            "gompertz.b" => cfg.gompertz.b = parse_value(key, raw)?,
            "gompertz.c" => cfg.gompertz.c = parse_value(key, raw)?,
            "predictor.prob_lo" => cfg.predictor.prob_lo = parse_value(key, raw)?,
            "predictor.prob_hi" => cfg.predictor.prob_hi = parse_value(key, raw)?,
            "predictor.miss_rate" => cfg.predictor.miss_rate = parse_value(key, raw)?,
            "predictor.false_positive_rate" => {
                cfg.predictor.false_positive_rate = parse_value(key, raw)?
            }
            "channel.bandwidth_hz" => cfg.channel.bandwidth_hz = parse_value(key, raw)?,
            "channel.noise_psd_dbm_hz" => cfg.channel.noise_psd_dbm_hz = parse_value(key, raw)?,
            "channel.shadowing_sigma_db" => cfg.channel.shadowing_sigma_db = parse_value(key, raw)?,
            "channel.tx_power_dbm" => cfg.channel.tx_power_dbm = parse_value(key, raw)?,
            "channel.cell_radius_km" => cfg.channel.cell_radius_km = parse_value(key, raw)?,
            "channel.min_distance_km" => cfg.channel.min_distance_km = parse_value(key, raw)?,
            "channel.rate_threshold_bps" => cfg.channel.rate_threshold_bps = parse_value(key, raw)?,
            "traffic.deadline_min_ms" => cfg.traffic.deadline_min_ms = parse_value(key, raw)?,
            "traffic.deadline_max_ms" => cfg.traffic.deadline_max_ms = parse_value(key, raw)?,
            "traffic.deadline_jitter_ms" => cfg.traffic.deadline_jitter_ms = parse_value(key, raw)?,
            "traffic.value_std" => cfg.traffic.value_std = parse_value(key, raw)?,
            "synthetic.mean_lo" => cfg.synthetic.mean_lo = parse_value(key, raw)?,
            "synthetic.mean_hi" => cfg.synthetic.mean_hi = parse_value(key, raw)?,
            "engine.mean_samples" => cfg.mean_samples = parse_value(key, raw)?,
            "bound.f_e1" => cfg.bound_f_e1 = parse_value(key, raw)?,
            "bound.f_e2" => cfg.bound_f_e2 = parse_value(key, raw)?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    key: key.to_string(),
                })
            }
        }
    }

    cfg.validate()?;
    Ok(cfg)
}

/// Render a config as a document that parses back to the same value.
pub fn serialize_config(cfg: &ExperimentConfig) -> String {
    let mut out = String::new();
    let mut kv = |key: &str, value: String| {
        let _ = writeln!(out, "{key} = {value}");
    };
    kv("sim.population", cfg.population.to_string());
    kv("sim.k_active", cfg.k_active.to_string());
    kv("sim.grants_per_slot", cfg.grants_per_slot.to_string());
    kv("sim.horizon", cfg.horizon.to_string());
    kv("sim.slot_ms", cfg.slot_ms.to_string());
    kv("sim.reward_mode", cfg.reward_mode.as_str().to_string());
    kv("sim.seed", cfg.seed.to_string());
    kv("sim.replications", cfg.replications.to_string());
    kv("policy.kind", cfg.policy.to_string());
    kv("policy.psi", cfg.psi.to_string());
    kv("weights.alpha", cfg.weights.alpha.to_string());
    kv("weights.beta", cfg.weights.beta.to_string());
    kv("weights.gamma", cfg.weights.gamma.to_string());
    kv("gompertz.a", cfg.gompertz.a.to_string());
    kv("gompertz.b", cfg.gompertz.b.to_string());
    kv("gompertz.c", cfg.gompertz.c.to_string());
    kv("predictor.prob_lo", cfg.predictor.prob_lo.to_string());
    kv("predictor.prob_hi", cfg.predictor.prob_hi.to_string());
    kv("predictor.miss_rate", cfg.predictor.miss_rate.to_string());
    kv(
        "predictor.false_positive_rate",
        cfg.predictor.false_positive_rate.to_string(),
    );
    kv("channel.bandwidth_hz", cfg.channel.bandwidth_hz.to_string());
    kv(
        "channel.noise_psd_dbm_hz",
        cfg.channel.noise_psd_dbm_hz.to_string(),
    );
    kv(
        "channel.shadowing_sigma_db",
        cfg.channel.shadowing_sigma_db.to_string(),
    );
    kv("channel.tx_power_dbm", cfg.channel.tx_power_dbm.to_string());
    kv(
        "channel.cell_radius_km",
        cfg.channel.cell_radius_km.to_string(),
    );
    kv(
        "channel.min_distance_km",
        cfg.channel.min_distance_km.to_string(),
    );
    kv(
        "channel.rate_threshold_bps",
        cfg.channel.rate_threshold_bps.to_string(),
    );
    kv(
        "traffic.deadline_min_ms",
        cfg.traffic.deadline_min_ms.to_string(),
    );
    kv(
        "traffic.deadline_max_ms",
        cfg.traffic.deadline_max_ms.to_string(),
    );
    kv(
        "traffic.deadline_jitter_ms",
        cfg.traffic.deadline_jitter_ms.to_string(),
    );
    kv("traffic.value_std", cfg.traffic.value_std.to_string());
    kv("synthetic.mean_lo", cfg.synthetic.mean_lo.to_string());
    kv("synthetic.mean_hi", cfg.synthetic.mean_hi.to_string());
    kv("engine.mean_samples", cfg.mean_samples.to_string());
    kv("bound.f_e1", cfg.bound_f_e1.to_string());
    kv("bound.f_e2", cfg.bound_f_e2.to_string());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_document_yields_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.population, 100);
        assert_eq!(cfg.k_active, 10);
        assert_eq!(cfg.channel.bandwidth_hz, 360_000.0);
        assert_eq!(cfg.channel.noise_psd_dbm_hz, -174.0);
        assert_eq!(cfg.channel.shadowing_sigma_db, 10.0);
        assert_eq!(cfg.channel.cell_radius_km, 0.5);
        assert_eq!(
            cfg.weights,
            UtilityWeights {
                alpha: 0.2,
                beta: 0.3,
                gamma: 0.5
            }
        );
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let cfg = parse_config("# a comment\n\nsim.seed = 7 # trailing\n").unwrap();
        assert_eq!(cfg.seed, 7);
    }

    #[test]
    fn weight_sum_violation_is_rejected() {
        let err = parse_config("weights.alpha = 0.6\nweights.beta = 0.6\nweights.gamma = 0.2\n")
            .unwrap_err();
        assert!(
            matches!(
                err,
                ConfigError::Invariant {
                    field: "weights",
                    ..
                }
            ),
            "{err}"
        );
    }

    #[test]
    fn oversized_active_count_is_rejected() {
        let err = parse_config("sim.k_active = 200\n").unwrap_err();
        assert!(
            matches!(
                err,
                ConfigError::Invariant {
                    field: "sim.k_active",
                    ..
                }
            ),
            "{err}"
        );
    }

    #[test]
    fn unknown_duplicate_and_malformed_keys_are_named() {
        assert_eq!(
            parse_config("sim.populatoin = 5\n").unwrap_err(),
            ConfigError::UnknownKey {
                key: "sim.populatoin".into()
            }
        );
        assert_eq!(
            parse_config("sim.seed = 1\nsim.seed = 2\n").unwrap_err(),
            ConfigError::DuplicateKey {
                key: "sim.seed".into()
            }
        );
        assert!(matches!(
            parse_config("sim.seed = abc\n").unwrap_err(),
            ConfigError::Value { .. }
        ));
        assert_eq!(
            parse_config("just words\n").unwrap_err(),
            ConfigError::Syntax { line: 1 }
        );
        assert!(matches!(
            parse_config("sim.horizon = 0\n").unwrap_err(),
            ConfigError::Value { .. }
        ));
    }

    #[test]
    fn default_config_round_trips() {
        let cfg = ExperimentConfig::default();
        assert_eq!(parse_config(&serialize_config(&cfg)).unwrap(), cfg);
    }

    proptest! {
        #[test]
        fn random_valid_configs_round_trip(
            population in 1usize..500,
            k_frac in 0.0..=1.0f64,
            grants in 1usize..25,
            horizon in 1u64..1_000_000,
            slot_ms in 0.1..10.0f64,
            psi in 0.01..20.0f64,
            alpha in 0.0..=1.0f64,
            beta_frac in 0.0..=1.0f64,
            seed in any::<u64>(),
            prob_lo in 0.1..=1.0f64,
            fp in 0.0..0.99f64,
        ) {
            let beta = (1.0 - alpha) * beta_frac;
            let cfg = ExperimentConfig {
                population,
                k_active: ((population as f64) * k_frac) as usize,
                grants_per_slot: grants,
                horizon,
                slot_ms,
                psi,
                weights: UtilityWeights { alpha, beta, gamma: 1.0 - alpha - beta },
                seed,
                predictor: PredictorConfig {
                    prob_lo,
                    false_positive_rate: fp,
                    ..ExperimentConfig::default().predictor
                },
                ..ExperimentConfig::default()
            };
            prop_assume!(cfg.validate().is_ok());
            let text = serialize_config(&cfg);
            prop_assert_eq!(parse_config(&text).unwrap(), cfg);
        }
    }
}
