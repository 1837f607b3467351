//! `grantsim`: a desk-scale simulator for fast uplink grant scheduling of
//! machine-type devices with sleeping multi-armed-bandit policies.
//!
//! A base station must grant uplink resource blocks to devices whose QoS
//! parameters it cannot observe in advance, knowing only a probabilistic
//! prediction of which devices currently hold a packet. Each device is an arm
//! that is available only while its packet is pending; playing it yields a
//! reward in `[0, 1]` that combines the packet's data value, the normalized
//! achieved rate, and a Gompertz score of its remaining delay budget, gated
//! by rate-threshold and deadline indicators.
//!
//! The scheduler of interest multiplies each arm's upper-confidence index by
//! its predicted activity probability and plays the top arm (or the top `l`
//! arms when several resource blocks are free per slot). Baselines: the same
//! learner ignoring the probabilities, a uniform-random scheduler, and the
//! clairvoyant per-slot oracle against which regret is accounted.
//!
//! Module map:
//!
//! - [`channel`]: path loss, shadowing, Rayleigh fading, SNR, rate.
//! - [`qos`]: Gompertz delay score, compound utility, gated reward.
//! - [`traffic`]: ground-truth activity, packets, the emulated predictor.
//! - [`policies`]: UCB index, single/multiple selection, baselines.
//! - [`engine`]: the slot loop, true-mean tables, replication runner.
//! - [`bound`]: closed-form regret bound, confidence-coverage experiment.
//! - [`trace`]: per-slot records, regret/delay/throughput statistics.
//! - [`config`]: typed experiment config and its key-value document format.
//! - [`output`]: CSV artifacts, figure recipes, summary tables.
//!
//! Everything is deterministic given `(config, seed)`: replications use
//! disjoint ChaCha streams and may run in parallel without losing
//! reproducibility.

pub mod bound;
pub mod channel;
pub mod config;
pub mod engine;
pub mod output;
pub mod policies;
pub mod qos;
pub mod rng;
pub mod trace;
pub mod traffic;

pub use bound::{confidence_coverage_test, theoretical_regret_bound};
pub use config::{parse_config, serialize_config, ConfigError, ExperimentConfig, RewardMode};
pub use engine::{run_experiment, Experiment, SyntheticArms};
pub use policies::{PolicyKind, PolicyState};
pub use qos::{GompertzParams, UtilityWeights};
pub use trace::ExperimentTrace;
pub use traffic::{MtdId, MtdProfile, Prediction, PredictorConfig};
