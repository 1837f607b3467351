//! Device activity, packet generation, and the emulated source-traffic
//! predictor.
//!
//! Ground truth first: every slot a fixed number of devices hold a pending
//! packet. Activity is exogenous — each slot fresh devices are drawn
//! uniformly to fill the active count — except that a device whose
//! transmission failed keeps its packet and stays active, with the delay
//! budget shortened by one slot, until it is delivered or the budget runs
//! out. The predictor then reports a probabilistic active set: each truly
//! active device is included with an activity probability drawn from a
//! configured interval (its under-weighting error is `1 − P`), and inactive
//! devices sneak in at the false-positive rate (their error is the assigned
//! `P` itself).

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::rng::sample_without_replacement;

/// Identifier of a machine-type device; doubles as the arm index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MtdId(pub u32);

impl std::fmt::Display for MtdId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TrafficError {
    #[error("k_active ({k_active}) exceeds population size ({population})")]
    ActiveCountExceedsPopulation { k_active: usize, population: usize },
    #[error("truth and prediction streams have different lengths ({truths} vs {predictions})")]
    MisalignedStreams { truths: usize, predictions: usize },
    #[error("invalid {name}: {value}")]
    InvalidParam { name: &'static str, value: f64 },
}

/// Static per-device parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MtdProfile {
    pub id: MtdId,
    pub distance_km: f64,
    pub tx_power_dbm: f64,
    /// Mean of the per-packet data value, in `[0, 1]`.
    pub value_mean: f64,
    /// Packet delay budgets are drawn uniformly from `[min, max]` ms.
    pub deadline_min_ms: f64,
    pub deadline_max_ms: f64,
}

/// One pending uplink packet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Packet {
    /// Slot in which the packet became ready.
    pub birth_slot: u64,
    /// Delay budget at birth, in ms.
    pub initial_deadline_ms: f64,
    /// Budget still left; shrinks by the slot duration every waited slot.
    pub remaining_ms: f64,
    /// Data value, in `[0, 1]`.
    pub value: f64,
}

/// Ground truth for one slot: which devices hold a packet, and the packets.
///
/// The active set is exactly the key set of `packets`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotState {
    pub slot: u64,
    pub packets: BTreeMap<MtdId, Packet>,
}

impl SlotState {
    pub fn is_active(&self, id: MtdId) -> bool {
        self.packets.contains_key(&id)
    }

    pub fn active_ids(&self) -> impl Iterator<Item = MtdId> + '_ {
        self.packets.keys().copied()
    }
}

/// Predicted active set with per-device activity probabilities, sorted by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Prediction {
    entries: Vec<(MtdId, f64)>,
}

impl Prediction {
    /// Entries must be sorted by id, free of duplicates, with probabilities
    /// in `(0, 1]`.
    pub fn from_sorted(entries: Vec<(MtdId, f64)>) -> Self {
        debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0));
        debug_assert!(entries.iter().all(|&(_, p)| p > 0.0 && p <= 1.0));
        Self { entries }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (MtdId, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn probability(&self, id: MtdId) -> Option<f64> {
        self.entries
            .binary_search_by_key(&id, |&(i, _)| i)
            .ok()
            .map(|idx| self.entries[idx].1)
    }

    /// Same predicted set with every probability forced to 1. This is what a
    /// plain sleeping-UCB scheduler sees.
    pub fn with_unit_probabilities(&self) -> Self {
        Self {
            entries: self.entries.iter().map(|&(id, _)| (id, 1.0)).collect(),
        }
    }
}

/// Knobs of the emulated source-traffic predictor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictorConfig {
    /// Activity probabilities are drawn uniformly from `[prob_lo, prob_hi]`.
    pub prob_lo: f64,
    pub prob_hi: f64,
    /// Probability that a truly active device is left out of the prediction.
    pub miss_rate: f64,
    /// Contamination budget of the predicted set: inactive devices are
    /// included so that they make up this fraction of the true active count
    /// in expectation, independent of the population size.
    pub false_positive_rate: f64,
}

impl PredictorConfig {
    /// Error-free predictor: the predicted set equals ground truth with P = 1.
    pub const PERFECT: Self = Self {
        prob_lo: 1.0,
        prob_hi: 1.0,
        miss_rate: 0.0,
        false_positive_rate: 0.0,
    };

    pub fn validate(&self) -> Result<(), TrafficError> {
        if !(self.prob_lo.is_finite()
            && self.prob_lo > 0.0
            && self.prob_lo <= self.prob_hi
            && self.prob_hi <= 1.0)
        {
            return Err(TrafficError::InvalidParam {
                name: "predictor prob interval",
                value: self.prob_lo,
            });
        }
        for (name, r) in [
            ("miss_rate", self.miss_rate),
            ("false_positive_rate", self.false_positive_rate),
        ] {
            if !(0.0..1.0).contains(&r) {
                return Err(TrafficError::InvalidParam { name, value: r });
            }
        }
        Ok(())
    }
}

/// Generates the per-slot ground truth, carrying failed packets forward.
#[derive(Debug, Clone)]
pub struct TrafficGenerator {
    k_active: usize,
    slot_ms: f64,
    value_std: f64,
    pending: BTreeMap<MtdId, Packet>,
    /// Devices whose packet survives into the next slot (failed transmission).
    retained: BTreeSet<MtdId>,
    slot: u64,
}

impl TrafficGenerator {
    pub fn new(
        population: usize,
        k_active: usize,
        slot_ms: f64,
        value_std: f64,
    ) -> Result<Self, TrafficError> {
        if k_active > population {
            return Err(TrafficError::ActiveCountExceedsPopulation {
                k_active,
                population,
            });
        }
        Ok(Self {
            k_active,
            slot_ms,
            value_std,
            pending: BTreeMap::new(),
            retained: BTreeSet::new(),
            slot: 0,
        })
    }

    /// Advance one slot: keep only carried-over packets (aged by one slot
    /// duration, dropped once their budget runs out), then top the active set
    /// back up with fresh uniformly-sampled devices.
    pub fn step<R: Rng + ?Sized>(&mut self, population: &[MtdProfile], rng: &mut R) -> SlotState {
        // Carryover packets lose one slot of budget; everything else leaves
        // (a delivered packet is gone, an unscheduled one is superseded by
        // the next activity draw).
        let retained = std::mem::take(&mut self.retained);
        self.pending.retain(|id, p| {
            if !retained.contains(id) {
                return false;
            }
            p.remaining_ms -= self.slot_ms;
            p.remaining_ms > 0.0
        });

        let need = self.k_active.saturating_sub(self.pending.len());
        if need > 0 {
            let candidates: Vec<&MtdProfile> = population
                .iter()
                .filter(|m| !self.pending.contains_key(&m.id))
                .collect();
            for profile in sample_without_replacement(candidates, need, rng) {
                self.pending.insert(
                    profile.id,
                    draw_packet(profile, self.slot, self.value_std, rng),
                );
            }
        }

        let state = SlotState {
            slot: self.slot,
            packets: self.pending.clone(),
        };
        self.slot += 1;
        state
    }

    /// Keep this device's packet pending into the next slot (its
    /// transmission this slot failed).
    pub fn carry_over(&mut self, id: MtdId) {
        debug_assert!(self.pending.contains_key(&id));
        self.retained.insert(id);
    }
}

/// Draw a fresh packet for one device: delay budget uniform over the
/// device's deadline range, value Gaussian around the device mean clamped to
/// `[0, 1]`.
pub fn draw_packet<R: Rng + ?Sized>(
    profile: &MtdProfile,
    birth_slot: u64,
    value_std: f64,
    rng: &mut R,
) -> Packet {
    let deadline = if profile.deadline_max_ms > profile.deadline_min_ms {
        rng.random_range(profile.deadline_min_ms..=profile.deadline_max_ms)
    } else {
        profile.deadline_min_ms
    };
    let value = if value_std > 0.0 {
        let draw: f64 = Normal::new(profile.value_mean, value_std)
            .expect("finite value distribution")
            .sample(rng);
        draw.clamp(0.0, 1.0)
    } else {
        profile.value_mean
    };
    Packet {
        birth_slot,
        initial_deadline_ms: deadline,
        remaining_ms: deadline,
        value,
    }
}

/// Emulate the source-traffic predictor for one slot of ground truth.
pub fn predict<R: Rng + ?Sized>(
    truth: &SlotState,
    population: &[MtdProfile],
    cfg: &PredictorConfig,
    rng: &mut R,
) -> Prediction {
    let active = truth.packets.len();
    let inactive = population.len().saturating_sub(active);
    // Per-device inclusion probability that yields the configured
    // contamination in expectation.
    let fp_inclusion = if inactive > 0 {
        (cfg.false_positive_rate * active as f64 / inactive as f64).min(1.0)
    } else {
        0.0
    };
    let mut entries = Vec::new();
    for profile in population {
        let include = if truth.is_active(profile.id) {
            rng.random::<f64>() >= cfg.miss_rate
        } else {
            rng.random::<f64>() < fp_inclusion
        };
        if include {
            let p = if cfg.prob_hi > cfg.prob_lo {
                rng.random_range(cfg.prob_lo..=cfg.prob_hi)
            } else {
                cfg.prob_lo
            };
            entries.push((profile.id, p));
        }
    }
    Prediction::from_sorted(entries)
}

/// Aggregated predictor-error measurements over a run.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PredictionErrorStats {
    /// Mean under-weighting error `1 − P` over truly active predicted devices.
    pub mean_e1: f64,
    /// Mean inclusion error `P` over inactive predicted devices.
    pub mean_e2: f64,
    /// Truly active devices absent from the prediction.
    pub miss_count: u64,
    /// Inactive devices present in the prediction.
    pub false_positive_count: u64,
}

/// Streaming accumulator behind [`prediction_error_stats`]; the simulation
/// loop feeds it slot by slot instead of retaining both streams.
#[derive(Debug, Clone, Copy, Default)]
pub struct PredictionErrorAccumulator {
    e1_sum: f64,
    e1_count: u64,
    e2_sum: f64,
    misses: u64,
    false_positives: u64,
}

impl PredictionErrorAccumulator {
    pub fn observe(&mut self, truth: &SlotState, prediction: &Prediction) {
        for (id, p) in prediction.iter() {
            if truth.is_active(id) {
                self.e1_sum += 1.0 - p;
                self.e1_count += 1;
            } else {
                self.e2_sum += p;
                self.false_positives += 1;
            }
        }
        for id in truth.active_ids() {
            if prediction.probability(id).is_none() {
                self.misses += 1;
            }
        }
    }

    pub fn finish(&self) -> PredictionErrorStats {
        PredictionErrorStats {
            mean_e1: if self.e1_count > 0 {
                self.e1_sum / self.e1_count as f64
            } else {
                0.0
            },
            mean_e2: if self.false_positives > 0 {
                self.e2_sum / self.false_positives as f64
            } else {
                0.0
            },
            miss_count: self.misses,
            false_positive_count: self.false_positives,
        }
    }
}

/// Offline variant over aligned truth and prediction streams.
pub fn prediction_error_stats(
    truths: &[SlotState],
    predictions: &[Prediction],
) -> Result<PredictionErrorStats, TrafficError> {
    if truths.len() != predictions.len() {
        return Err(TrafficError::MisalignedStreams {
            truths: truths.len(),
            predictions: predictions.len(),
        });
    }
    let mut acc = PredictionErrorAccumulator::default();
    for (truth, prediction) in truths.iter().zip(predictions) {
        acc.observe(truth, prediction);
    }
    Ok(acc.finish())
}
