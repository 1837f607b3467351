//! Per-slot experiment records and the statistics derived from them.

use thiserror::Error;

use crate::traffic::{MtdId, PredictionErrorStats};

#[derive(Debug, Error, PartialEq)]
pub enum TraceError {
    #[error("no true mean recorded for device {0}")]
    MissingMean(MtdId),
}

/// Outcome of one issued grant.
#[derive(Debug, Clone, PartialEq)]
pub struct PlayRecord {
    pub id: MtdId,
    pub reward: f64,
    /// Whether the device held a packet and responded to the grant.
    pub was_active: bool,
    /// Delay budget of the transmitted packet at birth; `None` for a wasted
    /// grant (sleeping device or no response).
    pub deadline_ms: Option<f64>,
    /// Achieved rate in bit/s (0 for failed or wasted transmissions).
    pub rate_bps: f64,
}

/// Everything logged about one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub slot: u64,
    pub plays: Vec<PlayRecord>,
    /// Best available devices by true mean, best first.
    pub oracle_ids: Vec<MtdId>,
    /// Sum of true means over `oracle_ids`.
    pub oracle_reward: f64,
    /// Mean packet delay budget over the truly active set, if any.
    pub active_deadline_mean_ms: Option<f64>,
}

/// Scalar outcomes of one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSummary {
    pub slots: u64,
    pub final_regret: f64,
    /// Mean delay budget of scheduled active devices (0 when none were).
    pub mean_selected_deadline_ms: f64,
    /// Mean over slots of the active-set mean delay budget (0 when idle).
    pub mean_active_deadline_ms: f64,
    pub mean_sum_rate_bps: f64,
    pub prediction_errors: PredictionErrorStats,
}

/// Full log of one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentTrace {
    pub records: Vec<SlotRecord>,
    /// Cumulative regret after each slot, length equal to the horizon.
    pub cumulative_regret: Vec<f64>,
    pub summary: TraceSummary,
}

/// Regret series recomputed from per-slot records against a table of true
/// means: each slot contributes the oracle's mean sum minus the means of the
/// played devices that were actually active (a wasted grant contributes
/// nothing, so the full oracle increment is charged).
pub fn cumulative_regret(
    records: &[SlotRecord],
    true_means: &[f64],
) -> Result<Vec<f64>, TraceError> {
    let mean_of = |id: MtdId| -> Result<f64, TraceError> {
        true_means
            .get(id.0 as usize)
            .copied()
            .ok_or(TraceError::MissingMean(id))
    };
    let mut series = Vec::with_capacity(records.len());
    let mut total = 0.0;
    for record in records {
        let mut oracle = 0.0;
        for &id in &record.oracle_ids {
            oracle += mean_of(id)?;
        }
        let mut achieved = 0.0;
        for play in &record.plays {
            if play.was_active {
                achieved += mean_of(play.id)?;
            }
        }
        total += oracle - achieved;
        series.push(total);
    }
    Ok(series)
}

/// Delay aggregates of one trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayStats {
    /// Pooled mean delay budget over every scheduled active device.
    pub mean_selected_ms: f64,
    /// Mean over slots of the active-set mean delay budget.
    pub mean_population_ms: f64,
    /// Per-slot mean delay budget of the scheduled devices (slots with at
    /// least one active grant).
    pub scatter: Vec<(u64, f64)>,
}

pub fn delay_stats(records: &[SlotRecord]) -> DelayStats {
    let mut selected_sum = 0.0;
    let mut selected_count = 0u64;
    let mut population_sum = 0.0;
    let mut population_count = 0u64;
    let mut scatter = Vec::new();
    for record in records {
        let mut slot_sum = 0.0;
        let mut slot_count = 0u32;
        for play in &record.plays {
            if let Some(d) = play.deadline_ms {
                slot_sum += d;
                slot_count += 1;
            }
        }
        if slot_count > 0 {
            selected_sum += slot_sum;
            selected_count += u64::from(slot_count);
            scatter.push((record.slot, slot_sum / f64::from(slot_count)));
        }
        if let Some(mean) = record.active_deadline_mean_ms {
            population_sum += mean;
            population_count += 1;
        }
    }
    DelayStats {
        mean_selected_ms: if selected_count > 0 {
            selected_sum / selected_count as f64
        } else {
            0.0
        },
        mean_population_ms: if population_count > 0 {
            population_sum / population_count as f64
        } else {
            0.0
        },
        scatter,
    }
}

/// Throughput aggregates of one trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputStats {
    /// Mean over all slots of the per-slot sum of achieved rates.
    pub mean_sum_rate_bps: f64,
    pub scatter: Vec<(u64, f64)>,
}

pub fn throughput_stats(records: &[SlotRecord]) -> ThroughputStats {
    let mut total = 0.0;
    let mut scatter = Vec::with_capacity(records.len());
    for record in records {
        let sum_rate: f64 = record.plays.iter().map(|p| p.rate_bps).sum();
        total += sum_rate;
        scatter.push((record.slot, sum_rate));
    }
    ThroughputStats {
        mean_sum_rate_bps: if records.is_empty() {
            0.0
        } else {
            total / records.len() as f64
        },
        scatter,
    }
}
