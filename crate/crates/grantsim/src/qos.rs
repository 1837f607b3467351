//! Per-packet quality-of-service scoring.
//!
//! Three metrics are folded into one utility in `[0, 1]`: the data value of
//! the packet, the normalized achieved rate, and a delay score produced by a
//! decreasing Gompertz curve of the packet's remaining tolerable access
//! delay. The reward seen by the scheduler is that utility gated by two
//! indicators: the achieved rate must exceed the transmission threshold and
//! the packet must still be within its delay budget.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum QosError {
    #[error("delay budget {total_ms} ms is smaller than fixed components {fixed_ms} ms")]
    InfeasibleBudget { total_ms: f64, fixed_ms: f64 },
    #[error("invalid {name}: {value}")]
    InvalidParam { name: &'static str, value: f64 },
}

/// Parameters of the decreasing Gompertz delay curve `a − a·e^(−b·e^(−c·d))`.
///
/// `a` is the asymptote (score at zero remaining delay approaches `a`),
/// `b` shifts the knee along the delay axis, `c` sets the steepness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GompertzParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl GompertzParams {
    pub fn validate(&self) -> Result<(), QosError> {
        if !self.a.is_finite() || self.a <= 0.0 || self.a > 1.0 {
            return Err(QosError::InvalidParam {
                name: "gompertz a",
                value: self.a,
            });
        }
        if !self.b.is_finite() || self.b <= 0.0 {
            return Err(QosError::InvalidParam {
                name: "gompertz b",
                value: self.b,
            });
        }
        if !self.c.is_finite() || self.c <= 0.0 {
            return Err(QosError::InvalidParam {
                name: "gompertz c",
                value: self.c,
            });
        }
        Ok(())
    }
}

/// Weights of the three utility components; must sum to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilityWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl UtilityWeights {
    pub const SUM_TOLERANCE: f64 = 1e-9;

    pub fn validate(&self) -> Result<(), QosError> {
        for (name, w) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
        ] {
            if !(0.0..=1.0).contains(&w) {
                return Err(QosError::InvalidParam { name, value: w });
            }
        }
        let sum = self.alpha + self.beta + self.gamma;
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(QosError::InvalidParam {
                name: "alpha+beta+gamma",
                value: sum,
            });
        }
        Ok(())
    }
}

/// Everything the reward of one scheduled transmission depends on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardInputs {
    /// Data value of the packet, in `[0, 1]`.
    pub value: f64,
    /// Achieved rate normalized by the network maximum, in `[0, 1]`.
    pub norm_rate: f64,
    /// Instantaneous achieved rate in bit/s, compared against the threshold.
    pub rate_bps: f64,
    /// Remaining tolerable access delay of the packet in ms.
    pub deadline_ms: f64,
    /// Time the packet has already waited, in ms.
    pub elapsed_ms: f64,
    /// Minimum rate required for a successful transmission, in bit/s.
    pub rate_threshold_bps: f64,
}

impl RewardInputs {
    /// Both gating indicators hold: the rate strictly exceeds the threshold
    /// and the remaining delay budget strictly exceeds the time waited.
    pub fn indicators_pass(&self) -> bool {
        self.rate_bps > self.rate_threshold_bps && self.deadline_ms > self.elapsed_ms
    }
}

/// Delay score `a − a·e^(−b·e^(−c·d))`, strictly decreasing in `d`.
pub fn gompertz_score(deadline_ms: f64, p: &GompertzParams) -> f64 {
    debug_assert!(deadline_ms >= 0.0);
    p.a - p.a * (-p.b * (-p.c * deadline_ms).exp()).exp()
}

/// Weighted combination of the three QoS components.
pub fn utility(value: f64, norm_rate: f64, delay_score: f64, w: &UtilityWeights) -> f64 {
    w.alpha * value + w.beta * norm_rate + w.gamma * delay_score
}

/// Indicator-gated reward of one scheduled transmission.
///
/// Zero when either indicator fails; otherwise the utility with the delay
/// score evaluated at the packet's remaining deadline.
pub fn reward(inputs: &RewardInputs, w: &UtilityWeights, g: &GompertzParams) -> f64 {
    if !inputs.indicators_pass() {
        return 0.0;
    }
    let delay_score = gompertz_score(inputs.deadline_ms, g);
    utility(inputs.value, inputs.norm_rate, delay_score, w)
}

/// Access-delay budget left after subtracting the fixed transmit and
/// processing components from the packet's total tolerable delay.
pub fn deadline_from_budget(
    total_ms: f64,
    transmit_ms: f64,
    processing_ms: f64,
) -> Result<f64, QosError> {
    let fixed_ms = transmit_ms + processing_ms;
    if total_ms < fixed_ms {
        return Err(QosError::InfeasibleBudget { total_ms, fixed_ms });
    }
    Ok(total_ms - fixed_ms)
}
