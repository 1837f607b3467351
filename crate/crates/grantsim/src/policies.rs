//! Scheduling policies: probabilistic sleeping UCB (single and multiple
//! grants), its probability-blind variant, a uniform-random baseline, and the
//! clairvoyant oracle used for regret accounting.
//!
//! The learner keeps per-arm statistics `(z, n, n')`: cumulative reward, play
//! count, and the count of plays on which the arm turned out to be active.
//! Only active plays feed the index — a play of a sleeping arm returns
//! nothing and leaves `z`, `n'` and the active-slot counter `t'` frozen. The
//! index of an arm is its empirical mean plus the confidence radius
//! `sqrt(psi·ln t'/n')`, and the scheduler plays the arm maximizing the index
//! weighted by the predicted activity probability. Arms never yet seen active
//! are played first (forced exploration), so the index denominator stays
//! positive.

use rand::Rng;
use thiserror::Error;

use crate::rng::{sample_without_replacement, uniform_index};
use crate::traffic::{MtdId, Prediction, SlotState};

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("update for device {0} which was not selected this slot")]
    UpdateForUnselected(MtdId),
    #[error("psi must be positive, got {0}")]
    NonPositivePsi(f64),
}

/// Which scheduling policy drives grant allocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    /// Weighted sleeping UCB: index scaled by the predicted activity probability.
    ProbSleepingUcb,
    /// Same learner with all probabilities forced to 1 at selection time.
    SleepingUcb,
    /// Uniform random over the predicted set.
    Random,
    /// Clairvoyant: plays the truly active arms with the highest true means.
    Oracle,
}

impl PolicyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PolicyKind::ProbSleepingUcb => "prob-sleeping-ucb",
            PolicyKind::SleepingUcb => "sleeping-ucb",
            PolicyKind::Random => "random",
            PolicyKind::Oracle => "oracle",
        }
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "prob-sleeping-ucb" => Ok(PolicyKind::ProbSleepingUcb),
            "sleeping-ucb" => Ok(PolicyKind::SleepingUcb),
            "random" => Ok(PolicyKind::Random),
            "oracle" => Ok(PolicyKind::Oracle),
            other => Err(format!(
                "unknown policy '{other}' (expected prob-sleeping-ucb, sleeping-ucb, random, or oracle)"
            )),
        }
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Learning state of one arm.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ArmStats {
    /// Cumulative reward earned on active plays.
    pub z: f64,
    /// Times the arm was selected.
    pub n: u64,
    /// Times the arm was selected while actually active.
    pub n_active: u64,
}

/// Upper-confidence index of an arm: empirical mean plus exploration radius.
///
/// Requires `s.n_active >= 1` and `t_active >= 1`; arms that were never seen
/// active are handled by the forced-exploration branch instead.
pub fn ucb_index(s: &ArmStats, t_active: u64, psi: f64) -> f64 {
    debug_assert!(s.n_active >= 1 && t_active >= 1);
    let n = s.n_active as f64;
    s.z / n + (psi * (t_active as f64).ln() / n).sqrt()
}

/// Full learner state: per-arm statistics plus the global slot counters.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyState {
    arms: Vec<ArmStats>,
    /// Slots elapsed.
    t: u64,
    /// Slots on which a selected arm was active (equals the sum of `n_active`).
    t_active: u64,
    psi: f64,
    /// Arms selected this slot and not yet updated.
    pending: Vec<MtdId>,
}

impl PolicyState {
    pub fn new(num_arms: usize, psi: f64) -> Result<Self, PolicyError> {
        if !psi.is_finite() || psi <= 0.0 {
            return Err(PolicyError::NonPositivePsi(psi));
        }
        Ok(Self {
            arms: vec![ArmStats::default(); num_arms],
            t: 0,
            t_active: 0,
            psi,
            pending: Vec::new(),
        })
    }

    pub fn arm(&self, id: MtdId) -> &ArmStats {
        &self.arms[id.0 as usize]
    }

    pub fn slot(&self) -> u64 {
        self.t
    }

    pub fn active_slots(&self) -> u64 {
        self.t_active
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }

    fn weighted_index(&self, id: MtdId, probability: f64) -> f64 {
        probability * ucb_index(self.arm(id), self.t_active, self.psi)
    }

    /// Select one arm from the predicted set; `None` idles the slot.
    pub fn select_single<R: Rng + ?Sized>(
        &mut self,
        prediction: &Prediction,
        rng: &mut R,
    ) -> Option<MtdId> {
        self.select_multiple(prediction, 1, rng).first().copied()
    }

    /// Select up to `grants` arms: every arm never yet seen active first
    /// (uniformly sampled when they outnumber the grants), then the remaining
    /// grants go to the largest probability-weighted indices in descending
    /// order, ties broken uniformly.
    pub fn select_multiple<R: Rng + ?Sized>(
        &mut self,
        prediction: &Prediction,
        grants: usize,
        rng: &mut R,
    ) -> Vec<MtdId> {
        debug_assert!(grants >= 1);
        let unplayed: Vec<MtdId> = prediction
            .iter()
            .filter(|&(id, _)| self.arm(id).n_active == 0)
            .map(|(id, _)| id)
            .collect();
        let mut selected = if unplayed.len() > grants {
            sample_without_replacement(unplayed, grants, rng)
        } else {
            unplayed
        };

        if selected.len() < grants {
            let mut scored: Vec<(MtdId, f64)> = prediction
                .iter()
                .filter(|&(id, _)| self.arm(id).n_active > 0)
                .map(|(id, p)| (id, self.weighted_index(id, p)))
                .collect();
            let extra = (grants - selected.len()).min(scored.len());
            for _ in 0..extra {
                let best = scored
                    .iter()
                    .map(|&(_, s)| s)
                    .fold(f64::NEG_INFINITY, f64::max);
                let ties: Vec<usize> = scored
                    .iter()
                    .enumerate()
                    .filter(|(_, &(_, s))| s == best)
                    .map(|(i, _)| i)
                    .collect();
                let pick = ties[uniform_index(ties.len(), rng)];
                selected.push(scored.swap_remove(pick).0);
            }
        }

        self.pending = selected.clone();
        selected
    }

    /// Record the outcome of playing `id` this slot. A play while the arm was
    /// asleep counts toward `n` only; reward, `n'` and `t'` stay frozen.
    pub fn update(&mut self, id: MtdId, reward: f64, was_active: bool) -> Result<(), PolicyError> {
        let pos = self
            .pending
            .iter()
            .position(|&p| p == id)
            .ok_or(PolicyError::UpdateForUnselected(id))?;
        self.pending.swap_remove(pos);
        debug_assert!((0.0..=1.0).contains(&reward));
        let arm = &mut self.arms[id.0 as usize];
        arm.n += 1;
        if was_active {
            arm.z += reward;
            arm.n_active += 1;
            self.t_active += 1;
        }
        Ok(())
    }

    /// Close the slot: bump the slot counter once, regardless of how many
    /// grants were issued.
    pub fn advance_slot(&mut self) {
        self.t += 1;
        self.pending.clear();
    }
}

/// Uniform-random baseline: `min(grants, |prediction|)` distinct predicted arms.
pub fn random_policy<R: Rng + ?Sized>(
    prediction: &Prediction,
    grants: usize,
    rng: &mut R,
) -> Vec<MtdId> {
    debug_assert!(grants >= 1);
    let ids: Vec<MtdId> = prediction.iter().map(|(id, _)| id).collect();
    if ids.len() > grants {
        sample_without_replacement(ids, grants, rng)
    } else {
        ids
    }
}

/// Clairvoyant policy for regret accounting: the truly active arms with the
/// highest true expected rewards, best first. Never used for learning.
pub fn oracle_policy(truth: &SlotState, true_means: &[f64], grants: usize) -> Vec<MtdId> {
    let mut active: Vec<(MtdId, f64)> = truth
        .active_ids()
        .map(|id| (id, true_means[id.0 as usize]))
        .collect();
    active.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    active.truncate(grants);
    active.into_iter().map(|(id, _)| id).collect()
}
