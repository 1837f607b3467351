//! Closed-form regret bound and empirical confidence-interval coverage.

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BoundError {
    #[error("means and probabilities differ in length ({means} vs {probs})")]
    MismatchedLengths { means: usize, probs: usize },
    #[error("at least one arm is required")]
    NoArms,
    #[error("adjacent weighted values coincide at {value}; the gap term diverges")]
    CoincidentWeightedValues { value: f64 },
}

/// Upper bound on the expected regret after `horizon` slots:
///
/// ```text
/// (8·psi·ln(T·P_av) + f_e1·T) · Σ_j 1/(P_{j+1}·μ_{j+1} − P_j·μ_j)² + μ_1·f_e2·T
/// ```
///
/// with arms ordered by decreasing mean and `P_av` the average activity
/// probability. The constant additive term is taken as zero, which makes
/// empirical-dominance checks against this bound conservative. `f_e1` and
/// `f_e2` are the per-slot rates of the two prediction-error events; with a
/// perfect predictor both are zero and the bound is logarithmic in the
/// horizon.
pub fn theoretical_regret_bound(
    means: &[f64],
    probs: &[f64],
    psi: f64,
    horizon: u64,
    f_e1: f64,
    f_e2: f64,
) -> Result<f64, BoundError> {
    if means.is_empty() {
        return Err(BoundError::NoArms);
    }
    if means.len() != probs.len() {
        return Err(BoundError::MismatchedLengths {
            means: means.len(),
            probs: probs.len(),
        });
    }
    let mut arms: Vec<(f64, f64)> = means.iter().copied().zip(probs.iter().copied()).collect();
    arms.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());

    let mut gap_sum = 0.0;
    for pair in arms.windows(2) {
        let w_hi = pair[0].0 * pair[0].1;
        let w_lo = pair[1].0 * pair[1].1;
        let gap = w_lo - w_hi;
        if gap == 0.0 {
            return Err(BoundError::CoincidentWeightedValues { value: w_hi });
        }
        gap_sum += 1.0 / (gap * gap);
    }

    let t = horizon as f64;
    let p_av = probs.iter().sum::<f64>() / probs.len() as f64;
    let mu_best = arms[0].0;
    Ok((8.0 * psi * (t * p_av).ln() + f_e1 * t) * gap_sum + mu_best * f_e2 * t)
}

/// Empirical coverage of the confidence interval `mean ± sqrt(psi·ln t / t)`
/// for a single always-active arm with Bernoulli(1/2) rewards.
///
/// Returns, for every `t` in `2..=horizon`, the fraction of replications in
/// which the true mean fell outside the interval; to be compared against the
/// `2/t^(2·psi)` tail bound. `t = 1` is skipped (the bound exceeds 1 there).
pub fn confidence_coverage_test<R: Rng + ?Sized>(
    psi: f64,
    horizon: u64,
    replications: u32,
    rng: &mut R,
) -> Vec<(u64, f64)> {
    assert!(replications >= 100, "need at least 100 replications");
    assert!(horizon >= 2);
    let true_mean = 0.5;
    let mut violations = vec![0u64; horizon as usize + 1];
    for _ in 0..replications {
        let mut sum = 0.0;
        for t in 1..=horizon {
            if rng.random::<f64>() < true_mean {
                sum += 1.0;
            }
            if t >= 2 {
                let mean = sum / t as f64;
                let radius = (psi * (t as f64).ln() / t as f64).sqrt();
                if (mean - true_mean).abs() > radius {
                    violations[t as usize] += 1;
                }
            }
        }
    }
    (2..=horizon)
        .map(|t| (t, violations[t as usize] as f64 / f64::from(replications)))
        .collect()
}
