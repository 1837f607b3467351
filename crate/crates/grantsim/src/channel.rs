//! Uplink channel model: 3GPP path loss, log-normal shadowing, Rayleigh
//! small-scale fading, SNR and Shannon rate.
//!
//! The composite power gain of a device–base-station link is
//! `|h|² = a · |g|²` where `a` is the large-scale gain (path loss plus
//! shadowing, converted to linear) and `|g|²` is exponential with unit mean
//! (Rayleigh envelope). Both are redrawn independently every slot.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Normal};
use thiserror::Error;

/// dBm → watts.
fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("distance must be positive, got {0} km")]
    NonPositiveDistance(f64),
    #[error("invalid link parameter {name}: {value}")]
    InvalidParam { name: &'static str, value: f64 },
}

/// Static parameters of one device–base-station link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    /// Device–BS distance in kilometres.
    pub distance_km: f64,
    /// Device transmit power in dBm.
    pub tx_power_dbm: f64,
    /// Log-normal shadowing standard deviation in dB (0 disables shadowing).
    pub shadowing_sigma_db: f64,
    /// Resource-block bandwidth in Hz.
    pub bandwidth_hz: f64,
    /// Noise power spectral density in dBm/Hz.
    pub noise_psd_dbm_hz: f64,
}

impl LinkParams {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if !self.distance_km.is_finite() || self.distance_km <= 0.0 {
            return Err(ChannelError::NonPositiveDistance(self.distance_km));
        }
        if !self.bandwidth_hz.is_finite() || self.bandwidth_hz <= 0.0 {
            return Err(ChannelError::InvalidParam {
                name: "bandwidth_hz",
                value: self.bandwidth_hz,
            });
        }
        if !self.shadowing_sigma_db.is_finite() || self.shadowing_sigma_db < 0.0 {
            return Err(ChannelError::InvalidParam {
                name: "shadowing_sigma_db",
                value: self.shadowing_sigma_db,
            });
        }
        Ok(())
    }
}

/// One slot's realized channel gains (all linear power ratios).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelRealization {
    /// Path loss and shadowing, `a(t)`.
    pub large_scale_gain: f64,
    /// Rayleigh fading power, `|g(t)|²`, unit-mean exponential.
    pub small_scale_gain: f64,
    /// Product of the two, `|h(t)|²`.
    pub composite_gain: f64,
}

/// 3GPP urban path loss from BS to device: `128.1 + 37.6·log10(d)`, d in km.
pub fn path_loss_db(distance_km: f64) -> Result<f64, ChannelError> {
    if !distance_km.is_finite() || distance_km <= 0.0 {
        return Err(ChannelError::NonPositiveDistance(distance_km));
    }
    Ok(128.1 + 37.6 * distance_km.log10())
}

/// Draw one slot's channel realization.
///
/// Shadowing is a zero-mean Gaussian in dB with the configured deviation;
/// small-scale gain is exponential with unit mean. Independent across calls.
pub fn sample_channel<R: Rng + ?Sized>(
    link: &LinkParams,
    rng: &mut R,
) -> Result<ChannelRealization, ChannelError> {
    link.validate()?;
    let pl_db = path_loss_db(link.distance_km)?;
    let shadow_db = if link.shadowing_sigma_db > 0.0 {
        Normal::new(0.0, link.shadowing_sigma_db)
            .expect("validated sigma")
            .sample(rng)
    } else {
        0.0
    };
    let large_scale_gain = 10f64.powf(-(pl_db + shadow_db) / 10.0);
    let small_scale_gain: f64 = Exp1.sample(rng);
    Ok(ChannelRealization {
        large_scale_gain,
        small_scale_gain,
        composite_gain: large_scale_gain * small_scale_gain,
    })
}

/// Received SNR (linear) for a given composite gain.
pub fn snr(link: &LinkParams, gain: f64) -> f64 {
    let tx_w = dbm_to_watts(link.tx_power_dbm);
    let noise_w = link.bandwidth_hz * dbm_to_watts(link.noise_psd_dbm_hz);
    tx_w * gain / noise_w
}

/// Achievable rate in bit/s: `W·log2(1 + snr)`.
pub fn rate(link: &LinkParams, snr: f64) -> f64 {
    link.bandwidth_hz * (1.0 + snr).log2()
}

/// Rate normalized by the network-wide maximum, clamped to `[0, 1]`.
pub fn normalized_rate(c: f64, c_max: f64) -> f64 {
    debug_assert!(c_max > 0.0);
    (c / c_max).min(1.0)
}
