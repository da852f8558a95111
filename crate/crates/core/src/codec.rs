//! Piecewise-affine encoder/decoder for the power-constrained noisy channel.
//!
//! With the sign side channel active, a transmitted value `x` with sign `s`
//! is encoded as `s·α·(x − s·b)` and decoded as `s·(1/α)·γ/(γ+1)·ỹ + s·b`,
//! where `b` is the conditional mean of the positive noisy region and `α`
//! normalises the encoder output to the full transmit power. Setting `b = 0`
//! and `s = +1` gives the plain affine codec used without a side channel.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::source::IntervalMoments;

/// Default transmit power. Only the SNR enters any cost.
pub const DEFAULT_POWER: f64 = 1.0;

/// Sign carried on the side channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    /// Sign of `x`; zero maps to `Plus`.
    pub fn of(x: f64) -> Sign {
        if x < 0.0 {
            Sign::Minus
        } else {
            Sign::Plus
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    power: f64,
    snr: f64,
}

impl ChannelParams {
    pub fn new(power: f64, snr: f64) -> Result<Self> {
        if !(power > 0.0 && power.is_finite()) {
            return Err(invalid("power", format!("must be positive, got {power}")));
        }
        if !(snr > 0.0 && snr.is_finite()) {
            return Err(invalid("gamma", format!("must be positive, got {snr}")));
        }
        Ok(ChannelParams { power, snr })
    }

    /// Unit-power channel with the given SNR.
    pub fn with_snr(snr: f64) -> Result<Self> {
        Self::new(DEFAULT_POWER, snr)
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn snr(&self) -> f64 {
        self.snr
    }

    /// `σ_V² = P_T / γ`.
    pub fn noise_variance(&self) -> f64 {
        self.power / self.snr
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodecParams {
    pub gain: f64,
    pub offset: f64,
    pub snr: f64,
}

impl CodecParams {
    pub fn new(gain: f64, offset: f64, snr: f64) -> Result<Self> {
        if !(gain > 0.0 && gain.is_finite()) {
            return Err(invalid("alpha", format!("must be positive, got {gain}")));
        }
        if !(snr > 0.0) {
            return Err(invalid("gamma", format!("must be positive, got {snr}")));
        }
        if !offset.is_finite() {
            return Err(invalid("b", "must be finite"));
        }
        Ok(CodecParams { gain, offset, snr })
    }

    /// Codec matched to a noisy region: offset is the region's conditional
    /// mean and the gain spends the full transmit power on its variance.
    pub fn for_region(region: &IntervalMoments, channel: &ChannelParams) -> Result<Self> {
        if !(region.variance > 0.0) {
            return Err(invalid("region", "noisy region has zero conditional variance"));
        }
        Self::new((channel.power() / region.variance).sqrt(), region.mean, channel.snr())
    }

    fn shrink(&self) -> f64 {
        self.snr / (self.snr + 1.0)
    }
}

pub fn encode(x: f64, sign: Sign, codec: &CodecParams) -> f64 {
    let s = sign.value();
    s * codec.gain * (x - s * codec.offset)
}

pub fn decode(y_tilde: f64, sign: Sign, codec: &CodecParams) -> f64 {
    let s = sign.value();
    s * codec.shrink() / codec.gain * y_tilde + s * codec.offset
}

/// MMSE of the affine scheme over a region with the given conditional variance.
pub fn noisy_channel_mse(conditional_variance: f64, snr: f64) -> f64 {
    conditional_variance / (1.0 + snr)
}

/// `E_V[(x − x̂)²]` for a fixed input `x`, averaged over the channel noise.
pub fn expected_sq_error(x: f64, codec: &CodecParams, noise_variance: f64) -> f64 {
    let g1 = codec.snr + 1.0;
    let bias = x.abs() - codec.offset;
    bias * bias / (g1 * g1) + codec.snr * codec.snr * noise_variance / (codec.gain * codec.gain * g1 * g1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offset_cancels() {
        let c = CodecParams::new(1.7, 0.8, 1.0).unwrap();
        assert_eq!(encode(0.8, Sign::Plus, &c), 0.0);
        assert_eq!(encode(-0.8, Sign::Minus, &c), 0.0);
    }

    #[test]
    fn identity_codec() {
        let c = CodecParams::new(1.0, 0.0, 1.0).unwrap();
        assert_eq!(encode(2.0, Sign::Plus, &c), 2.0);
        assert_eq!(decode(2.0, Sign::Plus, &c), 1.0);
        assert_eq!(decode(0.0, Sign::Plus, &c), 0.0);
    }

    #[test]
    fn near_noiseless_round_trip() {
        let c = CodecParams::new(0.9, 1.3, 1e9).unwrap();
        for &x in &[0.1, 1.3, 4.0, -2.5, -0.01] {
            let s = Sign::of(x);
            let back = decode(encode(x, s, &c), s, &c);
            assert!((back - x).abs() < 1e-6, "{x} -> {back}");
        }
    }

    #[test]
    fn mse_formula() {
        assert_eq!(noisy_channel_mse(2.0, 1.0), 1.0);
        assert_eq!(noisy_channel_mse(0.0, 3.0), 0.0);
        assert_eq!(noisy_channel_mse(1.0, 1.0), 0.5);
    }

    #[test]
    fn degenerate_region_rejected() {
        let ch = ChannelParams::with_snr(1.0).unwrap();
        let region = IntervalMoments {
            mass: 0.1,
            mean: 1.0,
            variance: 0.0,
        };
        assert!(CodecParams::for_region(&region, &ch).is_err());
        assert!(ChannelParams::new(1.0, 0.0).is_err());
    }
}
