//! Memoryless erasure channel over the alphabet `{1, …, K+1}`.
//!
//! The encoder is the identity on symbol indices. Both ends see the channel
//! output (feedback), so each can run the zoom update on its own; the
//! decoder-side rule lives in [`decoder_update`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plant::RandomStream;
use crate::quantizer::{reconstruction_level, BinSizeIndex, QuantizerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Per-use success probability.
    pub p: f64,
    /// `K + 1`.
    pub alphabet_size: u32,
}

impl ChannelParams {
    pub fn new(p: f64, alphabet_size: u32) -> Result<Self> {
        let params = Self { p, alphabet_size };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::config(
                "channel.p",
                format!("success probability must lie in (0, 1], got {}", self.p),
            ));
        }
        if self.alphabet_size < 3 {
            return Err(Error::config("channel.alphabet_size", "need at least K + 1 = 3 symbols"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelOutput {
    Received(u32),
    Erased,
}

impl ChannelOutput {
    pub fn is_erased(self) -> bool {
        matches!(self, ChannelOutput::Erased)
    }
}

/// One Bernoulli(p) channel-use outcome. Consumes exactly one uniform draw.
#[inline]
pub fn channel_success(params: &ChannelParams, stream: &mut RandomStream) -> bool {
    stream.uniform() < params.p
}

pub fn transmit(params: &ChannelParams, q: u32, stream: &mut RandomStream) -> Result<ChannelOutput> {
    if q == 0 || q > params.alphabet_size {
        return Err(Error::Input(format!(
            "symbol {q} outside alphabet 1..={}",
            params.alphabet_size
        )));
    }
    Ok(if channel_success(params, stream) {
        ChannelOutput::Received(q)
    } else {
        ChannelOutput::Erased
    })
}

/// The decoder map: erased gives `(0, false)`; a received symbol gives its
/// reconstruction level and `true`, including the overflow symbol (level 0).
pub fn decode(out: ChannelOutput, delta: BinSizeIndex, cfg: &QuantizerConfig) -> (f64, bool) {
    match out {
        ChannelOutput::Erased => (0.0, false),
        ChannelOutput::Received(k) => (reconstruction_level(cfg, delta, k), true),
    }
}

/// Zoom update computed from the channel output alone.
pub fn decoder_update(cfg: &QuantizerConfig, delta: BinSizeIndex, out: ChannelOutput) -> BinSizeIndex {
    match out {
        ChannelOutput::Received(k) if k != cfg.overflow_symbol() => {
            if delta.0 >= cfg.threshold_idx {
                BinSizeIndex(delta.0 - i64::from(cfg.zoom_in_steps))
            } else {
                delta
            }
        }
        _ => BinSizeIndex(delta.0 + i64::from(cfg.zoom_out_steps)),
    }
}
