//! Uniform `K`-bin quantizer with an overflow symbol, and the adaptive zoom
//! update on a base-2 logarithmic lattice.
//!
//! The bin size is never stored as a float. A [`BinSizeIndex`] holds an
//! integer `idx` and the realized size is `Δ = 2^(s·idx)`, recomputed from the
//! integer whenever it is needed. Zooming out adds `B̃` to the index, zooming
//! in subtracts `Ã`, so any sequence of updates stays on the lattice `s·ℤ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest zoom-in exponent tried by [`snap_gains_to_lattice`].
pub const MAX_ZOOM_IN_STEPS: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizerConfig {
    /// Number of granular bins `K` (even). The channel alphabet has `K + 1` symbols.
    pub bins: u32,
    /// Lattice step `s` for `log₂ Δ`.
    pub step: f64,
    /// Zoom-in lattice steps `Ã`; `α = 2^(-Ã·s)`.
    pub zoom_in_steps: u32,
    /// Zoom-out lattice steps `B̃`; zoom-out gain `2^(B̃·s) = |a| + δ`.
    pub zoom_out_steps: u32,
    /// Lattice index of the zoom-in threshold `L`.
    pub threshold_idx: i64,
}

impl QuantizerConfig {
    /// Builds a config and checks the structural invariants (those that do not
    /// depend on the plant or the channel).
    pub fn new(
        bins: u32,
        step: f64,
        zoom_in_steps: u32,
        zoom_out_steps: u32,
        threshold_idx: i64,
    ) -> Result<Self> {
        let cfg = Self {
            bins,
            step,
            zoom_in_steps,
            zoom_out_steps,
            threshold_idx,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bins < 2 || !self.bins.is_multiple_of(2) {
            return Err(Error::config(
                "quantizer.K",
                format!("K must be even and >= 2, got {}", self.bins),
            ));
        }
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::config("quantizer.s", "lattice step must be > 0"));
        }
        if self.zoom_in_steps == 0 {
            return Err(Error::config("quantizer.A_exp", "must be a positive integer"));
        }
        if self.zoom_out_steps == 0 {
            return Err(Error::config("quantizer.B_exp", "must be a positive integer"));
        }
        if gcd(self.zoom_in_steps, self.zoom_out_steps) != 1 {
            return Err(Error::config(
                "quantizer.A_exp",
                format!(
                    "A_exp = {} and B_exp = {} must be relatively prime",
                    self.zoom_in_steps, self.zoom_out_steps
                ),
            ));
        }
        if self.floor_idx_checked().is_none() || self.floor_idx() < 0 {
            return Err(Error::config(
                "quantizer.L_idx",
                format!(
                    "L' = alpha * 2^(s*L_idx) must be >= 1; need L_idx >= A_exp = {}",
                    self.zoom_in_steps
                ),
            ));
        }
        Ok(())
    }

    /// Checks the inequalities that tie the lattice to a plant gain `a` and a
    /// channel success probability `p`, naming the first one that fails.
    pub fn validate_for(&self, a: f64, p: f64) -> Result<()> {
        let a = a.abs();
        if self.zoom_out_gain() <= a {
            return Err(Error::config(
                "quantizer",
                format!(
                    "zoom-out gain 2^(B_exp*s) = {} must exceed |a| = {a}",
                    self.zoom_out_gain()
                ),
            ));
        }
        let rbdd2 = a * (-self.rate_granular()).exp2();
        if self.alpha() <= rbdd2 {
            return Err(Error::config(
                "quantizer",
                format!("alpha = {} must exceed |a|*2^(-R') = {rbdd2}", self.alpha()),
            ));
        }
        let rbdd3 = self.rbdd3_value(p);
        if rbdd3 >= 1.0 {
            return Err(Error::config(
                "quantizer",
                format!("alpha*(|a|+delta)^(1/p-1) = {rbdd3} must be < 1"),
            ));
        }
        Ok(())
    }

    pub fn alphabet_size(&self) -> u32 {
        self.bins + 1
    }

    pub fn overflow_symbol(&self) -> u32 {
        self.bins + 1
    }

    /// `R = log₂(K + 1)`.
    pub fn rate(&self) -> f64 {
        f64::from(self.bins + 1).log2()
    }

    /// `R' = log₂ K`.
    pub fn rate_granular(&self) -> f64 {
        f64::from(self.bins).log2()
    }

    /// Zoom-in factor `α = 2^(-Ã·s)`.
    pub fn alpha(&self) -> f64 {
        (-(f64::from(self.zoom_in_steps) * self.step)).exp2()
    }

    /// Zoom-out factor `|a| + δ = 2^(B̃·s)`.
    pub fn zoom_out_gain(&self) -> f64 {
        (f64::from(self.zoom_out_steps) * self.step).exp2()
    }

    /// `δ = 2^(B̃·s) − |a|`.
    pub fn delta_margin(&self, a: f64) -> f64 {
        self.zoom_out_gain() - a.abs()
    }

    /// `α·(|a| + δ)^(1/p − 1)`.
    pub fn rbdd3_value(&self, p: f64) -> f64 {
        self.alpha() * self.zoom_out_gain().powf(1.0 / p - 1.0)
    }

    /// Threshold `L = 2^(s·L_idx)`.
    pub fn threshold(&self) -> f64 {
        BinSizeIndex(self.threshold_idx).size(self)
    }

    /// Lattice index of the floor `L' = α·L`.
    pub fn floor_idx(&self) -> i64 {
        self.threshold_idx - i64::from(self.zoom_in_steps)
    }

    fn floor_idx_checked(&self) -> Option<i64> {
        self.threshold_idx
            .checked_sub(i64::from(self.zoom_in_steps))
    }

    /// `L' = α·L`, the smallest reachable bin size.
    pub fn floor(&self) -> f64 {
        BinSizeIndex(self.floor_idx()).size(self)
    }
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Integer lattice coordinate of a bin size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BinSizeIndex(pub i64);

impl BinSizeIndex {
    /// Realized `Δ = 2^(s·idx)`, computed fresh from the integer index.
    #[inline]
    pub fn size(self, cfg: &QuantizerConfig) -> f64 {
        (cfg.step * self.0 as f64).exp2()
    }

    /// `log₂ Δ`.
    #[inline]
    pub fn log2_size(self, cfg: &QuantizerConfig) -> f64 {
        cfg.step * self.0 as f64
    }

    pub fn is_above_floor(self, cfg: &QuantizerConfig) -> bool {
        self.0 >= cfg.floor_idx()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizerOutput {
    /// Channel-input symbol in `1..=K+1`; `K + 1` is overflow.
    pub symbol: u32,
    /// Reconstruction level `q`.
    pub value: f64,
}

/// Reconstruction level of a symbol. Overflow reconstructs to 0.
pub fn reconstruction_level(cfg: &QuantizerConfig, delta: BinSizeIndex, symbol: u32) -> f64 {
    if symbol == 0 || symbol > cfg.bins {
        return 0.0;
    }
    let width = delta.size(cfg);
    (f64::from(symbol) - f64::from(cfg.bins + 1) / 2.0) * width
}

/// Lower edge of granular bin `k` (`1..=K`); bin `k` is `[edge(k), edge(k+1))`.
fn bin_edge(k: i64, half_bins: i64, width: f64) -> f64 {
    (k - 1 - half_bins) as f64 * width
}

/// Quantizes `x` with bin size `Δ = delta.size(cfg)`.
///
/// Bin `k` covers `[(k−1−K/2)Δ, (k−K/2)Δ)`; the right end `KΔ/2` of the
/// granular region belongs to bin `K`; anything else is overflow.
pub fn quantize(cfg: &QuantizerConfig, delta: BinSizeIndex, x: f64) -> Result<QuantizerOutput> {
    if !x.is_finite() {
        return Err(Error::Input(format!("cannot quantize non-finite value {x}")));
    }
    let width = delta.size(cfg);
    let bins = i64::from(cfg.bins);
    let half = bins / 2;
    let top = bin_edge(bins + 1, half, width);
    let bottom = bin_edge(1, half, width);
    let overflow = QuantizerOutput {
        symbol: cfg.overflow_symbol(),
        value: 0.0,
    };
    if x == top {
        return Ok(QuantizerOutput {
            symbol: cfg.bins,
            value: reconstruction_level(cfg, delta, cfg.bins),
        });
    }
    if x < bottom || x > top {
        return Ok(overflow);
    }
    let mut k = ((x / width).floor() as i64 + half + 1).clamp(1, bins);
    // Snap against the edges as actually computed so the bins partition exactly.
    while k > 1 && x < bin_edge(k, half, width) {
        k -= 1;
    }
    while k < bins && x >= bin_edge(k + 1, half, width) {
        k += 1;
    }
    let symbol = k as u32;
    Ok(QuantizerOutput {
        symbol,
        value: reconstruction_level(cfg, delta, symbol),
    })
}

/// `h = x / (Δ·2^(R'−1)) = x / (Δ·K/2)`.
#[inline]
pub fn overflow_ratio(cfg: &QuantizerConfig, delta: BinSizeIndex, x: f64) -> f64 {
    x / (delta.size(cfg) * f64::from(cfg.bins / 2))
}

/// The zoom update `Δ' = Δ·H(Δ, |h|, Υ)` on lattice indices.
///
/// `|h| = 1` counts as granular.
pub fn update_bin(
    cfg: &QuantizerConfig,
    delta: BinSizeIndex,
    h: f64,
    erasure_ok: bool,
) -> BinSizeIndex {
    if h.abs() > 1.0 || !erasure_ok {
        BinSizeIndex(delta.0 + i64::from(cfg.zoom_out_steps))
    } else if delta.0 >= cfg.threshold_idx {
        BinSizeIndex(delta.0 - i64::from(cfg.zoom_in_steps))
    } else {
        delta
    }
}

/// Picks a lattice `(s, Ã)` for a given `B̃` so that the zoom-out gain exceeds
/// `|a|` and both rate inequalities hold.
///
/// Candidates `Ã = 1, 2, …` coprime to `B̃` are scanned in order; for each,
/// the feasible `s` is an open interval and its midpoint is taken. The
/// threshold is set to `L_idx = Ã`, i.e. `L' = 1`.
pub fn snap_gains_to_lattice(a: f64, p: f64, bins: u32, zoom_out_steps: u32) -> Result<QuantizerConfig> {
    let a = a.abs();
    if !(a.is_finite() && a >= 1.0) {
        return Err(Error::Input(format!("|a| must be >= 1, got {a}")));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Input(format!("p must lie in (0, 1], got {p}")));
    }
    if bins < 2 || !bins.is_multiple_of(2) {
        return Err(Error::Input(format!("K must be even and >= 2, got {bins}")));
    }
    if zoom_out_steps == 0 {
        return Err(Error::Input("B_exp must be positive".into()));
    }
    let log_a = a.log2();
    let rate = f64::from(bins).log2();
    if rate * p <= log_a {
        return Err(Error::Synthesis(format!(
            "capacity: log2(K)*p = {} <= log2|a| = {log_a}",
            rate * p
        )));
    }
    let b = f64::from(zoom_out_steps);
    // zoom-out gain 2^(B̃ s) > |a|
    let lo = log_a / b;
    let mut last_failure = String::new();
    for zoom_in in 1..=MAX_ZOOM_IN_STEPS {
        if gcd(zoom_in, zoom_out_steps) != 1 {
            continue;
        }
        let ai = f64::from(zoom_in);
        // α(|a|+δ)^(1/p−1) = 2^(s(B̃(1/p−1) − Ã)) < 1
        if b * (1.0 / p - 1.0) >= ai {
            last_failure = format!(
                "alpha*(|a|+delta)^(1/p-1) < 1 needs A_exp > B_exp*(1/p-1) = {}",
                b * (1.0 / p - 1.0)
            );
            continue;
        }
        // α > |a| 2^(−R')  ⇔  s < (R' − log₂|a|)/Ã
        let hi = (rate - log_a) / ai;
        if hi <= lo {
            last_failure = format!(
                "alpha > |a|*2^(-R') and 2^(B_exp*s) > |a| leave no s for A_exp = {zoom_in}"
            );
            continue;
        }
        let step = 0.5 * (lo + hi);
        let cfg = QuantizerConfig::new(bins, step, zoom_in, zoom_out_steps, i64::from(zoom_in))?;
        match cfg.validate_for(a, p) {
            Ok(()) => return Ok(cfg),
            Err(e) => last_failure = e.to_string(),
        }
    }
    Err(Error::Synthesis(format!(
        "no A_exp <= {MAX_ZOOM_IN_STEPS} works; last failure: {last_failure}"
    )))
}
