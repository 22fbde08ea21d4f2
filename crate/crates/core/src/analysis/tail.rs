//! Analytic bounds on the inter-stop tail `P(T₁ ≥ k)` from a perfectly
//! zoomed start, and the large-bin limit of the log-drift at stops.

use std::f64::consts::{LN_2, PI};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::plant::PlantParams;
use crate::quantizer::QuantizerConfig;

/// Constants of the Gaussian tail term in the upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailBoundParams {
    /// `σ' = sqrt(E[d²] / (1 − |a|^(−2)))`.
    pub sigma_prime: f64,
    /// `ξ = (|a| + δ)/|a|`.
    pub xi: f64,
    /// `N = 2^(R'−1)·α/|a|`.
    pub n_const: f64,
}

impl TailBoundParams {
    /// Requires `|a| > 1` (so `σ'` is finite) and `N > 1/2`.
    pub fn new(plant: &PlantParams, cfg: &QuantizerConfig) -> Result<Self> {
        let a = plant.a.abs();
        if a <= 1.0 {
            return Err(Error::Input(format!(
                "tail bound needs |a| > 1 for a finite sigma', got |a| = {a}"
            )));
        }
        let sigma_prime = (plant.noise_std * plant.noise_std / (1.0 - a.powi(-2))).sqrt();
        let xi = cfg.zoom_out_gain() / a;
        let n_const = f64::from(cfg.bins / 2) * cfg.alpha() / a;
        if n_const <= 0.5 {
            return Err(Error::Input(format!(
                "N = {n_const} <= 1/2; alpha > |a|2^(-R') does not hold"
            )));
        }
        Ok(Self {
            sigma_prime,
            xi,
            n_const,
        })
    }

    /// `C(Δ₀) = 2σ' / (√(2π)·(2N − 1)·Δ₀/2)`.
    pub fn c_const(&self, delta0: f64) -> f64 {
        2.0 * self.sigma_prime / ((2.0 * PI).sqrt() * (2.0 * self.n_const - 1.0) * delta0 / 2.0)
    }

    /// `Ξ_k(Δ₀) = ((ξ^(k−2)·N − 1/2)·Δ₀)² / (2σ'²)` for `k ≥ 2`.
    pub fn xi_k(&self, k: u32, delta0: f64) -> f64 {
        let e = i32::try_from(k).unwrap_or(i32::MAX) - 2;
        let gap = (self.xi.powi(e) * self.n_const - 0.5) * delta0;
        gap * gap / (2.0 * self.sigma_prime * self.sigma_prime)
    }
}

/// `(1 − p)^(k−1)`: every one of the first `k − 1` uses erased.
pub fn tail_lower_bound(k: u32, p: f64) -> f64 {
    assert!(k >= 1, "tail index starts at 1");
    (1.0 - p).powi(k as i32 - 1)
}

/// `Θ̄_k` with `Θ̄_1 = 1`, `Θ̄_k = Θ̄_(k−1)(1 − p) + C·exp(−Ξ_k)`.
pub fn tail_upper_bound(k: u32, delta0: f64, tb: &TailBoundParams, p: f64) -> f64 {
    assert!(k >= 1, "tail index starts at 1");
    *tail_upper_bounds(k, delta0, tb, p)
        .last()
        .expect("k >= 1 yields at least one value")
}

/// `[Θ̄_1, …, Θ̄_kmax]`.
pub fn tail_upper_bounds(k_max: u32, delta0: f64, tb: &TailBoundParams, p: f64) -> Vec<f64> {
    let c = tb.c_const(delta0);
    let mut out = Vec::with_capacity(k_max as usize);
    let mut theta = 1.0;
    for k in 1..=k_max {
        if k > 1 {
            theta = theta * (1.0 - p) + c * (-tb.xi_k(k, delta0)).exp();
        }
        out.push(theta);
    }
    out
}

/// Large-bin limit of `E[log Δ²_(T₁)] − log Δ²_0`:
/// `2 log α + 2 (1/p − 1) log(|a| + δ)`.
pub fn analytic_drift_limit(cfg: &QuantizerConfig, p: f64) -> f64 {
    let log_alpha = -f64::from(cfg.zoom_in_steps) * cfg.step * LN_2;
    let log_gain = f64::from(cfg.zoom_out_steps) * cfg.step * LN_2;
    2.0 * log_alpha + 2.0 * (1.0 / p - 1.0) * log_gain
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantizer::{snap_gains_to_lattice, BinSizeIndex};

    fn reference() -> (PlantParams, QuantizerConfig, TailBoundParams) {
        let plant = PlantParams::new(2.5, 1.0, 1.0, 0.0).unwrap();
        let cfg = snap_gains_to_lattice(2.5, 0.9, 4, 2).unwrap();
        let tb = TailBoundParams::new(&plant, &cfg).unwrap();
        (plant, cfg, tb)
    }

    #[test]
    fn lower_bound_examples() {
        assert_eq!(tail_lower_bound(1, 0.9), 1.0);
        assert!((tail_lower_bound(3, 0.9) - 0.01).abs() < 1e-15);
        assert_eq!(tail_lower_bound(2, 0.5), 0.5);
    }

    #[test]
    fn constants_match_definitions() {
        let (_, cfg, tb) = reference();
        assert!((tb.sigma_prime * tb.sigma_prime - 1.0 / (1.0 - 1.0 / 6.25)).abs() < 1e-12);
        assert!((tb.xi - cfg.zoom_out_gain() / 2.5).abs() < 1e-15);
        assert!((tb.n_const - 2.0 * cfg.alpha() / 2.5).abs() < 1e-15);
        assert!(tb.xi > 1.0 && tb.n_const > 0.5);
        assert!(TailBoundParams::new(&PlantParams::new(1.0, 1.0, 1.0, 0.0).unwrap(), &cfg).is_err());
    }

    #[test]
    fn upper_bound_starts_at_one_and_dominates_lower() {
        let (_, cfg, tb) = reference();
        for idx in [1i64, 5, 15, 30] {
            let d0 = BinSizeIndex(idx).size(&cfg);
            let ub = tail_upper_bounds(12, d0, &tb, 0.9);
            assert_eq!(ub[0], 1.0);
            assert_eq!(tail_upper_bound(1, d0, &tb, 0.9), 1.0);
            for (i, &u) in ub.iter().enumerate() {
                assert!(u >= tail_lower_bound(i as u32 + 1, 0.9));
            }
        }
    }

    #[test]
    fn geometric_limit_is_monotone_in_delta0() {
        let (_, cfg, tb) = reference();
        for k in 2..=10u32 {
            let mut prev = f64::INFINITY;
            for idx in 1..=40 {
                let d0 = BinSizeIndex(idx).size(&cfg);
                let r = tail_upper_bound(k, d0, &tb, 0.9) / tail_lower_bound(k, 0.9);
                assert!(r >= 1.0);
                assert!(r <= prev * (1.0 + 1e-12), "k={k} idx={idx}: {r} > {prev}");
                prev = r;
            }
            assert!(prev - 1.0 < 1e-9, "k={k}: ratio {prev}");
        }
    }

    #[test]
    fn gaussian_term_fades_with_k() {
        // At Δ₀ = 8 the Gaussian terms dominate early (ξ is barely above 1)
        // but decay doubly exponentially, so Θ̄_k/(1−p)^(k−1) settles.
        let (_, _, tb) = reference();
        let ub = tail_upper_bounds(300, 8.0, &tb, 0.9);
        let ratio = |k: usize| ub[k - 1] / tail_lower_bound(k as u32, 0.9);
        assert!(ratio(300).is_finite() && ratio(300) > 1.0);
        assert!((ratio(260) / ratio(300) - 1.0).abs() < 1e-9);
        let gauss: Vec<f64> = (2..=300).map(|k| tb.c_const(8.0) * (-tb.xi_k(k, 8.0)).exp()).collect();
        assert!(gauss.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn drift_limit_is_negative_for_reference_lattice() {
        let (_, cfg, _) = reference();
        let lim = analytic_drift_limit(&cfg, 0.9);
        let direct = 2.0 * cfg.alpha().ln() + 2.0 * (1.0 / 0.9 - 1.0) * cfg.zoom_out_gain().ln();
        assert!((lim - direct).abs() < 1e-12);
        assert!(lim < 0.0);
        // p = 1: no erasures, drift is 2 log α
        assert!((analytic_drift_limit(&cfg, 1.0) - 2.0 * cfg.alpha().ln()).abs() < 1e-12);
    }
}
