//! Experiment config files.
//!
//! ```toml
//! [plant]
//! a = 2.5
//! b = 1.0
//! noise_std = 1.0
//! x0 = 0.0
//!
//! [quantizer]
//! K = 4
//! B_exp = 2
//! # L_idx = 1          optional; defaults to A_exp (floor L' = 1)
//! # s = 0.67           explicit lattice: give s and A_exp together
//! # A_exp = 1
//!
//! [channel]
//! p = 0.9
//!
//! [run]
//! T = 10000
//! n_traj = 8
//! seed = 1
//! m = 2
//! # delta0_idx = 15    optional; defaults to L_idx
//! k_max = 10
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::ChannelParams;
use crate::closed_loop::Scenario;
use crate::error::{Error, Result};
use crate::plant::PlantParams;
use crate::quantizer::{snap_gains_to_lattice, QuantizerConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    pub a: f64,
    #[serde(default = "one")]
    pub b: f64,
    #[serde(default = "one")]
    pub noise_std: f64,
    #[serde(default)]
    pub x0: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantizerSection {
    #[serde(rename = "K")]
    pub bins: u32,
    #[serde(rename = "B_exp")]
    pub zoom_out_steps: u32,
    #[serde(rename = "L_idx", default, skip_serializing_if = "Option::is_none")]
    pub threshold_idx: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(rename = "A_exp", default, skip_serializing_if = "Option::is_none")]
    pub zoom_in_steps: Option<u32>,
}

impl QuantizerSection {
    pub fn from_config(cfg: &QuantizerConfig) -> Self {
        Self {
            bins: cfg.bins,
            zoom_out_steps: cfg.zoom_out_steps,
            threshold_idx: Some(cfg.threshold_idx),
            s: Some(cfg.step),
            zoom_in_steps: Some(cfg.zoom_in_steps),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(rename = "T")]
    pub steps: u64,
    pub n_traj: u64,
    pub seed: u64,
    #[serde(default = "two")]
    pub m: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta0_idx: Option<i64>,
    #[serde(default = "ten")]
    pub k_max: u32,
}

fn two() -> u32 {
    2
}

fn ten() -> u32 {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub plant: PlantSection,
    pub quantizer: QuantizerSection,
    pub channel: ChannelSection,
    pub run: RunSection,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::Input(format!("config: {e}")))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Config {
                field: if path == "." { "config".into() } else { path },
                reason: e.into_inner().message().trim().to_string(),
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Builds the module-level types, synthesizing the lattice when `s` and
    /// `A_exp` are absent. `seed_override` replaces `run.seed`.
    pub fn resolve(&self, seed_override: Option<u64>) -> Result<ResolvedConfig> {
        let pl = &self.plant;
        let plant = PlantParams::new(pl.a, pl.b, pl.noise_std, pl.x0)?;
        let q = &self.quantizer;
        let p = self.channel.p;
        ChannelParams::new(p, q.bins.saturating_add(1))?;
        let quantizer = match (q.s, q.zoom_in_steps) {
            (Some(s), Some(ai)) => {
                QuantizerConfig::new(q.bins, s, ai, q.zoom_out_steps, q.threshold_idx.unwrap_or(i64::from(ai)))?
            }
            (None, None) => {
                if q.bins < 2 || !q.bins.is_multiple_of(2) {
                    return Err(Error::config("quantizer.K", format!("K must be even and >= 2, got {}", q.bins)));
                }
                if q.zoom_out_steps == 0 {
                    return Err(Error::config("quantizer.B_exp", "must be a positive integer"));
                }
                let mut cfg = snap_gains_to_lattice(pl.a, p, q.bins, q.zoom_out_steps)
                    .map_err(|e| Error::config("quantizer", e.to_string()))?;
                if let Some(l) = q.threshold_idx {
                    cfg.threshold_idx = l;
                    cfg.validate()?;
                }
                cfg
            }
            (Some(_), None) => return Err(Error::config("quantizer.A_exp", "required when s is given")),
            (None, Some(_)) => return Err(Error::config("quantizer.s", "required when A_exp is given")),
        };
        let channel = ChannelParams::new(p, quantizer.alphabet_size())?;
        let delta0_idx = self.run.delta0_idx.unwrap_or(quantizer.threshold_idx);
        let scenario = Scenario::new(plant, quantizer, channel, delta0_idx)?;
        let r = &self.run;
        if r.steps == 0 {
            return Err(Error::config("run.T", "must be >= 1"));
        }
        if r.n_traj == 0 {
            return Err(Error::config("run.n_traj", "must be >= 1"));
        }
        if r.m == 0 {
            return Err(Error::config("run.m", "must be >= 1"));
        }
        if r.k_max == 0 {
            return Err(Error::config("run.k_max", "must be >= 1"));
        }
        Ok(ResolvedConfig {
            scenario,
            steps: r.steps,
            n_traj: r.n_traj,
            seed: seed_override.unwrap_or(r.seed),
            m: r.m,
            k_max: r.k_max,
        })
    }

    /// Plant gain, success probability and bin count, checked on their own.
    pub fn rate_inputs(&self) -> Result<(f64, f64, u32)> {
        let pl = &self.plant;
        PlantParams::new(pl.a, pl.b, pl.noise_std, pl.x0)?;
        let bins = self.quantizer.bins;
        if bins < 2 || !bins.is_multiple_of(2) {
            return Err(Error::config("quantizer.K", format!("K must be even and >= 2, got {bins}")));
        }
        ChannelParams::new(self.channel.p, bins + 1)?;
        Ok((pl.a, self.channel.p, bins))
    }

    /// The lattice for condition checking: the explicit one if given,
    /// otherwise the synthesized one, or `None` when synthesis is infeasible.
    pub fn lattice_for_check(&self) -> Result<Option<QuantizerConfig>> {
        let (a, p, bins) = self.rate_inputs()?;
        let q = &self.quantizer;
        match (q.s, q.zoom_in_steps) {
            (Some(s), Some(ai)) => Ok(Some(QuantizerConfig::new(
                bins,
                s,
                ai,
                q.zoom_out_steps,
                q.threshold_idx.unwrap_or(i64::from(ai)),
            )?)),
            (None, None) => match snap_gains_to_lattice(a, p, bins, q.zoom_out_steps) {
                Ok(mut cfg) => {
                    if let Some(l) = q.threshold_idx {
                        cfg.threshold_idx = l;
                        cfg.validate()?;
                    }
                    Ok(Some(cfg))
                }
                Err(Error::Synthesis(_)) => Ok(None),
                Err(e) => Err(e),
            },
            (Some(_), None) => Err(Error::config("quantizer.A_exp", "required when s is given")),
            (None, Some(_)) => Err(Error::config("quantizer.s", "required when A_exp is given")),
        }
    }
}

/// A config with every default filled in and the lattice fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub scenario: Scenario,
    pub steps: u64,
    pub n_traj: u64,
    pub seed: u64,
    pub m: u32,
    pub k_max: u32,
}

impl ResolvedConfig {
    /// The resolved config written back as a complete config file.
    pub fn to_config(&self) -> ExperimentConfig {
        let sc = &self.scenario;
        ExperimentConfig {
            plant: PlantSection {
                a: sc.plant.a,
                b: sc.plant.b,
                noise_std: sc.plant.noise_std,
                x0: sc.plant.x0,
            },
            quantizer: QuantizerSection::from_config(&sc.quantizer),
            channel: ChannelSection { p: sc.channel.p },
            run: RunSection {
                steps: self.steps,
                n_traj: self.n_traj,
                seed: self.seed,
                m: self.m,
                delta0_idx: Some(sc.delta0_idx),
                k_max: self.k_max,
            },
        }
    }

    /// SHA-256 over the resolved config and the command's own options.
    pub fn hash(&self, command: &str, options: &BTreeMap<&str, String>) -> String {
        let body = toml::to_string(&self.to_config()).expect("config serializes");
        hash_parts(command, &[body.as_bytes()], options)
    }
}

pub(crate) fn hash_parts(command: &str, blobs: &[&[u8]], options: &BTreeMap<&str, String>) -> String {
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    h.update([0]);
    for b in blobs {
        h.update((b.len() as u64).to_le_bytes());
        h.update(b);
    }
    for (k, v) in options {
        h.update(k.as_bytes());
        h.update(b"=");
        h.update(v.as_bytes());
        h.update([0]);
    }
    hex::encode(h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const REFERENCE: &str = "\
[plant]
a = 2.5
b = 1.0
noise_std = 1.0
x0 = 0.0

[quantizer]
K = 4
B_exp = 2

[channel]
p = 0.9

[run]
T = 1000
n_traj = 2
seed = 7
";

    #[test]
    fn reference_config_resolves() {
        let r = ExperimentConfig::parse(REFERENCE).unwrap().resolve(None).unwrap();
        assert_eq!(r.scenario.quantizer.bins, 4);
        assert_eq!(r.scenario.quantizer.zoom_in_steps, 1);
        assert_eq!(r.scenario.delta0_idx, 1);
        assert_eq!(r.m, 2);
        assert_eq!(r.k_max, 10);
        assert_eq!(r.seed, 7);
        assert_eq!(ExperimentConfig::parse(REFERENCE).unwrap().resolve(Some(9)).unwrap().seed, 9);
    }

    #[test]
    fn resolved_roundtrip_is_stable() {
        let r = ExperimentConfig::parse(REFERENCE).unwrap().resolve(None).unwrap();
        let text = toml::to_string(&r.to_config()).unwrap();
        let again = ExperimentConfig::parse(&text).unwrap().resolve(None).unwrap();
        assert_eq!(r, again);
        let opts = BTreeMap::new();
        assert_eq!(r.hash("x", &opts), again.hash("x", &opts));
        assert_ne!(r.hash("x", &opts), r.hash("y", &opts));
    }

    fn field_of(text: &str) -> String {
        let err = ExperimentConfig::parse(text)
            .and_then(|c| c.resolve(None))
            .unwrap_err();
        match err {
            Error::Config { field, .. } => field,
            other => panic!("expected a config error, got {other}"),
        }
    }

    #[test]
    fn errors_name_the_field() {
        assert_eq!(field_of(&REFERENCE.replace("p = 0.9", "p = \"high\"")), "channel.p");
        assert_eq!(field_of(&REFERENCE.replace("p = 0.9", "p = 0.9\nq = 1")), "channel.q");
        assert_eq!(field_of(&REFERENCE.replace("p = 0.9", "p = 1.5")), "channel.p");
        assert_eq!(field_of(&REFERENCE.replace("K = 4", "K = 3")), "quantizer.K");
        assert_eq!(field_of(&REFERENCE.replace("a = 2.5", "a = 0.5")), "plant.a");
        assert_eq!(field_of(&REFERENCE.replace("B_exp = 2", "B_exp = 2\ns = 0.5")), "quantizer.A_exp");
        assert_eq!(field_of(&REFERENCE.replace("seed = 7", "")), "run");
        assert_eq!(field_of(&REFERENCE.replace("T = 1000", "T = 0")), "run.T");
        assert!(ExperimentConfig::parse("[plant\n").is_err());
    }

    #[test]
    fn explicit_lattice() {
        let text = REFERENCE.replace("B_exp = 2", "B_exp = 2\ns = 0.7\nA_exp = 1\nL_idx = 3");
        let r = ExperimentConfig::parse(&text).unwrap().resolve(None).unwrap();
        assert_eq!(r.scenario.quantizer.step, 0.7);
        assert_eq!(r.scenario.quantizer.threshold_idx, 3);
        assert_eq!(r.scenario.delta0_idx, 3);
    }
}
