//! The coupled chain `(x_t, Δ_t)`: one-step transition, trajectory driver and
//! stopping-time extraction.
//!
//! Step order is fixed: observe, quantize, transmit, decode, control, plant
//! update, bin update.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::channel::{channel_success, decode, decoder_update, ChannelOutput, ChannelParams};
use crate::error::{Error, Result};
use crate::plant::{sample_noise, step_plant, Lane, PlantParams, RandomStream};
use crate::quantizer::{overflow_ratio, quantize, update_bin, BinSizeIndex, QuantizerConfig};

/// Plant, quantizer and channel parameters plus the initial bin index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub plant: PlantParams,
    pub quantizer: QuantizerConfig,
    pub channel: ChannelParams,
    pub delta0_idx: i64,
}

impl Scenario {
    /// Checks every structural invariant. The rate inequalities are not
    /// enforced here; see [`QuantizerConfig::validate_for`].
    pub fn new(
        plant: PlantParams,
        quantizer: QuantizerConfig,
        channel: ChannelParams,
        delta0_idx: i64,
    ) -> Result<Self> {
        plant.validate()?;
        quantizer.validate()?;
        channel.validate()?;
        if channel.alphabet_size != quantizer.alphabet_size() {
            return Err(Error::config(
                "channel.alphabet_size",
                format!("must equal K + 1 = {}", quantizer.alphabet_size()),
            ));
        }
        if quantizer.zoom_out_gain() <= plant.a.abs() {
            return Err(Error::config(
                "quantizer",
                format!(
                    "zoom-out gain {} must exceed |a| = {}",
                    quantizer.zoom_out_gain(),
                    plant.a.abs()
                ),
            ));
        }
        if delta0_idx < quantizer.threshold_idx {
            return Err(Error::config(
                "run.delta0_idx",
                format!("initial bin must satisfy Delta_0 >= L (idx >= {})", quantizer.threshold_idx),
            ));
        }
        Ok(Self {
            plant,
            quantizer,
            channel,
            delta0_idx,
        })
    }

    pub fn initial_state(&self) -> LoopState {
        LoopState {
            x: self.plant.x0,
            delta: BinSizeIndex(self.delta0_idx),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopState {
    pub x: f64,
    pub delta: BinSizeIndex,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: u64,
    pub x: f64,
    /// Realized bin size `Δ_t`.
    pub delta: f64,
    pub delta_idx: i64,
    pub h: f64,
    /// `Υ_t`.
    pub erasure_ok: bool,
    pub symbol: u32,
    pub x_hat: f64,
    pub u: f64,
    pub is_stop: bool,
}

/// One transition of the chain given the noise sample and the channel outcome.
///
/// Returns the next state, the record for time `t` and the channel output (for
/// decoder-side bookkeeping).
pub fn loop_step(
    state: LoopState,
    noise: f64,
    erasure_ok: bool,
    t: u64,
    scenario: &Scenario,
) -> Result<(LoopState, StepRecord, ChannelOutput)> {
    let cfg = &scenario.quantizer;
    let plant = &scenario.plant;
    let h = overflow_ratio(cfg, state.delta, state.x);
    let q = quantize(cfg, state.delta, state.x).map_err(|_| Error::NumericEscape {
        step: t,
        value: state.x,
    })?;
    let out = if erasure_ok {
        ChannelOutput::Received(q.symbol)
    } else {
        ChannelOutput::Erased
    };
    let (x_hat, _) = decode(out, state.delta, cfg);
    let u = -(plant.a / plant.b) * x_hat;
    let x_next = step_plant(plant, state.x, u, noise);
    if !x_next.is_finite() {
        return Err(Error::NumericEscape {
            step: t,
            value: x_next,
        });
    }
    debug_assert!({
        let upsilon = if erasure_ok { 1.0 } else { 0.0 };
        let alt = plant.a * (state.x - upsilon * q.value) + noise;
        let scale = (plant.a * state.x).abs() + (plant.b * u).abs() + noise.abs();
        (alt - x_next).abs() <= 8.0 * f64::EPSILON * scale.max(f64::MIN_POSITIVE)
    });
    let delta_next = update_bin(cfg, state.delta, h, erasure_ok);
    let record = StepRecord {
        t,
        x: state.x,
        delta: state.delta.size(cfg),
        delta_idx: state.delta.0,
        h,
        erasure_ok,
        symbol: q.symbol,
        x_hat,
        u,
        is_stop: h.abs() <= 1.0 && erasure_ok,
    };
    Ok((
        LoopState {
            x: x_next,
            delta: delta_next,
        },
        record,
        out,
    ))
}

/// Streaming driver for one trajectory. Owns the noise and channel
/// substreams and a decoder-side copy of the bin index.
#[derive(Debug, Clone)]
pub struct LoopRunner<'a> {
    scenario: &'a Scenario,
    state: LoopState,
    decoder_delta: BinSizeIndex,
    noise: RandomStream,
    channel: RandomStream,
    t: u64,
}

impl<'a> LoopRunner<'a> {
    pub fn new(scenario: &'a Scenario, init: LoopState, seed: u64, stream_id: u64) -> Self {
        Self {
            scenario,
            state: init,
            decoder_delta: init.delta,
            noise: RandomStream::with_lane(seed, stream_id, Lane::Noise),
            channel: RandomStream::with_lane(seed, stream_id, Lane::Channel),
            t: 0,
        }
    }

    pub fn state(&self) -> LoopState {
        self.state
    }

    pub fn time(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self) -> Result<StepRecord> {
        self.step_inner(None)
    }

    /// Steps with the channel outcome forced. The channel draw is still
    /// consumed so stream alignment does not depend on forcing.
    pub fn step_forced(&mut self, erasure_ok: bool) -> Result<StepRecord> {
        self.step_inner(Some(erasure_ok))
    }

    fn step_inner(&mut self, forced: Option<bool>) -> Result<StepRecord> {
        let d = sample_noise(&self.scenario.plant, &mut self.noise);
        let drawn = channel_success(&self.scenario.channel, &mut self.channel);
        let ok = forced.unwrap_or(drawn);
        let (next, rec, out) = loop_step(self.state, d, ok, self.t, self.scenario)?;
        let decoder_next = decoder_update(&self.scenario.quantizer, self.decoder_delta, out);
        if decoder_next != next.delta {
            return Err(Error::FeedbackMismatch {
                step: self.t,
                encoder: next.delta.0,
                decoder: decoder_next.0,
            });
        }
        self.decoder_delta = decoder_next;
        self.state = next;
        self.t += 1;
        Ok(rec)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub scenario: Scenario,
    pub seed: u64,
    pub stream_id: u64,
    pub records: Vec<StepRecord>,
    pub stop_times: Vec<u64>,
}

pub const TRAJECTORY_CSV_HEADER: &str = "t,x,delta,h,erasure_ok,symbol,x_hat,u,is_stop";

impl Trajectory {
    /// Writes one row per step. Floats use 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{TRAJECTORY_CSV_HEADER}")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{:.16e},{:.16e},{:.16e},{},{},{:.16e},{:.16e},{}",
                r.t,
                r.x,
                r.delta,
                r.h,
                u8::from(r.erasure_ok),
                r.symbol,
                r.x_hat,
                r.u,
                u8::from(r.is_stop)
            )?;
        }
        Ok(())
    }

    /// Number of zoom-out peaks: maximal runs of non-stop steps.
    pub fn excursion_count(&self) -> usize {
        let mut count = 0;
        let mut inside = false;
        for r in &self.records {
            if !r.is_stop && !inside {
                count += 1;
            }
            inside = !r.is_stop;
        }
        count
    }
}

/// Runs `steps` transitions from the scenario's initial state.
pub fn simulate(scenario: &Scenario, steps: u64, seed: u64, stream_id: u64) -> Result<Trajectory> {
    if steps == 0 {
        return Err(Error::Input("trajectory length must be >= 1".into()));
    }
    let mut runner = LoopRunner::new(scenario, scenario.initial_state(), seed, stream_id);
    let mut records = Vec::with_capacity(steps as usize);
    let mut stop_times = Vec::new();
    for _ in 0..steps {
        let rec = runner.step()?;
        if rec.is_stop {
            stop_times.push(rec.t);
        }
        records.push(rec);
    }
    Ok(Trajectory {
        scenario: *scenario,
        seed,
        stream_id,
        records,
        stop_times,
    })
}

/// Indices whose record is a stopping time, in order.
pub fn detect_stopping_times(traj: &Trajectory) -> Vec<u64> {
    stop_indices(&traj.records)
}

pub fn stop_indices(records: &[StepRecord]) -> Vec<u64> {
    records.iter().filter(|r| r.is_stop).map(|r| r.t).collect()
}
