//! Monte-Carlo estimators over independent trajectories.
//!
//! Sample `i` always runs on stream id `i` (offset per grid point for the
//! drift table), and results are collected in index order, so outputs do not
//! depend on the number of worker threads.

use rayon::prelude::*;
use serde::Serialize;

use super::tail::{analytic_drift_limit, tail_lower_bound, tail_upper_bounds, TailBoundParams};
use crate::closed_loop::{LoopRunner, LoopState, Scenario};
use crate::error::{Error, Result};
use crate::plant::{Lane, RandomStream};
use crate::quantizer::BinSizeIndex;
use crate::stats::{mean_interval, wilson_interval, CompensatedSum, Z_99};

/// Cap on the length of one inter-stop block in the drift estimator.
pub const MAX_INTER_STOP_STEPS: u32 = 100_000;

/// Relative change of the running average between `N/2` and `N` below which
/// a moment trajectory counts as converged.
pub const CONVERGENCE_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterStopSample {
    pub x0: f64,
    /// `T₁`, or `None` if no stop occurred within the step budget.
    pub interval: Option<u32>,
    /// Bin index at `T₁` (or at the end of the budget).
    pub end_idx: i64,
}

/// Runs one block from a perfectly zoomed start: `x₀` uniform on the bin
/// `[0, Δ₀)`, the time-0 channel use forced to succeed, then up to
/// `max_steps` further steps until the next stopping time.
pub fn sample_inter_stop(
    scenario: &Scenario,
    delta0_idx: i64,
    seed: u64,
    stream_id: u64,
    max_steps: u32,
) -> Result<InterStopSample> {
    let cfg = &scenario.quantizer;
    let d0 = BinSizeIndex(delta0_idx);
    let mut init_stream = RandomStream::with_lane(seed, stream_id, Lane::Init);
    let x0 = init_stream.uniform() * d0.size(cfg);
    let init = LoopState { x: x0, delta: d0 };
    let mut runner = LoopRunner::new(scenario, init, seed, stream_id);
    let first = runner.step_forced(true)?;
    debug_assert!(first.is_stop);
    for k in 1..=max_steps {
        let rec = runner.step()?;
        if rec.is_stop {
            return Ok(InterStopSample {
                x0,
                interval: Some(k),
                end_idx: rec.delta_idx,
            });
        }
    }
    Ok(InterStopSample {
        x0,
        interval: None,
        end_idx: runner.state().delta.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailRow {
    pub k: u32,
    pub lower: f64,
    pub empirical: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub upper: f64,
}

impl TailRow {
    /// `lower ≤ empirical + CI` and `empirical − CI ≤ upper`.
    pub fn sandwiched(&self) -> bool {
        self.lower <= self.ci_hi && self.ci_lo <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailTable {
    pub delta0_idx: i64,
    pub delta0: f64,
    pub n_samples: u64,
    pub rows: Vec<TailRow>,
}

impl TailTable {
    pub const CSV_HEADER: &'static str = "k,lower,empirical,ci_lo,ci_hi,upper";

    pub fn all_sandwiched(&self) -> bool {
        self.rows.iter().all(TailRow::sandwiched)
    }

    pub fn csv_rows(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| {
                format!(
                    "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                    r.k, r.lower, r.empirical, r.ci_lo, r.ci_hi, r.upper
                )
            })
            .collect()
    }
}

/// Empirical `P(T₁ ≥ k)` for `k = 1..=k_max` with 99% Wilson intervals,
/// next to the analytic lower and upper bounds.
///
/// When `|a| = 1` the Gaussian constant is undefined and the upper column is
/// the trivial bound 1.
pub fn estimate_stopping_tail(
    scenario: &Scenario,
    delta0_idx: i64,
    n_samples: u64,
    k_max: u32,
    seed: u64,
) -> Result<TailTable> {
    if k_max == 0 || n_samples == 0 {
        return Err(Error::Input("k_max and n_samples must be positive".into()));
    }
    let cfg = &scenario.quantizer;
    let p = scenario.channel.p;
    let delta0 = BinSizeIndex(delta0_idx).size(cfg);
    let budget = k_max - 1;
    let intervals: Vec<u32> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            sample_inter_stop(scenario, delta0_idx, seed, i, budget)
                .map(|s| s.interval.unwrap_or(k_max))
        })
        .collect::<Result<_>>()?;
    // at_least[k] = #{T₁ ≥ k}
    let mut hist = vec![0u64; k_max as usize + 1];
    for t in intervals {
        hist[t as usize] += 1;
    }
    let mut at_least = vec![0u64; k_max as usize + 2];
    for k in (1..=k_max as usize).rev() {
        at_least[k] = at_least[k + 1] + hist[k];
    }
    let upper = match TailBoundParams::new(&scenario.plant, cfg) {
        Ok(tb) => tail_upper_bounds(k_max, delta0, &tb, p),
        Err(_) => vec![1.0; k_max as usize],
    };
    let rows = (1..=k_max)
        .map(|k| {
            let hits = at_least[k as usize];
            let (ci_lo, ci_hi) = wilson_interval(hits, n_samples, Z_99);
            TailRow {
                k,
                lower: tail_lower_bound(k, p),
                empirical: hits as f64 / n_samples as f64,
                ci_lo,
                ci_hi,
                upper: upper[k as usize - 1],
            }
        })
        .collect();
    Ok(TailTable {
        delta0_idx,
        delta0,
        n_samples,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentTrajectory {
    pub stream_id: u64,
    pub steps: u64,
    /// Running average of `|x_t|^m` over the first `N/2` steps.
    pub avg_half: f64,
    /// Running average over all `N` steps.
    pub avg_full: f64,
    /// `|avg_full − avg_half| / avg_full`.
    pub rel_change: f64,
    pub converged: bool,
    /// Step at which the state left the finite floats, if it did.
    pub escaped_at: Option<u64>,
    /// `(n, running average)` at `n = 2^j` and at `n = N`.
    pub checkpoints: Vec<(u64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub m: u32,
    pub steps: u64,
    pub trajectories: Vec<MomentTrajectory>,
    /// Mean of the per-trajectory averages over trajectories that did not escape.
    pub aggregate: f64,
}

impl MomentReport {
    pub fn all_converged(&self) -> bool {
        self.trajectories.iter().all(|t| t.converged)
    }

    pub const SUMMARY_HEADER: &'static str = "stream_id,steps,avg_half,avg_full,rel_change,converged,escaped_at";
    pub const CURVE_HEADER: &'static str = "stream_id,n,running_avg";

    pub fn summary_rows(&self) -> Vec<String> {
        self.trajectories
            .iter()
            .map(|t| {
                format!(
                    "{},{},{:.16e},{:.16e},{:.16e},{},{}",
                    t.stream_id,
                    t.steps,
                    t.avg_half,
                    t.avg_full,
                    t.rel_change,
                    u8::from(t.converged),
                    t.escaped_at.map(|s| s.to_string()).unwrap_or_default()
                )
            })
            .collect()
    }

    pub fn curve_rows(&self) -> Vec<String> {
        self.trajectories
            .iter()
            .flat_map(|t| {
                t.checkpoints
                    .iter()
                    .map(move |(n, v)| format!("{},{},{:.16e}", t.stream_id, n, v))
            })
            .collect()
    }
}

fn moment_trajectory(scenario: &Scenario, m: u32, steps: u64, seed: u64, stream_id: u64) -> MomentTrajectory {
    let mut runner = LoopRunner::new(scenario, scenario.initial_state(), seed, stream_id);
    let mut sum = CompensatedSum::default();
    let half = steps / 2;
    let mut avg_half = f64::NAN;
    let mut checkpoints = Vec::new();
    let mut next_checkpoint = 1u64;
    let mut escaped_at = None;
    let mut done = 0u64;
    while done < steps {
        match runner.step() {
            Ok(rec) => {
                sum.add(rec.x.abs().powi(m as i32));
                done += 1;
                if done == half {
                    avg_half = sum.value() / done as f64;
                }
                if done == next_checkpoint || done == steps {
                    checkpoints.push((done, sum.value() / done as f64));
                    if done == next_checkpoint {
                        next_checkpoint *= 2;
                    }
                }
            }
            Err(Error::NumericEscape { step, .. }) => {
                escaped_at = Some(step);
                break;
            }
            // The driver only fails on numeric escape or a feedback mismatch;
            // treat the latter as an escape too so the run is reported, not lost.
            Err(_) => {
                escaped_at = Some(done);
                break;
            }
        }
    }
    let avg_full = if done > 0 { sum.value() / done as f64 } else { f64::NAN };
    let rel_change = ((avg_full - avg_half) / avg_full).abs();
    MomentTrajectory {
        stream_id,
        steps: done,
        avg_half,
        avg_full,
        rel_change,
        converged: escaped_at.is_none() && rel_change < CONVERGENCE_TOLERANCE,
        escaped_at,
        checkpoints,
    }
}

/// Time averages `(1/N) Σ |x_t|^m` over `n_traj` independent trajectories of
/// `steps` steps each, with the half-sample convergence diagnostic.
pub fn estimate_moment(scenario: &Scenario, m: u32, steps: u64, n_traj: u64, seed: u64) -> Result<MomentReport> {
    if steps < 2 || n_traj == 0 {
        return Err(Error::Input("need steps >= 2 and n_traj >= 1".into()));
    }
    let trajectories: Vec<MomentTrajectory> = (0..n_traj)
        .into_par_iter()
        .map(|i| moment_trajectory(scenario, m, steps, seed, i))
        .collect();
    let finite: Vec<f64> = trajectories
        .iter()
        .filter(|t| t.escaped_at.is_none())
        .map(|t| t.avg_full)
        .collect();
    let mut agg = CompensatedSum::default();
    finite.iter().for_each(|&v| agg.add(v));
    let aggregate = if finite.is_empty() {
        f64::INFINITY
    } else {
        agg.value() / finite.len() as f64
    };
    Ok(MomentReport {
        m,
        steps,
        trajectories,
        aggregate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftRow {
    pub delta0_idx: i64,
    pub delta0: f64,
    pub n: u64,
    /// Mean of `log Δ²_(T₁) − log Δ²_0`.
    pub drift: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub analytic_limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftTable {
    pub rows: Vec<DriftRow>,
}

impl DriftTable {
    pub const CSV_HEADER: &'static str = "delta0_idx,delta0,n,drift,ci_lo,ci_hi,analytic_limit";

    pub fn csv_rows(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| {
                format!(
                    "{},{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e}",
                    r.delta0_idx, r.delta0, r.n, r.drift, r.ci_lo, r.ci_hi, r.analytic_limit
                )
            })
            .collect()
    }
}

/// Monte-Carlo drift of `V₀(x, Δ) = log Δ² + B₀` between consecutive
/// stopping times, for each starting bin index on the grid. The constant
/// `B₀` cancels in the difference. Intervals are 99% normal intervals.
pub fn estimate_drift_at_stops(
    scenario: &Scenario,
    n_samples: u64,
    delta0_grid: &[i64],
    seed: u64,
) -> Result<DriftTable> {
    if n_samples < 2 {
        return Err(Error::Input("need at least two samples per grid point".into()));
    }
    let cfg = &scenario.quantizer;
    if let Some(&bad) = delta0_grid.iter().find(|&&i| !BinSizeIndex(i).is_above_floor(cfg)) {
        return Err(Error::Input(format!(
            "grid index {bad} lies below the floor index {}",
            cfg.floor_idx()
        )));
    }
    let unit = 2.0 * std::f64::consts::LN_2 * cfg.step;
    let limit = analytic_drift_limit(cfg, scenario.channel.p);
    let mut rows = Vec::with_capacity(delta0_grid.len());
    for (g, &idx) in delta0_grid.iter().enumerate() {
        let base = (g as u64) << 40;
        let drifts: Vec<f64> = (0..n_samples)
            .into_par_iter()
            .map(|i| {
                let s = sample_inter_stop(scenario, idx, seed, base + i, MAX_INTER_STOP_STEPS)?;
                if s.interval.is_none() {
                    return Err(Error::Input(format!(
                        "no stopping time within {MAX_INTER_STOP_STEPS} steps from idx {idx}"
                    )));
                }
                Ok(unit * (s.end_idx - idx) as f64)
            })
            .collect::<Result<_>>()?;
        let (drift, ci_lo, ci_hi) = mean_interval(&drifts, Z_99);
        rows.push(DriftRow {
            delta0_idx: idx,
            delta0: BinSizeIndex(idx).size(cfg),
            n: n_samples,
            drift,
            ci_lo,
            ci_hi,
            analytic_limit: limit,
        });
    }
    Ok(DriftTable { rows })
}
