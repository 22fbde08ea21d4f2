use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::config::{hash_parts, ExperimentConfig, QuantizerSection, ResolvedConfig};
use crate::analysis::{
    check_conditions, check_rate_conditions, estimate_drift_at_stops, estimate_moment, estimate_stopping_tail,
    min_bins_for_moment, DriftTable, MomentReport, TailTable,
};
use crate::closed_loop::simulate;
use crate::drift_lab::io::{read_chain, read_spec};
use crate::drift_lab::{
    kac_moment, stationary_dist, supermartingale_check, verify_pi_f_bound, verify_random_time_drift, DriftReport,
    EnumerationLimits,
};
use crate::error::{Error, Result};
use crate::quantizer::snap_gains_to_lattice;

/// Result of one subcommand: whether its checks passed and which files it wrote.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub passed: bool,
    pub written: Vec<PathBuf>,
}

fn write_csv(path: &Path, hash: &str, header: &str, rows: &[String]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# config_hash={hash}")?;
    writeln!(w, "{header}")?;
    for r in rows {
        writeln!(w, "{r}")?;
    }
    w.flush()?;
    Ok(())
}

fn prepare_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

/// Checks every stability condition for the configured plant, channel and
/// quantizer. When no lattice exists the two lattice conditions are reported
/// as unavailable and count as failed.
pub fn cmd_check(cfg: &ExperimentConfig, out_dir: &Path, out: &mut dyn Write) -> Result<Outcome> {
    let (a, p, bins) = cfg.rate_inputs()?;
    let m = cfg.run.m;
    if m == 0 {
        return Err(Error::config("run.m", "must be >= 1"));
    }
    let lattice = cfg.lattice_for_check()?;
    let report = match &lattice {
        Some(q) => check_conditions(a, p, q, m),
        None => check_rate_conditions(a, p, bins, m),
    };
    writeln!(out, "{report}")?;
    if lattice.is_none() {
        writeln!(out, "  no lattice satisfies the zoom inequalities for K = {bins}")?;
    }
    let mut resolved = cfg.clone();
    if let Some(q) = &lattice {
        resolved.quantizer = QuantizerSection::from_config(q);
    }
    let body = toml::to_string(&resolved).expect("config serializes");
    let hash = hash_parts("check", &[body.as_bytes()], &BTreeMap::new());
    prepare_dir(out_dir)?;
    let path = out_dir.join("conditions.csv");
    write_csv(&path, &hash, crate::analysis::ConditionReport::CSV_HEADER, &report.csv_rows())?;
    Ok(Outcome {
        passed: report.all_ok(),
        written: vec![path],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub a: f64,
    pub p: f64,
    /// Granular bins `K`; the smallest even count meeting the moment condition when `None`.
    pub bins: Option<u32>,
    pub m: u32,
    pub zoom_out_steps: u32,
}

/// Picks `K` (if not given) and a lattice, then writes a `[quantizer]`
/// section that can be pasted into a config file.
pub fn cmd_synth(opts: &SynthOptions, out_dir: &Path, out: &mut dyn Write) -> Result<Outcome> {
    let infeasible = |out: &mut dyn Write, why: &str| -> Result<Outcome> {
        writeln!(out, "infeasible: {why}")?;
        Ok(Outcome {
            passed: false,
            written: vec![],
        })
    };
    let bins = match opts.bins {
        Some(k) => k,
        None => match min_bins_for_moment(opts.a, opts.p, opts.m) {
            Ok(total) => {
                let k = total - 1;
                k + k % 2
            }
            Err(Error::Synthesis(why)) => return infeasible(out, &why),
            Err(e) => return Err(e),
        },
    };
    let cfg = match snap_gains_to_lattice(opts.a, opts.p, bins, opts.zoom_out_steps) {
        Ok(cfg) => cfg,
        Err(Error::Synthesis(why)) => return infeasible(out, &why),
        Err(e) => return Err(e),
    };
    let report = check_conditions(opts.a, opts.p, &cfg, opts.m);
    writeln!(
        out,
        "K = {} ({} symbols), s = {:.16}, A_exp = {}, B_exp = {}, L_idx = {}",
        cfg.bins,
        cfg.alphabet_size(),
        cfg.step,
        cfg.zoom_in_steps,
        cfg.zoom_out_steps,
        cfg.threshold_idx
    )?;
    writeln!(
        out,
        "alpha = {:.6}, |a|+delta = {:.6}, alpha*(|a|+delta)^(1/p-1) = {:.6}",
        cfg.alpha(),
        cfg.zoom_out_gain(),
        cfg.rbdd3_value(opts.p)
    )?;
    writeln!(out, "{report}")?;

    #[derive(serde::Serialize)]
    struct Section {
        quantizer: QuantizerSection,
    }
    let body = toml::to_string(&Section {
        quantizer: QuantizerSection::from_config(&cfg),
    })
    .expect("section serializes");
    prepare_dir(out_dir)?;
    let path = out_dir.join("quantizer.toml");
    let mut w = BufWriter::new(File::create(&path)?);
    writeln!(
        w,
        "# a = {}, p = {}, m = {}; alpha = {:.10}, |a|+delta = {:.10}",
        opts.a,
        opts.p,
        opts.m,
        cfg.alpha(),
        cfg.zoom_out_gain()
    )?;
    write!(w, "{body}")?;
    w.flush()?;
    Ok(Outcome {
        passed: report.all_ok(),
        written: vec![path],
    })
}

/// Writes one trajectory of `T` steps to `trajectory.csv`.
pub fn cmd_simulate(rc: &ResolvedConfig, stream_id: u64, out_dir: &Path, out: &mut dyn Write) -> Result<Outcome> {
    let traj = simulate(&rc.scenario, rc.steps, rc.seed, stream_id)?;
    let opts = BTreeMap::from([("stream", stream_id.to_string())]);
    let hash = rc.hash("simulate", &opts);
    prepare_dir(out_dir)?;
    let path = out_dir.join("trajectory.csv");
    let mut w = BufWriter::new(File::create(&path)?);
    writeln!(w, "# config_hash={hash}")?;
    traj.write_csv(&mut w)?;
    w.flush()?;
    let peak = traj.records.iter().map(|r| r.x.abs()).fold(0.0, f64::max);
    let excursions = traj.excursion_count();
    writeln!(out, "steps {}, stopping times {}", traj.records.len(), traj.stop_times.len())?;
    writeln!(
        out,
        "excursions {} ({:.3} per 1000 steps), max |x| = {:.6e}",
        excursions,
        excursions as f64 * 1000.0 / traj.records.len() as f64,
        peak
    )?;
    Ok(Outcome {
        passed: true,
        written: vec![path],
    })
}

/// Empirical inter-stop tail against the analytic bounds, in `stoptimes.csv`.
pub fn cmd_stoptimes(
    rc: &ResolvedConfig,
    samples: u64,
    k_max: Option<u32>,
    delta0_idx: Option<i64>,
    out_dir: &Path,
    out: &mut dyn Write,
) -> Result<Outcome> {
    let k_max = k_max.unwrap_or(rc.k_max);
    let idx = delta0_idx.unwrap_or(rc.scenario.delta0_idx);
    if idx < rc.scenario.quantizer.threshold_idx {
        return Err(Error::config(
            "delta0_idx",
            format!("must be >= L_idx = {}", rc.scenario.quantizer.threshold_idx),
        ));
    }
    let table = estimate_stopping_tail(&rc.scenario, idx, samples, k_max, rc.seed)?;
    let opts = BTreeMap::from([
        ("delta0_idx", idx.to_string()),
        ("k_max", k_max.to_string()),
        ("samples", samples.to_string()),
    ]);
    let hash = rc.hash("stoptimes", &opts);
    prepare_dir(out_dir)?;
    let path = out_dir.join("stoptimes.csv");
    write_csv(&path, &hash, TailTable::CSV_HEADER, &table.csv_rows())?;
    writeln!(out, "Delta_0 = {:.6} (idx {}), {} samples", table.delta0, idx, samples)?;
    writeln!(out, "{:>4} {:>12} {:>12} {:>12} {:>12} {:>12}", "k", "lower", "empirical", "ci_lo", "ci_hi", "upper")?;
    for r in &table.rows {
        writeln!(
            out,
            "{:>4} {:>12.6e} {:>12.6e} {:>12.6e} {:>12.6e} {:>12.6e}{}",
            r.k,
            r.lower,
            r.empirical,
            r.ci_lo,
            r.ci_hi,
            r.upper,
            if r.sandwiched() { "" } else { "  OUTSIDE" }
        )?;
    }
    Ok(Outcome {
        passed: table.all_sandwiched(),
        written: vec![path],
    })
}

/// Running averages of `|x|^m`: per-trajectory summary in `moments.csv`,
/// checkpoint curves in `moments_curve.csv`.
pub fn cmd_moments(rc: &ResolvedConfig, out_dir: &Path, out: &mut dyn Write) -> Result<Outcome> {
    let report = estimate_moment(&rc.scenario, rc.m, rc.steps, rc.n_traj, rc.seed)?;
    let hash = rc.hash("moments", &BTreeMap::new());
    prepare_dir(out_dir)?;
    let summary = out_dir.join("moments.csv");
    let curve = out_dir.join("moments_curve.csv");
    write_csv(&summary, &hash, MomentReport::SUMMARY_HEADER, &report.summary_rows())?;
    write_csv(&curve, &hash, MomentReport::CURVE_HEADER, &report.curve_rows())?;
    for t in &report.trajectories {
        writeln!(
            out,
            "stream {:>3}: avg {:.6e}, half-sample change {:.4}{}",
            t.stream_id,
            t.avg_full,
            t.rel_change,
            match t.escaped_at {
                Some(s) => format!("  escaped at step {s}"),
                None if t.converged => String::new(),
                None => "  not converged".into(),
            }
        )?;
    }
    writeln!(out, "aggregate E|x|^{} ~ {:.6e}", rc.m, report.aggregate)?;
    Ok(Outcome {
        passed: report.all_converged(),
        written: vec![summary, curve],
    })
}

/// Drift of `log Δ²` between stops over a grid of starting bin indices, in `drift.csv`.
///
/// Passes when every estimate at or beyond the first negative one stays
/// negative and the largest-`Δ₀` interval covers the analytic limit.
pub fn cmd_drift(rc: &ResolvedConfig, samples: u64, grid: &[i64], out_dir: &Path, out: &mut dyn Write) -> Result<Outcome> {
    if grid.is_empty() {
        return Err(Error::Input("empty delta0 grid".into()));
    }
    let table = estimate_drift_at_stops(&rc.scenario, samples, grid, rc.seed)?;
    let grid_str = grid.iter().map(|g| g.to_string()).collect::<Vec<_>>().join(",");
    let opts = BTreeMap::from([("grid", grid_str), ("samples", samples.to_string())]);
    let hash = rc.hash("drift", &opts);
    prepare_dir(out_dir)?;
    let path = out_dir.join("drift.csv");
    write_csv(&path, &hash, DriftTable::CSV_HEADER, &table.csv_rows())?;
    writeln!(out, "{:>6} {:>14} {:>12} {:>12} {:>12}", "idx", "Delta_0", "drift", "ci_lo", "ci_hi")?;
    for r in &table.rows {
        writeln!(
            out,
            "{:>6} {:>14.6e} {:>12.6} {:>12.6} {:>12.6}",
            r.delta0_idx, r.delta0, r.drift, r.ci_lo, r.ci_hi
        )?;
    }
    let limit = table.rows[0].analytic_limit;
    writeln!(out, "analytic limit {limit:.6}")?;
    let mut sorted: Vec<_> = table.rows.iter().collect();
    sorted.sort_by_key(|r| r.delta0_idx);
    let first_neg = sorted.iter().position(|r| r.ci_hi < 0.0);
    let stays_negative = first_neg.is_some_and(|i| sorted[i..].iter().all(|r| r.ci_hi < 0.0));
    let last = sorted.last().expect("non-empty grid");
    let covers = last.ci_lo <= limit && limit <= last.ci_hi;
    Ok(Outcome {
        passed: stays_negative && covers,
        written: vec![path],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftLabOptions {
    pub chain: PathBuf,
    pub spec: PathBuf,
    /// Overrides the spec file's horizon.
    pub horizon: Option<usize>,
    pub limits: EnumerationLimits,
}

/// Runs every finite-chain check on a chain and a drift spec: stationary
/// distribution, Kac's formula on `C`, the random-time drift inequalities,
/// the supermartingale enumeration and the `π(f)` bound.
pub fn cmd_driftlab(opts: &DriftLabOptions, out_dir: &Path, out: &mut dyn Write) -> Result<Outcome> {
    let chain_text = std::fs::read(&opts.chain)?;
    let spec_text = std::fs::read(&opts.spec)?;
    let chain = read_chain(&opts.chain)?;
    let input = read_spec(&opts.spec, chain.len())?;
    let spec = &input.spec;
    let horizon = opts.horizon.unwrap_or(input.horizon);

    let pi = stationary_dist(&chain)?;
    writeln!(out, "states {}", chain.len())?;
    let pi_str: Vec<String> = pi.iter().map(|x| format!("{x:.6}")).collect();
    writeln!(out, "pi = [{}]", pi_str.join(", "))?;

    let (lhs, rhs) = kac_moment(&chain, &spec.f, &spec.c)?;
    writeln!(out, "Kac on C: pi(f) = {lhs:.12}, excursion form = {rhs:.12}, gap {:.3e}", (lhs - rhs).abs())?;

    let drift = verify_random_time_drift(&chain, spec)?;
    writeln!(
        out,
        "random-time drift: drift {}, cost {}, b_min = {:.6} (spec b = {})",
        ok_str(drift.drift_ok),
        ok_str(drift.cost_ok),
        drift.b_min,
        spec.b
    )?;
    let failing = drift.failing_states();
    if !failing.is_empty() {
        writeln!(out, "  failing states {failing:?}")?;
    }

    let sm = supermartingale_check(&chain, spec, horizon, opts.limits)?;
    writeln!(
        out,
        "supermartingale (horizon {}): {}, {} prefixes, min slack {:.6}, terminal gain {:.3e}, pruned mass {:.3e}{}",
        sm.horizon,
        ok_str(sm.ok()),
        sm.prefixes,
        sm.min_slack,
        sm.max_terminal_gain,
        sm.pruned_mass,
        if sm.equality { ", equality throughout" } else { "" }
    )?;
    for v in &sm.violations {
        writeln!(out, "  violation at state {} (depth {}): slack {:.6}", v.state, v.depth, v.slack)?;
    }

    let pf = verify_pi_f_bound(&chain, spec)?;
    writeln!(
        out,
        "pi(f) = {:.12} <= b_f = {:.12}: {} (V3 residual off C {:.3e})",
        pf.pi_f,
        pf.b_f,
        ok_str(pf.ok),
        pf.v3_residual_off_c
    )?;

    let options = BTreeMap::from([
        ("cap", opts.limits.cap.to_string()),
        ("horizon", horizon.to_string()),
        ("prune", format!("{:e}", opts.limits.prune)),
    ]);
    let hash = hash_parts("driftlab", &[&chain_text, &spec_text], &options);
    prepare_dir(out_dir)?;
    let path = out_dir.join("driftlab.csv");
    write_csv(&path, &hash, DriftReport::CSV_HEADER, &drift.csv_rows())?;
    Ok(Outcome {
        passed: drift.ok() && sm.ok() && pf.ok,
        written: vec![path],
    })
}

fn ok_str(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAILED"
    }
}
