//! Config-driven experiment runner behind the `driftstab` binary.
//!
//! Exit codes: 0 on success, 1 when a check fails under `--strict` or a
//! computation fails, 2 on input errors.

mod commands;
mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub use commands::{
    cmd_check, cmd_drift, cmd_driftlab, cmd_moments, cmd_simulate, cmd_stoptimes, cmd_synth, DriftLabOptions,
    Outcome, SynthOptions,
};
pub use config::{ChannelSection, ExperimentConfig, PlantSection, QuantizerSection, ResolvedConfig, RunSection};

use crate::drift_lab::EnumerationLimits;
use crate::error::{Error, Result};

pub const SEED_ENV: &str = "DRIFTSTAB_SEED";

#[derive(Debug, Parser)]
#[command(name = "driftstab", version, about = "Drift criteria and zoom-quantized control experiments")]
pub struct Cli {
    /// Worker threads for Monte-Carlo batches (default: logical cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Exit with status 1 when the subcommand's check fails.
    #[arg(long, global = true)]
    pub strict: bool,

    /// Directory for CSV output.
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Experiment config (TOML).
    #[arg(long, short)]
    pub config: PathBuf,

    /// Overrides `run.seed`.
    #[arg(long, env = SEED_ENV)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the stability conditions.
    Check(ConfigArgs),
    /// Choose a bin count and lattice for a plant and channel.
    Synth {
        #[arg(long, allow_hyphen_values = true)]
        a: f64,
        #[arg(long)]
        p: f64,
        /// Granular bins K (even); smallest admissible when omitted.
        #[arg(long = "bins", short = 'K')]
        bins: Option<u32>,
        #[arg(long, default_value_t = 2)]
        m: u32,
        #[arg(long = "b-exp", default_value_t = 2)]
        b_exp: u32,
    },
    /// Write one closed-loop trajectory.
    Simulate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value_t = 0)]
        stream: u64,
        /// Overrides `run.T`.
        #[arg(long)]
        steps: Option<u64>,
    },
    /// Inter-stop tail against its analytic bounds.
    Stoptimes {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        /// Overrides `run.k_max`.
        #[arg(long)]
        kmax: Option<u32>,
        /// Overrides `run.delta0_idx`.
        #[arg(long = "delta0-idx")]
        delta0_idx: Option<i64>,
    },
    /// Time-averaged moments with the half-sample diagnostic.
    Moments {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Overrides `run.T`.
        #[arg(long)]
        steps: Option<u64>,
        /// Overrides `run.n_traj`.
        #[arg(long = "n-traj")]
        n_traj: Option<u64>,
        /// Overrides `run.m`.
        #[arg(long)]
        m: Option<u32>,
    },
    /// Drift of log Δ² between stopping times over a grid of Δ₀.
    Drift {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value_t = 20_000)]
        samples: u64,
        /// Lattice indices, as `lo:hi` (inclusive) or a comma list. Default: floor to floor + 30.
        #[arg(long)]
        grid: Option<String>,
    },
    /// Exact drift checks on a finite chain.
    Driftlab {
        /// Transition matrix, one row per line.
        #[arg(long)]
        chain: PathBuf,
        /// Drift spec (TOML).
        #[arg(long)]
        spec: PathBuf,
        /// Overrides the spec's enumeration horizon.
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long, default_value_t = 1e-12)]
        prune: f64,
        #[arg(long, default_value_t = 5_000_000)]
        cap: usize,
    },
}

fn parse_grid(text: &str) -> Result<Vec<i64>> {
    let bad = || Error::Input(format!("bad grid {text:?}; use lo:hi or a comma list"));
    if let Some((lo, hi)) = text.split_once(':') {
        let lo: i64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: i64 = hi.trim().parse().map_err(|_| bad())?;
        if hi < lo {
            return Err(bad());
        }
        Ok((lo..=hi).collect())
    } else {
        text.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect()
    }
}

fn resolve(args: &ConfigArgs) -> Result<ResolvedConfig> {
    ExperimentConfig::load(&args.config)?.resolve(args.seed)
}

/// Runs a parsed command line, writing reports to `out`.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<Outcome> {
    let dir = cli.out_dir.as_path();
    match &cli.command {
        Command::Check(args) => {
            let mut cfg = ExperimentConfig::load(&args.config)?;
            if let Some(s) = args.seed {
                cfg.run.seed = s;
            }
            cmd_check(&cfg, dir, out)
        }
        Command::Synth { a, p, bins, m, b_exp } => {
            let opts = SynthOptions {
                a: *a,
                p: *p,
                bins: *bins,
                m: *m,
                zoom_out_steps: *b_exp,
            };
            cmd_synth(&opts, dir, out)
        }
        Command::Simulate { cfg, stream, steps } => {
            let mut rc = resolve(cfg)?;
            if let Some(t) = steps {
                rc.steps = *t;
            }
            cmd_simulate(&rc, *stream, dir, out)
        }
        Command::Stoptimes {
            cfg,
            samples,
            kmax,
            delta0_idx,
        } => cmd_stoptimes(&resolve(cfg)?, *samples, *kmax, *delta0_idx, dir, out),
        Command::Moments { cfg, steps, n_traj, m } => {
            let mut rc = resolve(cfg)?;
            rc.steps = steps.unwrap_or(rc.steps);
            rc.n_traj = n_traj.unwrap_or(rc.n_traj);
            rc.m = m.unwrap_or(rc.m);
            cmd_moments(&rc, dir, out)
        }
        Command::Drift { cfg, samples, grid } => {
            let rc = resolve(cfg)?;
            let grid = match grid {
                Some(g) => parse_grid(g)?,
                None => {
                    let floor = rc.scenario.quantizer.floor_idx();
                    (floor..=floor + 30).collect()
                }
            };
            cmd_drift(&rc, *samples, &grid, dir, out)
        }
        Command::Driftlab {
            chain,
            spec,
            horizon,
            prune,
            cap,
        } => {
            let opts = DriftLabOptions {
                chain: chain.clone(),
                spec: spec.clone(),
                horizon: *horizon,
                limits: EnumerationLimits {
                    prune: *prune,
                    cap: *cap,
                },
            };
            cmd_driftlab(&opts, dir, out)
        }
    }
}

/// Entry point for the binary: parses arguments, sizes the thread pool,
/// runs the command and maps the outcome to an exit code.
pub fn main_entry() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be >= 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot size thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match execute(&cli, &mut out) {
        Ok(outcome) => {
            for p in &outcome.written {
                let _ = writeln!(out, "wrote {}", p.display());
            }
            if cli.strict && !outcome.passed {
                eprintln!("check failed");
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 1 })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("2:5").unwrap(), vec![2, 3, 4, 5]);
        assert_eq!(parse_grid("1, 4,9").unwrap(), vec![1, 4, 9]);
        assert!(parse_grid("5:2").is_err());
        assert!(parse_grid("a").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
