//! Acceptance run: one PASS/FAIL line per criterion, every threshold pinned
//! below. Exits non-zero when any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use driftstab::analysis::{
    check_conditions, estimate_drift_at_stops, estimate_moment, estimate_stopping_tail, min_bins_for_second_moment,
    MomentReport,
};
use driftstab::channel::ChannelParams;
use driftstab::closed_loop::Scenario;
use driftstab::drift_lab::{
    hitting_cost, kac_moment, supermartingale_check, verify_random_time_drift, DriftSpec, EnumerationLimits,
    FiniteChain, StopRule,
};
use driftstab::plant::{PlantParams, RandomStream};
use driftstab::quantizer::{snap_gains_to_lattice, QuantizerConfig};

const A: f64 = 2.5;
const P: f64 = 0.9;
const SEED: u64 = 20_240_917;

// 1. condition arithmetic
const ARITH_TOL: f64 = 1e-12;
const MOMENT_EXACT: f64 = 625.0 / 640.0;
const MINERO_EXACT: f64 = 850.0 / 1000.0;
const MIN_BINS: u32 = 5;

// 2. lattice synthesis
const ALPHA_FLOOR: f64 = 0.625;
const RBDD3_TARGET: f64 = 0.698;
const RBDD3_TOL: f64 = 0.01;

// 3. stopping-time sandwich
const TAIL_LOG2_DELTA0: f64 = 10.0;
const TAIL_SAMPLES: u64 = 100_000;
const TAIL_KMAX: u32 = 10;
const TAIL_BUDGET: Duration = Duration::from_secs(60);

// 4. drift at stops
const DRIFT_SAMPLES: u64 = 20_000;
const DRIFT_GRID_MAX_IDX: i64 = 36;
/// Grid indices at or above this are required to sit below `−b₀`.
const DRIFT_F_PRIME_IDX: i64 = 6;
/// `b₀` as a fraction of the magnitude of the analytic limit.
const DRIFT_B0_FRACTION: f64 = 0.5;
/// Rows with `log₂ Δ₀` at least this are checked against the limit.
const DRIFT_LIMIT_LOG2_DELTA0: f64 = 20.0;
const DRIFT_BUDGET: Duration = Duration::from_secs(120);

// 5. second moment
const MOMENT_TRAJ: u64 = 8;
const MOMENT_STEPS: u64 = 1_000_000;
const MOMENT_BINS_SMALL: u32 = 4;
const MOMENT_BINS_LARGE: u32 = 16;

// 6. drift-lab oracles
const ORACLE_TOL: f64 = 1e-10;
const KAC_CHAINS: usize = 100;
const ENUM_CHAINS: usize = 20;
const ENUM_STATES: usize = 5;
const ENUM_DEPTH: u32 = 3;
const ORACLE_BUDGET: Duration = Duration::from_secs(60);

struct Line {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn scenario(bins: u32) -> Scenario {
    let q = snap_gains_to_lattice(A, P, bins, 2).expect("lattice exists");
    Scenario::new(
        PlantParams::new(A, 1.0, 1.0, 0.0).expect("plant"),
        q,
        ChannelParams::new(P, bins + 1).expect("channel"),
        q.threshold_idx,
    )
    .expect("scenario")
}

fn criterion_1() -> Line {
    let q = snap_gains_to_lattice(A, P, 4, 2).expect("lattice exists");
    let r = check_conditions(A, P, &q, 2);
    let min_bins = min_bins_for_second_moment(A, P);
    let moment_err = (r.moment.value - MOMENT_EXACT).abs();
    let minero_err = (r.minero.value - MINERO_EXACT).abs();
    let pass = moment_err <= ARITH_TOL
        && minero_err <= ARITH_TOL
        && r.moment.ok
        && r.minero.ok
        && matches!(min_bins, Ok(MIN_BINS));
    Line {
        id: 1,
        name: "condition arithmetic",
        pass,
        detail: format!(
            "moment {:.16} (err {moment_err:.1e}), minero {:.16} (err {minero_err:.1e}), min_bins {min_bins:?}",
            r.moment.value, r.minero.value
        ),
    }
}

fn criterion_2() -> Line {
    let q = snap_gains_to_lattice(A, P, 4, 2).expect("lattice exists");
    let alpha = q.alpha();
    let rbdd3 = q.rbdd3_value(P);
    let pass = alpha > ALPHA_FLOOR && rbdd3 < 1.0 && (rbdd3 - RBDD3_TARGET).abs() < RBDD3_TOL;
    Line {
        id: 2,
        name: "lattice synthesis",
        pass,
        detail: format!("alpha {alpha:.6} > {ALPHA_FLOOR}, rbdd3 {rbdd3:.6} (target {RBDD3_TARGET} +- {RBDD3_TOL})"),
    }
}

fn tail_idx(q: &QuantizerConfig) -> i64 {
    (TAIL_LOG2_DELTA0 / q.step).ceil() as i64
}

fn tail_csv(sc: &Scenario) -> driftstab::Result<Vec<String>> {
    let idx = tail_idx(&sc.quantizer);
    Ok(estimate_stopping_tail(sc, idx, TAIL_SAMPLES, TAIL_KMAX, SEED)?.csv_rows())
}

fn criterion_3() -> Line {
    let sc = scenario(4);
    let idx = tail_idx(&sc.quantizer);
    let t0 = Instant::now();
    let table = match estimate_stopping_tail(&sc, idx, TAIL_SAMPLES, TAIL_KMAX, SEED) {
        Ok(t) => t,
        Err(e) => return error_line(3, "stopping-time sandwich", e),
    };
    let elapsed = t0.elapsed();
    let outside: Vec<u32> = table
        .rows
        .iter()
        .filter(|r| !(r.lower <= r.ci_hi && r.ci_lo <= r.upper))
        .map(|r| r.k)
        .collect();
    let worst_upper = table
        .rows
        .iter()
        .map(|r| r.ci_lo - r.upper)
        .fold(f64::NEG_INFINITY, f64::max);
    Line {
        id: 3,
        name: "stopping-time sandwich",
        pass: outside.is_empty() && table.delta0 >= 2f64.powf(TAIL_LOG2_DELTA0) && elapsed < TAIL_BUDGET,
        detail: format!(
            "Delta_0 {:.2} (idx {idx}), k <= {TAIL_KMAX}, outside {outside:?}, max(ci_lo - upper) {worst_upper:.2e}, {:.1?}",
            table.delta0, elapsed
        ),
    }
}

fn drift_grid(q: &QuantizerConfig) -> Vec<i64> {
    (q.floor_idx()..=DRIFT_GRID_MAX_IDX).collect()
}

fn drift_csv(sc: &Scenario) -> driftstab::Result<Vec<String>> {
    Ok(estimate_drift_at_stops(sc, DRIFT_SAMPLES, &drift_grid(&sc.quantizer), SEED)?.csv_rows())
}

fn criterion_4() -> Line {
    let sc = scenario(4);
    let q = sc.quantizer;
    let t0 = Instant::now();
    let table = match estimate_drift_at_stops(&sc, DRIFT_SAMPLES, &drift_grid(&q), SEED) {
        Ok(t) => t,
        Err(e) => return error_line(4, "negative drift at stops", e),
    };
    let elapsed = t0.elapsed();
    let limit = table.rows[0].analytic_limit;
    let b0 = DRIFT_B0_FRACTION * limit.abs();
    let above: Vec<_> = table.rows.iter().filter(|r| r.delta0_idx >= DRIFT_F_PRIME_IDX).collect();
    let not_negative: Vec<i64> = above.iter().filter(|r| r.ci_hi > -b0).map(|r| r.delta0_idx).collect();
    let large: Vec<_> = above
        .iter()
        .filter(|r| r.delta0.log2() >= DRIFT_LIMIT_LOG2_DELTA0)
        .collect();
    let missed: Vec<i64> = large
        .iter()
        .filter(|r| !(r.ci_lo <= limit && limit <= r.ci_hi))
        .map(|r| r.delta0_idx)
        .collect();
    let worst = above.iter().map(|r| r.ci_hi).fold(f64::NEG_INFINITY, f64::max);
    Line {
        id: 4,
        name: "negative drift at stops",
        pass: limit < 0.0
            && !above.is_empty()
            && not_negative.is_empty()
            && !large.is_empty()
            && missed.is_empty()
            && elapsed < DRIFT_BUDGET,
        detail: format!(
            "b0 {b0:.4}, F' = 2^{:.2}, max ci_hi above F' {worst:.4}, above -b0 {not_negative:?}; \
             limit {limit:.6} bracketed by {}/{} rows with Delta_0 >= 2^{DRIFT_LIMIT_LOG2_DELTA0}, missed {missed:?}, {:.1?}",
            q.step * DRIFT_F_PRIME_IDX as f64,
            large.len() - missed.len(),
            large.len(),
            elapsed
        ),
    }
}

fn moment_reports() -> driftstab::Result<(MomentReport, MomentReport)> {
    let small = estimate_moment(&scenario(MOMENT_BINS_SMALL), 2, MOMENT_STEPS, MOMENT_TRAJ, SEED)?;
    let large = estimate_moment(&scenario(MOMENT_BINS_LARGE), 2, MOMENT_STEPS, MOMENT_TRAJ, SEED)?;
    Ok((small, large))
}

fn moment_csv() -> driftstab::Result<Vec<String>> {
    let (s, l) = moment_reports()?;
    Ok([s.summary_rows(), s.curve_rows(), l.summary_rows(), l.curve_rows()].concat())
}

fn criterion_5() -> Line {
    let t0 = Instant::now();
    let (small, large) = match moment_reports() {
        Ok(r) => r,
        Err(e) => return error_line(5, "second-moment convergence", e),
    };
    let converged = |r: &MomentReport| r.trajectories.iter().filter(|t| t.converged).count();
    let worst = |r: &MomentReport| r.trajectories.iter().map(|t| t.rel_change).fold(0.0, f64::max);
    Line {
        id: 5,
        name: "second-moment convergence",
        pass: small.all_converged() && large.aggregate < small.aggregate,
        detail: format!(
            "{} symbols: {}/{MOMENT_TRAJ} converged (worst half-sample change {:.3}), avg x^2 {:.3e}; \
             {} symbols: {}/{MOMENT_TRAJ} converged, avg x^2 {:.3e}; smaller with more symbols: {}, {:.1?}",
            MOMENT_BINS_SMALL + 1,
            converged(&small),
            worst(&small),
            small.aggregate,
            MOMENT_BINS_LARGE + 1,
            converged(&large),
            large.aggregate,
            large.aggregate < small.aggregate,
            t0.elapsed()
        ),
    }
}

/// Sparse random rows plus mass on the cycle `i → i+1`, so every chain is irreducible.
fn random_chain(n: usize, s: &mut RandomStream) -> FiniteChain {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut r: Vec<f64> = (0..n)
                .map(|_| if s.uniform() < 0.5 { s.uniform() } else { 0.0 })
                .collect();
            r[(i + 1) % n] += 0.05 + 0.1 * s.uniform();
            let total: f64 = r.iter().sum();
            r.iter_mut().for_each(|x| *x /= total);
            let resid = 1.0 - r.iter().sum::<f64>();
            let j = (0..n).max_by(|&a, &b| r[a].total_cmp(&r[b])).unwrap();
            r[j] += resid;
            r
        })
        .collect();
    FiniteChain::from_rows(&rows).expect("stochastic rows")
}

fn random_subset(n: usize, s: &mut RandomStream) -> Vec<usize> {
    let mut set: Vec<usize> = (0..n).filter(|_| s.uniform() < 0.4).collect();
    if set.is_empty() {
        set.push(s.below(n));
    }
    set
}

/// `(E V(φ_n), E Σ_{k<n} f(φ_k))` summed over every path of length `n`.
fn paths(chain: &FiniteChain, v: &[f64], f: &[f64], state: usize, steps: u32) -> (f64, f64) {
    if steps == 0 {
        return (v[state], 0.0);
    }
    chain.successors(state).fold((0.0, f[state]), |(ev, cost), (j, p)| {
        let (e, c) = paths(chain, v, f, j, steps - 1);
        (ev + p * e, cost + p * c)
    })
}

fn birth_death(n: usize, down: f64) -> FiniteChain {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut r = vec![0.0; n];
            r[i.saturating_sub(1)] += down;
            r[(i + 1).min(n - 1)] += 1.0 - down;
            r
        })
        .collect();
    FiniteChain::from_rows(&rows).expect("stochastic rows")
}

fn oracle_suite() -> driftstab::Result<(f64, f64, f64, usize, bool, bool)> {
    let mut s = RandomStream::new(SEED, 6);
    let mut kac_gap = 0.0f64;
    for _ in 0..KAC_CHAINS {
        let n = 2 + s.below(7);
        let chain = random_chain(n, &mut s);
        assert!(chain.is_irreducible());
        let f: Vec<f64> = (0..n).map(|_| 1.0 + 9.0 * s.uniform()).collect();
        let a = random_subset(n, &mut s);
        let (lhs, rhs) = kac_moment(&chain, &f, &a)?;
        kac_gap = kac_gap.max((lhs - rhs).abs());
    }

    let mut v3_gap = 0.0f64;
    for _ in 0..KAC_CHAINS {
        let chain = random_chain(6, &mut s);
        let f: Vec<f64> = (0..6).map(|_| 1.0 + 4.0 * s.uniform()).collect();
        let c = random_subset(6, &mut s);
        let v = hitting_cost(&chain, &f, &c, true)?;
        let pv = chain.apply(&v);
        for i in (0..6).filter(|i| !c.contains(i)) {
            v3_gap = v3_gap.max((pv[i] - (v[i] - f[i])).abs());
        }
    }

    // every per-state horizon in 1..=depth, i.e. all depth-≤3 blocks
    let n = ENUM_STATES;
    let rules: Vec<Vec<u32>> = (0..ENUM_DEPTH.pow(n as u32))
        .map(|code| (0..n).map(|i| 1 + code / ENUM_DEPTH.pow(i as u32) % ENUM_DEPTH).collect())
        .collect();
    let mut enum_gap = 0.0f64;
    let mut disagreements = 0;
    for _ in 0..ENUM_CHAINS {
        let chain = random_chain(n, &mut s);
        let v: Vec<f64> = (0..n).map(|_| 1.0 + 20.0 * s.uniform()).collect();
        let f: Vec<f64> = (0..n).map(|_| 1.0 + 2.0 * s.uniform()).collect();
        let delta: Vec<f64> = (0..n).map(|_| 1.0 + 6.0 * s.uniform()).collect();
        let c = random_subset(n, &mut s);
        let exact: Vec<Vec<(f64, f64)>> = (0..n)
            .map(|i| (1..=ENUM_DEPTH).map(|k| paths(&chain, &v, &f, i, k)).collect())
            .collect();
        for rule in &rules {
            let spec = DriftSpec {
                v: v.clone(),
                f: f.clone(),
                delta: delta.clone(),
                c: c.clone(),
                b: 5.0 * s.uniform(),
                stop: StopRule::StateDependent(rule.clone()),
            };
            let report = verify_random_time_drift(&chain, &spec)?;
            for (i, st) in report.states.iter().enumerate() {
                let (ev, cost) = exact[i][rule[i] as usize - 1];
                enum_gap = enum_gap
                    .max((st.ev_next - ev).abs() / ev.max(1.0))
                    .max((st.block_cost - cost).abs() / cost.max(1.0));
                let bound = v[i] - delta[i] + if c.contains(&i) { spec.b } else { 0.0 };
                let drift_ok = ev <= bound + ORACLE_TOL * bound.abs().max(ev.abs()).max(1.0);
                let cost_ok = cost <= delta[i] + ORACLE_TOL * delta[i].max(cost);
                if drift_ok != st.drift_ok || cost_ok != st.cost_ok {
                    disagreements += 1;
                }
            }
        }
    }

    let chain = birth_death(21, 0.7);
    let good = DriftSpec {
        v: (0..21).map(|i| 5.0 * (i as f64 + 1.0)).collect(),
        f: vec![1.0; 21],
        delta: vec![1.0; 21],
        c: vec![0, 1],
        b: 2.5,
        stop: StopRule::Fixed(1),
    };
    let good_ok = verify_random_time_drift(&chain, &good)?.ok()
        && supermartingale_check(&chain, &good, 6, EnumerationLimits::default())?.ok();
    let bad = DriftSpec {
        v: (0..21).map(|i| i as f64 + 1.0).collect(),
        delta: vec![2.0; 21],
        b: 10.0,
        ..good
    };
    let bad_flagged = !supermartingale_check(&chain, &bad, 4, EnumerationLimits::default())?
        .violations
        .is_empty();
    Ok((kac_gap, v3_gap, enum_gap, disagreements, good_ok, bad_flagged))
}

fn criterion_6() -> Line {
    let t0 = Instant::now();
    let (kac, v3, en, dis, good, bad) = match oracle_suite() {
        Ok(r) => r,
        Err(e) => return error_line(6, "drift-lab oracle suite", e),
    };
    let elapsed = t0.elapsed();
    Line {
        id: 6,
        name: "drift-lab oracle suite",
        pass: kac <= ORACLE_TOL
            && v3 <= ORACLE_TOL
            && en <= ORACLE_TOL
            && dis == 0
            && good
            && bad
            && elapsed < ORACLE_BUDGET,
        detail: format!(
            "Kac gap {kac:.1e}, V3 gap off C {v3:.1e}, enumeration gap {en:.1e} ({dis} verdict mismatches over {} rules x {ENUM_CHAINS} chains), \
             verified spec passes {good}, violating spec flagged {bad}, {elapsed:.1?}",
            ENUM_DEPTH.pow(ENUM_STATES as u32)
        ),
    }
}

fn all_csvs() -> driftstab::Result<Vec<Vec<String>>> {
    let sc = scenario(4);
    Ok(vec![tail_csv(&sc)?, drift_csv(&sc)?, moment_csv()?])
}

fn criterion_7() -> Line {
    let first = all_csvs();
    // the rerun uses a different worker count, which must not change any byte
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().expect("pool");
    let second = pool.install(all_csvs);
    let (first, second) = match (first, second) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return error_line(7, "determinism", e),
    };
    let names = ["stopping tail", "drift", "moments"];
    let differ: Vec<&str> = names
        .iter()
        .zip(first.iter().zip(&second))
        .filter(|(_, (a, b))| a.join("\n").as_bytes() != b.join("\n").as_bytes())
        .map(|(n, _)| *n)
        .collect();
    Line {
        id: 7,
        name: "determinism",
        pass: differ.is_empty(),
        detail: format!(
            "{} rows compared across two runs (default pool vs 1 worker), differing tables {differ:?}",
            first.iter().map(Vec::len).sum::<usize>()
        ),
    }
}

fn error_line(id: u32, name: &'static str, e: driftstab::Error) -> Line {
    Line {
        id,
        name,
        pass: false,
        detail: format!("error: {e}"),
    }
}

fn main() -> ExitCode {
    let criteria: [fn() -> Line; 7] =
        [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7];
    let mut failed = 0;
    for run in criteria {
        let line = run();
        println!(
            "criterion {} {}: {} ({})",
            line.id,
            if line.pass { "PASS" } else { "FAIL" },
            line.name,
            line.detail
        );
        failed += usize::from(!line.pass);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
