//! Exact checks on a birth-death chain on {0..20} that steps down with
//! probability 0.7: stationary law, Kac's formula, the random-time drift
//! condition under two stopping rules, the supermartingale enumeration and
//! the π(f) bound. A spec asking for more drift than the chain has is flagged.

use driftstab::drift_lab::{
    kac_moment, stationary_dist, supermartingale_check, verify_pi_f_bound, verify_random_time_drift, DriftSpec,
    EnumerationLimits, FiniteChain, StopRule,
};

fn birth_death(n: usize, down: f64) -> driftstab::Result<FiniteChain> {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut r = vec![0.0; n];
            r[i.saturating_sub(1)] += down;
            r[(i + 1).min(n - 1)] += 1.0 - down;
            r
        })
        .collect();
    FiniteChain::from_rows(&rows)
}

fn main() -> driftstab::Result<()> {
    let n = 21;
    let chain = birth_death(n, 0.7)?;
    let pi = stationary_dist(&chain)?;
    println!("pi(0..4) = {:.5?}", &pi.as_slice()[..5]);

    let f: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 / 10.0).collect();
    let (lhs, rhs) = kac_moment(&chain, &f, &[0, 1])?;
    println!("Kac: pi(f) = {lhs:.12}, excursions = {rhs:.12}");

    let mut spec = DriftSpec {
        v: (0..n).map(|i| 5.0 * (i as f64 + 1.0)).collect(),
        f: vec![1.0; n],
        delta: vec![1.0; n],
        c: vec![0, 1],
        b: 2.5,
        stop: StopRule::Fixed(1),
    };
    let r = verify_random_time_drift(&chain, &spec)?;
    println!("one-step rule: ok = {}, b_min = {}", r.ok(), r.b_min);

    let mut two = spec.clone();
    two.stop = StopRule::StateDependent((0..n).map(|i| 1 + (i % 2) as u32).collect());
    two.delta = (0..n).map(|i| 1.0 + (i % 2) as f64).collect();
    two.b = 10.0;
    let r = verify_random_time_drift(&chain, &two)?;
    println!("alternating 1/2-step rule: ok = {}, b_min = {:.3}", r.ok(), r.b_min);

    let sm = supermartingale_check(&chain, &spec, 6, EnumerationLimits::default())?;
    println!(
        "supermartingale over {} prefixes: ok = {}, min slack off C = {:.3}",
        sm.prefixes,
        sm.ok(),
        sm.min_slack_off_c.unwrap_or(f64::NAN)
    );

    spec.f = f;
    let pf = verify_pi_f_bound(&chain, &spec)?;
    println!("pi(f) = {:.6} <= b_f = {:.6}: {}", pf.pi_f, pf.b_f, pf.ok);

    let bad = DriftSpec {
        v: (0..n).map(|i| i as f64 + 1.0).collect(),
        f: vec![1.0; n],
        delta: vec![2.0; n],
        c: vec![0, 1],
        b: 10.0,
        stop: StopRule::Fixed(1),
    };
    let sm = supermartingale_check(&chain, &bad, 4, EnumerationLimits::default())?;
    let states: Vec<usize> = sm.violations.iter().map(|v| v.state).collect();
    println!("over-demanding spec violates at states {states:?}");
    Ok(())
}
