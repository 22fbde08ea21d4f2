//! Mean change of log Δ² between consecutive stopping times as a function of
//! the starting bin size. Far from the floor it settles at
//! 2 ln α + 2 (1/p − 1) ln(|a| + δ).

use driftstab::analysis::estimate_drift_at_stops;
use driftstab::channel::ChannelParams;
use driftstab::closed_loop::Scenario;
use driftstab::plant::PlantParams;
use driftstab::quantizer::snap_gains_to_lattice;

fn main() -> driftstab::Result<()> {
    let q = snap_gains_to_lattice(2.5, 0.9, 4, 2)?;
    let sc = Scenario::new(PlantParams::new(2.5, 1.0, 1.0, 0.0)?, q, ChannelParams::new(0.9, 5)?, 1)?;
    let grid: Vec<i64> = (0..=24).step_by(2).collect();
    let table = estimate_drift_at_stops(&sc, 10_000, &grid, 3)?;
    println!("limit {:.4}", table.rows[0].analytic_limit);
    for r in &table.rows {
        println!(
            "idx {:>2}  Delta_0 {:>10.3}  drift {:>8.4}  [{:.4}, {:.4}]",
            r.delta0_idx, r.delta0, r.drift, r.ci_lo, r.ci_hi
        );
    }
    Ok(())
}
