//! Tail of the time between stopping times, started from a large bin, with
//! 99% Wilson intervals between the analytic lower and upper bounds.

use driftstab::analysis::estimate_stopping_tail;
use driftstab::channel::ChannelParams;
use driftstab::closed_loop::Scenario;
use driftstab::plant::PlantParams;
use driftstab::quantizer::snap_gains_to_lattice;

fn main() -> driftstab::Result<()> {
    let q = snap_gains_to_lattice(2.5, 0.9, 4, 2)?;
    let sc = Scenario::new(PlantParams::new(2.5, 1.0, 1.0, 0.0)?, q, ChannelParams::new(0.9, 5)?, 1)?;
    let table = estimate_stopping_tail(&sc, 15, 100_000, 10, 7)?;
    println!("Delta_0 = {:.3}", table.delta0);
    println!("{:>3} {:>11} {:>11} {:>11} {:>11}", "k", "lower", "ci_lo", "ci_hi", "upper");
    for r in &table.rows {
        println!(
            "{:>3} {:>11.3e} {:>11.3e} {:>11.3e} {:>11.3e} {}",
            r.k,
            r.lower,
            r.ci_lo,
            r.ci_hi,
            r.upper,
            if r.sandwiched() { "" } else { "outside" }
        );
    }
    Ok(())
}
