//! One closed-loop trajectory with 5 and with 17 bins on the same seed.
//! Pass a path to also write the 5-bin run as CSV.

use driftstab::channel::ChannelParams;
use driftstab::closed_loop::{simulate, Scenario};
use driftstab::plant::PlantParams;
use driftstab::quantizer::snap_gains_to_lattice;

fn scenario(bins: u32) -> driftstab::Result<Scenario> {
    let q = snap_gains_to_lattice(2.5, 0.9, bins, 2)?;
    Scenario::new(
        PlantParams::new(2.5, 1.0, 1.0, 0.0)?,
        q,
        ChannelParams::new(0.9, bins + 1)?,
        q.threshold_idx,
    )
}

fn main() -> driftstab::Result<()> {
    let steps = 10_000;
    for bins in [4, 16] {
        let traj = simulate(&scenario(bins)?, steps, 42, 0)?;
        let peak = traj.records.iter().map(|r| r.x.abs()).fold(0.0, f64::max);
        let erased = traj.records.iter().filter(|r| !r.erasure_ok).count();
        println!(
            "{:>2} symbols: {} stops, {} excursions, {} erasures, max |x| = {:.3e}",
            bins + 1,
            traj.stop_times.len(),
            traj.excursion_count(),
            erased,
            peak
        );
        if bins == 4 {
            if let Some(path) = std::env::args().nth(1) {
                traj.write_csv(std::fs::File::create(&path)?)?;
                println!("   wrote {path}");
            }
        }
    }
    Ok(())
}
