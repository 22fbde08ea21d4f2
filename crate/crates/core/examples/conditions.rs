//! Stability conditions for the scalar plant `x' = 2.5x + u + d` over a
//! channel that delivers 90% of symbols, at two quantizer resolutions.

use driftstab::analysis::{check_conditions, min_bins_for_second_moment};
use driftstab::quantizer::snap_gains_to_lattice;

fn main() -> driftstab::Result<()> {
    let (a, p) = (2.5, 0.9);
    let symbols = min_bins_for_second_moment(a, p)?;
    println!("smallest alphabet with a finite second moment: {symbols} symbols (K = {})\n", symbols - 1);

    for bins in [4, 16] {
        let cfg = snap_gains_to_lattice(a, p, bins, 2)?;
        let report = check_conditions(a, p, &cfg, 2);
        println!("{report}\n");
    }
    Ok(())
}
