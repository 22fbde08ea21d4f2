//! Snapping the zoom factors onto a base-2 lattice, and what happens when the
//! channel is too lossy for any lattice to work.

use driftstab::quantizer::{snap_gains_to_lattice, BinSizeIndex};
use driftstab::Error;

fn main() -> driftstab::Result<()> {
    let cfg = snap_gains_to_lattice(2.5, 0.9, 4, 2)?;
    println!("s = {:.10}, A_exp = {}, B_exp = {}", cfg.step, cfg.zoom_in_steps, cfg.zoom_out_steps);
    println!("alpha = {:.6} (must exceed 0.625)", cfg.alpha());
    println!("|a| + delta = {:.6}", cfg.zoom_out_gain());
    println!("alpha (|a|+delta)^(1/p-1) = {:.6}", cfg.rbdd3_value(0.9));
    println!("floor L' = {}, threshold L = {:.6}", cfg.floor(), cfg.threshold());

    println!("\nfirst lattice points:");
    for idx in cfg.floor_idx()..cfg.floor_idx() + 6 {
        println!("  idx {idx:>2}: Delta = {:.6}", BinSizeIndex(idx).size(&cfg));
    }

    match snap_gains_to_lattice(2.5, 0.9, 2, 2) {
        Err(Error::Synthesis(why)) => println!("\nK = 2: {why}"),
        other => println!("\nK = 2: unexpected {other:?}"),
    }
    Ok(())
}
