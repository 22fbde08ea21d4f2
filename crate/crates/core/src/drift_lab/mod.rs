//! Exact verification of drift criteria on finite-state chains.
//!
//! Everything here is computed either by direct linear solves or by explicit
//! path enumeration, so the identities can be checked to near machine
//! precision.

mod chain;
mod drift;
mod hitting;
pub mod io;

pub use chain::{stationary_dist, FiniteChain, ROW_SUM_TOLERANCE};
pub use drift::{
    supermartingale_check, verify_pi_f_bound, verify_random_time_drift, DriftReport, DriftSpec,
    EnumerationLimits, PiFBoundReport, StateDrift, StopRule, SupermartingaleReport, Violation,
};
pub use hitting::{hitting_cost, kac_moment};
