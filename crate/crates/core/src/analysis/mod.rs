//! Condition checkers for the stability results, analytic stopping-time tail
//! bounds and Monte-Carlo estimators that put them against simulation.

mod conditions;
mod montecarlo;
mod tail;

pub use conditions::{
    check_conditions, check_rate_conditions, min_bins_for_moment, min_bins_for_second_moment, Condition,
    ConditionReport,
};
pub use montecarlo::{
    estimate_drift_at_stops, estimate_moment, estimate_stopping_tail, sample_inter_stop,
    DriftRow, DriftTable, InterStopSample, MomentReport, MomentTrajectory, TailRow, TailTable,
    CONVERGENCE_TOLERANCE, MAX_INTER_STOP_STEPS,
};
pub use tail::{
    analytic_drift_limit, tail_lower_bound, tail_upper_bound, tail_upper_bounds, TailBoundParams,
};
