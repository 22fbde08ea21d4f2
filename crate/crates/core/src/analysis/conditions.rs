use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quantizer::QuantizerConfig;

/// One inequality: whether it holds and the quantity it was decided on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Condition {
    pub ok: bool,
    pub value: f64,
}

impl Condition {
    fn positive(margin: f64) -> Self {
        Self {
            ok: margin > 0.0,
            value: margin,
        }
    }

    fn below_one(value: f64) -> Self {
        Self {
            ok: value < 1.0,
            value,
        }
    }
}

/// Every inequality is reported with its value even when it fails.
///
/// `rbdd2`/`rbdd3` need a lattice configuration and are `None` without one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionReport {
    pub a: f64,
    pub p: f64,
    pub bins: u32,
    pub m: u32,
    /// margin `log₂(K)·p − log₂|a|`
    pub capacity: Condition,
    /// margin `α − |a|·2^(−R')`
    pub rbdd2: Option<Condition>,
    /// value `α·(|a|+δ)^(1/p−1)`
    pub rbdd3: Option<Condition>,
    /// value `|a|^m (1 − p + p/(2^R − 1)^m)`
    pub moment: Condition,
    /// value `|a|^m (1 − p + p/2^(mR))`
    pub minero: Condition,
}

impl ConditionReport {
    pub fn all_ok(&self) -> bool {
        self.capacity.ok
            && self.rbdd2.is_some_and(|c| c.ok)
            && self.rbdd3.is_some_and(|c| c.ok)
            && self.moment.ok
            && self.minero.ok
    }

    pub const CSV_HEADER: &'static str = "condition,ok,value";

    pub fn csv_rows(&self) -> Vec<String> {
        let mut rows = Vec::new();
        let mut push = |name: &str, c: Option<Condition>| match c {
            Some(c) => rows.push(format!("{name},{},{:.16e}", u8::from(c.ok), c.value)),
            None => rows.push(format!("{name},,")),
        };
        push("capacity", Some(self.capacity));
        push("rbdd2", self.rbdd2);
        push("rbdd3", self.rbdd3);
        push(&format!("moment_{}", self.m), Some(self.moment));
        push(&format!("minero_{}", self.m), Some(self.minero));
        rows
    }
}

impl fmt::Display for ConditionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = |ok: bool| if ok { "ok  " } else { "FAIL" };
        writeln!(f, "a = {}, p = {}, K = {} ({} symbols), m = {}", self.a, self.p, self.bins, self.bins + 1, self.m)?;
        writeln!(
            f,
            "  [{}] capacity  log2(K)p - log2|a|            = {:.6}",
            mark(self.capacity.ok),
            self.capacity.value
        )?;
        match self.rbdd2 {
            Some(c) => writeln!(f, "  [{}] alpha - |a|2^-R'                        = {:.6}", mark(c.ok), c.value)?,
            None => writeln!(f, "  [n/a ] alpha - |a|2^-R'                        (no lattice)")?,
        }
        match self.rbdd3 {
            Some(c) => writeln!(f, "  [{}] alpha(|a|+delta)^(1/p-1)                = {:.6}", mark(c.ok), c.value)?,
            None => writeln!(f, "  [n/a ] alpha(|a|+delta)^(1/p-1)                (no lattice)")?,
        }
        writeln!(
            f,
            "  [{}] moment    |a|^m(1-p+p/(2^R-1)^m)      = {:.10}",
            mark(self.moment.ok),
            self.moment.value
        )?;
        write!(
            f,
            "  [{}] necessary |a|^m(1-p+p/2^(mR))         = {:.10}",
            mark(self.minero.ok),
            self.minero.value
        )
    }
}

/// The inequalities that depend only on `(a, p, K, m)`.
pub fn check_rate_conditions(a: f64, p: f64, bins: u32, m: u32) -> ConditionReport {
    let a_abs = a.abs();
    let k = f64::from(bins);
    let mi = m as i32;
    let capacity = k.log2() * p - a_abs.log2();
    // 2^R − 1 = K and 2^R = K + 1 exactly
    let moment = a_abs.powi(mi) * (1.0 - p + p / k.powi(mi));
    let minero = a_abs.powi(mi) * (1.0 - p + p / (k + 1.0).powi(mi));
    ConditionReport {
        a,
        p,
        bins,
        m,
        capacity: Condition::positive(capacity),
        rbdd2: None,
        rbdd3: None,
        moment: Condition::below_one(moment),
        minero: Condition::below_one(minero),
    }
}

pub fn check_conditions(a: f64, p: f64, cfg: &QuantizerConfig, m: u32) -> ConditionReport {
    let mut report = check_rate_conditions(a, p, cfg.bins, m);
    let rbdd2 = cfg.alpha() - a.abs() * (-cfg.rate_granular()).exp2();
    report.rbdd2 = Some(Condition::positive(rbdd2));
    report.rbdd3 = Some(Condition::below_one(cfg.rbdd3_value(p)));
    report
}

/// Symbol count `K + 1 = ⌈(p / (|a|^(−m) − (1 − p)))^(1/m)⌉ + 1`: the
/// smallest `K` with `|a|^m (1 − p + p/K^m) ≤ 1`. When the root is an integer
/// that `K` sits exactly on the boundary.
pub fn min_bins_for_moment(a: f64, p: f64, m: u32) -> Result<u32> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Input(format!("p must lie in (0, 1], got {p}")));
    }
    if m == 0 {
        return Err(Error::Input("moment order m must be >= 1".into()));
    }
    let mi = m as i32;
    let denom = a.abs().powi(-mi) - (1.0 - p);
    if denom <= 0.0 {
        return Err(Error::Synthesis(format!(
            "|a|^-{m} - (1-p) = {denom} <= 0: no finite rate gives a finite moment of order {m}"
        )));
    }
    let root = (p / denom).powf(1.0 / f64::from(m));
    // absorb rounding so that an exact integer root is not bumped up
    let k = (root * (1.0 - 4.0 * f64::EPSILON)).ceil().max(1.0);
    if !k.is_finite() || k > f64::from(u32::MAX - 2) {
        return Err(Error::Synthesis("required bin count overflows".into()));
    }
    Ok(k as u32 + 1)
}

/// [`min_bins_for_moment`] with `m = 2`.
pub fn min_bins_for_second_moment(a: f64, p: f64) -> Result<u32> {
    min_bins_for_moment(a, p, 2)
}
