use std::collections::HashMap;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::chain::{stationary_dist, FiniteChain};
use super::hitting::{hitting_cost, indicator, require_reachable, solve_killed};
use crate::error::{Error, Result};

/// Slack allowed in the pointwise inequalities, relative to `max(1, |value|)`.
const INEQ_TOLERANCE: f64 = 1e-10;

fn holds(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + INEQ_TOLERANCE * lhs.abs().max(rhs.abs()).max(1.0)
}

/// How the next stopping time is chosen from the current stop state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    /// `T_{z+1} = T_z + n`.
    Fixed(u32),
    /// `T_{z+1} = T_z + n(φ_{T_z})`.
    StateDependent(Vec<u32>),
    /// `T_{z+1} = min{t > T_z : φ_t ∈ A}`.
    Hitting(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSpec {
    pub v: Vec<f64>,
    pub f: Vec<f64>,
    pub delta: Vec<f64>,
    pub c: Vec<usize>,
    pub b: f64,
    pub stop: StopRule,
}

impl DriftSpec {
    pub fn validate(&self, n: usize) -> Result<()> {
        for (name, vals) in [("V", &self.v), ("f", &self.f), ("delta", &self.delta)] {
            if vals.len() != n {
                return Err(Error::config(
                    name,
                    format!("has {} entries, chain has {n} states", vals.len()),
                ));
            }
        }
        if let Some(i) = self.v.iter().position(|&x| !(x.is_finite() && x > 0.0)) {
            return Err(Error::config("V", format!("V({i}) = {} must be finite and > 0", self.v[i])));
        }
        if let Some(i) = self.f.iter().position(|&x| !(x.is_finite() && x >= 1.0)) {
            return Err(Error::config("f", format!("f({i}) = {} must be finite and >= 1", self.f[i])));
        }
        if let Some(i) = self.delta.iter().position(|&x| !(x.is_finite() && x >= 1.0)) {
            return Err(Error::config(
                "delta",
                format!("delta({i}) = {} must be finite and >= 1", self.delta[i]),
            ));
        }
        if let Some(&s) = self.c.iter().find(|&&s| s >= n) {
            return Err(Error::config("C", format!("state {s} outside 0..{n}")));
        }
        if !self.b.is_finite() {
            return Err(Error::config("b", "must be finite"));
        }
        match &self.stop {
            StopRule::Fixed(0) => return Err(Error::config("stop", "fixed n must be >= 1")),
            StopRule::StateDependent(ns) => {
                if ns.len() != n {
                    return Err(Error::config(
                        "stop",
                        format!("state_dependent has {} entries, chain has {n} states", ns.len()),
                    ));
                }
                if ns.contains(&0) {
                    return Err(Error::config("stop", "state_dependent n must be >= 1"));
                }
            }
            StopRule::Hitting(a) => {
                if a.is_empty() {
                    return Err(Error::config("stop", "hitting target is empty"));
                }
                if let Some(&s) = a.iter().find(|&&s| s >= n) {
                    return Err(Error::config("stop", format!("target state {s} outside 0..{n}")));
                }
            }
            StopRule::Fixed(_) => {}
        }
        Ok(())
    }

    fn in_c(&self, n: usize) -> Vec<bool> {
        let mut ind = vec![false; n];
        for &s in &self.c {
            ind[s] = true;
        }
        ind
    }
}

/// Per-state outcome of the random-time drift check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateDrift {
    pub state: usize,
    pub in_c: bool,
    /// `E_φ[V(φ_{T_1})]`.
    pub ev_next: f64,
    /// `E_φ[Σ_{k=0}^{T_1−1} f(φ_k)]`.
    pub block_cost: f64,
    /// `E_φ[T_1]`.
    pub block_len: f64,
    /// `V(φ) − δ(φ) + b·1_C(φ) − E_φ[V(φ_{T_1})]`; negative means violated.
    pub drift_margin: f64,
    /// `δ(φ) − block_cost`; negative means violated.
    pub cost_margin: f64,
    pub drift_ok: bool,
    pub cost_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftReport {
    pub states: Vec<StateDrift>,
    /// Smallest `b` for which the drift inequality holds on `C`
    /// (`max_{φ∈C} E_φ[V(φ_{T_1})] − V(φ) + δ(φ)`, floored at 0).
    pub b_min: f64,
    pub drift_ok: bool,
    pub cost_ok: bool,
}

impl DriftReport {
    pub fn ok(&self) -> bool {
        self.drift_ok && self.cost_ok
    }

    pub const CSV_HEADER: &'static str =
        "state,in_c,ev_next,block_cost,block_len,drift_margin,cost_margin,drift_ok,cost_ok";

    pub fn csv_rows(&self) -> Vec<String> {
        self.states
            .iter()
            .map(|s| {
                format!(
                    "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{}",
                    s.state,
                    s.in_c,
                    s.ev_next,
                    s.block_cost,
                    s.block_len,
                    s.drift_margin,
                    s.cost_margin,
                    s.drift_ok,
                    s.cost_ok
                )
            })
            .collect()
    }

    pub fn failing_states(&self) -> Vec<usize> {
        self.states
            .iter()
            .filter(|s| !(s.drift_ok && s.cost_ok))
            .map(|s| s.state)
            .collect()
    }
}

/// Exact one-block quantities for every start state: `(E V(next stop), E block cost, E block length)`.
fn block_expectations(chain: &FiniteChain, spec: &DriftSpec) -> Result<(DVector<f64>, DVector<f64>, DVector<f64>)> {
    let n = chain.len();
    let v = DVector::from_column_slice(&spec.v);
    let f = DVector::from_column_slice(&spec.f);
    let lens: Vec<u32> = match &spec.stop {
        StopRule::Fixed(k) => vec![*k; n],
        StopRule::StateDependent(ns) => ns.clone(),
        StopRule::Hitting(target) => {
            let in_a = indicator(n, target)?;
            require_reachable(chain, &in_a)?;
            let free: Vec<bool> = in_a.iter().map(|&x| !x).collect();
            let rhs = DVector::from_fn(n, |i, _| {
                (0..n).filter(|&j| in_a[j]).map(|j| chain.prob(i, j) * v[j]).sum::<f64>()
            });
            let ev = solve_killed(chain, &free, &rhs, "expected value at next hit")?;
            let cost = hitting_cost(chain, &spec.f, target, false)?;
            let len = hitting_cost(chain, &vec![1.0; n], target, false)?;
            return Ok((ev, cost, len));
        }
    };
    let max_len = *lens.iter().max().unwrap_or(&1) as usize;
    // pv[k] = P^k V, pf_sum[k] = Σ_{j<k} P^j f
    let mut ev = DVector::zeros(n);
    let mut cost = DVector::zeros(n);
    let mut pv = v;
    let mut pf = f;
    let mut pf_sum = DVector::zeros(n);
    for k in 1..=max_len {
        pv = chain.apply(&pv);
        pf_sum += &pf;
        pf = chain.apply(&pf);
        for i in 0..n {
            if lens[i] as usize == k {
                ev[i] = pv[i];
                cost[i] = pf_sum[i];
            }
        }
    }
    let len = DVector::from_iterator(n, lens.iter().map(|&k| f64::from(k)));
    Ok((ev, cost, len))
}

/// Checks, state by state,
/// `E[V(φ_{T_{z+1}}) | φ_{T_z}] ≤ V − δ + b·1_C` and
/// `E[Σ_{k=T_z}^{T_{z+1}−1} f(φ_k) | φ_{T_z}] ≤ δ`.
///
/// Fixed and state-dependent rules use matrix powers; hitting rules use
/// first-passage solves and require the target reachable from every state.
pub fn verify_random_time_drift(chain: &FiniteChain, spec: &DriftSpec) -> Result<DriftReport> {
    let n = chain.len();
    spec.validate(n)?;
    let in_c = spec.in_c(n);
    let (ev, cost, len) = block_expectations(chain, spec)?;
    let mut b_min = 0.0f64;
    let states: Vec<StateDrift> = (0..n)
        .map(|i| {
            let bound = spec.v[i] - spec.delta[i] + if in_c[i] { spec.b } else { 0.0 };
            if in_c[i] {
                b_min = b_min.max(ev[i] - spec.v[i] + spec.delta[i]);
            }
            StateDrift {
                state: i,
                in_c: in_c[i],
                ev_next: ev[i],
                block_cost: cost[i],
                block_len: len[i],
                drift_margin: bound - ev[i],
                cost_margin: spec.delta[i] - cost[i],
                drift_ok: holds(ev[i], bound),
                cost_ok: holds(cost[i], spec.delta[i]),
            }
        })
        .collect();
    Ok(DriftReport {
        drift_ok: states.iter().all(|s| s.drift_ok),
        cost_ok: states.iter().all(|s| s.cost_ok),
        states,
        b_min,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnumerationLimits {
    /// Path prefixes with probability below this are dropped.
    pub prune: f64,
    /// Maximum number of enumerated `(state, step)` nodes.
    pub cap: usize,
}

impl Default for EnumerationLimits {
    fn default() -> Self {
        Self {
            prune: 1e-12,
            cap: 5_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    /// Stop state `φ_{T_z}` at which `E[M_{z+1} | F_{T_z}] > M_z`.
    pub state: usize,
    /// Shortest block depth `z` at which the state was reached.
    pub depth: usize,
    /// `M_z − E[M_{z+1} | F_{T_z}]`.
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupermartingaleReport {
    pub horizon: usize,
    /// Stop-state prefixes examined (each `(φ_{T_0}, …, φ_{T_z})`, `z < horizon`).
    pub prefixes: usize,
    /// Minimum of `M_z − E[M_{z+1} | F_{T_z}]` over examined prefixes.
    pub min_slack: f64,
    /// Minimum slack over prefixes ending outside `C`.
    pub min_slack_off_c: Option<f64>,
    /// True when every examined slack is zero within tolerance.
    pub equality: bool,
    /// Probability mass dropped by pruning, summed over blocks and starts.
    pub pruned_mass: f64,
    /// `max_φ (E_φ[M_horizon] − M_0)`; should be `≤ 0`.
    pub max_terminal_gain: f64,
    pub violations: Vec<Violation>,
}

impl SupermartingaleReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty() && self.max_terminal_gain <= INEQ_TOLERANCE * self.scale()
    }

    fn scale(&self) -> f64 {
        1.0 + self.min_slack.abs()
    }
}

/// One inter-stop block from a given stop state, by forward propagation of
/// path mass over `(state, step)`.
#[derive(Debug, Clone)]
struct Block {
    /// Next-stop distribution.
    next: Vec<(usize, f64)>,
    /// `E[V(φ_{T_1})]`.
    ev_next: f64,
    /// `E[Σ_{k<T_1} f(φ_k)]`.
    cost: f64,
    pruned: f64,
}

struct Enumerator<'a> {
    chain: &'a FiniteChain,
    spec: &'a DriftSpec,
    target: Vec<bool>,
    limits: EnumerationLimits,
    nodes: usize,
    cache: HashMap<usize, Block>,
}

impl Enumerator<'_> {
    fn bump(&mut self) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.limits.cap {
            return Err(Error::EnumerationTooLarge(format!(
                "more than {} enumeration nodes; lower the horizon or raise the cap",
                self.limits.cap
            )));
        }
        Ok(())
    }

    fn block(&mut self, start: usize) -> Result<Block> {
        if let Some(b) = self.cache.get(&start) {
            return Ok(b.clone());
        }
        let steps = match &self.spec.stop {
            StopRule::Fixed(k) => Some(*k),
            StopRule::StateDependent(ns) => Some(ns[start]),
            StopRule::Hitting(_) => None,
        };
        let n = self.chain.len();
        let mut next = vec![0.0; n];
        let mut acc = Block {
            next: Vec::new(),
            ev_next: 0.0,
            cost: 0.0,
            pruned: 0.0,
        };
        // Forward mass over not-yet-stopped states; each step pays f on the
        // mass it starts from, then routes mass that stops into `next`.
        let mut mass = vec![0.0; n];
        mass[start] = 1.0;
        let mut taken = 0u32;
        while mass.iter().any(|&m| m > 0.0) {
            let mut moved = vec![0.0; n];
            for (state, &m) in mass.iter().enumerate() {
                if m == 0.0 {
                    continue;
                }
                self.bump()?;
                acc.cost += m * self.spec.f[state];
                for (j, pij) in self.chain.successors(state) {
                    moved[j] += m * pij;
                }
            }
            taken += 1;
            for (j, q) in moved.iter_mut().enumerate() {
                let stop = match steps {
                    Some(k) => taken == k,
                    None => self.target[j],
                };
                if stop {
                    next[j] += *q;
                    acc.ev_next += *q * self.spec.v[j];
                    *q = 0.0;
                } else if *q < self.limits.prune {
                    acc.pruned += *q;
                    *q = 0.0;
                }
            }
            mass = moved;
        }
        acc.next = next.into_iter().enumerate().filter(|&(_, q)| q > 0.0).collect();
        self.cache.insert(start, acc.clone());
        Ok(acc)
    }
}

/// Enumerates stop-state prefixes up to `horizon` blocks and checks
/// `E[M_{z+1} | F_{T_z}] ≤ M_z` at each, where
/// `M_z = V(φ_{T_z}) + Σ_{k<T_z} f(φ_k) − b·Σ_{j<z} 1_C(φ_{T_j})`.
///
/// The increment only depends on the current stop state, so inter-stop
/// blocks are enumerated once per state. Summing expected increments along the
/// stop-state tree gives the terminal gain `E[M_horizon] − M_0`.
pub fn supermartingale_check(
    chain: &FiniteChain,
    spec: &DriftSpec,
    horizon: usize,
    limits: EnumerationLimits,
) -> Result<SupermartingaleReport> {
    let n = chain.len();
    spec.validate(n)?;
    if horizon == 0 {
        return Err(Error::Input("horizon must be >= 1".into()));
    }
    let in_c = spec.in_c(n);
    let max_degree = (0..n).map(|i| chain.successors(i).count()).max().unwrap_or(1);
    let outer = (max_degree as f64).powi(horizon as i32) * n as f64;
    if outer > limits.cap as f64 {
        return Err(Error::EnumerationTooLarge(format!(
            "out-degree {max_degree}^horizon {horizon} x {n} states = {outer:.3e} exceeds cap {}",
            limits.cap
        )));
    }
    let target = match &spec.stop {
        StopRule::Hitting(a) => {
            let ind = indicator(n, a)?;
            require_reachable(chain, &ind)?;
            ind
        }
        _ => vec![false; n],
    };
    let mut en = Enumerator {
        chain,
        spec,
        target,
        limits,
        nodes: 0,
        cache: HashMap::new(),
    };

    let mut prefixes = 0usize;
    let mut min_slack = f64::INFINITY;
    let mut min_slack_off_c: Option<f64> = None;
    let mut equality = true;
    let mut pruned_mass = 0.0;
    let mut max_terminal_gain = f64::NEG_INFINITY;
    let mut worst: HashMap<usize, Violation> = HashMap::new();

    for start in 0..n {
        let m0 = spec.v[start];
        // (stop state, prefix probability, M_0 + Σ increments so far) at depth z
        let mut frontier = vec![(start, 1.0f64, m0)];
        let mut terminal = 0.0;
        for z in 0..horizon {
            let mut next_frontier = Vec::new();
            for &(state, prob, m_z) in &frontier {
                prefixes += 1;
                let blk = en.block(state)?;
                pruned_mass += prob * blk.pruned;
                let penalty = if in_c[state] { spec.b } else { 0.0 };
                // E[M_{z+1} | F_{T_z}] − M_z
                let inc = blk.ev_next - spec.v[state] + blk.cost - penalty;
                let slack = -inc;
                let tol = INEQ_TOLERANCE * (spec.v[state].abs() + blk.cost.abs() + penalty.abs()).max(1.0);
                min_slack = min_slack.min(slack);
                if !in_c[state] {
                    min_slack_off_c = Some(min_slack_off_c.map_or(slack, |s| s.min(slack)));
                }
                if slack.abs() > tol {
                    equality = false;
                }
                if slack < -tol {
                    worst
                        .entry(state)
                        .and_modify(|v| v.slack = v.slack.min(slack))
                        .or_insert(Violation { state, depth: z, slack });
                }
                // E[M_horizon] = M_0 + Σ_z E[inc(φ_{T_z})], so each child carries
                // the running sum of increments rather than a path-level M_z.
                let m_next = m_z + inc;
                for &(j, q) in &blk.next {
                    let pq = prob * q;
                    if pq < limits.prune {
                        pruned_mass += pq;
                        continue;
                    }
                    if z + 1 == horizon {
                        terminal += pq * m_next;
                    } else {
                        next_frontier.push((j, pq, m_next));
                    }
                }
            }
            frontier = next_frontier;
        }
        max_terminal_gain = max_terminal_gain.max(terminal - m0);
    }

    let mut violations: Vec<Violation> = worst.into_values().collect();
    violations.sort_by_key(|v| v.state);
    Ok(SupermartingaleReport {
        horizon,
        prefixes,
        min_slack,
        min_slack_off_c,
        equality,
        pruned_mass,
        max_terminal_gain,
        violations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiFBoundReport {
    pub pi_f: f64,
    /// `max_{φ∈C} (PV* − V* + f)(φ)` with the inclusive hitting cost `V*`.
    pub b_f: f64,
    /// `max_{φ∉C} |PV* − V* + f|`; zero up to rounding.
    pub v3_residual_off_c: f64,
    pub ok: bool,
}

/// Computes `π(f)` and checks it against the constant `b_f` of the V3 drift
/// inequality `PV* ≤ V* − f + b_f·1_C` built from the inclusive hitting cost.
pub fn verify_pi_f_bound(chain: &FiniteChain, spec: &DriftSpec) -> Result<PiFBoundReport> {
    let n = chain.len();
    spec.validate(n)?;
    if spec.c.is_empty() {
        return Err(Error::config("C", "must be non-empty"));
    }
    let pi = stationary_dist(chain)?;
    let pi_f: f64 = pi.iter().zip(&spec.f).map(|(p, f)| p * f).sum();
    let v_star = hitting_cost(chain, &spec.f, &spec.c, true)?;
    let pv = chain.apply(&v_star);
    let in_c = spec.in_c(n);
    let mut b_f = f64::NEG_INFINITY;
    let mut resid = 0.0f64;
    for i in 0..n {
        let gap = pv[i] - v_star[i] + spec.f[i];
        if in_c[i] {
            b_f = b_f.max(gap);
        } else {
            resid = resid.max(gap.abs());
        }
    }
    Ok(PiFBoundReport {
        pi_f,
        b_f,
        v3_residual_off_c: resid,
        ok: holds(pi_f, b_f),
    })
}
