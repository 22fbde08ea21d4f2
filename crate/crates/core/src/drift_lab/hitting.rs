use nalgebra::{DMatrix, DVector};

use super::chain::{stationary_dist, FiniteChain};
use crate::error::{Error, Result};

const SOLVE_RESIDUAL: f64 = 1e-10;

pub(crate) fn indicator(n: usize, set: &[usize]) -> Result<Vec<bool>> {
    let mut ind = vec![false; n];
    for &s in set {
        if s >= n {
            return Err(Error::Input(format!("state {s} outside 0..{n}")));
        }
        ind[s] = true;
    }
    Ok(ind)
}

/// Errors unless every state reaches `target` in one or more steps.
pub(crate) fn require_reachable(chain: &FiniteChain, target: &[bool]) -> Result<()> {
    let reach = chain.reaches_in_one_or_more(target);
    let states: Vec<usize> = (0..chain.len()).filter(|&i| !reach[i]).collect();
    if states.is_empty() {
        Ok(())
    } else {
        Err(Error::Unreachable { states })
    }
}

/// Solves `(I − P·diag(1_free)) x = rhs`, checking the residual.
pub(crate) fn solve_killed(chain: &FiniteChain, free: &[bool], rhs: &DVector<f64>, what: &'static str) -> Result<DVector<f64>> {
    let n = chain.len();
    let a = DMatrix::from_fn(n, n, |i, j| {
        let kill = if free[j] { chain.prob(i, j) } else { 0.0 };
        if i == j { 1.0 - kill } else { -kill }
    });
    let lu = a.clone().lu();
    let mut x = lu.solve(rhs).ok_or(Error::Singular(what))?;
    let r = rhs - &a * &x;
    if let Some(c) = lu.solve(&r) {
        x += c;
    }
    let resid = (rhs - &a * &x).amax();
    let scale = x.amax().max(1.0);
    if resid > SOLVE_RESIDUAL * scale {
        return Err(Error::Singular(what));
    }
    Ok(x)
}

/// Expected `f`-cost until `C` is hit.
///
/// * `inclusive = false`: `E_φ[Σ_{t=0}^{τ_C − 1} f(φ_t)]` with `τ_C = min{t ≥ 1 : φ_t ∈ C}`.
/// * `inclusive = true`: `E_φ[Σ_{t=0}^{σ_C} f(φ_t)]` with `σ_C = min{t ≥ 0 : φ_t ∈ C}`,
///   so the cost of the hitting state is included and `V = f` on `C`.
///
/// Off `C` the two differ by the expected `f` of the state where `C` is entered.
pub fn hitting_cost(chain: &FiniteChain, f: &[f64], c: &[usize], inclusive: bool) -> Result<DVector<f64>> {
    let n = chain.len();
    if f.len() != n {
        return Err(Error::Input(format!("f has {} entries, chain has {n} states", f.len())));
    }
    let in_c = indicator(n, c)?;
    if !in_c.iter().any(|&b| b) {
        return Err(Error::Input("target set C is empty".into()));
    }
    let free: Vec<bool> = in_c.iter().map(|&b| !b).collect();
    if inclusive {
        let reach = chain.reaches_in_one_or_more(&in_c);
        let states: Vec<usize> = (0..n).filter(|&i| free[i] && !reach[i]).collect();
        if !states.is_empty() {
            return Err(Error::Unreachable { states });
        }
        // off C: V(i) − Σ_{j∉C} P(i,j) V(j) = f(i) + Σ_{j∈C} P(i,j) f(j).
        // Rows for C states do not feed back into the off-C block.
        let rhs = DVector::from_fn(n, |i, _| {
            f[i] + (0..n).filter(|&j| in_c[j]).map(|j| chain.prob(i, j) * f[j]).sum::<f64>()
        });
        let mut v = solve_killed(chain, &free, &rhs, "inclusive hitting cost")?;
        for i in (0..n).filter(|&i| in_c[i]) {
            v[i] = f[i];
        }
        Ok(v)
    } else {
        require_reachable(chain, &in_c)?;
        solve_killed(chain, &free, &DVector::from_column_slice(f), "hitting cost")
    }
}

/// Both sides of Kac's formula:
/// `π(f)` and `Σ_{φ∈A} π(φ) E_φ[Σ_{t=0}^{τ_A−1} f(φ_t)]`.
pub fn kac_moment(chain: &FiniteChain, f: &[f64], a: &[usize]) -> Result<(f64, f64)> {
    let pi = stationary_dist(chain)?;
    let in_a = indicator(chain.len(), a)?;
    let pi_a: f64 = (0..chain.len()).filter(|&i| in_a[i]).map(|i| pi[i]).sum();
    if pi_a <= 0.0 {
        return Err(Error::Input("pi(A) = 0".into()));
    }
    let lhs: f64 = pi.iter().zip(f).map(|(p, v)| p * v).sum();
    let g = hitting_cost(chain, f, a, false)?;
    let rhs: f64 = (0..chain.len()).filter(|&i| in_a[i]).map(|i| pi[i] * g[i]).sum();
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kac_symmetric_two_state() {
        let c = FiniteChain::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let (lhs, rhs) = kac_moment(&c, &[1.0, 1.0], &[0]).unwrap();
        assert!((lhs - 1.0).abs() < 1e-14);
        assert!((rhs - 1.0).abs() < 1e-14);
        let g = hitting_cost(&c, &[1.0, 1.0], &[0], false).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn kac_whole_space() {
        let c = FiniteChain::from_rows(&[vec![0.8, 0.2], vec![0.3, 0.7]]).unwrap();
        let (lhs, rhs) = kac_moment(&c, &[1.0, 1.0], &[0, 1]).unwrap();
        assert!((lhs - 1.0).abs() < 1e-14 && (rhs - 1.0).abs() < 1e-14);
    }

    #[test]
    fn inclusive_two_state_hand_solution() {
        // P(· → 0) = 1
        let c = FiniteChain::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let f = [2.0, 5.0];
        let v = hitting_cost(&c, &f, &[0], true).unwrap();
        assert!((v[0] - 2.0).abs() < 1e-14);
        assert!((v[1] - 7.0).abs() < 1e-14);
        let pv = c.apply(&v);
        assert!((pv[1] - (v[1] - f[1])).abs() < 1e-14);
    }

    #[test]
    fn f_one_gives_mean_hitting_time() {
        // from 1: hit 0 w.p. 0.3 each step → E[τ] = 1/0.3
        let c = FiniteChain::from_rows(&[vec![0.5, 0.5], vec![0.3, 0.7]]).unwrap();
        let g = hitting_cost(&c, &[1.0, 1.0], &[0], false).unwrap();
        assert!((g[1] - 1.0 / 0.3).abs() < 1e-12);
        // return time to 0 is 1/π(0)
        let pi = stationary_dist(&c).unwrap();
        assert!((g[0] - 1.0 / pi[0]).abs() < 1e-12);
    }

    #[test]
    fn unreachable_target() {
        let c = FiniteChain::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(
            hitting_cost(&c, &[1.0, 1.0], &[0], false),
            Err(Error::Unreachable { ref states }) if states == &vec![1]
        ));
        assert!(matches!(
            hitting_cost(&c, &[1.0, 1.0], &[0], true),
            Err(Error::Unreachable { .. })
        ));
    }
}
