//! Small statistics helpers shared by the Monte-Carlo estimators.

/// Two-sided 99% standard normal quantile.
pub const Z_99: f64 = 2.575_829_303_548_900_4;

/// Wilson score interval for `successes` out of `n` at quantile `z`.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let phat = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (phat + z2 / (2.0 * n)) / denom;
    let half = z * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // the interval closes exactly on 0 or 1 at the extremes
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes as f64 == n { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Sample mean and a normal-approximation interval `mean ± z·sd/√n`.
pub fn mean_interval(samples: &[f64], z: f64) -> (f64, f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mut s = CompensatedSum::default();
    samples.iter().for_each(|&x| s.add(x));
    let mean = s.value() / n as f64;
    if n == 1 {
        return (mean, mean, mean);
    }
    let mut ss = CompensatedSum::default();
    samples.iter().for_each(|&x| ss.add((x - mean) * (x - mean)));
    let sd = (ss.value() / (n - 1) as f64).sqrt();
    let half = z * sd / (n as f64).sqrt();
    (mean, mean - half, mean + half)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_known_values() {
        // p̂ = 0.5, n = 100, z = 1.96 gives (0.4038, 0.5962).
        let (lo, hi) = wilson_interval(50, 100, 1.96);
        assert!((lo - 0.403_831).abs() < 1e-5, "{lo}");
        assert!((hi - 0.596_169).abs() < 1e-5, "{hi}");
        let (lo, hi) = wilson_interval(0, 1000, Z_99);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.01);
        let (lo, hi) = wilson_interval(1000, 1000, Z_99);
        assert!(lo < 1.0 && lo > 0.99);
        assert_eq!(hi, 1.0);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::default();
        s.add(1e16);
        for _ in 0..1000 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 1000.0);
    }

    #[test]
    fn mean_interval_basic() {
        let (m, lo, hi) = mean_interval(&[1.0, 2.0, 3.0, 4.0], 2.0);
        assert_eq!(m, 2.5);
        let sd = (5.0f64 / 3.0).sqrt();
        assert!((hi - m - sd).abs() < 1e-12);
        assert!((m - lo - sd).abs() < 1e-12);
    }
}
