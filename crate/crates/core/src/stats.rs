//! Statistics helpers for the experiment drivers: sample mean and standard
//! error, normal and Wilson 95% intervals, jackknife standard errors, and a
//! Kolmogorov-Smirnov distance. All are plain formulas; the tests pin them
//! to hand-computed values and to identities that hold exactly.

/// Two-sided 95% standard normal quantile.
pub const Z95: f64 = 1.959963984540054;

/// Sample mean.
pub fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    Some(xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Sample mean and its standard error (unbiased variance, n-1 denominator).
/// Needs at least two observations.
pub fn mean_se(xs: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len();
    if n < 2 {
        return None;
    }
    let m = mean(xs)?;
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    let var = ss / (n - 1) as f64;
    Some((m, (var / n as f64).sqrt()))
}

/// Symmetric normal-approximation 95% interval around a mean.
pub fn normal_ci95(mean: f64, se: f64) -> (f64, f64) {
    (mean - Z95 * se, mean + Z95 * se)
}

/// Wilson score 95% interval for a binomial proportion. Returns
/// `(p_hat, lo, hi)`; the interval always contains `p_hat`.
pub fn wilson95(successes: u64, trials: u64) -> Option<(f64, f64, f64)> {
    if trials == 0 {
        return None;
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // At p = 0 or p = 1 the exact endpoint equals p; rounding can land one
    // ulp past it, so containment is enforced explicitly.
    let lo = (center - half).max(0.0).min(p);
    let hi = (center + half).min(1.0).max(p);
    debug_assert!(lo <= p && p <= hi, "Wilson interval must contain the point estimate");
    Some((p, lo, hi))
}

/// Binomial standard deviation of a proportion estimate.
pub fn binomial_sigma(p: f64, n: u64) -> f64 {
    if n == 0 {
        return f64::INFINITY;
    }
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Leave-one-out jackknife standard error of `stat` over `data`. Runs the
/// statistic n times on n-1 points; fine for the replica counts used here.
pub fn jackknife_se<T: Copy, F: Fn(&[T]) -> f64>(data: &[T], stat: F) -> Option<f64> {
    let n = data.len();
    if n < 2 {
        return None;
    }
    let mut scratch = Vec::with_capacity(n - 1);
    let mut leave_one_out = Vec::with_capacity(n);
    for i in 0..n {
        scratch.clear();
        scratch.extend_from_slice(&data[..i]);
        scratch.extend_from_slice(&data[i + 1..]);
        leave_one_out.push(stat(&scratch));
    }
    let m = leave_one_out.iter().sum::<f64>() / n as f64;
    let ss: f64 = leave_one_out.iter().map(|x| (x - m) * (x - m)).sum();
    Some(((n - 1) as f64 / n as f64 * ss).sqrt())
}

/// Two-sided Kolmogorov-Smirnov distance between a sample and a reference
/// CDF: sup over the sample of the gap between empirical and reference.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> Option<f64> {
    if sample.is_empty() {
        return None;
    }
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        let hi = (i + 1) as f64 / n;
        let lo = i as f64 / n;
        d = d.max((hi - f).abs()).max((f - lo).abs());
    }
    Some(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_se_matches_hand_computation() {
        // {1,2,3,4}: mean 2.5, sample variance 5/3, se = sqrt(5/3)/2.
        let (m, se) = mean_se(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((m - 2.5).abs() < 1e-12, "mean {m}");
        assert!((se - (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-12, "se {se}");
        assert!(mean_se(&[1.0]).is_none(), "single observation has no spread estimate");
        assert!(mean(&[]).is_none());
    }

    #[test]
    fn wilson_interval_endpoints_solve_the_score_equation() {
        // Each Wilson endpoint p solves |p_hat - p| = z sqrt(p(1-p)/n); check
        // the defining equation directly rather than re-deriving the formula.
        for &(s, n) in &[(8u64, 10u64), (0, 10), (10, 10), (37, 50), (1, 200)] {
            let (p_hat, lo, hi) = wilson95(s, n).unwrap();
            for p in [lo, hi] {
                if p == 0.0 || p == 1.0 {
                    continue; // clamped exact endpoints at the boundary
                }
                let lhs = (p_hat - p).abs();
                let rhs = Z95 * (p * (1.0 - p) / n as f64).sqrt();
                assert!(
                    (lhs - rhs).abs() < 1e-10,
                    "endpoint {p} of ({s}/{n}) violates the score equation: {lhs} vs {rhs}"
                );
            }
            assert!(lo <= p_hat && p_hat <= hi, "interval must contain the estimate");
        }
    }

    #[test]
    fn wilson_interval_matches_frozen_reference_values() {
        // 8 successes in 10 trials: (0.4901625, 0.9433178) from the score
        // formula evaluated independently.
        let (p, lo, hi) = wilson95(8, 10).unwrap();
        assert!((p - 0.8).abs() < 1e-12);
        assert!((lo - 0.4901625).abs() < 1e-6, "lo {lo}");
        assert!((hi - 0.9433178).abs() < 1e-6, "hi {hi}");
        // Zero successes: interval starts at exactly 0 and excludes nothing.
        let (_, lo0, hi0) = wilson95(0, 10).unwrap();
        assert_eq!(lo0, 0.0);
        assert!(hi0 > 0.25, "n=10 zero-count upper bound is wide: {hi0}");
        assert!(wilson95(3, 0).is_none());
    }

    #[test]
    fn jackknife_of_the_mean_equals_classical_standard_error() {
        // For the sample mean the jackknife SE reduces algebraically to the
        // classical sd/sqrt(n); the two routes must agree to rounding.
        let data = [0.3, 1.7, 2.9, 0.1, 4.4, 2.2, 3.3, 0.9];
        let jk = jackknife_se(&data, |xs| xs.iter().sum::<f64>() / xs.len() as f64).unwrap();
        let (_, se) = mean_se(&data).unwrap();
        assert!((jk - se).abs() < 1e-12, "jackknife {jk} vs classical {se}");
        assert!(jackknife_se(&[1.0], |_| 0.0).is_none());
    }

    #[test]
    fn jackknife_handles_a_nonlinear_statistic() {
        // Product-of-halves statistic over indicator pairs; hand-check one
        // leave-one-out value and basic positivity.
        let data: &[(f64, f64)] = &[(1.0, 1.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)];
        let stat = |xs: &[(f64, f64)]| {
            let a = xs.iter().map(|p| p.0).sum::<f64>() / xs.len() as f64;
            let b = xs.iter().map(|p| p.1).sum::<f64>() / xs.len() as f64;
            a * b
        };
        let se = jackknife_se(data, stat).unwrap();
        assert!(se > 0.0 && se < 1.0, "nonlinear jackknife SE in range: {se}");
    }

    #[test]
    fn ks_distance_matches_hand_computation() {
        // Sample {0.1, 0.4, 0.7} against U(0,1): D = max gap = 0.3 at the
        // top point (|1 - 0.7|).
        let d = ks_statistic(&[0.7, 0.1, 0.4], |x| x).unwrap();
        assert!((d - 0.3).abs() < 1e-12, "ks {d}");
        assert!(ks_statistic(&[], |x| x).is_none());
        // A sample drawn exactly at the uniform quantile midpoints minimizes
        // the distance at 1/(2n).
        let d2 = ks_statistic(&[0.25, 0.75], |x| x).unwrap();
        assert!((d2 - 0.25).abs() < 1e-12, "ks {d2}");
    }

    #[test]
    fn binomial_sigma_basics() {
        assert!((binomial_sigma(0.5, 100) - 0.05).abs() < 1e-12);
        assert_eq!(binomial_sigma(0.5, 0), f64::INFINITY);
        assert_eq!(binomial_sigma(0.0, 50), 0.0);
    }
}
