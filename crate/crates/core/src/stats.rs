//! Small descriptive and goodness-of-fit statistics.

use crate::scalar::Real;
use crate::special::gamma_p;

pub fn mean<F: Real>(xs: &[F]) -> F {
    xs.iter().copied().sum::<F>() / F::from_count(xs.len())
}

/// Unbiased sample variance; zero for fewer than two values.
pub fn variance<F: Real>(xs: &[F]) -> F {
    if xs.len() < 2 {
        return F::zero();
    }
    let m = mean(xs);
    xs.iter().map(|&x| (x - m) * (x - m)).sum::<F>() / F::from_count(xs.len() - 1)
}

/// Variance of the sample mean from non-overlapping batch means.
///
/// Trailing values that do not fill a batch are dropped. Falls back to the
/// i.i.d. formula when fewer than two batches fit.
pub fn batch_means_variance<F: Real>(xs: &[F], batches: usize) -> F {
    let size = xs.len() / batches.max(1);
    if batches < 2 || size == 0 {
        return variance(xs) / F::from_count(xs.len().max(1));
    }
    let means: Vec<F> = xs.chunks_exact(size).take(batches).map(mean).collect();
    variance(&means) / F::from_count(means.len())
}

/// Sample quantile by linear interpolation between order statistics
/// (`h = (n-1) p`). `sorted` must be ascending and nonempty.
pub fn quantile_sorted<F: Real>(sorted: &[F], p: F) -> F {
    let n = sorted.len();
    assert!(n > 0, "quantile of empty sample");
    let h = F::from_count(n - 1) * p.max(F::zero()).min(F::one());
    let lo = h.floor();
    let i = lo.to_usize().unwrap_or(0).min(n - 1);
    if i + 1 >= n {
        return sorted[n - 1];
    }
    sorted[i] + (h - lo) * (sorted[i + 1] - sorted[i])
}

pub fn quantile<F: Real>(xs: &[F], p: F) -> F {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("NaN in sample"));
    quantile_sorted(&v, p)
}

/// Fraction of `sorted` that is `<= x`.
pub fn ecdf_sorted<F: Real>(sorted: &[F], x: F) -> F {
    let count = sorted.partition_point(|&v| v <= x);
    F::from_count(count) / F::from_count(sorted.len())
}

/// Standard normal distribution function, via `P(1/2, x²/2)`.
pub fn normal_cdf<F: Real>(x: F) -> F {
    let half = F::lit(0.5);
    let p = gamma_p(half, half * x * x);
    if x >= F::zero() {
        half + half * p
    } else {
        half - half * p
    }
}

/// Kolmogorov–Smirnov distance between a sample and a continuous
/// distribution function.
pub fn ks_statistic<F: Real>(sample: &[F], cdf: impl Fn(F) -> F) -> F {
    let mut v = sample.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("NaN in sample"));
    let n = F::from_count(v.len());
    let mut d = F::zero();
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        let above = F::from_count(i + 1) / n - f;
        let below = f - F::from_count(i) / n;
        d = d.max(above).max(below);
    }
    d
}

/// Asymptotic p-value of the one-sample KS statistic `d` at sample size `n`,
/// with the Stephens small-sample correction.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = sign * (-2.0 * k * k * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quantiles_by_interpolation() {
        assert_eq!(quantile(&[3.0, 1.0, 2.0], 0.5), 2.0);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0], 0.5), 2.5);
        assert_eq!(quantile(&[5.0; 7], 0.025), 5.0);
        assert_eq!(quantile(&[5.0; 7], 0.975), 5.0);
        assert_eq!(quantile(&[1.0, 2.0], 1.0), 2.0);
        assert_eq!(quantile(&[1.0, 2.0], 0.0), 1.0);
    }

    #[test]
    fn normal_quantiles_from_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<f64> = (0..100_000).map(|_| f64::std_normal(&mut rng)).collect();
        for (p, z) in [(0.025, -1.959_964), (0.5, 0.0), (0.975, 1.959_964)] {
            assert!((quantile(&xs, p) - z).abs() < 0.03);
        }
    }

    #[test]
    fn normal_cdf_values() {
        assert!((normal_cdf(0.0_f64) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(1.959_963_984_540_054_f64) - 0.975).abs() < 1e-12);
        assert!((normal_cdf(-1.0_f64) - 0.158_655_253_931_457_05).abs() < 1e-13);
    }

    #[test]
    fn ks_accepts_matching_and_rejects_shifted() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xs: Vec<f64> = (0..5000).map(|_| f64::std_normal(&mut rng)).collect();
        let d = ks_statistic(&xs, normal_cdf);
        assert!(ks_p_value(d, xs.len()) > 0.01);
        let shifted: Vec<f64> = xs.iter().map(|x| x + 0.1).collect();
        let d = ks_statistic(&shifted, normal_cdf);
        assert!(ks_p_value(d, xs.len()) < 0.01);
    }

    #[test]
    fn kolmogorov_tail_reference() {
        // P(K > 1.36) ≈ 0.0494
        assert!((ks_p_value(1.36 / (1e8_f64).sqrt(), 100_000_000) - 0.0494).abs() < 1e-3);
    }

    #[test]
    fn batch_means_reduce_to_iid_for_white_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let xs: Vec<f64> = (0..20_000).map(|_| f64::std_normal(&mut rng)).collect();
        let v = batch_means_variance(&xs, 20);
        assert!((v * 20_000.0 - 1.0).abs() < 0.6);
        assert_eq!(ecdf_sorted(&[1.0, 2.0, 3.0], 2.0), 2.0 / 3.0);
        assert_eq!(ecdf_sorted(&[1.0, 2.0, 3.0], 0.5), 0.0);
    }
}
