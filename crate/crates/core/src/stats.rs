//! Small sample statistics used by the experiment harnesses.

/// Pairwise (cascade) summation; result depends only on the slice order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let (lo, hi) = xs.split_at(xs.len() / 2);
    pairwise_sum(lo) + pairwise_sum(hi)
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let sq: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    pairwise_sum(&sq) / (n - 1) as f64
}

/// Standard error of the mean.
pub fn std_error(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    (variance(xs) / xs.len() as f64).sqrt()
}

/// Standard error of the sample variance, from the fourth central moment:
/// `Var(s²) ≈ (μ₄ − σ⁴ (n−3)/(n−1)) / n`.
pub fn variance_std_error(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 4 {
        return 0.0;
    }
    let nf = n as f64;
    let m = mean(xs);
    let m4: Vec<f64> = xs.iter().map(|x| (x - m).powi(4)).collect();
    let mu4 = pairwise_sum(&m4) / nf;
    let s2 = variance(xs);
    let v = (mu4 - s2 * s2 * (nf - 3.0) / (nf - 1.0)) / nf;
    v.max(0.0).sqrt()
}

/// Two-sided normal quantile for the confidence levels used in reports.
pub fn z_value(confidence: f64) -> f64 {
    match confidence {
        c if (c - 0.90).abs() < 1e-12 => 1.644_853_626_951_472_2,
        c if (c - 0.95).abs() < 1e-12 => 1.959_963_984_540_054,
        c if (c - 0.99).abs() < 1e-12 => 2.575_829_303_548_900_4,
        c => panic!("unsupported confidence level {c}"),
    }
}

/// Half-width of the normal-approximation confidence interval of the mean.
pub fn ci_half_width(xs: &[f64], confidence: f64) -> f64 {
    z_value(confidence) * std_error(xs)
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    assert!(!xs.is_empty() && (0.0..=1.0).contains(&q));
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_integers() {
        let xs: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&xs), 500_500.0);
    }

    #[test]
    fn variance_and_quantile() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert!((mean(&xs) - 2.5).abs() < 1e-15);
        assert!((variance(&xs) - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(quantile(&xs, 0.0), 1.0);
        assert_eq!(quantile(&xs, 1.0), 4.0);
        assert!((quantile(&xs, 0.5) - 2.5).abs() < 1e-15);
    }
}
