//! Summary statistics and the paired t-test.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; zero for fewer than two values.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn std_error(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    (variance(xs) / xs.len() as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairedTest {
    pub n: usize,
    /// Mean of `a − b`.
    pub mean_diff: f64,
    pub stderr: f64,
    pub t: f64,
    /// One-sided p-value for `mean(a − b) < 0`.
    pub p_less: f64,
    /// One-sided p-value for `mean(a − b) > 0`.
    pub p_greater: f64,
    pub p_two_sided: f64,
}

/// Paired t-test on `a − b`. With zero spread the statistic is ±∞ (or 0 when
/// the differences are all zero) and the p-values are 0 or 1 accordingly.
pub fn paired_t(a: &[f64], b: &[f64]) -> PairedTest {
    assert_eq!(a.len(), b.len(), "paired samples must have equal length");
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len();
    let mean_diff = mean(&d);
    let stderr = std_error(&d);
    let (t, p_less) = if stderr > 0.0 && n >= 2 {
        let t = mean_diff / stderr;
        let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("positive degrees of freedom");
        (t, dist.cdf(t))
    } else if mean_diff < 0.0 {
        (f64::NEG_INFINITY, 0.0)
    } else if mean_diff > 0.0 {
        (f64::INFINITY, 1.0)
    } else {
        (0.0, 0.5)
    };
    let p_greater = 1.0 - p_less;
    let p_two_sided = if mean_diff == 0.0 && stderr == 0.0 {
        1.0
    } else {
        (2.0 * p_less.min(p_greater)).min(1.0)
    };
    PairedTest {
        n,
        mean_diff,
        stderr,
        t,
        p_less,
        p_greater,
        p_two_sided,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&xs), 2.5);
        assert!((variance(&xs) - 5.0 / 3.0).abs() < 1e-12);
        assert_eq!(variance(&[3.0]), 0.0);
    }

    #[test]
    fn identical_samples_have_zero_difference() {
        let a = [1.0, 5.0, 2.0];
        let r = paired_t(&a, &a);
        assert_eq!(r.mean_diff, 0.0);
        assert_eq!(r.p_two_sided, 1.0);
    }

    #[test]
    fn t_statistic_against_hand_computation() {
        // differences -1, -2, -3: mean -2, sd 1, stderr 1/√3, t = -2√3
        let r = paired_t(&[0.0, 0.0, 0.0], &[1.0, 2.0, 3.0]);
        assert!((r.t + 2.0 * 3f64.sqrt()).abs() < 1e-12);
        // two degrees of freedom: P(T < t) = 1/2 + t / (2√(2+t²))
        let t = r.t;
        let expected = 0.5 + t / (2.0 * (2.0 + t * t).sqrt());
        assert!((r.p_less - expected).abs() < 1e-9);
    }
}
