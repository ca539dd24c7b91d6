//! Small statistics helpers shared by the trial runner and the test suites.

/// Mean and standard error of the mean. `se` is zero for fewer than two
/// samples.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize)]
pub struct MeanSe {
    pub count: usize,
    pub mean: f64,
    pub se: f64,
}

pub fn mean_se<I: IntoIterator<Item = f64>>(xs: I) -> MeanSe {
    // Welford.
    let mut count = 0usize;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for x in xs {
        count += 1;
        let d = x - mean;
        mean += d / count as f64;
        m2 += d * (x - mean);
    }
    if count == 0 {
        return MeanSe::default();
    }
    let se = if count > 1 {
        (m2 / (count - 1) as f64 / count as f64).sqrt()
    } else {
        0.0
    };
    MeanSe { count, mean, se }
}

/// Standard error of a binomial proportion `p` estimated from `trials`.
pub fn binomial_se(p: f64, trials: usize) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

/// Value at quantile `q` (nearest-rank) of an unsorted sample.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    assert!(!xs.is_empty());
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = (q * v.len() as f64).ceil() as usize;
    v[rank.clamp(1, v.len()) - 1]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    /// sup |F_a − F_b|
    pub statistic: f64,
    /// Asymptotic p-value from the Kolmogorov distribution.
    pub p_value: f64,
}

/// Two-sample Kolmogorov–Smirnov test. Ties are handled by stepping over
/// equal values together, which makes the test conservative for discrete
/// data.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    assert!(!a.is_empty() && !b.is_empty());
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let en = (na * nb / (na + nb)).sqrt();
    let lambda = (en + 0.12 + 0.11 / en) * d;
    KsResult {
        statistic: d,
        p_value: kolmogorov_q(lambda),
    }
}

/// Survival function of the Kolmogorov distribution.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = sign * (-2.0 * kf * kf * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Poisson(mean) probability mass at `k`, computed in log space.
pub fn poisson_pmf(mean: f64, k: usize) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let mut log_fact = 0.0;
    for i in 2..=k {
        log_fact += (i as f64).ln();
    }
    (k as f64 * mean.ln() - mean - log_fact).exp()
}

/// Total-variation distance between the empirical distribution of `counts`
/// and a Poisson law.
pub fn tv_to_poisson(counts: &[usize], mean: f64) -> f64 {
    let max = counts.iter().copied().max().unwrap_or(0);
    let mut hist = vec![0usize; max + 1];
    for &c in counts {
        hist[c] += 1;
    }
    let total = counts.len() as f64;
    let mut covered = 0.0;
    let mut dist = 0.0;
    for (k, &h) in hist.iter().enumerate() {
        let p = poisson_pmf(mean, k);
        covered += p;
        dist += (h as f64 / total - p).abs();
    }
    0.5 * (dist + (1.0 - covered).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_se() {
        let m = mean_se([1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.count, 4);
        assert!((m.mean - 2.5).abs() < 1e-15);
        // sample sd = sqrt(5/3)
        assert!((m.se - (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-12);
        assert_eq!(mean_se([7.0]).se, 0.0);
        assert_eq!(mean_se(std::iter::empty()).count, 0);
    }

    #[test]
    fn ks_identical_and_disjoint() {
        let a: Vec<f64> = (0..100).map(f64::from).collect();
        let r = ks_two_sample(&a, &a);
        assert_eq!(r.statistic, 0.0);
        assert!(r.p_value > 0.99);
        let b: Vec<f64> = (200..300).map(f64::from).collect();
        let r = ks_two_sample(&a, &b);
        assert_eq!(r.statistic, 1.0);
        assert!(r.p_value < 1e-10);
    }

    #[test]
    fn kolmogorov_reference_point() {
        // Q(1.36) ≈ 0.049 is the classic 5% point.
        assert!((kolmogorov_q(1.358) - 0.05).abs() < 1e-3);
    }

    #[test]
    fn poisson_pmf_sums_to_one() {
        let s: f64 = (0..60).map(|k| poisson_pmf(5.0, k)).sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!((poisson_pmf(2.0, 3) - 8.0 / 6.0 * (-2.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn quantile_nearest_rank() {
        let xs: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(quantile(&xs, 0.99), 99.0);
        assert_eq!(quantile(&xs, 1.0), 100.0);
        assert_eq!(quantile(&xs, 0.0), 1.0);
    }
}
