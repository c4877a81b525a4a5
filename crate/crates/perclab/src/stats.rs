//! Small statistical helpers shared by tests and experiment summaries.

use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor};

/// Sample mean.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Standard error of the sample mean.
pub fn stderr(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len() as f64).sqrt()
}

/// Chi-square goodness-of-fit statistic for observed counts against
/// expected counts (which need not be integers). Bins with expected
/// count zero must have observed zero.
pub fn chi_square_stat(observed: &[u64], expected: &[f64]) -> f64 {
    assert_eq!(observed.len(), expected.len());
    let mut stat = 0.0;
    for (&o, &e) in observed.iter().zip(expected) {
        if e > 0.0 {
            let d = o as f64 - e;
            stat += d * d / e;
        } else {
            assert_eq!(o, 0, "observed count in a zero-probability bin");
        }
    }
    stat
}

/// Upper-tail p-value of a chi-square statistic with `df` degrees of freedom.
pub fn chi_square_pvalue(stat: f64, df: f64) -> f64 {
    if df <= 0.0 {
        return 1.0;
    }
    let dist = ChiSquared::new(df).expect("df > 0");
    1.0 - dist.cdf(stat)
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(|p, q| p.total_cmp(q));
    xb.sort_by(|p, q| p.total_cmp(q));
    let (n, m) = (xa.len(), xb.len());
    let mut i = 0;
    let mut j = 0;
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let cur = xa[i].min(xb[j]);
        while i < n && xa[i] == cur {
            i += 1;
        }
        while j < m && xb[j] == cur {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    d
}

/// Critical value for the two-sample KS test at level `alpha`.
pub fn ks_critical(alpha: f64, n: usize, m: usize) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

/// Total-variation distance between two empirical distributions over the
/// same bins, given raw counts.
pub fn tv_distance(p: &[u64], q: &[u64]) -> f64 {
    assert_eq!(p.len(), q.len());
    let sp: u64 = p.iter().sum();
    let sq: u64 = q.iter().sum();
    if sp == 0 || sq == 0 {
        return f64::NAN;
    }
    0.5 * p
        .iter()
        .zip(q)
        .map(|(&a, &b)| (a as f64 / sp as f64 - b as f64 / sq as f64).abs())
        .sum::<f64>()
}

/// One-way ANOVA p-value across groups (equal-variance F test).
pub fn anova_pvalue(groups: &[Vec<f64>]) -> f64 {
    let k = groups.len();
    let n: usize = groups.iter().map(|g| g.len()).sum();
    if k < 2 || n <= k {
        return 1.0;
    }
    let grand = groups.iter().flatten().sum::<f64>() / n as f64;
    let ss_between: f64 = groups
        .iter()
        .filter(|g| !g.is_empty())
        .map(|g| g.len() as f64 * (mean(g) - grand).powi(2))
        .sum();
    let ss_within: f64 = groups
        .iter()
        .map(|g| {
            let m = mean(g);
            g.iter().map(|x| (x - m) * (x - m)).sum::<f64>()
        })
        .sum();
    let df1 = (k - 1) as f64;
    let df2 = (n - k) as f64;
    if ss_within <= 0.0 {
        return if ss_between > 0.0 { 0.0 } else { 1.0 };
    }
    let f = (ss_between / df1) / (ss_within / df2);
    let dist = FisherSnedecor::new(df1, df2).expect("valid dof");
    1.0 - dist.cdf(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_stderr() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&xs), 2.5);
        assert!((variance(&xs) - 5.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn chi_square_uniform_counts() {
        let obs = [250u64, 250, 250, 250];
        let exp = [250.0; 4];
        assert_eq!(chi_square_stat(&obs, &exp), 0.0);
        assert!(chi_square_pvalue(20.0, 3.0) < 0.001);
        assert!(chi_square_pvalue(0.5, 3.0) > 0.9);
    }

    #[test]
    fn ks_identical_samples() {
        let a = [0.1, 0.4, 0.9, 1.5];
        assert_eq!(ks_statistic(&a, &a), 0.0);
        assert!(ks_statistic(&a, &[5.0, 6.0, 7.0]) == 1.0);
    }

    #[test]
    fn tv_simple() {
        assert_eq!(tv_distance(&[10, 0], &[0, 10]), 1.0);
        assert_eq!(tv_distance(&[5, 5], &[50, 50]), 0.0);
    }

    #[test]
    fn anova_detects_shift() {
        let g1: Vec<f64> = (0..50).map(|i| i as f64 * 0.01).collect();
        let g2: Vec<f64> = (0..50).map(|i| 10.0 + i as f64 * 0.01).collect();
        assert!(anova_pvalue(&[g1.clone(), g2]) < 1e-6);
        let g3 = g1.clone();
        assert!(anova_pvalue(&[g1, g3]) > 0.9);
    }
}
