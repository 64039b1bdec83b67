//! Statistical procedures for comparing Monte Carlo output with theory.
//!
//! Everything here is a classical frequentist tool: Wilson score intervals
//! for binomial proportions, the two-sample Kolmogorov-Smirnov test, the
//! one-sided Mann-Whitney rank test with tie correction, and ordinary
//! least-squares fits with a t-test on the slope. The implementations are
//! self-contained and validated against reference values from an
//! independent implementation in the unit tests.

use crate::{Error, Result};

/// One-sided 99% normal critical value, Phi^{-1}(0.99).
pub const Z_99: f64 = 2.3263478740408408;

/// Two-sided 95% normal critical value, Phi^{-1}(0.975).
pub const Z_95: f64 = 1.9599639845400545;

/// Arithmetic mean. Returns 0 for an empty slice.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (n-1 denominator). Returns 0 when n < 2.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

/// Standard error of the mean, sqrt(variance / n).
pub fn standard_error(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    (sample_variance(xs) / xs.len() as f64).sqrt()
}

/// Z-score of the sample mean against a hypothesised mean, using the
/// sample standard error. Infinite when the sample has zero variance and
/// the means disagree; 0 when they agree exactly.
pub fn mean_z_score(xs: &[f64], expected: f64) -> f64 {
    let se = standard_error(xs);
    let diff = mean(xs) - expected;
    if se == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY * diff.signum()
        }
    } else {
        diff / se
    }
}

/// Wilson score interval for a binomial proportion at the given normal
/// quantile `z`. Endpoints are clamped to [0, 1].
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(Error::invalid("wilson_interval requires at least one trial"));
    }
    if successes > trials {
        return Err(Error::invalid("successes exceed trials"));
    }
    if !z.is_finite() || z <= 0.0 {
        return Err(Error::invalid("z must be positive and finite"));
    }
    let n = trials as f64;
    let phat = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (phat + z2 / (2.0 * n)) / denom;
    let half = z * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    Ok(((center - half).max(0.0), (center + half).min(1.0)))
}

/// Standard normal CDF. Uses the Abramowitz-Stegun 7.1.26 rational
/// approximation of erf, absolute error below 1.5e-7.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

fn erf(x: f64) -> f64 {
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.327_591_1 * x);
    let poly = t
        * (0.254_829_592
            + t * (-0.284_496_736 + t * (1.421_413_741 + t * (-1.453_152_027 + t * 1.061_405_429))));
    sign * (1.0 - poly * (-x * x).exp())
}

/// Outcome of a two-sample Kolmogorov-Smirnov test.
#[derive(Debug, Clone, Copy)]
pub struct KsResult {
    /// Supremum distance between the two empirical CDFs.
    pub statistic: f64,
    /// Rejection threshold c(alpha) * sqrt((n+m)/(n*m)).
    pub threshold: f64,
    /// True when the statistic exceeds the threshold.
    pub reject: bool,
}

/// Two-sample Kolmogorov-Smirnov test at significance level `alpha`,
/// using the asymptotic critical value c(alpha) = sqrt(-ln(alpha/2)/2).
pub fn ks_two_sample(a: &[f64], b: &[f64], alpha: f64) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("ks_two_sample requires nonempty samples"));
    }
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::invalid("alpha must lie in (0, 1)"));
    }
    let mut a: Vec<f64> = a.to_vec();
    let mut b: Vec<f64> = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut stat: f64 = 0.0;
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        let fa = i as f64 / n as f64;
        let fb = j as f64 / m as f64;
        stat = stat.max((fa - fb).abs());
    }
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    let threshold = c * (((n + m) as f64) / ((n * m) as f64)).sqrt();
    Ok(KsResult { statistic: stat, threshold, reject: stat > threshold })
}

/// Outcome of a one-sided Mann-Whitney rank test.
#[derive(Debug, Clone, Copy)]
pub struct MannWhitneyResult {
    /// U statistic of the first sample.
    pub u: f64,
    /// Tie-corrected normal approximation with continuity correction.
    pub z: f64,
    /// One-sided p-value for the alternative "first sample is greater".
    pub p_value: f64,
}

/// One-sided Mann-Whitney test of the alternative hypothesis that `a`
/// is stochastically greater than `b`. Uses midranks for ties and the
/// tie-corrected normal approximation.
pub fn mann_whitney_greater(a: &[f64], b: &[f64]) -> Result<MannWhitneyResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("mann_whitney_greater requires nonempty samples"));
    }
    let na = a.len();
    let nb = b.len();
    let total = na + nb;
    let mut combined: Vec<(f64, bool)> = a
        .iter()
        .map(|&x| (x, true))
        .chain(b.iter().map(|&x| (x, false)))
        .collect();
    combined.sort_by(|p, q| p.0.total_cmp(&q.0));

    let mut rank_sum_a = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0usize;
    while i < total {
        let mut j = i;
        while j < total && combined[j].0 == combined[i].0 {
            j += 1;
        }
        let group = (j - i) as f64;
        let midrank = (i + 1 + j) as f64 / 2.0;
        for entry in &combined[i..j] {
            if entry.1 {
                rank_sum_a += midrank;
            }
        }
        tie_term += group * group * group - group;
        i = j;
    }

    let u = rank_sum_a - (na * (na + 1)) as f64 / 2.0;
    let mu = (na * nb) as f64 / 2.0;
    let nn = total as f64;
    let sigma2 =
        (na * nb) as f64 / 12.0 * ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
    if sigma2 <= 0.0 {
        return Err(Error::invalid("degenerate ranks: all values tied"));
    }
    let z = (u - mu - 0.5) / sigma2.sqrt();
    Ok(MannWhitneyResult { u, z, p_value: 1.0 - normal_cdf(z) })
}

/// Ordinary least-squares line fit with a t-statistic on the slope.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope estimate.
    pub slope_se: f64,
    /// Coefficient of determination.
    pub r_squared: f64,
    /// Residual degrees of freedom, n - 2.
    pub df: usize,
    /// t statistic slope / slope_se.
    pub t: f64,
}

impl LinearFit {
    /// One-sided test of slope < 0 at the 99% level.
    pub fn slope_negative_at_99(&self) -> bool {
        self.t < -t_critical_one_sided_99(self.df)
    }
}

/// Least-squares fit of y = intercept + slope * x. Requires at least
/// three points and nonconstant x.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() {
        return Err(Error::invalid("linear_fit requires equal-length inputs"));
    }
    let n = xs.len();
    if n < 3 {
        return Err(Error::invalid("linear_fit requires at least three points"));
    }
    let mx = mean(xs);
    let my = mean(ys);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("linear_fit requires nonconstant x"));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse = (syy - slope * sxy).max(0.0);
    let df = n - 2;
    let slope_se = (sse / df as f64 / sxx).sqrt();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    let t = if slope_se == 0.0 {
        f64::INFINITY * slope.signum()
    } else {
        slope / slope_se
    };
    Ok(LinearFit { slope, intercept, slope_se, r_squared, df, t })
}

/// One-sided 99% critical value of Student's t with `df` degrees of
/// freedom. Exact table for df <= 30; larger df reuse the df = 30 value,
/// which is conservative (it exceeds the true critical value).
pub fn t_critical_one_sided_99(df: usize) -> f64 {
    const TABLE: [f64; 30] = [
        31.8205, 6.9646, 4.5407, 3.7469, 3.3649, 3.1427, 2.9980, 2.8965, 2.8214, 2.7638,
        2.7181, 2.6810, 2.6503, 2.6245, 2.6025, 2.5835, 2.5669, 2.5524, 2.5395, 2.5280,
        2.5176, 2.5083, 2.4999, 2.4922, 2.4851, 2.4786, 2.4727, 2.4671, 2.4620, 2.4573,
    ];
    match df {
        0 => f64::INFINITY,
        d if d <= 30 => TABLE[d - 1],
        _ => TABLE[29],
    }
}
