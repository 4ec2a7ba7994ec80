//! Goodness-of-fit machinery: Kolmogorov-Smirnov and chi-square statistics
//! with asymptotic p-values, plus small helpers shared by the test suites.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// One-sample KS statistic against a fully specified CDF.
/// `sorted` must be ascending.
pub fn ks_statistic(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    let mut sup = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        sup = sup.max((f - i as f64 / n).abs());
        sup = sup.max(((i + 1) as f64 / n - f).abs());
    }
    sup
}

/// Survival function of the Kolmogorov distribution, `P(K > lambda)`.
///
/// Uses the alternating series for large `lambda` and its Jacobi-theta dual
/// for small `lambda`, where the first form converges too slowly.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        let t = (-std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda)).exp();
        let cdf = (std::f64::consts::TAU.sqrt() / lambda)
            * (t + t.powi(9) + t.powi(25) + t.powi(49));
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let mut sum = 0.0;
        let mut sign = 1.0;
        for k in 1..=100 {
            let term = sign * (-2.0 * (k as f64 * lambda).powi(2)).exp();
            sum += term;
            if term.abs() < 1e-16 {
                break;
            }
            sign = -sign;
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

/// Asymptotic p-value of a one-sample KS statistic at sample size `n`.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    kolmogorov_survival((n as f64).sqrt() * d)
}

/// Upper-tail p-value of a chi-square statistic.
pub fn chi_square_pvalue(stat: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    let dist = ChiSquared::new(dof as f64).expect("positive dof");
    (1.0 - dist.cdf(stat)).clamp(0.0, 1.0)
}

/// Bins the support `0..` of a discrete law so every bin's expected count is
/// at least `min_expected`: singleton bins `0..cut` plus one tail bin.
/// Returns the cut (tail bin collects all values `>= cut`).
pub fn tail_cut(pmf: impl Fn(u64) -> f64, n: usize, min_expected: f64) -> u64 {
    let n = n as f64;
    let mut cut = 0u64;
    let mut tail = 1.0;
    // Grow while the next singleton bin and the remaining tail both stay
    // above the threshold.
    loop {
        let p = pmf(cut);
        let next_tail = tail - p;
        if n * p >= min_expected && n * next_tail >= min_expected && cut < 512 {
            tail = next_tail;
            cut += 1;
        } else {
            break;
        }
    }
    cut
}

/// Chi-square test of observed counts against expected probabilities.
/// `probs` must sum to 1 over the binning used for `observed`.
pub fn chi_square_gof(observed: &[u64], probs: &[f64], n: usize) -> (f64, usize, f64) {
    assert_eq!(observed.len(), probs.len());
    let mut stat = 0.0;
    for (&o, &p) in observed.iter().zip(probs) {
        let e = p * n as f64;
        if e > 0.0 {
            stat += (o as f64 - e).powi(2) / e;
        }
    }
    let dof = observed.len().saturating_sub(1);
    (stat, dof, chi_square_pvalue(stat, dof))
}

/// Chi-square independence statistic for a two-way contingency table.
pub fn chi_square_independence(table: &[Vec<u64>]) -> (f64, usize, f64) {
    let rows = table.len();
    let cols = table[0].len();
    let row_sums: Vec<f64> = table.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
    let col_sums: Vec<f64> = (0..cols)
        .map(|j| table.iter().map(|r| r[j]).sum::<u64>() as f64)
        .collect();
    let total: f64 = row_sums.iter().sum();
    let mut stat = 0.0;
    for i in 0..rows {
        for j in 0..cols {
            let e = row_sums[i] * col_sums[j] / total;
            if e > 0.0 {
                stat += (table[i][j] as f64 - e).powi(2) / e;
            }
        }
    }
    let dof = (rows - 1) * (cols - 1);
    (stat, dof, chi_square_pvalue(stat, dof))
}

/// Pearson correlation of two equal-length samples.
pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Type-7 (linear interpolation) quantile of an ascending sample.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    assert!((0.0..=1.0).contains(&q));
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}
