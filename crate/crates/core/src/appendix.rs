//! Brute-force oracles for the technical appendix results: the thinning
//! pmf identity, the convergent series behind the almost-sure limit, and the
//! balls-in-boxes count with its factorial bound.
//!
//! The combinatorial count is computed in exact integer and rational
//! arithmetic; values exceed 64 bits well inside the checked grid.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats::accum::KahanSum;

/// Domain bound for the public dual-algorithm count.
pub const F_COUNT_MAX: u64 = 12;

fn factorial_big(n: u64) -> BigUint {
    (1..=n).map(BigUint::from).fold(BigUint::one(), |a, b| a * b)
}

fn binomial_big(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let mut num = BigUint::one();
    for i in 0..k {
        num *= BigUint::from(n - i);
    }
    num / factorial_big(k)
}

/// Number of ways of putting `k` labeled balls into `n` labeled boxes so
/// that no box contains exactly one ball, by dynamic programming over the
/// boxes: `F(k, n) = sum_(j != 1) C(k, j) F(k - j, n - 1)`.
pub fn f_count_dp(k: u64, n: u64) -> BigUint {
    let k = k as usize;
    // row[r] = F(r, boxes processed so far)
    let mut row: Vec<BigUint> = (0..=k)
        .map(|r| if r == 0 { BigUint::one() } else { BigUint::zero() })
        .collect();
    for _ in 0..n {
        let mut next = vec![BigUint::zero(); k + 1];
        for (r, target) in next.iter_mut().enumerate() {
            for j in 0..=r {
                if j == 1 {
                    continue;
                }
                let prev = &row[r - j];
                if !prev.is_zero() {
                    *target += binomial_big(r as u64, j as u64) * prev;
                }
            }
        }
        row = next;
    }
    row[k].clone()
}

/// The same count through the exponential generating function:
/// `F(k, n) = k! [x^k] (e^x - x)^n`, in exact rationals.
pub fn f_count_gf(k: u64, n: u64) -> BigUint {
    let k = k as usize;
    // Truncated series of e^x - x up to degree k.
    let base: Vec<BigRational> = (0..=k)
        .map(|i| {
            if i == 1 {
                BigRational::zero()
            } else {
                BigRational::new(1.into(), factorial_big(i as u64).into())
            }
        })
        .collect();
    // (e^x - x)^n mod x^(k+1)
    let mut pow: Vec<BigRational> = vec![BigRational::zero(); k + 1];
    pow[0] = BigRational::one();
    for _ in 0..n {
        let mut next = vec![BigRational::zero(); k + 1];
        for i in 0..=k {
            if pow[i].is_zero() {
                continue;
            }
            for j in 0..=(k - i) {
                if !base[j].is_zero() {
                    let term = &pow[i] * &base[j];
                    next[i + j] += term;
                }
            }
        }
        pow = next;
    }
    let coeff = &pow[k] * BigRational::from_integer(factorial_big(k as u64).into());
    assert!(coeff.is_integer() && !coeff.is_negative(), "GF coefficient must be a nonnegative integer");
    coeff.to_integer().to_biguint().expect("nonnegative")
}

/// Dual-algorithm count: both routes must agree exactly.
pub fn f_count(k: u64, n: u64) -> Result<BigUint> {
    if k > F_COUNT_MAX || n == 0 || n > F_COUNT_MAX {
        return Err(Error::invalid(format!(
            "f_count domain is 0 <= k <= {F_COUNT_MAX}, 1 <= n <= {F_COUNT_MAX}; got k={k}, n={n}"
        )));
    }
    let dp = f_count_dp(k, n);
    let gf = f_count_gf(k, n);
    if dp != gf {
        return Err(Error::invalid(format!(
            "f_count algorithms disagree at k={k}, n={n}: dp={dp}, gf={gf}"
        )));
    }
    Ok(dp)
}

/// The factorial bound's domain condition,
/// `k <= 2 + log 4 / log(1 + 2 sqrt(1/n - 1/n^2))`; infinite at `n = 1`.
pub fn bound_condition_k_max(n: u64) -> f64 {
    let nf = n as f64;
    let root = (1.0 / nf - 1.0 / (nf * nf)).max(0.0).sqrt();
    let denom = (1.0 + 2.0 * root).ln();
    if denom == 0.0 {
        f64::INFINITY
    } else {
        2.0 + 4.0f64.ln() / denom
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundCheckRow {
    pub k: u64,
    pub n: u64,
    pub count: String,
    pub bound: f64,
    /// `bound / count`; at least 1 when the bound holds.
    pub margin: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundCheckReport {
    pub rows: Vec<BoundCheckRow>,
    pub all_hold: bool,
}

/// Verify `F(k, n) <= 2^k k! n^(k/2)` on the condition-filtered grid.
///
/// The comparison is exact: both sides are squared so the square root
/// disappears, and the inequality is decided in big integers.
pub fn lemma_f_bound_check(k_max: u64, n_max: u64) -> Result<BoundCheckReport> {
    let mut rows = Vec::new();
    let mut all_hold = true;
    for n in 1..=n_max {
        let cond = bound_condition_k_max(n);
        for k in 0..=k_max {
            if (k as f64) > cond {
                continue;
            }
            let count = f_count(k, n)?;
            // bound^2 = 4^k (k!)^2 n^k
            let bound_sq = BigUint::from(4u32).pow(k as u32)
                * factorial_big(k).pow(2)
                * BigUint::from(n).pow(k as u32);
            let holds = &count * &count <= bound_sq;
            all_hold &= holds;
            let bound = 2.0f64.powi(k as i32)
                * factorial_big(k).to_f64().unwrap_or(f64::INFINITY)
                * (n as f64).powf(k as f64 / 2.0);
            let margin = if count.is_zero() {
                f64::INFINITY
            } else {
                bound / count.to_f64().unwrap_or(f64::INFINITY)
            };
            rows.push(BoundCheckRow {
                k,
                n,
                count: count.to_string(),
                bound,
                margin,
                holds,
            });
        }
    }
    Ok(BoundCheckReport { rows, all_hold })
}

/// Floor of `delta * n` with a `1e-12` boundary snap so that values a
/// rounding error away from an integer floor to that integer.
pub fn floor_delta_n(delta: f64, n: u64) -> u64 {
    let v = delta * n as f64;
    let r = v.round();
    if (v - r).abs() <= 1e-12 * (1.0 + v.abs()) {
        r as u64
    } else {
        v.floor() as u64
    }
}

/// One term of the series: `1 - (1 - 2^-[delta n])^n`, computed through
/// `log1p`/`expm1` so tiny tail terms keep full precision.
pub fn serie_term(delta: f64, n: u64) -> f64 {
    let m = floor_delta_n(delta, n);
    let base = -(0.5f64.powi(m as i32));
    -(n as f64 * base.ln_1p()).exp_m1()
}

#[derive(Debug, Clone, Serialize)]
pub struct SeriesProbe {
    pub delta: f64,
    /// `(N, S_N)` at each scheduled N.
    pub partial_sums: Vec<(u64, f64)>,
    /// d'Alembert ratios of the dominating series term
    /// `((2^-(delta k - 1)) / (1 - 2^-(delta k)))^k`.
    pub ratios: Vec<f64>,
    /// Cauchy verdict: `|S_last - S_half| < 1e-6` for the largest scheduled N.
    pub converged: bool,
}

/// Partial sums of the series at each scheduled N, plus the ratio-test
/// sequence of the dominating term.
pub fn serie_probe(delta: f64, schedule: &[u64]) -> Result<SeriesProbe> {
    if !delta.is_finite() || delta <= 0.0 {
        return Err(Error::invalid(format!("delta must be positive, got {delta}")));
    }
    if schedule.is_empty() || schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("schedule must be strictly increasing and nonempty"));
    }
    let n_max = *schedule.last().expect("nonempty");
    let mut sum = KahanSum::new();
    let mut partial_sums = Vec::with_capacity(schedule.len());
    let mut next = 0usize;
    for n in 1..=n_max {
        sum.add(serie_term(delta, n));
        if schedule[next] == n {
            partial_sums.push((n, sum.value()));
            next += 1;
        }
    }

    // Dominating-term ratios in log space (the terms underflow quickly).
    let log_term = |k: f64| {
        let log_num = -(delta * k - 1.0) * 2.0f64.ln();
        let log_den = (-(-delta * k * 2.0f64.ln()).exp()).ln_1p();
        k * (log_num - log_den)
    };
    let ratios: Vec<f64> = (1..=30)
        .map(|k| (log_term(k as f64 + 1.0) - log_term(k as f64)).exp())
        .collect();

    let converged = {
        let last = partial_sums.last().expect("nonempty").1;
        let half_n = n_max / 2;
        let mut half_sum = KahanSum::new();
        for n in 1..=half_n {
            half_sum.add(serie_term(delta, n));
        }
        (last - half_sum.value()).abs() < 1e-6
    };

    Ok(SeriesProbe {
        delta,
        partial_sums,
        ratios,
        converged,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ThinningPmfRow {
    pub k: u64,
    pub series_sum: f64,
    pub closed_form: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThinningPmfReport {
    pub interval_length: f64,
    pub rows: Vec<ThinningPmfRow>,
    pub max_rel_error: f64,
}

/// Closed-form verification of the thinning pmf identity
/// `sum_(n>=k) C(n,k) 2^-n (2 delta)^n e^(-2 delta)/n! = e^-delta delta^k/k!`
/// by summing the series to machine precision.
pub fn thinning_pmf_check(interval_length: f64, k_max: u64) -> Result<ThinningPmfReport> {
    if !interval_length.is_finite() || interval_length <= 0.0 {
        return Err(Error::invalid(format!(
            "interval length must be positive, got {interval_length}"
        )));
    }
    let d = interval_length;
    let mut rows = Vec::new();
    let mut max_rel = 0.0f64;
    for k in 0..=k_max {
        // term_n = C(n,k) d^n / n! starting at n = k with d^k/k!,
        // multiplied by e^(-2d) at the end; recursion:
        // term_(n+1) = term_n * d / (n + 1 - k).
        let mut term = crate::poisson::poisson_pmf(d, k) * (-d).exp(); // d^k/k! e^-2d
        let mut sum = KahanSum::new();
        let mut n = k;
        loop {
            sum.add(term);
            n += 1;
            term *= d / (n - k) as f64;
            if term < sum.value() * 1e-18 + f64::MIN_POSITIVE {
                break;
            }
        }
        let closed = crate::poisson::poisson_pmf(d, k);
        let rel = ((sum.value() - closed) / closed).abs();
        max_rel = max_rel.max(rel);
        rows.push(ThinningPmfRow {
            k,
            series_sum: sum.value(),
            closed_form: closed,
            rel_error: rel,
        });
    }
    Ok(ThinningPmfReport {
        interval_length,
        rows,
        max_rel_error: max_rel,
    })
}
