//! Strong coupling of the transport process with a Brownian path.
//!
//! A symmetric two-point Skorokhod embedding matches the piecewise-linear
//! process to Brownian motion at a skeleton of stopping times: at step `m`
//! the Brownian path exits a `(-xi_m, xi_m)` corridor at time increment
//! `sigma_m`, and the transport clock advances by `gamma_m = xi_m / |beta_m|`
//! with `beta_m = (2/eps) cos(b_(m-1) theta)`. By construction the two paths
//! coincide at the skeleton: `x_eps(Gamma_m) = x(Lambda_m)`.
//!
//! Two backends are provided. The skeleton backend samples exit times from
//! the series CDF and realizes the identities exactly; it never builds the
//! continuum Brownian path, so no sup-norm error is available. The grid
//! backend simulates the Brownian path on a uniform grid, detects corridor
//! exits by grid crossing (biased low by one grid increment's Gaussian
//! scale), and reports the sup-norm coupling error.

pub mod exit_time;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::stats::accum::KahanSum;
use crate::transport::validate_angle;

/// Index range of the decomposition maxima, `1..=4/eps^2`.
pub fn index_range(eps: f64) -> usize {
    (4.0 / (eps * eps)).floor() as usize
}

/// Hard cap on the number of embedding steps: the index range scaled to the
/// horizon, plus a 10% safety margin.
pub fn step_cap(eps: f64, horizon_t: f64) -> usize {
    (1.1 * 4.0 * horizon_t.max(1.0) / (eps * eps)).ceil() as usize
}

/// Walk-driven inputs of the embedding.
#[derive(Debug, Clone)]
pub struct WalkInputs {
    /// Walk values `b_0..b_m_max` (partial sums of fair bits).
    pub b: Vec<u64>,
    /// `xi_m = |cos(b_(m-1) theta)| eps_m`, for `m = 1..=m_max`.
    pub xi: Vec<f64>,
    /// The underlying exponential draws `eps_m` of rate `2/eps`.
    pub eps_draws: Vec<f64>,
}

/// Draw the Bernoulli walk and the scaled exponential levels.
pub fn generate_walk_inputs(
    epsilon: f64,
    theta: f64,
    m_max: usize,
    stream: &mut RandomStream,
) -> Result<WalkInputs> {
    if m_max == 0 {
        return Err(Error::invalid("m_max must be at least 1"));
    }
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    let rate = 2.0 / epsilon;
    let mut b = Vec::with_capacity(m_max + 1);
    let mut xi = Vec::with_capacity(m_max);
    let mut eps_draws = Vec::with_capacity(m_max);
    b.push(0u64);
    for m in 1..=m_max {
        let level = b[m - 1];
        let e = stream.exponential(rate);
        eps_draws.push(e);
        xi.push((level as f64 * theta).cos().abs() * e);
        b.push(level + u64::from(stream.bernoulli(0.5)));
    }
    Ok(WalkInputs { b, xi, eps_draws })
}

/// Full record of one coupling realization. Index `i` of the per-step
/// vectors corresponds to step `m = i + 1`; `Lambda_0 = Gamma_0 = 0` and
/// `x(0) = x_eps(0) = 0` are implicit.
#[derive(Debug, Clone)]
pub struct CouplingRealization {
    pub epsilon: f64,
    pub theta: f64,
    /// Walk values `b_0..b_M`.
    pub b: Vec<u64>,
    pub xi: Vec<f64>,
    pub eps_draws: Vec<f64>,
    /// Exit sides, +1 or -1.
    pub k: Vec<i8>,
    pub sigma: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Cumulative Brownian clock `Lambda_m`.
    pub lambda_cum: Vec<f64>,
    /// Cumulative transport clock `Gamma_m`.
    pub gamma_cum: Vec<f64>,
    /// Brownian skeleton values `x(Lambda_m)`.
    pub skeleton_x: Vec<f64>,
    /// Signed slopes `beta_m = (2/eps) cos(b_(m-1) theta)`.
    pub beta: Vec<f64>,
    /// Sup-norm coupling error over the covered horizon; grid backend only.
    pub sup_error: Option<f64>,
}

impl CouplingRealization {
    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    /// Last transport-clock time covered by the piecewise-linear path.
    pub fn covered_horizon(&self) -> f64 {
        self.gamma_cum.last().copied().unwrap_or(0.0)
    }

    /// The piecewise-linear realization `x_eps` evaluated at `t`.
    pub fn transport_value_at(&self, t: f64) -> Result<f64> {
        if !t.is_finite() || t < 0.0 || t > self.covered_horizon() {
            return Err(Error::invalid(format!(
                "time {t} outside [0, {}]",
                self.covered_horizon()
            )));
        }
        if t == 0.0 {
            return Ok(0.0);
        }
        // Segment m covers (Gamma_(m-1), Gamma_m].
        let i = self.gamma_cum.partition_point(|&g| g < t);
        let (t0, x0) = if i == 0 {
            (0.0, 0.0)
        } else {
            (self.gamma_cum[i - 1], self.skeleton_x[i - 1])
        };
        if self.gamma_cum[i] == t || self.gamma[i] == 0.0 {
            return Ok(self.skeleton_x[i]);
        }
        let slope = (self.skeleton_x[i] - x0) / self.gamma[i];
        Ok(x0 + slope * (t - t0))
    }

    /// Times `Gamma_m` at which the slope magnitude changes, and their
    /// increments (the `rho` sequence).
    pub fn rho_increments(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut prev = 0.0;
        for i in 0..self.len().saturating_sub(1) {
            if self.b[i + 1] != self.b[i] {
                out.push(self.gamma_cum[i] - prev);
                prev = self.gamma_cum[i];
            }
        }
        out
    }

    /// Times `Gamma_m` at which the slope sign changes, and their
    /// increments (the `tau` sequence).
    pub fn tau_increments(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut prev = 0.0;
        for i in 0..self.len().saturating_sub(1) {
            if self.k[i + 1] != self.k[i] {
                out.push(self.gamma_cum[i] - prev);
                prev = self.gamma_cum[i];
            }
        }
        out
    }
}

/// Build a realization with exactly sampled exit times (no continuum path).
pub fn build_skeleton_coupling(
    epsilon: f64,
    theta: f64,
    horizon_t: f64,
    stream: &mut RandomStream,
) -> Result<CouplingRealization> {
    let theta = validate_angle(theta, epsilon)?;
    if !horizon_t.is_finite() || horizon_t < 0.0 {
        return Err(Error::invalid(format!("horizon must be >= 0, got {horizon_t}")));
    }
    let cap = step_cap(epsilon, horizon_t);
    let m_lo = index_range(epsilon);
    let walk = generate_walk_inputs(epsilon, theta, cap, stream)?;

    let mut r = empty_realization(epsilon, theta);
    let mut lambda = 0.0f64;
    let mut gamma_total = 0.0f64;
    let mut x = 0.0f64;
    for m in 1..=cap {
        let xi = walk.xi[m - 1];
        let side = stream.sign();
        let tau_unit = exit_time::sample_exit_time_unit(stream, exit_time::SERIES_TOL);
        let sigma = xi * xi * tau_unit;
        let beta = (2.0 / epsilon) * (walk.b[m - 1] as f64 * theta).cos();
        let gamma = xi / beta.abs();
        lambda += sigma;
        gamma_total += gamma;
        x += side as f64 * xi;

        r.k.push(side);
        r.sigma.push(sigma);
        r.gamma.push(gamma);
        r.lambda_cum.push(lambda);
        r.gamma_cum.push(gamma_total);
        r.skeleton_x.push(x);
        r.beta.push(beta);
        if gamma_total > horizon_t && m > m_lo {
            break;
        }
    }
    finish_walk(&mut r, walk);
    Ok(r)
}

/// Build a realization from a Brownian path simulated on a uniform grid.
///
/// Corridor exits are detected at the first grid point whose displacement
/// from the previous stopping point reaches `xi_m`; `gamma_m` is derived
/// from the achieved (slightly overshooting) increment so the construction
/// identities still hold exactly. The sup-norm error is taken over all grid
/// points in `[0, min(horizon, Gamma_M)]`.
pub fn build_grid_coupling(
    epsilon: f64,
    theta: f64,
    horizon_t: f64,
    grid_step: f64,
    stream: &mut RandomStream,
) -> Result<CouplingRealization> {
    let theta = validate_angle(theta, epsilon)?;
    if !horizon_t.is_finite() || horizon_t < 0.0 {
        return Err(Error::invalid(format!("horizon must be >= 0, got {horizon_t}")));
    }
    if !grid_step.is_finite() || grid_step <= 0.0 {
        return Err(Error::invalid(format!("grid step must be positive, got {grid_step}")));
    }
    let points_per_excursion = (epsilon * epsilon / 4.0) / grid_step;
    if points_per_excursion < 10.0 {
        return Err(Error::Config(format!(
            "grid step {grid_step} too coarse: {points_per_excursion:.1} expected points per excursion (need >= 10)"
        )));
    }
    let cap = step_cap(epsilon, horizon_t);
    let m_lo = index_range(epsilon);
    let walk = generate_walk_inputs(epsilon, theta, cap, stream)?;

    let sqrt_h = grid_step.sqrt();
    let stored_nodes = (horizon_t / grid_step).floor() as usize;
    // Generous runaway guard; a single excursion at these scales never
    // consumes more than a tiny fraction of this budget.
    let scan_cap = ((64.0 * horizon_t.max(1.0)) / grid_step).ceil() as usize;

    let mut path = Vec::with_capacity(stored_nodes + 1);
    path.push(0.0f64);
    let mut w = 0.0f64;
    let mut j = 0usize;

    let mut r = empty_realization(epsilon, theta);
    let mut gamma_total = 0.0f64;
    let mut anchor = 0.0f64;
    let mut lambda_prev = 0.0f64;

    'steps: for m in 1..=cap {
        let xi = walk.xi[m - 1];
        loop {
            if j >= scan_cap {
                break 'steps;
            }
            j += 1;
            w += sqrt_h * stream.standard_normal();
            if j <= stored_nodes {
                path.push(w);
            }
            if (w - anchor).abs() >= xi {
                break;
            }
        }
        let lambda = j as f64 * grid_step;
        let dx = w - anchor;
        let beta = (2.0 / epsilon) * (walk.b[m - 1] as f64 * theta).cos();
        let gamma = dx.abs() / beta.abs();
        gamma_total += gamma;

        r.k.push(if dx < 0.0 { -1 } else { 1 });
        r.sigma.push(lambda - lambda_prev);
        r.gamma.push(gamma);
        r.lambda_cum.push(lambda);
        r.gamma_cum.push(gamma_total);
        r.skeleton_x.push(w);
        r.beta.push(beta);
        lambda_prev = lambda;
        anchor = w;
        if gamma_total > horizon_t && m > m_lo {
            break;
        }
    }
    finish_walk(&mut r, walk);

    // Extend the stored path if the transport clock ran ahead of the
    // Brownian clock.
    let t_max = horizon_t.min(r.covered_horizon());
    let needed = (t_max / grid_step).floor() as usize;
    while path.len() <= needed {
        w += sqrt_h * stream.standard_normal();
        path.push(w);
    }

    let mut sup = 0.0f64;
    for (node, &wt) in path.iter().enumerate().take(needed + 1) {
        let t = node as f64 * grid_step;
        let xe = r.transport_value_at(t.min(r.covered_horizon()))?;
        sup = sup.max((xe - wt).abs());
    }
    r.sup_error = Some(sup);
    Ok(r)
}

fn empty_realization(epsilon: f64, theta: f64) -> CouplingRealization {
    CouplingRealization {
        epsilon,
        theta,
        b: Vec::new(),
        xi: Vec::new(),
        eps_draws: Vec::new(),
        k: Vec::new(),
        sigma: Vec::new(),
        gamma: Vec::new(),
        lambda_cum: Vec::new(),
        gamma_cum: Vec::new(),
        skeleton_x: Vec::new(),
        beta: Vec::new(),
        sup_error: None,
    }
}

/// Truncate the walk inputs to the realized number of steps and move them
/// into the realization.
fn finish_walk(r: &mut CouplingRealization, mut walk: WalkInputs) {
    let m = r.sigma.len();
    walk.b.truncate(m + 1);
    walk.xi.truncate(m);
    walk.eps_draws.truncate(m);
    r.b = walk.b;
    r.xi = walk.xi;
    r.eps_draws = walk.eps_draws;
}

/// Tests on the slope-change times of one realization: increments of the
/// magnitude-change times `rho` and of the sign-change times `tau` against
/// exponential of rate `2/eps^2` (KS at the 1% level), plus the lag-1
/// correlation of consecutive `rho` increments. Needs at least 100
/// magnitude changes, otherwise the entries are skipped.
pub fn rho_increment_test(
    r: &CouplingRealization,
    seed: u64,
) -> Result<Vec<crate::report::ReportEntry>> {
    use crate::report::ReportEntry;
    use crate::stats::gof;

    if r.is_empty() {
        return Err(Error::invalid("empty realization"));
    }
    let rho = r.rho_increments();
    let tau = r.tau_increments();
    if rho.len() < 100 {
        return Ok(vec![ReportEntry::skipped(
            "coupling/rho_tau",
            format!("insufficient data: {} slope-magnitude changes (need 100)", rho.len()),
            seed,
        )]);
    }
    let rate = 2.0 / (r.epsilon * r.epsilon);
    let exp_cdf = |x: f64| -(-rate * x).exp_m1();

    let mut entries = Vec::new();
    let mut sorted = rho.clone();
    sorted.sort_by(f64::total_cmp);
    let d = gof::ks_statistic(&sorted, exp_cdf);
    entries.push(ReportEntry::with_pvalue(
        format!("coupling/rho_increments/eps={}", r.epsilon),
        d,
        gof::ks_pvalue(d, sorted.len()),
        0.01,
        sorted.len() as u64,
        seed,
    ));

    let mut sorted = tau.clone();
    sorted.sort_by(f64::total_cmp);
    let d = gof::ks_statistic(&sorted, exp_cdf);
    entries.push(ReportEntry::with_pvalue(
        format!("coupling/tau_increments/eps={}", r.epsilon),
        d,
        gof::ks_pvalue(d, sorted.len()),
        0.01,
        sorted.len() as u64,
        seed,
    ));

    let pairs = rho.len() - 1;
    let lag_corr = gof::correlation(&rho[..pairs], &rho[1..]);
    entries.push(ReportEntry::with_tolerance(
        format!("coupling/rho_lag_correlation/eps={}", r.epsilon),
        lag_corr,
        None,
        0.0,
        4.0 / (pairs as f64).sqrt(),
        pairs as u64,
        seed,
    ));
    Ok(entries)
}

/// Closed form of `sum_(k=0)^n cos(2 k theta)` by telescoping the two
/// geometric series.
pub fn cosine_sum_closed_form(n: u64, theta: f64) -> f64 {
    let two = 2.0 * theta;
    0.5 * (1.0 + ((2.0 * n as f64 * theta).cos() - ((n + 1) as f64 * two).cos()) / (1.0 - two.cos()))
}

/// Completed level-holding run lengths of the walk (the geometric blocks
/// `T_k`). The final, still-open run is excluded.
pub fn run_lengths(b: &[u64]) -> Vec<u64> {
    let mut out = Vec::new();
    let mut start = 1usize;
    for j in 1..b.len() {
        if b[j] != b[j - 1] {
            out.push((j - start + 1) as u64);
            start = j + 1;
        }
    }
    out
}

/// The decomposition maxima of the strong-convergence proof, all taken over
/// the index range `1..=min(M, 4/eps^2)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DecompositionDiagnostics {
    /// `max_m |Lambda_m - m eps^2/4|`
    pub max_lambda_dev: f64,
    /// `max_m |Gamma_m - m eps^2/4|`
    pub max_gamma_dev: f64,
    /// `max_m |sum_(j<=m) (sigma_j - alpha_j)|` with
    /// `alpha_j = (eps^2/2) cos^2(b_(j-1) theta)`
    pub l1: f64,
    /// `max_n (eps^2/4) |sum_(k<=n) (T_k - 2) cos(2 k theta)|`
    pub l21: f64,
    /// `max_n (eps^2/2) |sum_(k<=n) cos(2 k theta)|`
    pub l22: f64,
    /// `max_m (eps^2/4) |Z_(n+1) cos(2 (n+1) theta)|`
    pub l3: f64,
}

/// Compute the decomposition diagnostics of a realization.
pub fn decomposition_diagnostics(r: &CouplingRealization) -> Result<DecompositionDiagnostics> {
    if r.is_empty() {
        return Err(Error::invalid("empty realization"));
    }
    let eps = r.epsilon;
    let theta = r.theta;
    let quarter = eps * eps / 4.0;
    let m_bar = r.len().min(index_range(eps)).max(1);

    let mut max_lambda_dev = 0.0f64;
    let mut max_gamma_dev = 0.0f64;
    let mut l1 = 0.0f64;
    let mut l21 = 0.0f64;
    let mut l22 = 0.0f64;
    let mut l3 = 0.0f64;

    let mut sum_sigma_alpha = KahanSum::new();
    let mut s1 = KahanSum::new(); // sum (T_k - 2) cos(2k theta) over completed blocks
    let mut s2 = KahanSum::new(); // sum cos(2k theta) over completed blocks
    let mut block_start = 1usize;

    for m in 1..=m_bar {
        let target = m as f64 * quarter;
        max_lambda_dev = max_lambda_dev.max((r.lambda_cum[m - 1] - target).abs());
        max_gamma_dev = max_gamma_dev.max((r.gamma_cum[m - 1] - target).abs());

        let level = r.b[m - 1];
        let cos_b = (level as f64 * theta).cos();
        let alpha = eps * eps / 2.0 * cos_b * cos_b;
        sum_sigma_alpha.add(r.sigma[m - 1] - alpha);
        l1 = l1.max(sum_sigma_alpha.value().abs());

        let cos_2k = (2.0 * level as f64 * theta).cos();
        if r.b[m] != level {
            // Block for this level completes at index m.
            let t_k = (m - block_start + 1) as f64;
            s1.add((t_k - 2.0) * cos_2k);
            s2.add(cos_2k);
            l21 = l21.max(s1.value().abs());
            l22 = l22.max(s2.value().abs());
            block_start = m + 1;
        } else {
            // Inside an open block: the remainder term Z_(n+1) cos(2(n+1)theta)
            // with n+1 equal to the current level index.
            let z = (m - block_start + 1) as f64;
            l3 = l3.max(z * cos_2k.abs());
        }
    }

    Ok(DecompositionDiagnostics {
        max_lambda_dev,
        max_gamma_dev,
        l1,
        l21: quarter * l21,
        l22: 2.0 * quarter * l22,
        l3: quarter * l3,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive_stream, SeedSpec, StreamTag};
    use crate::stats::accum::MeanVar;
    use approx::assert_relative_eq;

    fn stream(idx: u32) -> RandomStream {
        derive_stream(SeedSpec::new(17, crate::rng::stream_id(StreamTag::CouplingIdentities, 9, idx)))
    }

    #[test]
    fn walk_inputs_are_binomial_with_positive_levels() {
        let theta = 2.0;
        let eps = 0.1;
        let mut mean_b = MeanVar::new();
        for rep in 0..200 {
            let w = generate_walk_inputs(eps, theta, 10_000, &mut stream(rep)).unwrap();
            mean_b.push(w.b[10_000] as f64);
            // Admissible theta keeps every cosine away from zero.
            assert!(w.xi.iter().all(|&x| x > 0.0));
        }
        // Binomial(10^4, 1/2): mean 5000, sd 50; the mean of 200 replications
        // has sd 50/sqrt(200).
        assert!((mean_b.mean() - 5000.0).abs() <= 3.0 * mean_b.standard_error() + 1e-9);
        assert!((mean_b.variance() - 2500.0).abs() < 2500.0 * 0.5);
    }

    #[test]
    fn eps_draw_mean_is_eps_over_two() {
        let mut acc = MeanVar::new();
        let w = generate_walk_inputs(0.1, 2.0, 100_000, &mut stream(1000)).unwrap();
        for &e in &w.eps_draws {
            acc.push(e);
        }
        assert!(
            (acc.mean() - 0.05).abs() <= 3.0 * acc.standard_error(),
            "mean {}",
            acc.mean()
        );
    }

    #[test]
    fn skeleton_identities_hold_exactly() {
        for rep in 0..20 {
            let r = build_skeleton_coupling(0.1, 2.0, 1.0, &mut stream(2000 + rep)).unwrap();
            assert!(r.len() > index_range(0.1));
            for m in 0..r.len() {
                // Residual tolerances are relative to the path scale, since
                // increments are recovered from cumulative values.
                let prev = if m == 0 { 0.0 } else { r.skeleton_x[m - 1] };
                let scale = r.skeleton_x[m].abs().max(1.0);
                // |Delta x(Lambda_m)| = xi_m
                let dx = (r.skeleton_x[m] - prev).abs();
                assert!((dx - r.xi[m]).abs() <= 1e-12 * scale);
                // gamma_m |beta_m| = |Delta x|
                assert!((r.gamma[m] * r.beta[m].abs() - dx).abs() <= 1e-12 * scale);
                // x_eps(Gamma_m) = x(Lambda_m)
                let xe = r.transport_value_at(r.gamma_cum[m]).unwrap();
                assert!((xe - r.skeleton_x[m]).abs() <= 1e-12 * scale);
            }
            // Clocks nondecreasing from zero.
            assert!(r.lambda_cum.windows(2).all(|w| w[0] <= w[1]));
            assert!(r.gamma_cum.windows(2).all(|w| w[0] <= w[1]));
            assert!(r.lambda_cum[0] >= 0.0 && r.gamma_cum[0] >= 0.0);
        }
    }

    #[test]
    fn initial_state_is_zero() {
        let r = build_skeleton_coupling(0.2, 2.0, 1.0, &mut stream(3000)).unwrap();
        assert_eq!(r.transport_value_at(0.0).unwrap(), 0.0);
    }

    #[test]
    fn segment_slopes_match_beta() {
        let r = build_skeleton_coupling(0.15, 2.0, 1.0, &mut stream(3100)).unwrap();
        for m in 0..r.len().min(200) {
            let t0 = if m == 0 { 0.0 } else { r.gamma_cum[m - 1] };
            let x0 = if m == 0 { 0.0 } else { r.skeleton_x[m - 1] };
            if r.gamma[m] == 0.0 {
                continue;
            }
            let slope = (r.skeleton_x[m] - x0) / (r.gamma_cum[m] - t0);
            assert_relative_eq!(slope.abs(), r.beta[m].abs(), max_relative = 1e-9);
        }
    }

    #[test]
    fn gamma_equals_scaled_eps_draw() {
        // gamma_m = (eps/2) eps_m, so it inherits the exponential law with
        // rate 4/eps^2.
        let eps = 0.1;
        let r = build_skeleton_coupling(eps, 2.0, 1.0, &mut stream(3200)).unwrap();
        for m in 0..r.len() {
            assert_relative_eq!(r.gamma[m], 0.5 * eps * r.eps_draws[m], max_relative = 1e-12);
        }
    }

    #[test]
    fn sigma_mean_matches_conditional_expectation() {
        // E sigma_m = (eps^2/2) E cos^2(b theta); the brute-force cosine
        // average over the same walks is the oracle.
        let eps = 0.1;
        let mut sigma_acc = MeanVar::new();
        let mut oracle = KahanSum::new();
        let mut count = 0u64;
        for rep in 0..40 {
            let r = build_skeleton_coupling(eps, 2.0, 1.0, &mut stream(3300 + rep)).unwrap();
            for m in 0..r.len() {
                sigma_acc.push(r.sigma[m]);
                let c = (r.b[m] as f64 * 2.0).cos();
                oracle.add(c * c);
                count += 1;
            }
        }
        let target = eps * eps / 2.0 * oracle.value() / count as f64;
        assert!(
            (sigma_acc.mean() - target).abs() <= 3.0 * sigma_acc.standard_error(),
            "mean {} target {target}",
            sigma_acc.mean()
        );
        // And the tower argument puts the cosine average near 1/2.
        assert!((oracle.value() / count as f64 - 0.5).abs() < 0.05);
    }

    #[test]
    fn cosine_sum_closed_form_matches_direct_sum() {
        let theta = 2.0;
        let mut direct = KahanSum::new();
        for n in 0u64..=10_000 {
            direct.add((2.0 * n as f64 * theta).cos());
            let closed = cosine_sum_closed_form(n, theta);
            assert!(
                (direct.value() - closed).abs() < 1e-10,
                "n={n}: direct {} closed {closed}",
                direct.value()
            );
        }
    }

    #[test]
    fn block_decomposition_identity() {
        // For every m: sum_(j<=m) cos(2 b_(j-1) theta) equals
        // sum_(k<=n) T_k cos(2k theta) + Z_(n+1) cos(2(n+1) theta),
        // with n the number of blocks completed within the first m steps.
        let theta = 2.0;
        let w = generate_walk_inputs(0.3, theta, 400, &mut stream(4000)).unwrap();
        let runs = run_lengths(&w.b);
        let mut prefix = vec![0u64];
        for &t in &runs {
            prefix.push(prefix.last().unwrap() + t);
        }
        let mut direct = 0.0f64;
        for m in 1..=400u64 {
            direct += (2.0 * w.b[(m - 1) as usize] as f64 * theta).cos();

            let n_opt = (0..runs.len()).take_while(|&n| prefix[n + 1] <= m).last();
            let rhs = match n_opt {
                Some(n) => {
                    let mut sum = 0.0f64;
                    for (k, &t_k) in runs.iter().enumerate().take(n + 1) {
                        sum += t_k as f64 * (2.0 * k as f64 * theta).cos();
                    }
                    let z = (m - prefix[n + 1]) as f64;
                    sum + z * (2.0 * (n + 1) as f64 * theta).cos()
                }
                // Still inside block 0: Z = m at level 0.
                None => m as f64,
            };
            assert_relative_eq!(direct, rhs, epsilon = 1e-9);
        }
    }

    #[test]
    fn diagnostics_decrease_with_epsilon() {
        let mut medians = Vec::new();
        for (g, &eps) in [0.2f64, 0.05].iter().enumerate() {
            let mut l1s = Vec::new();
            for rep in 0..40 {
                let mut s = derive_stream(SeedSpec::new(
                    23,
                    crate::rng::stream_id(StreamTag::DecompTrend, g as u16, rep),
                ));
                let r = build_skeleton_coupling(eps, 2.0, 1.0, &mut s).unwrap();
                let d = decomposition_diagnostics(&r).unwrap();
                assert!(d.l1 >= 0.0 && d.l21 >= 0.0 && d.l22 >= 0.0 && d.l3 >= 0.0);
                l1s.push(d.l1 + d.l21 + d.l22 + d.l3);
            }
            l1s.sort_by(f64::total_cmp);
            medians.push(crate::stats::gof::quantile(&l1s, 0.5));
        }
        assert!(medians[1] < medians[0], "medians {medians:?}");
    }

    #[test]
    fn diagnostics_reject_empty_realization() {
        let r = empty_realization(0.1, 2.0);
        assert!(decomposition_diagnostics(&r).is_err());
    }

    #[test]
    fn run_lengths_simple_case() {
        // b = 0,0,1,1,1,2: block at level 0 has length 2, at level 1 length 3,
        // level 2 still open.
        let b = vec![0, 0, 1, 1, 1, 2];
        assert_eq!(run_lengths(&b), vec![2, 3]);
    }

    #[test]
    fn grid_backend_identities_and_sup_error() {
        let eps = 0.2;
        let mut s = stream(5000);
        let r = build_grid_coupling(eps, 2.0, 1.0, eps * eps / 400.0, &mut s).unwrap();
        let sup = r.sup_error.unwrap();
        assert!(sup > 0.0 && sup < 5.0, "sup {sup}");
        for m in 0..r.len() {
            let prev = if m == 0 { 0.0 } else { r.skeleton_x[m - 1] };
            let dx = (r.skeleton_x[m] - prev).abs();
            // The achieved increment can only overshoot the corridor.
            assert!(dx >= r.xi[m]);
            assert_relative_eq!(r.gamma[m] * r.beta[m].abs(), dx, max_relative = 1e-12);
            let xe = r.transport_value_at(r.gamma_cum[m]).unwrap();
            assert_relative_eq!(xe, r.skeleton_x[m], max_relative = 1e-12, epsilon = 1e-15);
        }
    }

    #[test]
    fn grid_backend_rejects_coarse_grid() {
        let mut s = stream(5100);
        match build_grid_coupling(0.2, 2.0, 1.0, 0.01, &mut s) {
            Err(Error::Config(_)) => {}
            other => panic!("expected configuration error, got {other:?}"),
        }
    }

    #[test]
    fn grid_backend_degenerate_horizon() {
        let mut s = stream(5200);
        let r = build_grid_coupling(0.2, 2.0, 0.0, 0.2 * 0.2 / 400.0, &mut s).unwrap();
        assert_eq!(r.sup_error.unwrap(), 0.0);
    }

    #[test]
    fn rho_and_tau_increments_are_sane() {
        let r = build_skeleton_coupling(0.1, 2.0, 4.0, &mut stream(6000)).unwrap();
        let rho = r.rho_increments();
        let tau = r.tau_increments();
        assert!(rho.len() > 100);
        assert!(tau.len() > 100);
        assert!(rho.iter().all(|&x| x > 0.0));
        assert!(tau.iter().all(|&x| x > 0.0));
        // Mean of Exp(2/eps^2) is eps^2/2 = 0.005.
        let mean_rho: f64 = rho.iter().sum::<f64>() / rho.len() as f64;
        assert!((mean_rho - 0.005).abs() < 0.002, "mean rho {mean_rho}");
    }
}
