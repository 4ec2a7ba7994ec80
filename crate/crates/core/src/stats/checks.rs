//! The verification checks, each turned into report entries with
//! estimates, uncertainties, and deterministic verdicts.
//!
//! Ensembles parallelize over the replication index with per-replication
//! derived streams; per-replication results are collected in index order and
//! reduced sequentially, so reports do not depend on the worker count.

use rayon::prelude::*;

use crate::coupling::{
    build_grid_coupling, build_skeleton_coupling, decomposition_diagnostics,
    generate_walk_inputs, index_range, run_lengths,
};
use crate::error::{Error, Result};
use crate::poisson::simulate_master;
use crate::report::ReportEntry;
use crate::rng::{derive_stream, stream_id, SeedSpec, StreamTag};
use crate::stats::accum::{Covariance, KahanSum, MeanVar};
use crate::stats::gof;
use crate::stats::quad;
use crate::transport::{simulate_family, ThetaSet};
use statrs::distribution::{ContinuousCDF, Normal};

/// Per-angle sampled ensemble of transport paths on a fixed time grid.
#[derive(Debug, Clone)]
pub struct TransportEnsemble {
    pub theta: f64,
    pub epsilon: f64,
    pub times: Vec<f64>,
    /// Real parts, indexed `[replication][time]`.
    pub x: Vec<Vec<f64>>,
    /// Imaginary parts, indexed `[replication][time]`.
    pub y: Vec<Vec<f64>>,
}

/// Simulate `n` independent families and sample each path at `times`.
/// Returns one ensemble per angle of the set.
pub fn simulate_transport_ensemble(
    seed: u64,
    tag: StreamTag,
    group: u16,
    thetas: &ThetaSet,
    horizon_t: f64,
    times: &[f64],
    n: usize,
) -> Result<Vec<TransportEnsemble>> {
    let per_rep: Vec<Vec<Vec<(f64, f64)>>> = (0..n)
        .into_par_iter()
        .map(|rep| -> Result<Vec<Vec<(f64, f64)>>> {
            let mut stream = derive_stream(SeedSpec::new(seed, stream_id(tag, group, rep as u32)));
            let family = simulate_family(thetas, horizon_t, &mut stream)?;
            family
                .iter()
                .map(|path| {
                    Ok(path
                        .sample_grid(times)?
                        .into_iter()
                        .map(|z| (z.re, z.im))
                        .collect())
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let m = thetas.angles().len();
    let mut out = Vec::with_capacity(m);
    for (a, &theta) in thetas.angles().iter().enumerate() {
        let x = per_rep.iter().map(|r| r[a].iter().map(|v| v.0).collect()).collect();
        let y = per_rep.iter().map(|r| r[a].iter().map(|v| v.1).collect()).collect();
        out.push(TransportEnsemble {
            theta,
            epsilon: thetas.epsilon(),
            times: times.to_vec(),
            x,
            y,
        });
    }
    Ok(out)
}

/// Monte Carlo check of the expectation identity
/// `E[(-1)^(dN') e^(i theta dN)] = e^(-2 delta)`: the real part targets the
/// exponential, the imaginary part targets zero, both at 3 standard errors.
pub fn lemma31_check(seed: u64, theta_raw: f64, deltas: &[f64], n: usize) -> Result<Vec<ReportEntry>> {
    for &d in deltas {
        if !d.is_finite() || d < 0.0 {
            return Err(Error::invalid(format!("delta must be >= 0, got {d}")));
        }
    }
    let theta = crate::transport::reduce_angle(theta_raw);
    let d_max = deltas.iter().cloned().fold(0.0f64, f64::max);

    let per_rep: Vec<Vec<(f64, f64)>> = (0..n)
        .into_par_iter()
        .map(|rep| -> Result<Vec<(f64, f64)>> {
            let mut stream =
                derive_stream(SeedSpec::new(seed, stream_id(StreamTag::Lemma31, 0, rep as u32)));
            let skel = simulate_master(d_max, &mut stream)?;
            deltas
                .iter()
                .map(|&d| {
                    let dn = skel.count_at(crate::poisson::CounterKind::N, d)?;
                    let dnp = skel.count_at(crate::poisson::CounterKind::NPrime, d)?;
                    let sign = if dnp % 2 == 0 { 1.0 } else { -1.0 };
                    let arg = theta * dn as f64;
                    Ok((sign * arg.cos(), sign * arg.sin()))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut entries = Vec::new();
    for (i, &d) in deltas.iter().enumerate() {
        let target = (-2.0 * d).exp();
        if d == 0.0 {
            entries.push(
                ReportEntry::with_tolerance(
                    format!("lemma31/theta={theta_raw}/delta={d}/re"),
                    1.0,
                    Some(0.0),
                    1.0,
                    0.0,
                    n as u64,
                    seed,
                )
                .with_note("empty increment, exact"),
            );
            entries.push(
                ReportEntry::with_tolerance(
                    format!("lemma31/theta={theta_raw}/delta={d}/im"),
                    0.0,
                    Some(0.0),
                    0.0,
                    0.0,
                    n as u64,
                    seed,
                )
                .with_note("empty increment, exact"),
            );
            continue;
        }
        let mut re = MeanVar::new();
        let mut im = MeanVar::new();
        for rep in &per_rep {
            re.push(rep[i].0);
            im.push(rep[i].1);
        }
        entries.push(ReportEntry::with_tolerance(
            format!("lemma31/theta={theta_raw}/delta={d}/re"),
            re.mean(),
            Some(re.standard_error()),
            target,
            3.0 * re.standard_error(),
            n as u64,
            seed,
        ));
        entries.push(ReportEntry::with_tolerance(
            format!("lemma31/theta={theta_raw}/delta={d}/im"),
            im.mean(),
            Some(im.standard_error()),
            0.0,
            3.0 * im.standard_error(),
            n as u64,
            seed,
        ));
    }
    Ok(entries)
}

/// Deterministic quadrature-vs-closed-form check of the covariance double
/// integral, at relative tolerance `1e-8`.
pub fn lemma32a_check(seed: u64, epsilon: f64, s: f64, t: f64) -> Result<ReportEntry> {
    if !(s >= 0.0 && t > s) {
        return Err(Error::invalid(format!("need 0 <= s < t, got s={s}, t={t}")));
    }
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    let quadrature = quad::covariance_double_integral(epsilon, s, t);
    let closed = quad::covariance_closed_form(epsilon, s, t);
    Ok(ReportEntry::with_tolerance(
        format!("lemma32a/eps={epsilon}/s={s}/t={t}"),
        quadrature,
        None,
        closed,
        1e-8 * closed.abs(),
        0,
        seed,
    ))
}

fn covariance_cell(
    xs: &[f64],
    ys: &[f64],
    target: f64,
    name: String,
    seed: u64,
) -> ReportEntry {
    // Delta-method standard error: sd of the centered products over sqrt(n).
    let n = xs.len();
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let mut cov = Covariance::new();
    let mut prod = MeanVar::new();
    for (&x, &y) in xs.iter().zip(ys) {
        cov.push(x, y);
        prod.push((x - mx) * (y - my));
    }
    let se = prod.standard_error();
    ReportEntry::with_tolerance(name, cov.covariance(), Some(se), target, 3.0 * se, n as u64, seed)
}

fn column(values: &[Vec<f64>], idx: usize) -> Vec<f64> {
    values.iter().map(|r| r[idx]).collect()
}

/// Covariance structure of the weak limit: `Cov(x(s), x(t))` and
/// `Cov(y(s), y(t))` target `min(s, t)`, real/imaginary cross covariances
/// target zero, all at 3 standard errors.
pub fn covariance_test(ens: &TransportEnsemble, seed: u64) -> Result<Vec<ReportEntry>> {
    let n = ens.x.len();
    if n < 1000 {
        return Err(Error::invalid(format!("covariance test needs >= 1000 paths, got {n}")));
    }
    let mut entries = Vec::new();
    let times = &ens.times;
    for i in 0..times.len() {
        for j in i..times.len() {
            let (s, t) = (times[i], times[j]);
            let target = s.min(t);
            entries.push(covariance_cell(
                &column(&ens.x, i),
                &column(&ens.x, j),
                target,
                format!("covariance/xx/s={s}/t={t}"),
                seed,
            ));
            entries.push(covariance_cell(
                &column(&ens.y, i),
                &column(&ens.y, j),
                target,
                format!("covariance/yy/s={s}/t={t}"),
                seed,
            ));
            entries.push(covariance_cell(
                &column(&ens.x, i),
                &column(&ens.y, j),
                0.0,
                format!("covariance/xy/s={s}/t={t}"),
                seed,
            ));
            if i != j {
                entries.push(covariance_cell(
                    &column(&ens.y, i),
                    &column(&ens.x, j),
                    0.0,
                    format!("covariance/yx/s={s}/t={t}"),
                    seed,
                ));
            }
        }
    }
    Ok(entries)
}

/// Empirical-CDF distance of a sample against the standard normal, judged at
/// the 1% level.
pub fn normality_test(samples: &[f64], name: &str, seed: u64) -> Result<ReportEntry> {
    if samples.len() < 1000 {
        return Err(Error::invalid(format!(
            "normality test needs >= 1000 samples, got {}",
            samples.len()
        )));
    }
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let d = gof::ks_statistic(&xs, |x| normal.cdf(x));
    let p = gof::ks_pvalue(d, xs.len());
    Ok(ReportEntry::with_pvalue(name, d, p, 0.01, xs.len() as u64, seed))
}

/// Pairwise correlations among the real and imaginary parts of a family of
/// angles, at each requested time; all must stay within `3/sqrt(n)`.
pub fn independence_family_test(
    family: &[TransportEnsemble],
    seed: u64,
) -> Result<Vec<ReportEntry>> {
    if family.is_empty() {
        return Err(Error::invalid("empty family"));
    }
    // Re-validate the angle set as a whole (pairwise constraints).
    let angles: Vec<f64> = family.iter().map(|e| e.theta).collect();
    ThetaSet::new(&angles, family[0].epsilon)?;

    let n = family[0].x.len();
    let tol = 3.0 / (n as f64).sqrt();
    let times = &family[0].times;
    let mut entries = Vec::new();
    for (ti, &t) in times.iter().enumerate() {
        // Variable list: x^theta_1, y^theta_1, x^theta_2, y^theta_2, ...
        let mut vars: Vec<(String, Vec<f64>)> = Vec::new();
        for ens in family {
            vars.push((format!("x[theta={}]", ens.theta), column(&ens.x, ti)));
            vars.push((format!("y[theta={}]", ens.theta), column(&ens.y, ti)));
        }
        for a in 0..vars.len() {
            for b in (a + 1)..vars.len() {
                let rho = gof::correlation(&vars[a].1, &vars[b].1);
                entries.push(ReportEntry::with_tolerance(
                    format!("independence/t={t}/{}~{}", vars[a].0, vars[b].0),
                    rho,
                    None,
                    0.0,
                    tol,
                    n as u64,
                    seed,
                ));
            }
        }
    }
    Ok(entries)
}

/// Fourth-moment tightness bound: the summed fourth moments of the real and
/// imaginary increments must not exceed
/// `12 (t-s)^2 + 48 (t-s)^2 / (1 - cos 2 theta)` by more than 3 SE.
/// One-sided: the entry's estimate is the clamped excess over the bound.
pub fn fourth_moment_check(
    seed: u64,
    epsilon: f64,
    theta: f64,
    s: f64,
    t: f64,
    n: usize,
) -> Result<ReportEntry> {
    if !(t > s && s >= 0.0) {
        return Err(Error::invalid(format!("need 0 <= s < t, got s={s}, t={t}")));
    }
    let thetas = ThetaSet::new(&[theta], epsilon)?;
    let ens = simulate_transport_ensemble(
        seed,
        StreamTag::FourthMoment,
        0,
        &thetas,
        t,
        &[s, t],
        n,
    )?
    .remove(0);

    let mut acc = MeanVar::new();
    for rep in 0..n {
        let dx = ens.x[rep][1] - ens.x[rep][0];
        let dy = ens.y[rep][1] - ens.y[rep][0];
        acc.push(dx.powi(4) + dy.powi(4));
    }
    let d = t - s;
    let reduced = thetas.angles()[0];
    let bound = 12.0 * d * d + 48.0 * d * d / (1.0 - (2.0 * reduced).cos());
    let excess = (acc.mean() - bound).max(0.0);
    Ok(ReportEntry::with_tolerance(
        format!("fourth_moment/eps={epsilon}/theta={theta}/s={s}/t={t}"),
        excess,
        Some(acc.standard_error()),
        0.0,
        3.0 * acc.standard_error(),
        n as u64,
        seed,
    )
    .with_note(format!("one-sided: moment sum {} vs bound {bound}", acc.mean())))
}

/// Exact construction identities of the skeleton coupling, reported as the
/// maximum relative violation over `reps` realizations.
pub fn coupling_identity_check(
    seed: u64,
    epsilon: f64,
    theta: f64,
    horizon_t: f64,
    reps: usize,
) -> Result<ReportEntry> {
    let violations: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|rep| -> Result<f64> {
            let mut stream = derive_stream(SeedSpec::new(
                seed,
                stream_id(StreamTag::CouplingIdentities, 0, rep as u32),
            ));
            let r = build_skeleton_coupling(epsilon, theta, horizon_t, &mut stream)?;
            let mut worst = 0.0f64;
            for m in 0..r.len() {
                let prev = if m == 0 { 0.0 } else { r.skeleton_x[m - 1] };
                let dx = (r.skeleton_x[m] - prev).abs();
                // Residuals are relative to the path scale: recovering an
                // increment from the stored cumulative values already costs
                // one rounding at that scale.
                let scale = r.skeleton_x[m].abs().max(1.0);
                worst = worst.max((dx - r.xi[m]).abs() / scale);
                worst = worst.max((r.gamma[m] * r.beta[m].abs() - dx).abs() / scale);
                let xe = r.transport_value_at(r.gamma_cum[m])?;
                worst = worst.max((xe - r.skeleton_x[m]).abs() / scale);
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    let max_violation = violations.iter().cloned().fold(0.0f64, f64::max);
    Ok(ReportEntry::with_tolerance(
        format!("coupling/identities/eps={epsilon}"),
        max_violation,
        None,
        0.0,
        1e-12,
        reps as u64,
        seed,
    ))
}

/// KS test of the pooled `gamma_m` against exponential of rate `4/eps^2`.
pub fn gamma_law_check(
    seed: u64,
    epsilon: f64,
    theta: f64,
    n_target: usize,
) -> Result<ReportEntry> {
    let mut pooled = Vec::with_capacity(n_target);
    let mut rep = 0u32;
    while pooled.len() < n_target {
        let mut stream =
            derive_stream(SeedSpec::new(seed, stream_id(StreamTag::GammaLaw, 0, rep)));
        let r = build_skeleton_coupling(epsilon, theta, 1.0, &mut stream)?;
        pooled.extend_from_slice(&r.gamma);
        rep += 1;
    }
    pooled.truncate(n_target);
    pooled.sort_by(f64::total_cmp);
    let rate = 4.0 / (epsilon * epsilon);
    let d = gof::ks_statistic(&pooled, |x| -(-rate * x).exp_m1());
    let p = gof::ks_pvalue(d, n_target);
    Ok(ReportEntry::with_pvalue(
        format!("coupling/gamma_law/eps={epsilon}"),
        d,
        p,
        0.01,
        n_target as u64,
        seed,
    ))
}

/// Slope-change time tests from one long realization: increments of the
/// magnitude-change times (`rho`) and of the sign-change times (`tau`) are
/// both exponential of rate `2/eps^2`, and consecutive `rho` increments are
/// uncorrelated.
pub fn rho_tau_check(seed: u64, epsilon: f64, theta: f64, horizon_t: f64) -> Result<Vec<ReportEntry>> {
    let mut stream = derive_stream(SeedSpec::new(seed, stream_id(StreamTag::RhoTau, 0, 0)));
    let r = build_skeleton_coupling(epsilon, theta, horizon_t, &mut stream)?;
    crate::coupling::rho_increment_test(&r, seed)
}

/// Chi-square of the recovered walk block lengths against the geometric law
/// `P(T = j) = 2^-j`.
pub fn block_law_check(seed: u64, theta: f64, n_blocks: usize) -> Result<ReportEntry> {
    // Expected block length is 2, so oversample the walk a little.
    let steps = (2 * n_blocks) + (n_blocks / 4) + 64;
    let mut stream = derive_stream(SeedSpec::new(seed, stream_id(StreamTag::BlockLaw, 0, 0)));
    let walk = generate_walk_inputs(0.1, theta, steps, &mut stream)?;
    let mut blocks = run_lengths(&walk.b);
    if blocks.len() < n_blocks {
        return Ok(ReportEntry::skipped(
            "coupling/block_law",
            format!("only {} completed blocks, wanted {n_blocks}", blocks.len()),
            seed,
        ));
    }
    blocks.truncate(n_blocks);

    let pmf = |j: u64| 0.5f64.powi(j as i32 + 1); // support shifted: j bins T = j+1
    let cut = gof::tail_cut(pmf, n_blocks, 5.0);
    let mut observed = vec![0u64; cut as usize + 1];
    for &t in &blocks {
        observed[((t - 1).min(cut)) as usize] += 1;
    }
    let mut probs: Vec<f64> = (0..cut).map(pmf).collect();
    probs.push(1.0 - probs.iter().sum::<f64>());
    let (stat, _, p) = gof::chi_square_gof(&observed, &probs, n_blocks);
    Ok(ReportEntry::with_pvalue(
        "coupling/block_law",
        stat,
        p,
        0.01,
        n_blocks as u64,
        seed,
    ))
}

/// Empirical check of the Kolmogorov-inequality bound
/// `P(max_m |Gamma_m - m eps^2/4| >= alpha) <= eps^2 / (4 alpha^2)`,
/// with 50% slack on the right-hand side. One-sided (clamped excess).
pub fn kolmogorov_bound_check(
    seed: u64,
    epsilon: f64,
    theta: f64,
    alpha: f64,
    reps: usize,
) -> Result<ReportEntry> {
    let m_bar = index_range(epsilon);
    let quarter = epsilon * epsilon / 4.0;
    let exceed: Vec<bool> = (0..reps)
        .into_par_iter()
        .map(|rep| -> Result<bool> {
            let mut stream = derive_stream(SeedSpec::new(
                seed,
                stream_id(StreamTag::KolmogorovBound, 0, rep as u32),
            ));
            let walk = generate_walk_inputs(epsilon, theta, m_bar, &mut stream)?;
            let mut gamma_cum = KahanSum::new();
            let mut max_dev = 0.0f64;
            for m in 1..=m_bar {
                gamma_cum.add(0.5 * epsilon * walk.eps_draws[m - 1]);
                max_dev = max_dev.max((gamma_cum.value() - m as f64 * quarter).abs());
            }
            Ok(max_dev >= alpha)
        })
        .collect::<Result<_>>()?;
    let p_hat = exceed.iter().filter(|&&b| b).count() as f64 / reps as f64;
    let bound = 1.5 * epsilon * epsilon / (4.0 * alpha * alpha);
    Ok(ReportEntry::with_tolerance(
        format!("coupling/kolmogorov_bound/eps={epsilon}/alpha={alpha}"),
        (p_hat - bound).max(0.0),
        None,
        0.0,
        0.0,
        reps as u64,
        seed,
    )
    .with_note(format!("one-sided: empirical {p_hat} vs slackened bound {bound}")))
}

/// Mean embedding time against its conditional-expectation oracle: the
/// brute-force average of `(eps^2/2) cos^2(b theta)` over the same walks.
pub fn sigma_moment_check(
    seed: u64,
    epsilon: f64,
    theta: f64,
    reps: usize,
) -> Result<ReportEntry> {
    let per_rep: Vec<(MeanVar, KahanSum, u64)> = (0..reps)
        .into_par_iter()
        .map(|rep| -> Result<(MeanVar, KahanSum, u64)> {
            let mut stream = derive_stream(SeedSpec::new(
                seed,
                stream_id(StreamTag::SigmaMoment, 0, rep as u32),
            ));
            let r = build_skeleton_coupling(epsilon, theta, 1.0, &mut stream)?;
            let mut acc = MeanVar::new();
            let mut oracle = KahanSum::new();
            for m in 0..r.len() {
                acc.push(r.sigma[m]);
                let c = (r.b[m] as f64 * r.theta).cos();
                oracle.add(c * c);
            }
            Ok((acc, oracle, r.len() as u64))
        })
        .collect::<Result<_>>()?;
    let mut acc = MeanVar::new();
    let mut oracle = KahanSum::new();
    let mut count = 0u64;
    for (a, o, c) in &per_rep {
        acc.merge(a);
        oracle.add(o.value());
        count += c;
    }
    let target = epsilon * epsilon / 2.0 * oracle.value() / count as f64;
    Ok(ReportEntry::with_tolerance(
        format!("coupling/sigma_mean/eps={epsilon}"),
        acc.mean(),
        Some(acc.standard_error()),
        target,
        3.0 * acc.standard_error(),
        count,
        seed,
    ))
}

/// Grid-backend consistency with the two-point law: exit sides are fair
/// within 3 SE and the mean exit-level overshoot stays below one grid
/// increment's Gaussian scale.
pub fn grid_consistency_check(
    seed: u64,
    epsilon: f64,
    theta: f64,
    grid_step: f64,
    reps: usize,
) -> Result<Vec<ReportEntry>> {
    let per_rep: Vec<(MeanVar, MeanVar)> = (0..reps)
        .into_par_iter()
        .map(|rep| -> Result<(MeanVar, MeanVar)> {
            let mut stream = derive_stream(SeedSpec::new(
                seed,
                stream_id(StreamTag::GridConsistency, 0, rep as u32),
            ));
            let r = build_grid_coupling(epsilon, theta, 1.0, grid_step, &mut stream)?;
            let mut sides = MeanVar::new();
            let mut overshoot = MeanVar::new();
            for m in 0..r.len() {
                sides.push(r.k[m] as f64);
                let prev = if m == 0 { 0.0 } else { r.skeleton_x[m - 1] };
                overshoot.push((r.skeleton_x[m] - prev).abs() - r.xi[m]);
            }
            Ok((sides, overshoot))
        })
        .collect::<Result<_>>()?;
    let mut sides = MeanVar::new();
    let mut overshoot = MeanVar::new();
    for (s, o) in &per_rep {
        sides.merge(s);
        overshoot.merge(o);
    }
    Ok(vec![
        ReportEntry::with_tolerance(
            format!("coupling/grid_exit_side_fair/eps={epsilon}"),
            sides.mean(),
            Some(sides.standard_error()),
            0.0,
            3.0 * sides.standard_error(),
            sides.count(),
            seed,
        ),
        ReportEntry::with_tolerance(
            format!("coupling/grid_overshoot_scale/eps={epsilon}"),
            overshoot.mean(),
            Some(overshoot.standard_error()),
            0.0,
            grid_step.sqrt(),
            overshoot.count(),
            seed,
        ),
    ])
}

/// Medians of the grid-backend sup error and of the decomposition terms
/// across an epsilon ladder, plus monotone-trend entries.
pub fn decomposition_trend_check(
    seed: u64,
    eps_list: &[f64],
    theta: f64,
    reps: usize,
) -> Result<Vec<ReportEntry>> {
    if eps_list.len() < 2 {
        return Err(Error::invalid("need at least two epsilons for a trend"));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("eps_list must be strictly decreasing"));
    }
    let mut medians: Vec<[f64; 5]> = Vec::new(); // sup, l1, l21, l22, l3
    let mut entries = Vec::new();
    for (g, &eps) in eps_list.iter().enumerate() {
        let grid_step = crate::stats::rate::default_grid_step(eps);
        let rows: Vec<[f64; 5]> = (0..reps)
            .into_par_iter()
            .map(|rep| -> Result<[f64; 5]> {
                let mut stream = derive_stream(SeedSpec::new(
                    seed,
                    stream_id(StreamTag::DecompTrend, g as u16, rep as u32),
                ));
                let r = build_grid_coupling(eps, theta, 1.0, grid_step, &mut stream)?;
                let d = decomposition_diagnostics(&r)?;
                Ok([r.sup_error.unwrap_or(f64::NAN), d.l1, d.l21, d.l22, d.l3])
            })
            .collect::<Result<_>>()?;
        let mut med = [0.0f64; 5];
        for c in 0..5 {
            let mut col: Vec<f64> = rows.iter().map(|r| r[c]).collect();
            col.sort_by(f64::total_cmp);
            med[c] = gof::quantile(&col, 0.5);
        }
        for (c, label) in ["sup_error", "L1", "L21", "L22", "L3"].iter().enumerate() {
            entries.push(ReportEntry::diagnostic(
                format!("coupling/median_{label}/eps={eps}"),
                med[c],
                reps as u64,
                seed,
                "informational median, judged by the trend entries",
            ));
        }
        medians.push(med);
    }
    for (c, label) in ["sup_error", "L1", "L21", "L22", "L3"].iter().enumerate() {
        let mut worst_ratio = 0.0f64;
        for w in medians.windows(2) {
            worst_ratio = worst_ratio.max(w[1][c] / w[0][c]);
        }
        entries.push(
            ReportEntry::with_tolerance(
                format!("coupling/trend_{label}"),
                worst_ratio,
                None,
                0.0,
                1.0,
                reps as u64,
                seed,
            )
            .with_note("max ratio of consecutive medians along decreasing eps; pass iff <= 1"),
        );
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::Verdict;

    #[test]
    fn lemma31_delta_zero_is_exact() {
        let entries = lemma31_check(1, 2.0, &[0.0], 10).unwrap();
        assert_eq!(entries[0].estimate, 1.0);
        assert_eq!(entries[0].verdict, Verdict::Pass);
        assert_eq!(entries[1].estimate, 0.0);
    }

    #[test]
    fn lemma31_small_ensemble_tracks_target() {
        // Delta = 0.5 targets e^-1; at n = 20_000 the 3 SE window is wide
        // enough to make this a stable smoke check.
        let entries = lemma31_check(1, 2.0, &[0.5], 20_000).unwrap();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[0].verdict, Verdict::Pass, "{:?}", entries[0]);
        assert_eq!(entries[1].verdict, Verdict::Pass, "{:?}", entries[1]);
        assert!((entries[0].target - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn lemma32a_matches_at_both_scales() {
        for eps in [0.5, 0.1] {
            let e = lemma32a_check(1, eps, 0.0, 1.0).unwrap();
            assert_eq!(e.verdict, Verdict::Pass, "{e:?}");
        }
        assert!(lemma32a_check(1, 0.5, 1.0, 1.0).is_err());
        assert!(lemma32a_check(1, 0.5, 1.0, 0.5).is_err());
    }

    #[test]
    fn covariance_requires_thousand_paths() {
        let ens = TransportEnsemble {
            theta: 2.0,
            epsilon: 0.1,
            times: vec![1.0],
            x: vec![vec![0.0]; 10],
            y: vec![vec![0.0]; 10],
        };
        assert!(covariance_test(&ens, 1).is_err());
    }

    #[test]
    fn normality_detects_wrong_scale() {
        let mut s = derive_stream(SeedSpec::new(2, 3));
        let xs: Vec<f64> = (0..5000).map(|_| s.standard_normal()).collect();
        let ok = normality_test(&xs, "normality/raw", 2).unwrap();
        assert_eq!(ok.verdict, Verdict::Pass);

        // Intentional failure control: scale by 1.5.
        let scaled: Vec<f64> = xs.iter().map(|x| 1.5 * x).collect();
        let bad = normality_test(&scaled, "normality/scaled", 2).unwrap();
        assert_eq!(bad.verdict, Verdict::Fail);

        // Shuffled-halves self-consistency.
        let a = normality_test(&xs[..2500], "normality/a", 2).unwrap();
        let b = normality_test(&xs[2500..], "normality/b", 2).unwrap();
        assert_eq!(a.verdict, b.verdict);
    }

    #[test]
    fn independence_rejects_supplementary_pair() {
        let make = |theta: f64| TransportEnsemble {
            theta,
            epsilon: 0.1,
            times: vec![1.0],
            x: vec![vec![0.0]; 10],
            y: vec![vec![0.0]; 10],
        };
        let family = vec![make(2.0), make(std::f64::consts::TAU - 2.0)];
        assert!(independence_family_test(&family, 1).is_err());
    }

    #[test]
    fn block_law_is_geometric() {
        let e = block_law_check(5, 2.0, 100_000).unwrap();
        assert_eq!(e.verdict, Verdict::Pass, "{e:?}");
    }

    #[test]
    fn kolmogorov_bound_holds() {
        let e = kolmogorov_bound_check(5, 0.1, 2.0, 0.1, 2000).unwrap();
        assert_eq!(e.verdict, Verdict::Pass, "{e:?}");
    }

    #[test]
    fn identities_hold_in_small_ensemble() {
        let e = coupling_identity_check(5, 0.1, 2.0, 1.0, 10).unwrap();
        assert_eq!(e.verdict, Verdict::Pass, "{e:?}");
        assert!(e.estimate <= 1e-12);
    }
}
