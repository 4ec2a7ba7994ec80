//! Named verification suites with pinned parameters.
//!
//! Each suite bundles the checks of one result family at the sample sizes
//! and tolerances the project commits to. Suites are pure functions of the
//! master seed; rerunning one with the same seed reproduces its report
//! byte for byte regardless of worker count.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::poisson::{CounterKind, IncrementIndependenceCfg};
use crate::report::{RateReport, ReportEntry, StatReport, Verdict};
use crate::rng::StreamTag;
use crate::stats;
use crate::transport::ThetaSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Lemma31,
    Lemma32,
    Covariance,
    Normality,
    Independence,
    Coupling,
    Rate,
    All,
}

impl Suite {
    pub const ALL_NAMES: [(&'static str, Suite); 8] = [
        ("lemma31", Suite::Lemma31),
        ("lemma32", Suite::Lemma32),
        ("covariance", Suite::Covariance),
        ("normality", Suite::Normality),
        ("independence", Suite::Independence),
        ("coupling", Suite::Coupling),
        ("rate", Suite::Rate),
        ("all", Suite::All),
    ];

    pub fn parse(name: &str) -> Option<Suite> {
        Self::ALL_NAMES
            .iter()
            .find(|(n, _)| *n == name)
            .map(|&(_, s)| s)
    }
}

/// Combined output of a suite run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyOutput {
    pub suite: String,
    pub seed: u64,
    pub entries: Vec<ReportEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<RateReport>,
}

impl VerifyOutput {
    pub fn any_fail(&self) -> bool {
        self.entries.iter().any(|e| e.verdict == Verdict::Fail)
            || self.rate.as_ref().is_some_and(|r| r.any_fail())
    }

    pub fn report(&self) -> StatReport {
        StatReport {
            seed: self.seed,
            entries: self.entries.clone(),
        }
    }
}

// Pinned experiment parameters.
const THETA_MAIN: f64 = 2.0;
const THETA_SECOND: f64 = 7.0; // reduced mod 2 pi internally
const LEMMA31_DELTAS: [f64; 3] = [0.1, 0.5, 1.0];
const LEMMA31_N: usize = 100_000;
const LEMMA32_EPS: [f64; 2] = [0.5, 0.1];
const WEAK_EPS: f64 = 0.02;
const WEAK_N: usize = 5000;
const COVARIANCE_TIMES: [f64; 3] = [0.25, 0.75, 1.0];
const INDEPENDENCE_TIMES: [f64; 2] = [0.5, 1.0];
const FOURTH_EPS: f64 = 0.05;
const FOURTH_WINDOW: (f64, f64) = (0.25, 0.75);
const COUPLING_EPS: f64 = 0.1;
const IDENTITY_REPS: usize = 100;
const GAMMA_LAW_N: usize = 10_000;
const RHO_TAU_HORIZON: f64 = 25.0;
const BLOCK_LAW_N: usize = 100_000;
const KOLMOGOROV_ALPHA: f64 = 0.1;
const KOLMOGOROV_REPS: usize = 10_000;
const GRID_CONSISTENCY_REPS: usize = 50;
const TREND_EPS: [f64; 3] = [0.2, 0.1, 0.05];
const TREND_REPS: usize = 200;
const RATE_EPS: [f64; 4] = [0.2, 0.1, 0.05, 0.02];
const RATE_REPS: usize = 200;

fn lemma31_suite(seed: u64) -> Result<Vec<ReportEntry>> {
    let mut entries = Vec::new();
    for theta in [THETA_MAIN, THETA_SECOND] {
        entries.extend(stats::lemma31_check(seed, theta, &LEMMA31_DELTAS, LEMMA31_N)?);
    }
    Ok(entries)
}

fn lemma32_suite(seed: u64) -> Result<Vec<ReportEntry>> {
    LEMMA32_EPS
        .iter()
        .map(|&eps| stats::lemma32a_check(seed, eps, 0.0, 1.0))
        .collect()
}

/// The covariance and normality suites share one ensemble, so either suite
/// alone reproduces exactly the entries it contributes to `all`.
fn weak_limit_bundle(seed: u64) -> Result<(Vec<ReportEntry>, Vec<ReportEntry>)> {
    let thetas = ThetaSet::new(&[THETA_MAIN], WEAK_EPS)?;
    let ens = stats::simulate_transport_ensemble(
        seed,
        StreamTag::Covariance,
        0,
        &thetas,
        1.0,
        &COVARIANCE_TIMES,
        WEAK_N,
    )?
    .remove(0);

    let mut covariance = stats::covariance_test(&ens, seed)?;
    covariance.push(stats::fourth_moment_check(
        seed,
        FOURTH_EPS,
        THETA_MAIN,
        FOURTH_WINDOW.0,
        FOURTH_WINDOW.1,
        WEAK_N,
    )?);

    let last = COVARIANCE_TIMES.len() - 1;
    let x1: Vec<f64> = ens.x.iter().map(|row| row[last]).collect();
    let y1: Vec<f64> = ens.y.iter().map(|row| row[last]).collect();
    let normality = vec![
        stats::normality_test(&x1, "normality/x(1)", seed)?,
        stats::normality_test(&y1, "normality/y(1)", seed)?,
    ];
    Ok((covariance, normality))
}

fn independence_suite(seed: u64) -> Result<Vec<ReportEntry>> {
    let thetas = ThetaSet::new(&[THETA_MAIN, THETA_SECOND], WEAK_EPS)?;
    let family = stats::simulate_transport_ensemble(
        seed,
        StreamTag::Independence,
        0,
        &thetas,
        1.0,
        &INDEPENDENCE_TIMES,
        WEAK_N,
    )?;
    let mut entries = stats::independence_family_test(&family, seed)?;

    // Thinned-counter independence on disjoint intervals, its power control,
    // and the marginal law.
    let disjoint = IncrementIndependenceCfg {
        interval_a: (0.0, 1.0),
        interval_b: (2.0, 3.0),
        counter_a: CounterKind::N,
        counter_b: CounterKind::NPrime,
        reps: 100_000,
        allow_overlap: false,
    };
    entries.push(crate::poisson::increment_independence_test(
        &disjoint,
        seed,
        "poisson/disjoint_independence",
    )?);

    let dependent = IncrementIndependenceCfg {
        interval_a: (0.0, 1.0),
        interval_b: (0.0, 1.0),
        counter_a: CounterKind::N,
        counter_b: CounterKind::M,
        reps: 100_000,
        allow_overlap: true,
    };
    let control = crate::poisson::increment_independence_test(&dependent, seed, "unused")?;
    let p = control.p_value.expect("chi-square control has a p-value");
    entries.push(
        ReportEntry::with_tolerance(
            "poisson/dependent_control",
            p,
            None,
            0.0,
            0.01,
            control.sample_size,
            seed,
        )
        .with_note("power control: N vs M on the same interval must be detected, pass iff p < 0.01"),
    );

    entries.push(poisson_marginal_entry(seed)?);
    Ok(entries)
}

/// Chi-square of the thinned counter against Poisson(1) over `(0, 1]`.
fn poisson_marginal_entry(seed: u64) -> Result<ReportEntry> {
    use rayon::prelude::*;

    let reps = 100_000;
    let pmf = |k: u64| crate::poisson::poisson_pmf(1.0, k);
    let cut = stats::gof::tail_cut(pmf, reps, 5.0);
    let counts: Vec<u64> = (0..reps)
        .into_par_iter()
        .map(|rep| -> Result<u64> {
            let mut s = crate::rng::derive_stream(crate::rng::SeedSpec::new(
                seed,
                crate::rng::stream_id(StreamTag::PoissonMarginal, 0, rep as u32),
            ));
            let skel = crate::poisson::simulate_master(1.0, &mut s)?;
            Ok(skel.count_at(CounterKind::N, 1.0)?.min(cut))
        })
        .collect::<Result<_>>()?;
    let mut observed = vec![0u64; cut as usize + 1];
    for k in counts {
        observed[k as usize] += 1;
    }
    let mut probs: Vec<f64> = (0..cut).map(pmf).collect();
    probs.push(1.0 - probs.iter().sum::<f64>());
    let (stat, _, p) = stats::gof::chi_square_gof(&observed, &probs, reps);
    Ok(ReportEntry::with_pvalue(
        "poisson/marginal_law_N",
        stat,
        p,
        0.01,
        reps as u64,
        seed,
    ))
}

fn coupling_suite(seed: u64) -> Result<Vec<ReportEntry>> {
    let mut entries = Vec::new();
    entries.push(stats::coupling_identity_check(
        seed,
        COUPLING_EPS,
        THETA_MAIN,
        1.0,
        IDENTITY_REPS,
    )?);
    entries.push(stats::gamma_law_check(seed, COUPLING_EPS, THETA_MAIN, GAMMA_LAW_N)?);
    entries.extend(stats::rho_tau_check(
        seed,
        COUPLING_EPS,
        THETA_MAIN,
        RHO_TAU_HORIZON,
    )?);
    entries.push(stats::sigma_moment_check(seed, COUPLING_EPS, THETA_MAIN, 40)?);
    entries.push(stats::block_law_check(seed, THETA_MAIN, BLOCK_LAW_N)?);
    entries.push(stats::kolmogorov_bound_check(
        seed,
        COUPLING_EPS,
        THETA_MAIN,
        KOLMOGOROV_ALPHA,
        KOLMOGOROV_REPS,
    )?);
    entries.extend(stats::grid_consistency_check(
        seed,
        COUPLING_EPS,
        THETA_MAIN,
        stats::default_grid_step(COUPLING_EPS),
        GRID_CONSISTENCY_REPS,
    )?);
    entries.extend(stats::decomposition_trend_check(
        seed,
        &TREND_EPS,
        THETA_MAIN,
        TREND_REPS,
    )?);
    Ok(entries)
}

fn rate_suite(seed: u64) -> Result<(Vec<ReportEntry>, RateReport)> {
    let report = stats::rate_experiment(seed, THETA_MAIN, &RATE_EPS, RATE_REPS, 1.0, None)?;
    let mut worst_ratio = 0.0f64;
    for w in report.rows.windows(2) {
        worst_ratio = worst_ratio.max(w[1].ratio_q99 / w[0].ratio_q99);
    }
    let entry = ReportEntry::with_tolerance(
        "rate/q99_ratio_trend",
        worst_ratio,
        None,
        0.0,
        1.1,
        RATE_REPS as u64,
        seed,
    )
    .with_note("max consecutive ratio of the 0.99 normalized quantile; pass iff <= 1.1");
    Ok((vec![entry], report))
}

/// Run one suite with the project's pinned parameters.
pub fn run_suite(seed: u64, suite: Suite) -> Result<VerifyOutput> {
    let mut entries = Vec::new();
    let mut rate = None;
    match suite {
        Suite::Lemma31 => entries.extend(lemma31_suite(seed)?),
        Suite::Lemma32 => entries.extend(lemma32_suite(seed)?),
        Suite::Covariance => entries.extend(weak_limit_bundle(seed)?.0),
        Suite::Normality => entries.extend(weak_limit_bundle(seed)?.1),
        Suite::Independence => entries.extend(independence_suite(seed)?),
        Suite::Coupling => entries.extend(coupling_suite(seed)?),
        Suite::Rate => {
            let (e, r) = rate_suite(seed)?;
            entries.extend(e);
            rate = Some(r);
        }
        Suite::All => {
            entries.extend(lemma31_suite(seed)?);
            entries.extend(lemma32_suite(seed)?);
            let (cov, norm) = weak_limit_bundle(seed)?;
            entries.extend(cov);
            entries.extend(norm);
            entries.extend(independence_suite(seed)?);
            entries.extend(coupling_suite(seed)?);
            let (e, r) = rate_suite(seed)?;
            entries.extend(e);
            rate = Some(r);
        }
    }
    let name = Suite::ALL_NAMES
        .iter()
        .find(|(_, s)| *s == suite)
        .map(|(n, _)| *n)
        .expect("every suite is named");
    Ok(VerifyOutput {
        suite: name.to_string(),
        seed,
        entries,
        rate,
    })
}
