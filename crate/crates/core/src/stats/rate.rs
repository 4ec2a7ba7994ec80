//! The strong-approximation rate experiment.

use rayon::prelude::*;

use crate::coupling::build_grid_coupling;
use crate::error::{Error, Result};
use crate::report::{rate_normalizer, RateReport, RateRow, Verdict};
use crate::rng::{derive_stream, stream_id, SeedSpec, StreamTag};
use crate::stats::gof::quantile;

/// Grid step used when no override is given.
///
/// Scales like `eps^3` so the relative crossing-detection bias (overshoot
/// `~0.6 sqrt(h)` against corridor widths `~0.3 eps`) shrinks like
/// `sqrt(eps)` instead of staying constant; with an `eps^2` step the bias
/// floor stalls the sup-error medians between neighboring epsilons.
pub fn default_grid_step(eps: f64) -> f64 {
    eps * eps * eps / 80.0
}

/// Run the grid-backend coupling across an epsilon ladder and aggregate the
/// sup-error quantiles, raw and normalized by `eps^(1/2) (log 1/eps)^(5/2)`.
///
/// The trend verdict passes when the 0.99 normalized-ratio quantile is
/// non-increasing along decreasing epsilon, within 10% slack per step.
pub fn rate_experiment(
    seed: u64,
    theta: f64,
    eps_list: &[f64],
    reps: usize,
    horizon_t: f64,
    grid_step_override: Option<f64>,
) -> Result<RateReport> {
    if reps < 100 {
        return Err(Error::invalid(format!("rate experiment needs reps >= 100, got {reps}")));
    }
    if eps_list.is_empty() {
        return Err(Error::invalid("empty epsilon list"));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("eps_list must be strictly decreasing"));
    }

    let mut rows = Vec::with_capacity(eps_list.len());
    for (g, &eps) in eps_list.iter().enumerate() {
        let grid_step = grid_step_override.unwrap_or_else(|| default_grid_step(eps));
        let mut sups: Vec<f64> = (0..reps)
            .into_par_iter()
            .map(|rep| -> Result<f64> {
                let mut stream = derive_stream(SeedSpec::new(
                    seed,
                    stream_id(StreamTag::Rate, g as u16, rep as u32),
                ));
                let r = build_grid_coupling(eps, theta, horizon_t, grid_step, &mut stream)?;
                Ok(r.sup_error.expect("grid backend reports sup error"))
            })
            .collect::<Result<_>>()?;
        sups.sort_by(f64::total_cmp);
        let norm = rate_normalizer(eps);
        rows.push(RateRow {
            epsilon: eps,
            reps: reps as u64,
            sup_q50: quantile(&sups, 0.5),
            sup_q90: quantile(&sups, 0.9),
            sup_q99: quantile(&sups, 0.99),
            ratio_q50: quantile(&sups, 0.5) / norm,
            ratio_q90: quantile(&sups, 0.9) / norm,
            ratio_q99: quantile(&sups, 0.99) / norm,
        });
    }

    let trend_ok = rows
        .windows(2)
        .all(|w| w[1].ratio_q99 <= 1.1 * w[0].ratio_q99);
    Ok(RateReport {
        seed,
        rows,
        trend_verdict: if trend_ok { Verdict::Pass } else { Verdict::Fail },
    })
}
