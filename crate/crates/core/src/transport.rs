//! Complex transport processes driven by one jump skeleton.
//!
//! Between master events the integrand `(-1)^(N') e^(i theta N)` is constant,
//! so the time integral is a finite sum of segment contributions and the path
//! is piecewise linear with slope modulus exactly `2/eps`. Segments are
//! accumulated in time order with compensated summation; breakpoints are kept
//! in the `t` domain (`t = eps^2 r / 2`).

use num_complex::Complex64;
use std::f64::consts::{PI, TAU};
use std::io::Write;

use crate::error::{Error, Result};
use crate::poisson::{simulate_master, JumpSkeleton};
use crate::rng::RandomStream;
use crate::stats::accum::KahanSum;

/// Tolerance for the pairwise angle constraints.
pub const PAIRWISE_TOL: f64 = 1e-9;
/// Threshold below which `cos(m theta)` or `sin(m theta)` counts as vanishing.
pub const TRIG_GUARD_TOL: f64 = 1e-12;
/// Exclusion radius around the domain endpoints 0, pi, 2pi.
pub const DOMAIN_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ThetaError {
    #[error("angle must be finite, got {0}")]
    NonFinite(f64),
    #[error("angle {reduced} (reduced mod 2pi) lies outside (0,pi) U (pi,2pi)")]
    OutsideDomain { reduced: f64 },
    #[error("angles {a} and {b} coincide within {PAIRWISE_TOL}")]
    DuplicateAngle { a: f64, b: f64 },
    #[error("angles {a} and {b} sum to 2pi within {PAIRWISE_TOL}")]
    SupplementaryPair { a: f64, b: f64 },
    #[error("cos({m} * {reduced}) = {value:e} vanishes below {TRIG_GUARD_TOL}")]
    CosVanishes { reduced: f64, m: u64, value: f64 },
    #[error("sin({m} * {reduced}) = {value:e} vanishes below {TRIG_GUARD_TOL}")]
    SinVanishes { reduced: f64, m: u64, value: f64 },
    #[error("epsilon must be finite and positive, got {0}")]
    BadEpsilon(f64),
}

/// Reduce an angle to `[0, 2pi)`.
pub fn reduce_angle(theta: f64) -> f64 {
    theta.rem_euclid(TAU)
}

/// Largest multiplier checked by the non-vanishing guard at scale `eps`.
pub fn guard_m_max(eps: f64) -> u64 {
    (4.0 / (eps * eps)).ceil() as u64 + 1
}

/// Validate a single angle against the admissibility rules for scale `eps`.
/// Returns the reduced angle.
pub fn validate_angle(theta: f64, eps: f64) -> std::result::Result<f64, ThetaError> {
    if !theta.is_finite() {
        return Err(ThetaError::NonFinite(theta));
    }
    if !eps.is_finite() || eps <= 0.0 {
        return Err(ThetaError::BadEpsilon(eps));
    }
    let reduced = reduce_angle(theta);
    for endpoint in [0.0, PI, TAU] {
        if (reduced - endpoint).abs() < DOMAIN_TOL {
            return Err(ThetaError::OutsideDomain { reduced });
        }
    }
    let m_max = guard_m_max(eps);
    for m in 1..=m_max {
        let arg = m as f64 * reduced;
        let c = arg.cos();
        if c.abs() <= TRIG_GUARD_TOL {
            return Err(ThetaError::CosVanishes { reduced, m, value: c });
        }
        let s = arg.sin();
        if s.abs() <= TRIG_GUARD_TOL {
            return Err(ThetaError::SinVanishes { reduced, m, value: s });
        }
    }
    Ok(reduced)
}

/// A validated collection of angles sharing one scale.
#[derive(Debug, Clone)]
pub struct ThetaSet {
    angles: Vec<f64>,
    epsilon: f64,
}

impl ThetaSet {
    pub fn new(raw_angles: &[f64], epsilon: f64) -> std::result::Result<Self, ThetaError> {
        let mut angles = Vec::with_capacity(raw_angles.len());
        for &raw in raw_angles {
            angles.push(validate_angle(raw, epsilon)?);
        }
        for i in 0..angles.len() {
            for j in (i + 1)..angles.len() {
                if (angles[i] - angles[j]).abs() < PAIRWISE_TOL {
                    return Err(ThetaError::DuplicateAngle {
                        a: angles[i],
                        b: angles[j],
                    });
                }
                if (angles[i] + angles[j] - TAU).abs() < PAIRWISE_TOL {
                    return Err(ThetaError::SupplementaryPair {
                        a: angles[i],
                        b: angles[j],
                    });
                }
            }
        }
        Ok(ThetaSet { angles, epsilon })
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

/// One realized path of `z_eps^theta`, piecewise linear in `t`.
#[derive(Debug, Clone)]
pub struct TransportPath {
    pub theta: f64,
    pub epsilon: f64,
    /// +1 or -1, the global sign `(-1)^G`.
    pub sign_g: i8,
    /// Ascending times in `[0, horizon]`, starting at 0.
    breakpoints: Vec<f64>,
    /// Path values at the breakpoints; `values[0] == 0`.
    values: Vec<Complex64>,
    /// Per-segment slope, modulus `2/eps`.
    slopes: Vec<Complex64>,
}

impl TransportPath {
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn slopes(&self) -> &[Complex64] {
        &self.slopes
    }

    pub fn horizon(&self) -> f64 {
        *self.breakpoints.last().expect("path has at least one breakpoint")
    }

    /// Value at an arbitrary time, exact linear interpolation.
    pub fn value_at(&self, t: f64) -> Result<Complex64> {
        if !t.is_finite() || t < 0.0 || t > self.horizon() {
            return Err(Error::invalid(format!(
                "time {t} outside [0, {}]",
                self.horizon()
            )));
        }
        // Segment index: last breakpoint <= t.
        let idx = self.breakpoints.partition_point(|&s| s <= t);
        if idx == 0 {
            return Ok(self.values[0]);
        }
        let k = idx - 1;
        if self.breakpoints[k] == t || k == self.slopes.len() {
            return Ok(self.values[k]);
        }
        Ok(self.values[k] + self.slopes[k] * (t - self.breakpoints[k]))
    }

    /// Sample the path on a grid of times inside `[0, horizon]`.
    pub fn sample_grid(&self, grid: &[f64]) -> Result<Vec<Complex64>> {
        grid.iter().map(|&t| self.value_at(t)).collect()
    }

    /// CSV dump, columns `t,re,im`, at breakpoints or on a user grid.
    pub fn write_csv<W: Write>(&self, mut w: W, grid: Option<&[f64]>) -> Result<()> {
        let io = |e: std::io::Error| Error::Config(format!("write failed: {e}"));
        writeln!(w, "t,re,im").map_err(io)?;
        match grid {
            None => {
                for (&t, v) in self.breakpoints.iter().zip(&self.values) {
                    writeln!(w, "{},{},{}", t, v.re, v.im).map_err(io)?;
                }
            }
            Some(grid) => {
                for &t in grid {
                    let v = self.value_at(t)?;
                    writeln!(w, "{},{},{}", t, v.re, v.im).map_err(io)?;
                }
            }
        }
        Ok(())
    }
}

/// Integrate `(-1)^G eps int_0^(2t/eps^2) (-1)^(N') e^(i theta N) dr`
/// exactly, segment by segment, up to `horizon_t`.
///
/// The angle must already satisfy [`validate_angle`]; the skeleton must cover
/// the rescaled horizon `2 horizon_t / eps^2`.
pub fn evaluate_transport(
    skeleton: &JumpSkeleton,
    theta: f64,
    epsilon: f64,
    sign_g: i8,
    horizon_t: f64,
) -> Result<TransportPath> {
    let theta = validate_angle(theta, epsilon)?;
    evaluate_transport_validated(skeleton, theta, epsilon, sign_g, horizon_t)
}

/// Same as [`evaluate_transport`] for an angle already reduced and validated
/// (skips the `O(4/eps^2)` non-vanishing guard).
pub(crate) fn evaluate_transport_validated(
    skeleton: &JumpSkeleton,
    theta: f64,
    epsilon: f64,
    sign_g: i8,
    horizon_t: f64,
) -> Result<TransportPath> {
    if !(sign_g == 1 || sign_g == -1) {
        return Err(Error::invalid("sign_g must be +1 or -1"));
    }
    if !horizon_t.is_finite() || horizon_t < 0.0 {
        return Err(Error::invalid(format!("horizon_t must be >= 0, got {horizon_t}")));
    }
    let r_end = 2.0 * horizon_t / (epsilon * epsilon);
    if skeleton.horizon() < r_end * (1.0 - 1e-12) {
        return Err(Error::invalid(format!(
            "skeleton horizon {} shorter than required {r_end}",
            skeleton.horizon()
        )));
    }

    let n_events = skeleton
        .event_times()
        .partition_point(|&r| r < r_end);
    let mut breakpoints = Vec::with_capacity(n_events + 2);
    let mut values = Vec::with_capacity(n_events + 2);
    let mut slopes = Vec::with_capacity(n_events + 1);
    breakpoints.push(0.0);
    values.push(Complex64::new(0.0, 0.0));

    let sign = sign_g as f64;
    let mut re = KahanSum::new();
    let mut im = KahanSum::new();
    let mut n_count: u64 = 0;
    let mut nprime_parity = 1.0f64;
    let mut r_prev = 0.0f64;

    let mut push_segment =
        |r_to: f64, t_to: f64, r_from: &mut f64, n_count: u64, parity: f64| {
            let phase = theta * n_count as f64;
            let dir = Complex64::new(phase.cos(), phase.sin()) * (sign * parity);
            let len = r_to - *r_from;
            re.add(dir.re * epsilon * len);
            im.add(dir.im * epsilon * len);
            slopes.push(dir * (2.0 / epsilon));
            breakpoints.push(t_to);
            values.push(Complex64::new(re.value(), im.value()));
            *r_from = r_to;
        };

    for i in 0..n_events {
        let r_i = skeleton.event_times()[i];
        if r_i > r_prev {
            let t_i = 0.5 * epsilon * epsilon * r_i;
            push_segment(r_i, t_i, &mut r_prev, n_count, nprime_parity);
        }
        if skeleton.jumps_n(i) {
            n_count += 1;
        }
        if skeleton.jumps_nprime(i) {
            nprime_parity = -nprime_parity;
        }
    }
    if r_end > r_prev {
        push_segment(r_end, horizon_t, &mut r_prev, n_count, nprime_parity);
    }
    if breakpoints.len() == 1 {
        // Degenerate zero horizon: keep a single zero-length segment so the
        // path still spans [0, 0].
        slopes.clear();
    }

    Ok(TransportPath {
        theta,
        epsilon,
        sign_g,
        breakpoints,
        values,
        slopes,
    })
}

/// Simulate one skeleton and one global sign, then evaluate every angle of
/// the set on them. All returned paths are deterministic functions of the
/// same `(skeleton, G)`.
pub fn simulate_family(
    thetas: &ThetaSet,
    horizon_t: f64,
    stream: &mut RandomStream,
) -> Result<Vec<TransportPath>> {
    let eps = thetas.epsilon();
    let r_end = 2.0 * horizon_t / (eps * eps);
    let skeleton = simulate_master(r_end, stream)?;
    let sign_g = if stream.bernoulli(0.5) { -1 } else { 1 };
    thetas
        .angles()
        .iter()
        .map(|&theta| evaluate_transport_validated(&skeleton, theta, eps, sign_g, horizon_t))
        .collect()
}
