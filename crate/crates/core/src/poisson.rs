//! The rate-2 master Poisson process and its two thinned unit-rate counters.
//!
//! A [`JumpSkeleton`] holds the ordered master event times together with one
//! fair, independent mark per event and per counter, so `N` and `N'` jump
//! only at master events and each is a unit-rate Poisson process with
//! independent increments on disjoint intervals.

use bitvec::vec::BitVec;
use std::io::Write;

use crate::error::{Error, Result};
use crate::report::ReportEntry;
use crate::rng::{derive_stream, RandomStream, SeedSpec, StreamTag};
use crate::stats::gof;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CounterKind {
    M,
    N,
    NPrime,
}

/// Master event times with per-event thinning marks. Immutable once built.
#[derive(Debug, Clone)]
pub struct JumpSkeleton {
    horizon: f64,
    event_times: Vec<f64>,
    jumps_n: BitVec,
    jumps_nprime: BitVec,
}

impl JumpSkeleton {
    /// Assemble a skeleton from raw parts, validating the invariants.
    pub fn from_parts(
        horizon: f64,
        event_times: Vec<f64>,
        jumps_n: Vec<bool>,
        jumps_nprime: Vec<bool>,
    ) -> Result<Self> {
        if !horizon.is_finite() || horizon < 0.0 {
            return Err(Error::invalid(format!("horizon must be finite and >= 0, got {horizon}")));
        }
        if event_times.len() != jumps_n.len() || event_times.len() != jumps_nprime.len() {
            return Err(Error::invalid("mark vectors must parallel event_times"));
        }
        let mut prev = 0.0;
        for &t in &event_times {
            if t.is_nan() || t <= prev || t > horizon {
                return Err(Error::invalid(format!(
                    "event times must be strictly increasing in (0, horizon], got {t} after {prev}"
                )));
            }
            prev = t;
        }
        Ok(JumpSkeleton {
            horizon,
            event_times,
            jumps_n: jumps_n.into_iter().collect(),
            jumps_nprime: jumps_nprime.into_iter().collect(),
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.event_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.event_times.is_empty()
    }

    pub fn event_times(&self) -> &[f64] {
        &self.event_times
    }

    pub fn jumps_n(&self, i: usize) -> bool {
        self.jumps_n[i]
    }

    pub fn jumps_nprime(&self, i: usize) -> bool {
        self.jumps_nprime[i]
    }

    /// Counter value at time `t` (right-continuous step function).
    pub fn count_at(&self, which: CounterKind, t: f64) -> Result<u64> {
        if !t.is_finite() || t < 0.0 || t > self.horizon {
            return Err(Error::invalid(format!(
                "count_at time {t} outside [0, {}]",
                self.horizon
            )));
        }
        let idx = self.event_times.partition_point(|&s| s <= t);
        let count = match which {
            CounterKind::M => idx as u64,
            CounterKind::N => self.jumps_n[..idx].count_ones() as u64,
            CounterKind::NPrime => self.jumps_nprime[..idx].count_ones() as u64,
        };
        Ok(count)
    }

    /// Increment of a counter over `(s, t]`.
    pub fn increment(&self, which: CounterKind, s: f64, t: f64) -> Result<u64> {
        if s > t {
            return Err(Error::invalid(format!("interval ({s}, {t}] is empty")));
        }
        Ok(self.count_at(which, t)? - self.count_at(which, s)?)
    }

    /// CSV dump, columns `time,jump_N,jump_Nprime`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time,jump_N,jump_Nprime")?;
        for (i, &t) in self.event_times.iter().enumerate() {
            writeln!(
                w,
                "{},{},{}",
                t,
                u8::from(self.jumps_n[i]),
                u8::from(self.jumps_nprime[i])
            )?;
        }
        Ok(())
    }
}

/// Simulate the master process on `(0, horizon]` and thin it.
///
/// Inter-arrivals are i.i.d. exponential of rate 2; at each event the two
/// counters jump independently with probability 1/2 each. An inter-arrival
/// that rounds to zero (or fails to advance the clock) is redrawn to keep
/// the event times strictly increasing.
pub fn simulate_master(horizon: f64, stream: &mut RandomStream) -> Result<JumpSkeleton> {
    if !horizon.is_finite() || horizon < 0.0 {
        return Err(Error::invalid(format!("horizon must be finite and >= 0, got {horizon}")));
    }
    let mut event_times = Vec::new();
    let mut jumps_n = BitVec::new();
    let mut jumps_nprime = BitVec::new();
    let mut t = 0.0f64;
    loop {
        let mut next = t + stream.exponential(2.0);
        while next <= t {
            next = t + stream.exponential(2.0);
        }
        if next > horizon {
            break;
        }
        t = next;
        event_times.push(t);
        jumps_n.push(stream.bernoulli(0.5));
        jumps_nprime.push(stream.bernoulli(0.5));
    }
    Ok(JumpSkeleton {
        horizon,
        event_times,
        jumps_n,
        jumps_nprime,
    })
}

/// Configuration of the disjoint-increment independence check.
#[derive(Debug, Clone)]
pub struct IncrementIndependenceCfg {
    pub interval_a: (f64, f64),
    pub interval_b: (f64, f64),
    pub counter_a: CounterKind,
    pub counter_b: CounterKind,
    pub reps: usize,
    /// Permits intentionally dependent configurations (used by the test
    /// harness to confirm the chi-square statistic has power).
    pub allow_overlap: bool,
}

/// Chi-square independence test for a pair of counter increments over an
/// ensemble of freshly simulated skeletons.
pub fn increment_independence_test(
    cfg: &IncrementIndependenceCfg,
    seed: u64,
    name: &str,
) -> Result<ReportEntry> {
    let (a0, a1) = cfg.interval_a;
    let (b0, b1) = cfg.interval_b;
    for (lo, hi) in [(a0, a1), (b0, b1)] {
        if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || hi < lo {
            return Err(Error::invalid(format!("bad interval ({lo}, {hi})")));
        }
    }
    if !cfg.allow_overlap && a1 > b0 && b1 > a0 {
        return Err(Error::invalid(format!(
            "intervals ({a0}, {a1}] and ({b0}, {b1}] overlap"
        )));
    }
    if a1 == a0 || b1 == b0 {
        return Ok(ReportEntry::skipped(name, "degenerate zero-length interval", seed));
    }

    let horizon = a1.max(b1);
    let len_a = a1 - a0;
    let len_b = b1 - b0;
    // Bin each marginal so expected Poisson counts stay at least 5.
    let pmf = |len: f64| move |k: u64| poisson_pmf(len, k);
    let rate_a = if cfg.counter_a == CounterKind::M { 2.0 } else { 1.0 };
    let rate_b = if cfg.counter_b == CounterKind::M { 2.0 } else { 1.0 };
    let cut_a = gof::tail_cut(pmf(rate_a * len_a), cfg.reps, 5.0);
    let cut_b = gof::tail_cut(pmf(rate_b * len_b), cfg.reps, 5.0);

    let mut table = vec![vec![0u64; cut_b as usize + 1]; cut_a as usize + 1];
    for rep in 0..cfg.reps {
        let mut s = derive_stream(SeedSpec::new(
            seed,
            crate::rng::stream_id(StreamTag::PoissonIndependence, 0, rep as u32),
        ));
        let skel = simulate_master(horizon, &mut s)?;
        let ka = skel.increment(cfg.counter_a, a0, a1)?.min(cut_a);
        let kb = skel.increment(cfg.counter_b, b0, b1)?.min(cut_b);
        table[ka as usize][kb as usize] += 1;
    }
    let (stat, _dof, p) = gof::chi_square_independence(&table);
    Ok(ReportEntry::with_pvalue(name, stat, p, 0.01, cfg.reps as u64, seed))
}

/// `e^-mu mu^k / k!` computed stably.
pub fn poisson_pmf(mu: f64, k: u64) -> f64 {
    let mut v = (-mu).exp();
    for i in 1..=k {
        v *= mu / i as f64;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::accum::MeanVar;
    use proptest::prelude::*;

    fn stream(id: u64) -> RandomStream {
        derive_stream(SeedSpec::new(42, id))
    }

    #[test]
    fn zero_horizon_gives_empty_skeleton() {
        let skel = simulate_master(0.0, &mut stream(0)).unwrap();
        assert!(skel.is_empty());
        assert_eq!(skel.count_at(CounterKind::M, 0.0).unwrap(), 0);
    }

    #[test]
    fn non_finite_horizon_rejected() {
        assert!(simulate_master(f64::NAN, &mut stream(0)).is_err());
        assert!(simulate_master(f64::INFINITY, &mut stream(0)).is_err());
    }

    #[test]
    fn count_out_of_range_rejected() {
        let skel = simulate_master(1.0, &mut stream(1)).unwrap();
        assert!(skel.count_at(CounterKind::M, -0.1).is_err());
        assert!(skel.count_at(CounterKind::M, 1.1).is_err());
    }

    #[test]
    fn mean_event_count_matches_rate() {
        // E M(10) = 20.
        let mut acc = MeanVar::new();
        for rep in 0..10_000 {
            let skel = simulate_master(10.0, &mut stream(1000 + rep)).unwrap();
            acc.push(skel.len() as f64);
        }
        let se = acc.standard_error();
        assert!(
            (acc.mean() - 20.0).abs() <= 3.0 * se,
            "mean {} se {}",
            acc.mean(),
            se
        );
    }

    #[test]
    fn counters_partition_master() {
        let skel = simulate_master(50.0, &mut stream(2)).unwrap();
        let t = 37.5;
        let m = skel.count_at(CounterKind::M, t).unwrap();
        let n = skel.count_at(CounterKind::N, t).unwrap();
        // Events where N does not jump plus events where it does sum to M.
        let idx = skel.event_times.partition_point(|&s| s <= t);
        let no_jump = (0..idx).filter(|&i| !skel.jumps_n(i)).count() as u64;
        assert_eq!(n + no_jump, m);
        assert!(n <= m);
        assert!(skel.count_at(CounterKind::NPrime, t).unwrap() <= m);
    }

    #[test]
    fn total_marked_count_at_horizon() {
        let skel = simulate_master(20.0, &mut stream(3)).unwrap();
        let total: u64 = (0..skel.len()).filter(|&i| skel.jumps_n(i)).count() as u64;
        assert_eq!(skel.count_at(CounterKind::N, 20.0).unwrap(), total);
    }

    #[test]
    fn thinned_marginal_is_unit_poisson() {
        // Chi-square of N over (0, 1] against Poisson(1), 1e5 replications.
        let n = 100_000;
        let cut = gof::tail_cut(|k| poisson_pmf(1.0, k), n, 5.0);
        let mut observed = vec![0u64; cut as usize + 1];
        for rep in 0..n {
            let skel = simulate_master(1.0, &mut stream(500_000 + rep as u64)).unwrap();
            let k = skel.count_at(CounterKind::N, 1.0).unwrap().min(cut);
            observed[k as usize] += 1;
        }
        let mut probs: Vec<f64> = (0..cut).map(|k| poisson_pmf(1.0, k)).collect();
        probs.push(1.0 - probs.iter().sum::<f64>());
        let (stat, _, p) = gof::chi_square_gof(&observed, &probs, n);
        assert!(p > 0.01, "chi-square stat {stat}, p {p}");
    }

    #[test]
    fn disjoint_increments_independent() {
        let cfg = IncrementIndependenceCfg {
            interval_a: (0.0, 1.0),
            interval_b: (2.0, 3.0),
            counter_a: CounterKind::N,
            counter_b: CounterKind::NPrime,
            reps: 100_000,
            allow_overlap: false,
        };
        let entry = increment_independence_test(&cfg, 7, "n_nprime_disjoint").unwrap();
        assert!(entry.p_value.unwrap() > 0.01, "p {:?}", entry.p_value);
    }

    #[test]
    fn same_interval_n_vs_m_detected_as_dependent() {
        let cfg = IncrementIndependenceCfg {
            interval_a: (0.0, 1.0),
            interval_b: (0.0, 1.0),
            counter_a: CounterKind::N,
            counter_b: CounterKind::M,
            reps: 100_000,
            allow_overlap: true,
        };
        let entry = increment_independence_test(&cfg, 7, "n_m_same").unwrap();
        assert!(entry.p_value.unwrap() < 0.01);
    }

    #[test]
    fn overlap_rejected_without_flag() {
        let cfg = IncrementIndependenceCfg {
            interval_a: (0.0, 1.5),
            interval_b: (1.0, 2.0),
            counter_a: CounterKind::N,
            counter_b: CounterKind::NPrime,
            reps: 10,
            allow_overlap: false,
        };
        assert!(increment_independence_test(&cfg, 7, "overlap").is_err());
    }

    #[test]
    fn degenerate_interval_skips() {
        let cfg = IncrementIndependenceCfg {
            interval_a: (1.0, 1.0),
            interval_b: (2.0, 3.0),
            counter_a: CounterKind::N,
            counter_b: CounterKind::NPrime,
            reps: 10,
            allow_overlap: false,
        };
        let entry = increment_independence_test(&cfg, 7, "degenerate").unwrap();
        assert_eq!(entry.verdict, crate::report::Verdict::Skip);
    }

    #[test]
    fn same_interval_covariance_diagnostic_positive() {
        // N and N' share master events, so Cov(N_t, N'_t) = t/2 > 0.
        let mut cov = crate::stats::accum::Covariance::new();
        for rep in 0..20_000 {
            let skel = simulate_master(1.0, &mut stream(900_000 + rep)).unwrap();
            let n = skel.count_at(CounterKind::N, 1.0).unwrap() as f64;
            let np = skel.count_at(CounterKind::NPrime, 1.0).unwrap() as f64;
            cov.push(n, np);
        }
        assert!(cov.covariance() > 0.0, "cov {}", cov.covariance());
    }

    #[test]
    fn csv_dump_has_expected_shape() {
        let skel = JumpSkeleton::from_parts(
            2.0,
            vec![0.5, 1.25],
            vec![true, false],
            vec![false, true],
        )
        .unwrap();
        let mut buf = Vec::new();
        skel.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "time,jump_N,jump_Nprime\n0.5,1,0\n1.25,0,1\n");
    }

    #[test]
    fn from_parts_validates_monotonicity() {
        assert!(JumpSkeleton::from_parts(1.0, vec![0.5, 0.5], vec![true; 2], vec![true; 2]).is_err());
        assert!(JumpSkeleton::from_parts(1.0, vec![0.5, 1.5], vec![true; 2], vec![true; 2]).is_err());
        assert!(JumpSkeleton::from_parts(1.0, vec![0.5], vec![true; 2], vec![true; 2]).is_err());
    }

    proptest! {
        #[test]
        fn counts_are_monotone_and_bounded(seed in 0u64..1000) {
            let skel = simulate_master(5.0, &mut stream(77_000 + seed)).unwrap();
            let mut prev = 0u64;
            for i in 0..=50 {
                let t = 5.0 * i as f64 / 50.0;
                let n = skel.count_at(CounterKind::N, t).unwrap();
                let m = skel.count_at(CounterKind::M, t).unwrap();
                prop_assert!(n >= prev);
                prop_assert!(n <= m);
                prev = n;
            }
        }
    }
}
