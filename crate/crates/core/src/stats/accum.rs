//! Order-robust accumulators.
//!
//! Ensemble reductions must not depend on worker count, so every running
//! statistic here merges associatively (Chan et al. pairwise update). Long
//! deterministic sums use compensated summation.

/// Kahan-Babuska (Neumaier) compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Running mean and variance (Welford), mergeable.
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanVar {
    n: u64,
    mean: f64,
    m2: f64,
}

impl MeanVar {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &MeanVar) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = (self.n + other.n) as f64;
        let d = other.mean - self.mean;
        self.m2 += other.m2 + d * d * (self.n as f64) * (other.n as f64) / n;
        self.mean += d * other.n as f64 / n;
        self.n += other.n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn standard_error(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

/// Running covariance of a pair, mergeable.
#[derive(Debug, Clone, Copy, Default)]
pub struct Covariance {
    n: u64,
    mean_x: f64,
    mean_y: f64,
    cxy: f64,
}

impl Covariance {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64, y: f64) {
        self.n += 1;
        let dx = x - self.mean_x;
        self.mean_x += dx / self.n as f64;
        self.mean_y += (y - self.mean_y) / self.n as f64;
        self.cxy += dx * (y - self.mean_y);
    }

    pub fn merge(&mut self, other: &Covariance) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = (self.n + other.n) as f64;
        let dx = other.mean_x - self.mean_x;
        let dy = other.mean_y - self.mean_y;
        self.cxy += other.cxy + dx * dy * (self.n as f64) * (other.n as f64) / n;
        self.mean_x += dx * other.n as f64 / n;
        self.mean_y += dy * other.n as f64 / n;
        self.n += other.n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    /// Unbiased sample covariance.
    pub fn covariance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.cxy / (self.n - 1) as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn kahan_beats_naive_on_small_terms() {
        let mut k = KahanSum::new();
        k.add(1.0);
        for _ in 0..10_000_000 {
            k.add(1e-16);
        }
        let exact = 1.0 + 1e-16 * 1e7;
        assert!((k.value() - exact).abs() < 1e-12);
    }

    #[test]
    fn mean_var_matches_two_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 1000) as f64 / 300.0).collect();
        let mut acc = MeanVar::new();
        for &x in &xs {
            acc.push(x);
        }
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((acc.mean() - mean).abs() < 1e-12);
        assert!((acc.variance() - var).abs() < 1e-12);
    }

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
    }

    proptest! {
        #[test]
        fn meanvar_merge_is_associative(xs in proptest::collection::vec(-1e3f64..1e3, 3..200),
                                        cut_a in 0usize..200, cut_b in 0usize..200) {
            let i = cut_a % xs.len();
            let j = i + (cut_b % (xs.len() - i));
            let mut whole = MeanVar::new();
            for &x in &xs { whole.push(x); }

            let part = |r: &[f64]| {
                let mut a = MeanVar::new();
                for &x in r { a.push(x); }
                a
            };
            let (a, b, c) = (part(&xs[..i]), part(&xs[i..j]), part(&xs[j..]));

            let mut left = a; left.merge(&b); left.merge(&c);
            let mut bc = b; bc.merge(&c);
            let mut right = a; right.merge(&bc);

            prop_assert!(rel_close(left.mean(), whole.mean(), 1e-12));
            prop_assert!(rel_close(right.mean(), whole.mean(), 1e-12));
            prop_assert!(rel_close(left.variance(), whole.variance(), 1e-12));
            prop_assert!(rel_close(right.variance(), whole.variance(), 1e-12));
        }

        #[test]
        fn covariance_merge_matches_sequential(xs in proptest::collection::vec((-1e2f64..1e2, -1e2f64..1e2), 4..100),
                                               cut in 1usize..99) {
            let i = cut % (xs.len() - 1) + 1;
            let mut whole = Covariance::new();
            for &(x, y) in &xs { whole.push(x, y); }
            let mut a = Covariance::new();
            for &(x, y) in &xs[..i] { a.push(x, y); }
            let mut b = Covariance::new();
            for &(x, y) in &xs[i..] { b.push(x, y); }
            a.merge(&b);
            prop_assert!(rel_close(a.covariance(), whole.covariance(), 1e-12));
        }
    }
}
