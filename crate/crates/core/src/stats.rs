//! Small statistics toolkit: running moments, hit counting on a sorted grid,
//! binomial intervals and Kolmogorov–Smirnov distances.

/// Running mean/variance (Welford), mergeable in a fixed order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let w = other.n as f64 / n as f64;
        self.mean += d * w;
        self.m2 += other.m2 + d * d * self.n as f64 * w;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

/// Counts, for each point of an ascending grid, how many recorded values
/// strictly exceed it. One binary search per value.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCounter {
    grid: Vec<f64>,
    // bumps[k] counts values exceeding exactly the first k grid points.
    bumps: Vec<u64>,
    total: u64,
}

impl GridCounter {
    pub fn new(grid: &[f64]) -> Self {
        debug_assert!(grid.windows(2).all(|w| w[0] <= w[1]));
        Self {
            grid: grid.to_vec(),
            bumps: vec![0; grid.len() + 1],
            total: 0,
        }
    }

    #[inline]
    pub fn record(&mut self, value: f64) {
        let k = self.grid.partition_point(|&g| g < value);
        self.bumps[k] += 1;
        self.total += 1;
    }

    pub fn merge(&mut self, other: &GridCounter) {
        for (a, b) in self.bumps.iter_mut().zip(&other.bumps) {
            *a += b;
        }
        self.total += other.total;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Exceedance counts aligned with the grid.
    pub fn hits(&self) -> Vec<u64> {
        let mut out = vec![0; self.grid.len()];
        let mut acc = 0;
        for j in (0..self.grid.len()).rev() {
            acc += self.bumps[j + 1];
            out[j] = acc;
        }
        out
    }
}

/// Two-sided Wilson score interval for `hits` successes out of `n`.
pub fn wilson_interval(hits: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = hits as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    ((center - half).max(0.0).min(p), (center + half).min(1.0).max(p))
}

/// One-sided Wilson upper bound when no successes were observed.
pub fn wilson_zero_upper(n: u64, z: f64) -> f64 {
    let z2 = z * z;
    z2 / (n as f64 + z2)
}

/// Kolmogorov distance between the empirical CDF of `sample` and `cdf`.
/// Sorts `sample` in place.
pub fn ks_one_sample<F: Fn(f64) -> f64>(sample: &mut [f64], cdf: F) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sample.iter().enumerate() {
        let c = cdf(x);
        d = d.max((i as f64 + 1.0) / n - c).max(c - i as f64 / n);
    }
    d
}

/// Two-sample Kolmogorov–Smirnov statistic. Sorts both inputs in place.
pub fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}
