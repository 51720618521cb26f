//! Summary statistics and the two-sample Kolmogorov-Smirnov test.

use serde::Serialize;

use super::SimConfig;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::default();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Sample mean and standard error.
pub fn mean_stderr(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = samples.iter().copied().collect::<CompensatedSum>().total() / n as f64;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let ss = samples
        .iter()
        .map(|x| (x - mean) * (x - mean))
        .collect::<CompensatedSum>()
        .total();
    let var = ss / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Monte Carlo estimate of an expectation with its confidence band.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateSummary {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
    pub ci_low: f64,
    pub ci_high: f64,
    pub target: Option<f64>,
    pub config: SimConfig,
}

impl EstimateSummary {
    pub fn from_samples(samples: &[f64], target: Option<f64>, config: &SimConfig) -> Self {
        let (mean, stderr) = mean_stderr(samples);
        Self::from_moments(mean, stderr, samples.len(), target, config)
    }

    pub fn from_moments(
        mean: f64,
        stderr: f64,
        n: usize,
        target: Option<f64>,
        config: &SimConfig,
    ) -> Self {
        let half = config.z * stderr;
        Self {
            mean,
            stderr,
            n,
            ci_low: mean - half,
            ci_high: mean + half,
            target,
            config: config.clone(),
        }
    }

    /// `|mean - target| <= z * stderr`.
    pub fn covers_target(&self) -> Option<bool> {
        self.target
            .map(|t| (self.mean - t).abs() <= self.config.z * self.stderr)
    }
}

/// Two-sample Kolmogorov-Smirnov statistic `sup |F_x - F_y|`.
pub fn ks_statistic(xs: &[f64], ys: &[f64]) -> f64 {
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Asymptotic critical value of the two-sample statistic at level `alpha`.
pub fn ks_critical_value(n: usize, m: usize, alpha: f64) -> f64 {
    let c = (-0.5 * (alpha / 2.0).ln()).sqrt();
    let (n, m) = (n as f64, m as f64);
    c * ((n + m) / (n * m)).sqrt()
}
