//! Seeded Brownian ensembles and the statistical checks run on them.
//!
//! Every path draws from its own ChaCha8 stream: the generator is seeded from
//! `(master_seed, ensemble tag)` and the stream number is the path index. Per
//! path results are collected in index order and reduced sequentially, so the
//! output does not depend on the worker count.

mod report;
mod stats;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::path::{check_lambda, SampledPath};
use crate::stoppart::{phi_value, StopScanner, StopTimeTrace};

pub use report::{run_experiment, EstimateLine, ExperimentName, ExperimentReport, ExperimentSpec};
pub use stats::{ks_critical_value, ks_statistic, mean_stderr, CompensatedSum, EstimateSummary};

/// Minimum of `lambda * sqrt(n_steps)` accepted by [`SimConfig::validate`].
pub const DISCRETIZATION_GUARD: f64 = 20.0;
/// Level of the two-sample KS test in [`check_scaling`].
pub const KS_ALPHA: f64 = 0.01;
/// Slack of the deterministic split inequalities.
pub const SPLIT_SLACK: f64 = 1e-9;
/// Grid floor of the unit-interval reference in [`xi_reference`].
pub const XI_MIN_STEPS: usize = 1_000_000;
/// Pooled stop increments below which [`estimate_stop_moments`] refuses to report.
pub const MIN_POOLED_STOPS: usize = 100;

mod tag {
    pub const PHI: u64 = 1;
    pub const MOMENTS: u64 = 2;
    pub const MARTINGALE: u64 = 3;
    pub const SCALING_WIDE: u64 = 4;
    pub const SCALING_NARROW: u64 = 5;
    pub const SUBADDITIVITY: u64 = 6;
    pub const SPLITS: u64 = 7;
    pub const EPS_UNIT: u64 = 8;
    pub const REFINE: u64 = 9;
    pub const EPS_LONG: u64 = 0x100;
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub lambda: f64,
    pub n_paths: usize,
    /// Grid steps per unit time.
    pub n_steps: usize,
    pub horizon: f64,
    pub master_seed: u64,
    /// Confidence multiplier for the reported bands.
    pub z: f64,
    /// Thread count; wall time only, never output.
    #[serde(skip)]
    pub workers: Option<usize>,
}

impl SimConfig {
    pub fn new(
        lambda: f64,
        n_paths: usize,
        n_steps: usize,
        horizon: f64,
        master_seed: u64,
    ) -> Result<Self> {
        let cfg = Self {
            lambda,
            n_paths,
            n_steps,
            horizon,
            master_seed,
            z: 3.0,
            workers: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        check_lambda(self.lambda)?;
        if self.n_paths < 2 {
            return Err(Error::InvalidParameter(format!(
                "n_paths {} must be at least 2",
                self.n_paths
            )));
        }
        if self.n_steps == 0 {
            return Err(Error::InvalidParameter("n_steps must be positive".into()));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "horizon {} must be positive",
                self.horizon
            )));
        }
        if !(self.z.is_finite() && self.z > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "z {} must be positive",
                self.z
            )));
        }
        let guard = self.lambda * (self.n_steps as f64).sqrt();
        if guard < DISCRETIZATION_GUARD {
            return Err(Error::InvalidParameter(format!(
                "lambda * sqrt(n_steps) = {guard:.3} is below {DISCRETIZATION_GUARD}; refine the grid"
            )));
        }
        Ok(())
    }

    /// Grid steps over `[0, horizon]`.
    pub fn total_steps(&self) -> usize {
        steps_for(self.n_steps, self.horizon)
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self {
            lambda,
            ..self.clone()
        }
    }

    pub fn with_horizon(&self, horizon: f64) -> Self {
        Self {
            horizon,
            ..self.clone()
        }
    }

    /// Discretization-bias allowance `5 / (lambda * sqrt(n_steps))`.
    pub fn bias_allowance(&self) -> f64 {
        5.0 / (self.lambda * (self.n_steps as f64).sqrt())
    }
}

fn steps_for(per_unit: usize, horizon: f64) -> usize {
    ((per_unit as f64 * horizon).round() as usize).max(1)
}

/// Generator for path `index` of ensemble `ensemble` under `master_seed`.
pub fn path_rng(master_seed: u64, ensemble: u64, index: u64) -> ChaCha8Rng {
    let mut rng =
        ChaCha8Rng::seed_from_u64(master_seed ^ ensemble.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(index);
    rng
}

/// Calls `visit(t_i, W_{t_i})` for `i = 1..=n_steps` on the grid
/// `t_i = horizon * i / n_steps`, starting from `W_0 = 0`.
fn walk<R: Rng>(n_steps: usize, horizon: f64, rng: &mut R, mut visit: impl FnMut(f64, f64)) {
    let sd = (horizon / n_steps as f64).sqrt();
    let n = n_steps as f64;
    let mut w = 0.0;
    for i in 1..=n_steps {
        let z: f64 = rng.sample(StandardNormal);
        w += sd * z;
        visit(horizon * (i as f64) / n, w);
    }
}

fn brownian_from<R: Rng>(n_steps: usize, horizon: f64, rng: &mut R) -> SampledPath {
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut values = Vec::with_capacity(n_steps + 1);
    times.push(0.0);
    values.push(0.0);
    walk(n_steps, horizon, rng, |t, w| {
        times.push(t);
        values.push(w);
    });
    SampledPath::new(times, values).expect("grid is strictly increasing and finite")
}

fn stops_from<R: Rng>(n_steps: usize, horizon: f64, lambda: f64, rng: &mut R) -> StopTimeTrace {
    let mut scanner = StopScanner::new(lambda, 0.0, 0.0);
    walk(n_steps, horizon, rng, |t, w| scanner.push(t, w));
    scanner.finish()
}

/// Brownian path on `[0, horizon]` with `n_steps` uniform steps, fully
/// determined by `seed` (stream 0 of a ChaCha8 generator).
pub fn sample_brownian(n_steps: usize, horizon: f64, seed: u64) -> Result<SampledPath> {
    if n_steps == 0 || !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need n_steps >= 1 and horizon > 0 (got {n_steps}, {horizon})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(brownian_from(n_steps, horizon, &mut rng))
}

/// Path `index` of a seeded ensemble, as written by the `simulate` command.
pub fn ensemble_path(
    n_steps: usize,
    horizon: f64,
    master_seed: u64,
    index: u64,
) -> Result<SampledPath> {
    if n_steps == 0 || !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need n_steps >= 1 and horizon > 0 (got {n_steps}, {horizon})"
        )));
    }
    let mut rng = path_rng(master_seed, tag::PHI, index);
    Ok(brownian_from(n_steps, horizon, &mut rng))
}

/// Runs `f` over path indices, returning results in index order.
fn per_path<T, F>(n: usize, workers: Option<usize>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    let run = || (0..n as u64).into_par_iter().map(&f).collect::<Vec<T>>();
    match workers {
        Some(w) => match rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
        {
            Ok(pool) => pool.install(run),
            Err(_) => run(),
        },
        None => run(),
    }
}

/// Pass/fail marker carried by every verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

fn phi_samples(cfg: &SimConfig, lambda: f64, horizon: f64, ensemble: u64, scale: f64) -> Vec<f64> {
    let steps = steps_for(cfg.n_steps, horizon);
    per_path(cfg.n_paths, cfg.workers, |i| {
        let mut rng = path_rng(cfg.master_seed, ensemble, i);
        scale * stops_from(steps, horizon, lambda, &mut rng).explicit_value()
    })
}

/// Mean of the objective over `n_paths` Brownian paths on `[0, horizon]`.
/// The target is `1 / lambda` on the unit interval.
pub fn estimate_expected_phi(cfg: &SimConfig) -> Result<EstimateSummary> {
    cfg.validate()?;
    let samples = phi_samples(cfg, cfg.lambda, cfg.horizon, tag::PHI, 1.0);
    let target = (cfg.horizon == 1.0).then(|| 1.0 / cfg.lambda);
    Ok(EstimateSummary::from_samples(&samples, target, cfg))
}

/// Per-path objective values of the [`estimate_expected_phi`] ensemble.
pub fn phi_ensemble(cfg: &SimConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    Ok(phi_samples(cfg, cfg.lambda, cfg.horizon, tag::PHI, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BracketVerdict {
    pub verdict: Verdict,
    pub lower_edge: f64,
    pub upper_edge: f64,
    pub beta: f64,
    /// `ci_high - (1/lambda - beta)`; negative means the lower edge failed.
    pub lower_margin: f64,
    /// `(1/lambda + lambda) - ci_low`; negative means the upper edge failed.
    pub upper_margin: f64,
}

/// Checks a unit-interval estimate against `[1/lambda, 1/lambda + lambda]`,
/// widening the lower edge by the discretization allowance of its grid.
pub fn verify_bracket(summary: &EstimateSummary, lambda: f64) -> BracketVerdict {
    let beta = summary.config.with_lambda(lambda).bias_allowance();
    let lower_edge = 1.0 / lambda - beta;
    let upper_edge = 1.0 / lambda + lambda;
    let lower_margin = summary.ci_high - lower_edge;
    let upper_margin = upper_edge - summary.ci_low;
    BracketVerdict {
        verdict: Verdict::from_bool(lower_margin >= 0.0 && upper_margin >= 0.0),
        lower_edge,
        upper_edge,
        beta,
        lower_margin,
        upper_margin,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StopMoments {
    /// First stop time; target `(lambda/2)^2`.
    pub tau0: EstimateSummary,
    /// Pooled gaps between consecutive stops; target `lambda^2`.
    pub dtau: EstimateSummary,
    /// `k'(b) / b` per path; target `1 / lambda^2`.
    pub renewal_rate: EstimateSummary,
}

/// Sample moments of the stopping times over an ensemble on `[0, horizon]`.
pub fn estimate_stop_moments(cfg: &SimConfig) -> Result<StopMoments> {
    cfg.validate()?;
    let steps = cfg.total_steps();
    let lambda = cfg.lambda;
    let b = cfg.horizon;
    let per: Vec<(Option<f64>, Vec<f64>, f64)> = per_path(cfg.n_paths, cfg.workers, |i| {
        let mut rng = path_rng(cfg.master_seed, tag::MOMENTS, i);
        let trace = stops_from(steps, b, lambda, &mut rng);
        let times: Vec<f64> = trace
            .finite_stops()
            .filter_map(|s| s.time.finite())
            .collect();
        let gaps = times.windows(2).map(|w| w[1] - w[0]).collect();
        (times.first().copied(), gaps, trace.k_prime as f64 / b)
    });
    let tau0: Vec<f64> = per.iter().filter_map(|p| p.0).collect();
    let gaps: Vec<f64> = per.iter().flat_map(|p| p.1.iter().copied()).collect();
    let rates: Vec<f64> = per.iter().map(|p| p.2).collect();
    if gaps.len() < MIN_POOLED_STOPS {
        return Err(Error::TooFewStops {
            count: gaps.len(),
            needed: MIN_POOLED_STOPS,
        });
    }
    Ok(StopMoments {
        tau0: EstimateSummary::from_samples(&tau0, Some((lambda / 2.0).powi(2)), cfg),
        dtau: EstimateSummary::from_samples(&gaps, Some(lambda * lambda), cfg),
        renewal_rate: EstimateSummary::from_samples(&rates, Some(1.0 / (lambda * lambda)), cfg),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleReport {
    /// Mean of the signed increment sum S; target 0.
    pub signed_sum_mean: EstimateSummary,
    /// Mean of S^2; bounded by the horizon.
    pub signed_sum_msq: EstimateSummary,
    pub mean_verdict: Verdict,
    pub msq_verdict: Verdict,
}

/// Signed increment sum of the alternating stops: mean should vanish and
/// the second moment stay below the horizon.
///
/// Stops are valued at the grid knot where they are detected. Those are
/// stopping times of the sampled walk, so the sum is an exact martingale
/// transform; the interpolated levels would add about `0.58 sqrt(dt)` per stop.
pub fn martingale_diag(cfg: &SimConfig) -> Result<MartingaleReport> {
    cfg.validate()?;
    let steps = cfg.total_steps();
    let s: Vec<f64> = per_path(cfg.n_paths, cfg.workers, |i| {
        let mut rng = path_rng(cfg.master_seed, tag::MARTINGALE, i);
        stops_from(steps, cfg.horizon, cfg.lambda, &mut rng).detected_increment_sum()
    });
    let sq: Vec<f64> = s.iter().map(|x| x * x).collect();
    let mean = EstimateSummary::from_samples(&s, Some(0.0), cfg);
    let msq = EstimateSummary::from_samples(&sq, Some(cfg.horizon), cfg);
    let mean_verdict = Verdict::from_bool(mean.mean.abs() <= cfg.z * mean.stderr);
    let msq_verdict = Verdict::from_bool(msq.mean <= cfg.horizon + cfg.z * msq.stderr);
    Ok(MartingaleReport {
        signed_sum_mean: mean,
        signed_sum_msq: msq,
        mean_verdict,
        msq_verdict,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingVerdict {
    pub verdict: Verdict,
    pub mu: f64,
    /// Penalty used on the short interval.
    pub short_lambda: f64,
    /// Objective on `[0, mu * b]` with penalty lambda.
    pub wide: EstimateSummary,
    /// `sqrt(mu)` times the objective on `[0, b]` with `short_lambda`.
    pub rescaled: EstimateSummary,
    pub mean_gap: f64,
    pub mean_tolerance: f64,
    pub ks_statistic: f64,
    pub ks_critical: f64,
}

/// Compares `Phi_{[0, mu b], lambda}` with `sqrt(mu) Phi_{[0, b], lambda / sqrt(mu)}`
/// on independent ensembles with the same number of grid steps.
pub fn check_scaling(cfg: &SimConfig, mu: f64) -> Result<ScalingVerdict> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::InvalidParameter(format!("mu {mu} must be positive")));
    }
    scaling_with(cfg, mu, cfg.lambda / mu.sqrt())
}

/// Negative control for [`check_scaling`]: keeps the penalty unscaled.
pub fn check_scaling_mismatched(cfg: &SimConfig, mu: f64) -> Result<ScalingVerdict> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::InvalidParameter(format!("mu {mu} must be positive")));
    }
    scaling_with(cfg, mu, cfg.lambda)
}

fn scaling_with(cfg: &SimConfig, mu: f64, short_lambda: f64) -> Result<ScalingVerdict> {
    cfg.validate()?;
    let b = cfg.horizon;
    let steps = steps_for(cfg.n_steps, mu * b);
    let wide: Vec<f64> = per_path(cfg.n_paths, cfg.workers, |i| {
        let mut rng = path_rng(cfg.master_seed, tag::SCALING_WIDE, i);
        stops_from(steps, mu * b, cfg.lambda, &mut rng).explicit_value()
    });
    let root = mu.sqrt();
    let rescaled: Vec<f64> = per_path(cfg.n_paths, cfg.workers, |i| {
        let mut rng = path_rng(cfg.master_seed, tag::SCALING_NARROW, i);
        root * stops_from(steps, b, short_lambda, &mut rng).explicit_value()
    });
    let wide_sum = EstimateSummary::from_samples(&wide, None, cfg);
    let resc_sum = EstimateSummary::from_samples(&rescaled, None, cfg);
    let mean_gap = (wide_sum.mean - resc_sum.mean).abs();
    let mean_tolerance = cfg.z * wide_sum.stderr.hypot(resc_sum.stderr);
    let ks = ks_statistic(&wide, &rescaled);
    let ks_crit = ks_critical_value(wide.len(), rescaled.len(), KS_ALPHA);
    Ok(ScalingVerdict {
        verdict: Verdict::from_bool(mean_gap <= mean_tolerance && ks < ks_crit),
        mu,
        short_lambda,
        wide: wide_sum,
        rescaled: resc_sum,
        mean_gap,
        mean_tolerance,
        ks_statistic: ks,
        ks_critical: ks_crit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitCheck {
    pub split: f64,
    pub phi_left: f64,
    pub phi_right: f64,
    pub phi_full: f64,
    /// `phi_full - (phi_left + phi_right - lambda)`.
    pub lower_margin: f64,
    /// `phi_left + phi_right - phi_full`.
    pub upper_margin: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubadditivityVerdict {
    pub verdict: Verdict,
    pub checks: Vec<SplitCheck>,
}

/// Deterministic two-sided split bracket
/// `Phi_L + Phi_R - lambda <= Phi_full <= Phi_L + Phi_R` at each split time.
pub fn check_subadditivity(
    path: &SampledPath,
    lambda: f64,
    split_times: &[f64],
) -> Result<SubadditivityVerdict> {
    check_lambda(lambda)?;
    let (a, c) = (path.start(), path.end());
    let phi_full = phi_value(path, lambda)?;
    let mut checks = Vec::with_capacity(split_times.len());
    for &split in split_times {
        if !(split > a && split < c) {
            return Err(Error::OutOfRange {
                a: split,
                b: split,
                start: a,
                end: c,
            });
        }
        let phi_left = phi_value(&path.restrict(a, split)?, lambda)?;
        let phi_right = phi_value(&path.restrict(split, c)?, lambda)?;
        let lower_margin = phi_full - (phi_left + phi_right - lambda);
        let upper_margin = phi_left + phi_right - phi_full;
        checks.push(SplitCheck {
            split,
            phi_left,
            phi_right,
            phi_full,
            lower_margin,
            upper_margin,
            verdict: Verdict::from_bool(
                lower_margin >= -SPLIT_SLACK && upper_margin >= -SPLIT_SLACK,
            ),
        });
    }
    let verdict = Verdict::from_bool(checks.iter().all(|c| c.verdict.passed()));
    Ok(SubadditivityVerdict { verdict, checks })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubadditivitySweep {
    pub verdict: Verdict,
    pub n_paths: usize,
    pub violations: usize,
    pub min_lower_margin: f64,
    pub min_upper_margin: f64,
}

/// [`check_subadditivity`] on `n_paths` Brownian paths, one uniform split each.
pub fn subadditivity_sweep(cfg: &SimConfig) -> Result<SubadditivitySweep> {
    cfg.validate()?;
    let steps = cfg.total_steps();
    let b = cfg.horizon;
    let results: Vec<Result<SplitCheck>> = per_path(cfg.n_paths, cfg.workers, |i| {
        let mut rng = path_rng(cfg.master_seed, tag::SUBADDITIVITY, i);
        let path = brownian_from(steps, b, &mut rng);
        let mut split_rng = path_rng(cfg.master_seed, tag::SPLITS, i);
        let split = loop {
            let u: f64 = split_rng.random();
            if u > 0.0 {
                break u * b;
            }
        };
        check_subadditivity(&path, cfg.lambda, &[split]).map(|v| v.checks[0].clone())
    });
    let checks = results.into_iter().collect::<Result<Vec<_>>>()?;
    let violations = checks.iter().filter(|c| !c.verdict.passed()).count();
    Ok(SubadditivitySweep {
        verdict: Verdict::from_bool(violations == 0),
        n_paths: checks.len(),
        violations,
        min_lower_margin: checks
            .iter()
            .map(|c| c.lower_margin)
            .fold(f64::INFINITY, f64::min),
        min_upper_margin: checks
            .iter()
            .map(|c| c.upper_margin)
            .fold(f64::INFINITY, f64::min),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonPoint {
    pub l: u64,
    pub epsilon_hat: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonEstimate {
    pub lambda: f64,
    pub l: u64,
    pub epsilon_hat: f64,
    pub stderr: f64,
    /// Unit-interval mean shared by every entry of the series.
    pub unit: EstimateSummary,
    /// Per-unit means `E Phi_{[0,L]} / L` for each entry of the series.
    pub per_unit_long: Vec<EstimateSummary>,
    /// `epsilon` at `L = 2^r` for `r = 1..`, ending at `l` when it is a power
    /// of two; otherwise just the single estimate at `l`.
    pub series: Vec<EpsilonPoint>,
}

/// `epsilon_{lambda,L} = E Phi_{[0,1]} - E Phi_{[0,L]} / L` from independent
/// ensembles on the same grid resolution.
pub fn estimate_epsilon(lambda: f64, l: u64, cfg: &SimConfig) -> Result<EpsilonEstimate> {
    if l < 2 {
        return Err(Error::InvalidParameter(format!(
            "L = {l} must be at least 2"
        )));
    }
    let cfg = cfg.with_lambda(lambda).with_horizon(1.0);
    cfg.validate()?;
    let unit_samples = phi_samples(&cfg, lambda, 1.0, tag::EPS_UNIT, 1.0);
    let unit = EstimateSummary::from_samples(&unit_samples, Some(1.0 / lambda), &cfg);
    let lengths: Vec<u64> = if l.is_power_of_two() {
        (1..=l.trailing_zeros()).map(|r| 1u64 << r).collect()
    } else {
        vec![l]
    };
    let mut series = Vec::with_capacity(lengths.len());
    let mut per_unit_long = Vec::with_capacity(lengths.len());
    for len in lengths {
        let horizon = len as f64;
        let samples = phi_samples(&cfg, lambda, horizon, tag::EPS_LONG + len, 1.0 / horizon);
        let long =
            EstimateSummary::from_samples(&samples, Some(1.0 / lambda), &cfg.with_horizon(horizon));
        series.push(EpsilonPoint {
            l: len,
            epsilon_hat: unit.mean - long.mean,
            stderr: unit.stderr.hypot(long.stderr),
        });
        per_unit_long.push(long);
    }
    let last = series.last().expect("series is non-empty").clone();
    Ok(EpsilonEstimate {
        lambda,
        l,
        epsilon_hat: last.epsilon_hat,
        stderr: last.stderr,
        unit,
        per_unit_long,
        series,
    })
}

/// Range and ordering checks on an epsilon series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonChecks {
    /// Per point: `-z se <= eps <= lambda + z se`.
    pub in_range: Vec<Verdict>,
    /// Per consecutive pair: `eps_{2L} >= eps_L - z se(difference)`.
    pub nondecreasing: Vec<Verdict>,
    pub verdict: Verdict,
}

pub fn check_epsilon_series(est: &EpsilonEstimate, z: f64) -> EpsilonChecks {
    let in_range: Vec<Verdict> = est
        .series
        .iter()
        .map(|p| {
            Verdict::from_bool(
                p.epsilon_hat >= -z * p.stderr && p.epsilon_hat <= est.lambda + z * p.stderr,
            )
        })
        .collect();
    // consecutive points share the unit ensemble, so the difference only
    // carries the two long-interval errors
    let nondecreasing: Vec<Verdict> = est
        .per_unit_long
        .windows(2)
        .zip(est.series.windows(2))
        .map(|(long, pts)| {
            let se = long[0].stderr.hypot(long[1].stderr);
            Verdict::from_bool(pts[1].epsilon_hat >= pts[0].epsilon_hat - z * se)
        })
        .collect();
    let verdict = Verdict::from_bool(in_range.iter().chain(&nondecreasing).all(|v| v.passed()));
    EpsilonChecks {
        in_range,
        nondecreasing,
        verdict,
    }
}

/// Unit-interval mean used as the absolute reference for an epsilon series.
///
/// Grid bias cancels inside each epsilon difference but not in this level,
/// so it runs on at least [`XI_MIN_STEPS`] steps per unit.
pub fn xi_reference(cfg: &SimConfig) -> Result<EstimateSummary> {
    let cfg = SimConfig {
        n_steps: cfg.n_steps.max(XI_MIN_STEPS),
        horizon: 1.0,
        ..cfg.clone()
    };
    estimate_expected_phi(&cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyCheck {
    /// `1/lambda + eps_hat - xi_hat`.
    pub gap: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
}

/// `1/lambda + eps_hat` against an independent unit-interval estimate.
pub fn check_epsilon_consistency(
    est: &EpsilonEstimate,
    xi: &EstimateSummary,
    z: f64,
) -> ConsistencyCheck {
    let gap = 1.0 / est.lambda + est.epsilon_hat - xi.mean;
    let tolerance = z * est.stderr.hypot(xi.stderr);
    ConsistencyCheck {
        gap,
        tolerance,
        verdict: Verdict::from_bool(gap.abs() <= tolerance),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinementReport {
    pub coarse: EstimateSummary,
    pub fine: EstimateSummary,
    /// Mean and stderr of `Phi_fine - Phi_coarse` on common paths.
    pub gain_mean: f64,
    pub gain_stderr: f64,
    /// Paths where the coarse grid scored above the fine one (beyond 1e-9).
    pub violations: usize,
    /// Bias estimate at the coarse grid assuming a `1/sqrt(n)` rate.
    pub extrapolated_bias: f64,
    /// Allowance of the coarse grid.
    pub beta: f64,
    /// Upper confidence bound of the extrapolated bias stays below `beta`.
    pub bias_verdict: Verdict,
    pub verdict: Verdict,
}

/// Share of the coarse-grid bias recovered by one doubling at rate `1/sqrt(n)`.
const RATE_FACTOR: f64 = 1.0 - std::f64::consts::FRAC_1_SQRT_2;

/// Common-random-number refinement study: each path is simulated at twice
/// `n_steps`, and the coarse path keeps every other knot.
pub fn refinement_check(cfg: &SimConfig) -> Result<RefinementReport> {
    cfg.validate()?;
    let fine_steps = 2 * cfg.total_steps();
    let pairs: Vec<(f64, f64)> = per_path(cfg.n_paths, cfg.workers, |i| {
        let mut rng = path_rng(cfg.master_seed, tag::REFINE, i);
        let fine = brownian_from(fine_steps, cfg.horizon, &mut rng);
        let keep = |s: &[f64]| s.iter().step_by(2).copied().collect::<Vec<_>>();
        let coarse =
            SampledPath::new(keep(fine.times()), keep(fine.values())).expect("subsampled grid");
        (
            phi_value(&coarse, cfg.lambda).expect("lambda validated"),
            phi_value(&fine, cfg.lambda).expect("lambda validated"),
        )
    });
    let coarse: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let fine: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let gains: Vec<f64> = pairs.iter().map(|p| p.1 - p.0).collect();
    let (gain_mean, gain_stderr) = mean_stderr(&gains);
    let violations = gains.iter().filter(|g| **g < -SPLIT_SLACK).count();
    let fine_cfg = SimConfig {
        n_steps: 2 * cfg.n_steps,
        ..cfg.clone()
    };
    Ok(RefinementReport {
        coarse: EstimateSummary::from_samples(&coarse, None, cfg),
        fine: EstimateSummary::from_samples(&fine, None, &fine_cfg),
        gain_mean,
        gain_stderr,
        violations,
        extrapolated_bias: gain_mean / RATE_FACTOR,
        beta: cfg.bias_allowance(),
        bias_verdict: Verdict::from_bool(
            (gain_mean + cfg.z * gain_stderr) / RATE_FACTOR < cfg.bias_allowance(),
        ),
        verdict: Verdict::from_bool(violations == 0 && gain_mean >= -cfg.z * gain_stderr),
    })
}
