//! Named experiments and their JSON reports.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::{
    check_epsilon_consistency, check_epsilon_series, check_scaling, check_scaling_mismatched,
    estimate_epsilon, estimate_expected_phi, estimate_stop_moments, martingale_diag,
    subadditivity_sweep, verify_bracket, xi_reference, EstimateSummary, SimConfig, Verdict,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentName {
    Bracket,
    Moments,
    Scaling,
    Subadditivity,
    Epsilon,
    Martingale,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 6] = [
        ExperimentName::Bracket,
        ExperimentName::Moments,
        ExperimentName::Scaling,
        ExperimentName::Subadditivity,
        ExperimentName::Epsilon,
        ExperimentName::Martingale,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentName::Bracket => "bracket",
            ExperimentName::Moments => "moments",
            ExperimentName::Scaling => "scaling",
            ExperimentName::Subadditivity => "subadditivity",
            ExperimentName::Epsilon => "epsilon",
            ExperimentName::Martingale => "martingale",
        }
    }
}

impl fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown experiment `{s}`")))
    }
}

/// Inputs of a named experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub name: ExperimentName,
    pub lambda: f64,
    pub paths: usize,
    /// Grid steps per unit time.
    pub steps: usize,
    pub seed: u64,
    pub mu: Option<f64>,
    pub l: Option<u64>,
    pub horizon: Option<f64>,
    pub workers: Option<usize>,
}

impl ExperimentSpec {
    fn default_horizon(&self) -> f64 {
        match self.name {
            ExperimentName::Moments => 100.0 * self.lambda * self.lambda,
            _ => 1.0,
        }
    }

    pub fn config(&self) -> Result<SimConfig> {
        if matches!(self.name, ExperimentName::Bracket | ExperimentName::Epsilon)
            && self.horizon.is_some_and(|h| h != 1.0)
        {
            return Err(Error::InvalidParameter(format!(
                "experiment `{}` runs on the unit interval",
                self.name
            )));
        }
        let mut cfg = SimConfig::new(
            self.lambda,
            self.paths,
            self.steps,
            self.horizon.unwrap_or_else(|| self.default_horizon()),
            self.seed,
        )?;
        cfg.workers = self.workers;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateLine {
    pub name: String,
    pub mean: f64,
    pub stderr: f64,
    pub target: Option<f64>,
    pub verdict: Option<Verdict>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub margins: BTreeMap<String, f64>,
}

impl EstimateLine {
    fn from_summary(
        name: impl Into<String>,
        s: &EstimateSummary,
        verdict: Option<Verdict>,
    ) -> Self {
        Self {
            name: name.into(),
            mean: s.mean,
            stderr: s.stderr,
            target: s.target,
            verdict,
            margins: BTreeMap::new(),
        }
    }

    fn margin(mut self, key: &str, value: f64) -> Self {
        self.margins.insert(key.to_string(), value);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub experiment: ExperimentName,
    pub config: SimConfig,
    pub estimates: Vec<EstimateLine>,
    pub seed: u64,
    pub verdict: Verdict,
}

/// Runs the experiment; the overall verdict passes iff every line does.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    let cfg = spec.config()?;
    let z = cfg.z;
    let estimates = match spec.name {
        ExperimentName::Bracket => {
            let s = estimate_expected_phi(&cfg)?;
            let v = verify_bracket(&s, cfg.lambda);
            vec![
                EstimateLine::from_summary("expected_phi", &s, Some(v.verdict))
                    .margin("beta", v.beta)
                    .margin("lower_margin", v.lower_margin)
                    .margin("upper_margin", v.upper_margin),
            ]
        }
        ExperimentName::Moments => {
            let m = estimate_stop_moments(&cfg)?;
            [
                ("tau0", &m.tau0),
                ("dtau", &m.dtau),
                ("renewal_rate", &m.renewal_rate),
            ]
            .into_iter()
            .map(|(name, s)| {
                let ok = s.covers_target().unwrap_or(false);
                EstimateLine::from_summary(name, s, Some(Verdict::from_bool(ok)))
                    .margin(
                        "z_score",
                        (s.mean - s.target.unwrap_or(f64::NAN)) / s.stderr,
                    )
                    .margin("n", s.n as f64)
            })
            .collect()
        }
        ExperimentName::Scaling => {
            let mu = spec.mu.unwrap_or(4.0);
            let v = check_scaling(&cfg, mu)?;
            let control = check_scaling_mismatched(&cfg, mu)?;
            let scaling = |name: &str, s: &super::ScalingVerdict, verdict: Verdict| {
                EstimateLine::from_summary(name, &s.rescaled, Some(verdict))
                    .margin("wide_mean", s.wide.mean)
                    .margin("wide_stderr", s.wide.stderr)
                    .margin("mean_gap", s.mean_gap)
                    .margin("mean_tolerance", s.mean_tolerance)
                    .margin("ks_statistic", s.ks_statistic)
                    .margin("ks_critical", s.ks_critical)
                    .margin("mu", s.mu)
                    .margin("short_lambda", s.short_lambda)
            };
            vec![
                scaling("scaled_law", &v, v.verdict),
                // the control passes when the mismatched penalty is rejected
                scaling(
                    "negative_control",
                    &control,
                    Verdict::from_bool(!control.verdict.passed()),
                ),
            ]
        }
        ExperimentName::Subadditivity => {
            let s = subadditivity_sweep(&cfg)?;
            vec![EstimateLine {
                name: "violations".into(),
                mean: s.violations as f64,
                stderr: 0.0,
                target: Some(0.0),
                verdict: Some(s.verdict),
                margins: BTreeMap::new(),
            }
            .margin("n_paths", s.n_paths as f64)
            .margin("min_lower_margin", s.min_lower_margin)
            .margin("min_upper_margin", s.min_upper_margin)]
        }
        ExperimentName::Epsilon => {
            let l = spec.l.unwrap_or(16);
            let est = estimate_epsilon(cfg.lambda, l, &cfg)?;
            let checks = check_epsilon_series(&est, z);
            let xi = xi_reference(&cfg)?;
            let consistency = check_epsilon_consistency(&est, &xi, z);
            let mut lines: Vec<EstimateLine> = est
                .series
                .iter()
                .zip(&checks.in_range)
                .map(|(p, v)| EstimateLine {
                    name: format!("epsilon_L{}", p.l),
                    mean: p.epsilon_hat,
                    stderr: p.stderr,
                    target: None,
                    verdict: Some(*v),
                    margins: BTreeMap::new(),
                })
                .collect();
            for (i, v) in checks.nondecreasing.iter().enumerate() {
                let (a, b) = (&est.series[i], &est.series[i + 1]);
                lines.push(EstimateLine {
                    name: format!("increment_L{}_L{}", a.l, b.l),
                    mean: b.epsilon_hat - a.epsilon_hat,
                    stderr: est.per_unit_long[i]
                        .stderr
                        .hypot(est.per_unit_long[i + 1].stderr),
                    target: None,
                    verdict: Some(*v),
                    margins: BTreeMap::new(),
                });
            }
            lines.push(
                EstimateLine::from_summary("xi", &xi, Some(consistency.verdict))
                    .margin("gap", consistency.gap)
                    .margin("tolerance", consistency.tolerance)
                    .margin("xi_steps", xi.config.n_steps as f64),
            );
            lines
        }
        ExperimentName::Martingale => {
            let m = martingale_diag(&cfg)?;
            vec![
                EstimateLine::from_summary(
                    "signed_sum_mean",
                    &m.signed_sum_mean,
                    Some(m.mean_verdict),
                ),
                EstimateLine::from_summary(
                    "signed_sum_msq",
                    &m.signed_sum_msq,
                    Some(m.msq_verdict),
                ),
            ]
        }
    };
    let verdict = Verdict::from_bool(
        estimates
            .iter()
            .all(|e| e.verdict.is_none_or(Verdict::passed)),
    );
    Ok(ExperimentReport {
        experiment: spec.name,
        seed: cfg.master_seed,
        config: cfg,
        estimates,
        verdict,
    })
}
