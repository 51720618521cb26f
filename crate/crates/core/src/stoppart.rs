//! Linear-time construction of the optimal partition from alternating
//! drawdown / drawup stopping times.
//!
//! One forward sweep records the stops: the first time the signal moves
//! `lambda / 2` away from its start, then alternately the first time the
//! drawdown (after an upstop) or drawup (after a downstop) since the last stop
//! reaches `lambda`. Level crossings are located by linear interpolation inside
//! the segment, so every recorded stop value is exactly its level.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::path::{check_lambda, Partition, PhiResult, SampledPath};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StopKind {
    Upstop,
    Downstop,
}

impl StopKind {
    pub fn flip(self) -> Self {
        match self {
            StopKind::Upstop => StopKind::Downstop,
            StopKind::Downstop => StopKind::Upstop,
        }
    }
}

/// A stopping time clamped to the path domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopTime {
    At(f64),
    /// The stop would only happen after the right end.
    BeyondEnd,
}

impl StopTime {
    pub fn finite(&self) -> Option<f64> {
        match self {
            StopTime::At(t) => Some(*t),
            StopTime::BeyondEnd => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stop {
    pub time: StopTime,
    pub kind: StopKind,
    /// Signal value at `min(tau, b)`.
    pub value: f64,
    /// Value at the first knot at or after the crossing, where a scan over
    /// the samples alone would notice the stop.
    pub knot_value: f64,
}

/// Cheap identity of the path a trace was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Fingerprint {
    len: usize,
    hash: u64,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

#[inline]
fn mix(h: u64, x: f64) -> u64 {
    (h ^ x.to_bits()).wrapping_mul(FNV_PRIME)
}

fn fingerprint(path: &SampledPath) -> Fingerprint {
    let hash = path
        .times()
        .iter()
        .zip(path.values())
        .fold(FNV_OFFSET, |h, (t, v)| mix(mix(h, *t), *v));
    Fingerprint {
        len: path.len(),
        hash,
    }
}

/// Output of [`scan_stops`].
#[derive(Debug, Clone, PartialEq)]
pub struct StopTimeTrace {
    pub lambda: f64,
    /// `tau_0 < tau_1 < ...`; the last entry is always [`StopTime::BeyondEnd`].
    pub stops: Vec<Stop>,
    /// `m_0 = f(a)`, then `m_1, ..., m_{k'+1}`.
    pub m_levels: Vec<f64>,
    /// 1 when `tau_0` is an upstop.
    pub alpha: u8,
    /// Number of stops strictly before the right end, minus one (floored at 0).
    pub k_prime: usize,
    end_time: f64,
    end_value: f64,
    start_value: f64,
    source: Option<Fingerprint>,
}

#[derive(Debug, Clone, Copy)]
enum Phase {
    Start { hi: f64, lo: f64 },
    AfterUp { peak: f64 },
    AfterDown { trough: f64 },
}

/// Streaming form of [`scan_stops`]: push knots in time order, then
/// [`StopScanner::finish`].
#[derive(Debug, Clone)]
pub struct StopScanner {
    lambda: f64,
    start_value: f64,
    prev_t: f64,
    prev_v: f64,
    phase: Phase,
    stops: Vec<Stop>,
    m_levels: Vec<f64>,
    len: usize,
    hash: u64,
}

#[inline]
fn crossing(t0: f64, v0: f64, t1: f64, v1: f64, level: f64) -> f64 {
    if v1 == level {
        return t1;
    }
    let frac = (level - v0) / (v1 - v0);
    if frac >= 1.0 {
        t1
    } else {
        (t0 + frac * (t1 - t0)).min(t1)
    }
}

impl StopScanner {
    pub fn new(lambda: f64, t0: f64, v0: f64) -> Self {
        Self {
            lambda,
            start_value: v0,
            prev_t: t0,
            prev_v: v0,
            phase: Phase::Start { hi: v0, lo: v0 },
            stops: Vec::new(),
            m_levels: vec![v0],
            len: 1,
            hash: mix(mix(FNV_OFFSET, t0), v0),
        }
    }

    /// Adds the next knot; `t` must exceed the previous knot time.
    #[inline]
    pub fn push(&mut self, t: f64, v: f64) {
        let (t0, v0) = (self.prev_t, self.prev_v);
        let lambda = self.lambda;
        match self.phase {
            Phase::Start { hi, lo } => {
                let up = self.start_value + lambda / 2.0;
                let down = self.start_value - lambda / 2.0;
                if v >= up {
                    let tc = crossing(t0, v0, t, v, up);
                    self.stops.push(Stop {
                        time: StopTime::At(tc),
                        kind: StopKind::Upstop,
                        value: up,
                        knot_value: v,
                    });
                    self.phase = Phase::AfterUp { peak: v.max(up) };
                } else if v <= down {
                    let tc = crossing(t0, v0, t, v, down);
                    self.stops.push(Stop {
                        time: StopTime::At(tc),
                        kind: StopKind::Downstop,
                        value: down,
                        knot_value: v,
                    });
                    self.phase = Phase::AfterDown {
                        trough: v.min(down),
                    };
                } else {
                    self.phase = Phase::Start {
                        hi: hi.max(v),
                        lo: lo.min(v),
                    };
                }
            }
            Phase::AfterUp { peak } => {
                if v >= peak {
                    self.phase = Phase::AfterUp { peak: v };
                } else if v <= peak - lambda {
                    let level = peak - lambda;
                    let tc = crossing(t0, v0, t, v, level);
                    self.stops.push(Stop {
                        time: StopTime::At(tc),
                        kind: StopKind::Downstop,
                        value: level,
                        knot_value: v,
                    });
                    self.m_levels.push(peak);
                    self.phase = Phase::AfterDown {
                        trough: v.min(level),
                    };
                }
            }
            Phase::AfterDown { trough } => {
                if v <= trough {
                    self.phase = Phase::AfterDown { trough: v };
                } else if v >= trough + lambda {
                    let level = trough + lambda;
                    let tc = crossing(t0, v0, t, v, level);
                    self.stops.push(Stop {
                        time: StopTime::At(tc),
                        kind: StopKind::Upstop,
                        value: level,
                        knot_value: v,
                    });
                    self.m_levels.push(trough);
                    self.phase = Phase::AfterUp { peak: v.max(level) };
                }
            }
        }
        self.prev_t = t;
        self.prev_v = v;
        self.len += 1;
        self.hash = mix(mix(self.hash, t), v);
    }

    pub fn finish(mut self) -> StopTimeTrace {
        let (end_time, end_value) = (self.prev_t, self.prev_v);
        let before_end = self
            .stops
            .iter()
            .filter(|s| matches!(s.time, StopTime::At(t) if t < end_time))
            .count();
        let k_prime = before_end.saturating_sub(1);
        let (kind, extremum) = match (self.stops.last(), self.phase) {
            (Some(last), Phase::AfterUp { peak }) => (last.kind.flip(), peak),
            (Some(last), Phase::AfterDown { trough }) => (last.kind.flip(), trough),
            (_, Phase::Start { hi, lo }) => {
                if end_value >= self.start_value {
                    (StopKind::Upstop, hi)
                } else {
                    (StopKind::Downstop, lo)
                }
            }
            (None, _) => unreachable!("a stop always precedes the post-stop phases"),
        };
        if self.m_levels.len() < k_prime + 2 {
            self.m_levels.push(extremum);
        }
        self.stops.push(Stop {
            time: StopTime::BeyondEnd,
            kind,
            value: end_value,
            knot_value: end_value,
        });
        let alpha = u8::from(self.stops[0].kind == StopKind::Upstop);
        StopTimeTrace {
            lambda: self.lambda,
            stops: self.stops,
            m_levels: self.m_levels,
            alpha,
            k_prime,
            end_time,
            end_value,
            start_value: self.start_value,
            source: Some(Fingerprint {
                len: self.len,
                hash: self.hash,
            }),
        }
    }
}

/// Sweeps the path once and records the alternating stopping times and the
/// extremal levels between them.
pub fn scan_stops(path: &SampledPath, lambda: f64) -> Result<StopTimeTrace> {
    check_lambda(lambda)?;
    Ok(scan_unchecked(path, lambda))
}

fn scan_unchecked(path: &SampledPath, lambda: f64) -> StopTimeTrace {
    let t = path.times();
    let v = path.values();
    let mut scanner = StopScanner::new(lambda, t[0], v[0]);
    for i in 1..t.len() {
        scanner.push(t[i], v[i]);
    }
    scanner.finish()
}

impl StopTimeTrace {
    fn verify(&self, path: &SampledPath, lambda: f64) -> Result<()> {
        if self.lambda != lambda || self.source != Some(fingerprint(path)) {
            return Err(Error::TraceMismatch);
        }
        Ok(())
    }

    /// `f(min(tau_j, b))`.
    pub fn clamped_value(&self, j: usize) -> f64 {
        self.stops.get(j).map_or(self.end_value, |s| s.value)
    }

    /// Stops strictly before the right end.
    pub fn finite_stops(&self) -> impl Iterator<Item = &Stop> {
        let end = self.end_time;
        self.stops
            .iter()
            .filter(move |s| matches!(s.time, StopTime::At(t) if t < end))
    }

    /// `sum_{j>=1} (-1)^{j+alpha} (f(tau_j ^ b) - f(tau_{j-1} ^ b))`.
    pub fn signed_increment_sum(&self) -> f64 {
        self.alternating_sum(|s| s.value)
    }

    /// The same sum with each stop valued at the knot where it is detected.
    /// On a random walk this is a discrete martingale transform, free of the
    /// overshoot carried by the interpolated levels.
    pub fn detected_increment_sum(&self) -> f64 {
        self.alternating_sum(|s| s.knot_value)
    }

    fn alternating_sum(&self, value: impl Fn(&Stop) -> f64) -> f64 {
        let mut sum = 0.0;
        for (j, w) in self.stops.windows(2).enumerate() {
            let d = value(&w[1]) - value(&w[0]);
            if (j + 1 + self.alpha as usize).is_multiple_of(2) {
                sum += d;
            } else {
                sum -= d;
            }
        }
        sum
    }

    /// Closed-form objective value of the scanned knots.
    pub fn explicit_value(&self) -> f64 {
        let lambda = self.lambda;
        let m_last = self.m_levels[self.k_prime + 1];
        lambda * self.k_prime as f64
            + (self.clamped_value(0) - self.start_value).abs()
            + self.signed_increment_sum()
            + (2.0 * (m_last - self.end_value).abs() - lambda).max(0.0)
    }

    /// Plot-ready JSON view.
    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct StopJson {
            tau: Option<f64>,
            label: StopKind,
        }
        #[derive(Serialize)]
        struct TraceJson<'a> {
            lambda: f64,
            alpha: u8,
            k_prime: usize,
            stops: Vec<StopJson>,
            m_levels: &'a [f64],
        }
        serde_json::to_value(TraceJson {
            lambda: self.lambda,
            alpha: self.alpha,
            k_prime: self.k_prime,
            stops: self
                .stops
                .iter()
                .map(|s| StopJson {
                    tau: s.time.finite(),
                    label: s.kind,
                })
                .collect(),
            m_levels: &self.m_levels,
        })
        .expect("trace serializes")
    }
}

/// Earliest knot in `[from, to]` (times) whose value equals `level`.
fn earliest_attaining(
    path: &SampledPath,
    from: f64,
    to: f64,
    level: f64,
    exclude_end: bool,
) -> Option<f64> {
    let times = path.times();
    let values = path.values();
    let last = times.len() - 1;
    let first = times.partition_point(|t| *t < from).max(1);
    (first..=last)
        .take_while(|i| times[*i] <= to)
        .filter(|i| !(exclude_end && *i == last))
        .find(|i| values[*i] == level)
        .map(|i| times[i])
}

/// Builds the optimal partition from a trace: one point per completed stop
/// interval, plus one more if the final extremum sits at least `lambda / 2`
/// away from `f(b)`.
pub fn trace_partition(
    trace: &StopTimeTrace,
    path: &SampledPath,
    lambda: f64,
) -> Result<Partition> {
    trace.verify(path, lambda)?;
    partition_unchecked(trace, path)
}

fn partition_unchecked(trace: &StopTimeTrace, path: &SampledPath) -> Result<Partition> {
    let b = path.end();
    let kp = trace.k_prime;
    let mut interior = Vec::with_capacity(kp + 1);
    let stop_time = |j: usize| trace.stops[j].time.finite();
    for j in 1..=kp {
        let from = stop_time(j - 1).ok_or(Error::TraceMismatch)?;
        let to = stop_time(j).ok_or(Error::TraceMismatch)?;
        let t = earliest_attaining(path, from, to, trace.m_levels[j], false)
            .ok_or(Error::TraceMismatch)?;
        interior.push(t);
    }
    let m_last = trace.m_levels[kp + 1];
    if (m_last - path.last_value()).abs() >= trace.lambda / 2.0 {
        let from = match stop_time(kp) {
            Some(t) if t < b => t,
            _ => path.start(),
        };
        let t = earliest_attaining(path, from, b, m_last, true).ok_or(Error::TraceMismatch)?;
        interior.push(t);
    }
    Partition::new(path, interior).map_err(|_| Error::TraceMismatch)
}

/// Evaluates the closed-form objective from the trace alone.
pub fn phi_explicit(trace: &StopTimeTrace, path: &SampledPath, lambda: f64) -> Result<f64> {
    trace.verify(path, lambda)?;
    Ok(trace.explicit_value())
}

/// Scan, partition and closed-form value in one linear pass.
pub fn phi_fast(path: &SampledPath, lambda: f64) -> Result<PhiResult> {
    check_lambda(lambda)?;
    let trace = scan_unchecked(path, lambda);
    let partition = partition_unchecked(&trace, path)?;
    Ok(PhiResult {
        value: trace.explicit_value(),
        partition,
        lambda,
    })
}

/// Objective value only, without building the partition.
pub fn phi_value(path: &SampledPath, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(scan_unchecked(path, lambda).explicit_value())
}
