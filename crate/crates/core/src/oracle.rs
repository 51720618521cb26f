//! Exact reference solvers on the knot grid.
//!
//! The optimum of a piecewise-linear interpolant is attained at knots, so the
//! grid searches here give the continuous value of the interpolant. They are
//! deliberately quadratic (or exponential) and simple.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::path::{check_lambda, Partition, PhiResult, SampledPath};

/// Absolute slack used by every condition in [`check_structure`].
pub const STRUCTURE_TOL: f64 = 1e-9;

/// Largest interior-knot count accepted by [`exhaustive_optimal`].
pub const EXHAUSTIVE_MAX_INTERIOR: usize = 20;

/// Max of `sum |df|` over partitions using exactly `k` interior knots.
pub fn tv_fixed_k(path: &SampledPath, k: usize) -> Result<f64> {
    let v = path.values();
    let n = v.len();
    let available = n - 2;
    if k > available {
        return Err(Error::KTooLarge { k, available });
    }
    // best[c][j]: chain from knot 0 to knot j through exactly c intermediate knots.
    let mut prev = vec![f64::NEG_INFINITY; n];
    for j in 1..n {
        prev[j] = (v[j] - v[0]).abs();
    }
    for _ in 0..k {
        let mut next = vec![f64::NEG_INFINITY; n];
        for j in 1..n {
            for i in 1..j {
                if prev[i] > f64::NEG_INFINITY {
                    let cand = prev[i] + (v[j] - v[i]).abs();
                    if cand > next[j] {
                        next[j] = cand;
                    }
                }
            }
        }
        prev = next;
    }
    Ok(prev[n - 1])
}

#[derive(Debug, Clone, Copy)]
struct Score {
    value: f64,
    k: usize,
}

impl Score {
    /// Lexicographic on (value, k): among equal values prefer more points.
    fn beats(&self, other: &Score) -> bool {
        self.value > other.value || (self.value == other.value && self.k > other.k)
    }
}

/// Exact maximizer of `sum |df| - lambda * k` over knot subsequences, O(n^2).
///
/// Ties in value go to the largest `k`.
pub fn dp_optimal(path: &SampledPath, lambda: f64) -> Result<PhiResult> {
    check_lambda(lambda)?;
    let v = path.values();
    let n = v.len();
    let mut best = vec![Score { value: 0.0, k: 0 }; n];
    let mut back = vec![0usize; n];
    for j in 1..n {
        let mut top = Score {
            value: (v[j] - v[0]).abs(),
            k: 0,
        };
        let mut arg = 0;
        for i in 1..j {
            let cand = Score {
                value: best[i].value + (v[j] - v[i]).abs() - lambda,
                k: best[i].k + 1,
            };
            if cand.beats(&top) {
                top = cand;
                arg = i;
            }
        }
        best[j] = top;
        back[j] = arg;
    }
    let mut chain = Vec::with_capacity(best[n - 1].k);
    let mut j = back[n - 1];
    while j != 0 {
        chain.push(path.times()[j]);
        j = back[j];
    }
    chain.reverse();
    Ok(PhiResult {
        value: best[n - 1].value,
        partition: Partition::from_sorted(chain),
        lambda,
    })
}

/// Brute force over all `2^(n-2)` interior subsets. Same tie rule and the
/// same left-to-right summation order as [`dp_optimal`].
pub fn exhaustive_optimal(path: &SampledPath, lambda: f64) -> Result<PhiResult> {
    check_lambda(lambda)?;
    let v = path.values();
    let m = v.len() - 2;
    if m > EXHAUSTIVE_MAX_INTERIOR {
        return Err(Error::TooManyPoints {
            got: m,
            max: EXHAUSTIVE_MAX_INTERIOR,
        });
    }
    let last = v.len() - 1;
    let mut top = Score {
        value: f64::NEG_INFINITY,
        k: 0,
    };
    let mut top_mask = 0u32;
    for mask in 0u32..(1u32 << m) {
        let mut acc = 0.0;
        let mut prev = 0usize;
        let mut k = 0;
        for bit in 0..m {
            if mask & (1 << bit) != 0 {
                let i = bit + 1;
                acc = if prev == 0 {
                    (v[i] - v[0]).abs()
                } else {
                    acc + (v[i] - v[prev]).abs() - lambda
                };
                prev = i;
                k += 1;
            }
        }
        acc = if prev == 0 {
            (v[last] - v[0]).abs()
        } else {
            acc + (v[last] - v[prev]).abs() - lambda
        };
        let cand = Score { value: acc, k };
        if cand.beats(&top) {
            top = cand;
            top_mask = mask;
        }
    }
    let interior = (0..m)
        .filter(|bit| top_mask & (1 << bit) != 0)
        .map(|bit| path.times()[bit + 1])
        .collect();
    Ok(PhiResult {
        value: top.value,
        partition: Partition::from_sorted(interior),
        lambda,
    })
}

/// Necessary conditions satisfied by optimal partitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// Consecutive segments alternate between uptick and downtick.
    Alternation,
    /// Segments away from both ends move by at least lambda.
    InteriorMagnitude,
    /// With k >= 1 every segment moves by at least lambda / 2.
    TerminalMagnitude,
    /// Segment ends are the extrema of the segment (and of neighbouring pairs).
    ExtremumAttainment,
    /// The first and last segments stay within the lambda / 2 end bands.
    EndBand,
    /// An uptick holds no lambda-downtick, and vice versa.
    NoReverseTick,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructureReport {
    pub alternation_ok: bool,
    pub interior_magnitude_ok: bool,
    pub terminal_magnitude_ok: bool,
    pub extremum_attainment_ok: bool,
    pub end_band_ok: bool,
    pub no_reverse_tick_ok: bool,
    /// (condition, point or segment index) pairs.
    pub violations: Vec<(Condition, usize)>,
}

impl StructureReport {
    pub fn all_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tick {
    Up,
    Down,
    Flat,
}

fn tick(from: f64, to: f64) -> Tick {
    if to > from {
        Tick::Up
    } else if to < from {
        Tick::Down
    } else {
        Tick::Flat
    }
}

fn span_min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
            (lo.min(*x), hi.max(*x))
        })
}

/// Largest `f(x) - f(y)` with `x <= y`.
fn max_drawdown(v: &[f64]) -> f64 {
    let mut peak = f64::NEG_INFINITY;
    let mut dd = 0.0f64;
    for x in v {
        peak = peak.max(*x);
        dd = dd.max(peak - x);
    }
    dd
}

/// Largest `f(y) - f(x)` with `x <= y`.
fn max_drawup(v: &[f64]) -> f64 {
    let mut trough = f64::INFINITY;
    let mut du = 0.0f64;
    for x in v {
        trough = trough.min(*x);
        du = du.max(x - trough);
    }
    du
}

/// Evaluates every structural condition on `partition`, whose points must be
/// knots of `path`. Interval extrema are taken over knots, which is exact for
/// the interpolant.
pub fn check_structure(
    path: &SampledPath,
    lambda: f64,
    partition: &Partition,
) -> Result<StructureReport> {
    check_lambda(lambda)?;
    let v = path.values();
    let n = v.len();
    let mut idx = Vec::with_capacity(partition.k() + 2);
    idx.push(0);
    for t in partition.interior() {
        match path.knot_index(*t) {
            Some(i) if i > 0 && i < n - 1 => idx.push(i),
            _ => return Err(Error::PartitionNotOnGrid { time: *t }),
        }
    }
    idx.push(n - 1);
    let k = partition.k();
    let tol = STRUCTURE_TOL;
    let mut violations = Vec::new();

    let seg = |j: usize| &v[idx[j - 1]..=idx[j]];
    let fv = |j: usize| v[idx[j]];
    let ticks: Vec<Tick> = (1..=k + 1).map(|j| tick(fv(j - 1), fv(j))).collect();
    let tick_of = |j: usize| ticks[j - 1];

    for j in 1..=k {
        let d1 = fv(j) - fv(j - 1);
        let d2 = fv(j) - fv(j + 1);
        if !((d1 > 0.0 && d2 > 0.0) || (d1 < 0.0 && d2 < 0.0)) {
            violations.push((Condition::Alternation, j));
        }
    }

    for j in 1..=k + 1 {
        let (lo, hi) = span_min_max(seg(j));
        let ok = match tick_of(j) {
            Tick::Up => (j == 1 || lo >= fv(j - 1) - tol) && (j == k + 1 || hi <= fv(j) + tol),
            Tick::Down => (j == 1 || hi <= fv(j - 1) + tol) && (j == k + 1 || lo >= fv(j) - tol),
            Tick::Flat => true,
        };
        if !ok {
            violations.push((Condition::ExtremumAttainment, j));
        }
    }
    for j in 1..=k {
        let (lo, hi) = span_min_max(&v[idx[j - 1]..=idx[j + 1]]);
        let ok = match tick_of(j) {
            Tick::Up => hi <= fv(j) + tol,
            Tick::Down => lo >= fv(j) - tol,
            Tick::Flat => true,
        };
        if !ok {
            violations.push((Condition::ExtremumAttainment, j));
        }
    }

    for j in 2..=k {
        if (fv(j) - fv(j - 1)).abs() < lambda - tol {
            violations.push((Condition::InteriorMagnitude, j));
        }
    }
    if k >= 1 {
        for j in 1..=k + 1 {
            if (fv(j) - fv(j - 1)).abs() < lambda / 2.0 - tol {
                violations.push((Condition::TerminalMagnitude, j));
            }
        }
    }

    let half = lambda / 2.0;
    let (lo, hi) = span_min_max(seg(1));
    let first_ok = match tick_of(1) {
        Tick::Up => lo > fv(0) - half - tol,
        Tick::Down => hi < fv(0) + half + tol,
        Tick::Flat => true,
    };
    if !first_ok {
        violations.push((Condition::EndBand, 1));
    }
    let (lo, hi) = span_min_max(seg(k + 1));
    let last_ok = match tick_of(k + 1) {
        Tick::Up => hi < fv(k + 1) + half + tol,
        Tick::Down => lo > fv(k + 1) - half - tol,
        Tick::Flat => true,
    };
    if !last_ok {
        violations.push((Condition::EndBand, k + 1));
    }

    for j in 1..=k + 1 {
        let ok = match tick_of(j) {
            Tick::Up => max_drawdown(seg(j)) < lambda + tol,
            Tick::Down => max_drawup(seg(j)) < lambda + tol,
            Tick::Flat => true,
        };
        if !ok {
            violations.push((Condition::NoReverseTick, j));
        }
    }

    let has = |c: Condition| !violations.iter().any(|(v, _)| *v == c);
    Ok(StructureReport {
        alternation_ok: has(Condition::Alternation),
        interior_magnitude_ok: has(Condition::InteriorMagnitude),
        terminal_magnitude_ok: has(Condition::TerminalMagnitude),
        extremum_attainment_ok: has(Condition::ExtremumAttainment),
        end_band_ok: has(Condition::EndBand),
        no_reverse_tick_ok: has(Condition::NoReverseTick),
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zigzag() -> SampledPath {
        SampledPath::new(
            vec![0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0],
            vec![0.0, 1.0, 0.0, 1.0],
        )
        .unwrap()
    }

    #[test]
    fn tv_fixed_k_examples() {
        let tent = SampledPath::uniform(vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(tv_fixed_k(&tent, 0).unwrap(), 0.0);
        assert_eq!(tv_fixed_k(&tent, 1).unwrap(), 2.0);
        assert_eq!(
            tv_fixed_k(&tent, 2),
            Err(Error::KTooLarge { k: 2, available: 1 })
        );
        // {1/3}: |1-0| + |1-1| = 1; {2/3}: |0-0| + |1-0| = 1
        assert_eq!(tv_fixed_k(&zigzag(), 1).unwrap(), 1.0);
        assert_eq!(tv_fixed_k(&zigzag(), 2).unwrap(), 3.0);
    }

    #[test]
    fn dp_examples() {
        let flat = SampledPath::new(vec![0.0, 1.0], vec![0.0, 0.0]).unwrap();
        let r = dp_optimal(&flat, 0.7).unwrap();
        assert_eq!((r.value, r.k()), (0.0, 0));

        let r = dp_optimal(&zigzag(), 0.5).unwrap();
        assert_eq!(r.value, 2.0);
        assert_eq!(r.partition.interior(), &[1.0 / 3.0, 2.0 / 3.0]);

        let r = dp_optimal(&zigzag(), 3.0).unwrap();
        assert_eq!((r.value, r.k()), (1.0, 0));

        assert!(dp_optimal(&zigzag(), 0.0).is_err());
    }

    #[test]
    fn dp_prefers_more_points_on_ties() {
        // (0, 1, 0.5), lambda 1: empty -> 0.5, {1/2} -> 1 + 0.5 - 1 = 0.5.
        let path = SampledPath::uniform(vec![0.0, 1.0, 0.5]).unwrap();
        let r = dp_optimal(&path, 1.0).unwrap();
        assert_eq!((r.value, r.k()), (0.5, 1));
        let e = exhaustive_optimal(&path, 1.0).unwrap();
        assert_eq!((e.value, e.k()), (0.5, 1));
    }

    #[test]
    fn exhaustive_examples() {
        let two = SampledPath::new(vec![0.0, 2.0], vec![1.0, -0.5]).unwrap();
        let r = exhaustive_optimal(&two, 0.3).unwrap();
        assert_eq!((r.value, r.k()), (1.5, 0));
        assert_eq!(exhaustive_optimal(&zigzag(), 0.5).unwrap().value, 2.0);

        let long = SampledPath::uniform(vec![0.0; 23]).unwrap();
        assert_eq!(
            exhaustive_optimal(&long, 1.0),
            Err(Error::TooManyPoints { got: 21, max: 20 })
        );
    }

    #[test]
    fn structure_examples() {
        let path = zigzag();
        let opt = dp_optimal(&path, 0.5).unwrap();
        let report = check_structure(&path, 0.5, &opt.partition).unwrap();
        assert!(report.all_ok(), "{report:?}");

        let bump = SampledPath::uniform(vec![0.0, 0.1, 0.0]).unwrap();
        let part = Partition::new(&bump, vec![0.5]).unwrap();
        let report = check_structure(&bump, 1.0, &part).unwrap();
        assert!(!report.terminal_magnitude_ok);
        assert!(report.interior_magnitude_ok);
        assert!(report
            .violations
            .contains(&(Condition::TerminalMagnitude, 1)));
        assert!(report
            .violations
            .contains(&(Condition::TerminalMagnitude, 2)));

        let report = check_structure(&bump, 1.0, &Partition::empty()).unwrap();
        assert!(report.alternation_ok && report.interior_magnitude_ok);

        let off_grid = Partition::new(&bump, vec![0.25]).unwrap();
        assert_eq!(
            check_structure(&bump, 1.0, &off_grid),
            Err(Error::PartitionNotOnGrid { time: 0.25 })
        );
    }

    #[test]
    fn structure_flags_reverse_ticks_and_bands() {
        // (0, 2, 0.5, 1.8, 3): the single segment [a, b] hides a 1.5-downtick.
        let path = SampledPath::uniform(vec![0.0, 2.0, 0.5, 1.8, 3.0]).unwrap();
        let report = check_structure(&path, 1.0, &Partition::empty()).unwrap();
        assert!(!report.no_reverse_tick_ok);
        // max 3 is the endpoint, min 0 the start: bands fine.
        assert!(report.end_band_ok);

        // Up segment dipping 0.6 below f(a) with lambda = 1 breaks the start band.
        let dip = SampledPath::uniform(vec![0.0, -0.6, 0.2]).unwrap();
        let report = check_structure(&dip, 1.0, &Partition::empty()).unwrap();
        assert!(!report.end_band_ok);
    }
}
