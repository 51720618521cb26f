//! Sampled signals, partitions and the elementary path transforms.
//!
//! A [`SampledPath`] stands for the continuous piecewise-linear interpolant of
//! its knots. Every solver in the crate is exact for that model.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strictly increasing time grid with finite values; at least two knots.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledPath {
    times: Vec<f64>,
    values: Vec<f64>,
}

/// Pointwise transforms used by the invariance tests and the scaling law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathTransform {
    Negate,
    AddConstant(f64),
    /// Multiply values by `c > 0`.
    ScaleValues(f64),
    /// Brownian rescaling `t -> t / mu`, `v -> v / sqrt(mu)`.
    TimeScale(f64),
}

#[inline]
pub(crate) fn lerp(t0: f64, v0: f64, t1: f64, v1: f64, t: f64) -> f64 {
    if t == t0 {
        v0
    } else if t == t1 {
        v1
    } else {
        v0 + (v1 - v0) * ((t - t0) / (t1 - t0))
    }
}

impl SampledPath {
    /// Validates raw knots. Never reorders or merges.
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::LengthMismatch {
                times: times.len(),
                values: values.len(),
            });
        }
        if times.len() < 2 {
            return Err(Error::TooShort { len: times.len() });
        }
        for (index, (t, v)) in times.iter().zip(&values).enumerate() {
            if !t.is_finite() || !v.is_finite() {
                return Err(Error::NonFiniteValue { index });
            }
            if index > 0 && *t <= times[index - 1] {
                return Err(Error::NonMonotoneTimes { index });
            }
        }
        Ok(Self { times, values })
    }

    /// Knots at `0, 1/(n-1), ..., 1` carrying `values`.
    pub fn uniform(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        if n < 2 {
            return Err(Error::TooShort { len: n });
        }
        let last = (n - 1) as f64;
        let times = (0..n).map(|i| i as f64 / last).collect();
        Self::new(times, values)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn first_value(&self) -> f64 {
        self.values[0]
    }

    pub fn last_value(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Index of the knot at exactly `t`, if any.
    pub fn knot_index(&self, t: f64) -> Option<usize> {
        self.times
            .binary_search_by(|probe| probe.total_cmp(&t))
            .ok()
    }

    /// Evaluates the interpolant. Knots return their stored value exactly.
    pub fn value_at(&self, t: f64) -> Result<f64> {
        if !(t >= self.start() && t <= self.end()) {
            return Err(Error::OutOfRange {
                a: t,
                b: t,
                start: self.start(),
                end: self.end(),
            });
        }
        Ok(match self.times.binary_search_by(|p| p.total_cmp(&t)) {
            Ok(i) => self.values[i],
            Err(i) => lerp(
                self.times[i - 1],
                self.values[i - 1],
                self.times[i],
                self.values[i],
                t,
            ),
        })
    }

    /// Sub-path on `[a, b]`, with interpolated endpoints where `a` or `b`
    /// fall inside a segment.
    pub fn restrict(&self, a: f64, b: f64) -> Result<Self> {
        if !(a >= self.start() && a < b && b <= self.end()) {
            return Err(Error::OutOfRange {
                a,
                b,
                start: self.start(),
                end: self.end(),
            });
        }
        let mut times = vec![a];
        let mut values = vec![self.value_at(a)?];
        for (t, v) in self.times.iter().zip(&self.values) {
            if *t > a && *t < b {
                times.push(*t);
                values.push(*v);
            }
        }
        times.push(b);
        values.push(self.value_at(b)?);
        Self::new(times, values)
    }

    pub fn transform(&self, op: PathTransform) -> Result<Self> {
        let (times, values) = match op {
            PathTransform::Negate => (self.times.clone(), self.values.iter().map(|v| -v).collect()),
            PathTransform::AddConstant(c) => {
                if !c.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "constant {c} is not finite"
                    )));
                }
                (
                    self.times.clone(),
                    self.values.iter().map(|v| v + c).collect(),
                )
            }
            PathTransform::ScaleValues(c) => {
                if !(c.is_finite() && c > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "scale {c} must be positive"
                    )));
                }
                (
                    self.times.clone(),
                    self.values.iter().map(|v| v * c).collect(),
                )
            }
            PathTransform::TimeScale(mu) => {
                if !(mu.is_finite() && mu > 0.0) {
                    return Err(Error::InvalidParameter(format!("mu {mu} must be positive")));
                }
                let root = mu.sqrt();
                (
                    self.times.iter().map(|t| t / mu).collect(),
                    self.values.iter().map(|v| v / root).collect(),
                )
            }
        };
        Self::new(times, values)
    }

    /// Reads the `time,value` CSV format.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::Csv {
            row: 1,
            msg: e.to_string(),
        })?;
        if headers.len() != 2 || &headers[0] != "time" || &headers[1] != "value" {
            return Err(Error::Csv {
                row: 1,
                msg: "expected header `time,value`".into(),
            });
        }
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let row = i + 2;
            let rec = rec.map_err(|e| Error::Csv {
                row,
                msg: e.to_string(),
            })?;
            if rec.len() != 2 {
                return Err(Error::Csv {
                    row,
                    msg: format!("expected 2 fields, got {}", rec.len()),
                });
            }
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|_| Error::Csv {
                    row,
                    msg: format!("cannot parse `{s}` as a number"),
                })
            };
            times.push(parse(&rec[0])?);
            values.push(parse(&rec[1])?);
        }
        Self::new(times, values).map_err(|e| match e {
            Error::NonMonotoneTimes { index } => Error::Csv {
                row: index + 2,
                msg: "times must be strictly increasing".into(),
            },
            Error::NonFiniteValue { index } => Error::Csv {
                row: index + 2,
                msg: "non-finite entry".into(),
            },
            other => other,
        })
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut out = String::with_capacity(self.len() * 24 + 11);
        out.push_str("time,value\n");
        for (t, v) in self.times.iter().zip(&self.values) {
            out.push_str(&format!("{t},{v}\n"));
        }
        w.write_all(out.as_bytes())?;
        Ok(())
    }
}

/// Interior points `a < t_1 < ... < t_k < b` of a partition.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Partition {
    interior: Vec<f64>,
}

impl Partition {
    pub fn new(path: &SampledPath, interior: Vec<f64>) -> Result<Self> {
        for (i, t) in interior.iter().enumerate() {
            let ordered = i == 0 || *t > interior[i - 1];
            if !(*t > path.start() && *t < path.end() && ordered) {
                return Err(Error::InvalidParameter(format!(
                    "partition point {t} is not strictly increasing inside ({}, {})",
                    path.start(),
                    path.end()
                )));
            }
        }
        Ok(Self { interior })
    }

    pub(crate) fn from_sorted(interior: Vec<f64>) -> Self {
        Self { interior }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn interior(&self) -> &[f64] {
        &self.interior
    }

    /// Number of interior points.
    pub fn k(&self) -> usize {
        self.interior.len()
    }
}

/// `sum |f(t_i) - f(t_{i-1})| - lambda * k` for the given partition.
pub fn objective(path: &SampledPath, lambda: f64, partition: &Partition) -> Result<f64> {
    let mut prev = path.first_value();
    let mut total = 0.0;
    for t in partition.interior() {
        let v = path.value_at(*t)?;
        total += (v - prev).abs();
        prev = v;
    }
    total += (path.last_value() - prev).abs();
    Ok(total - lambda * partition.k() as f64)
}

/// Objective value together with the partition achieving it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiResult {
    pub value: f64,
    pub partition: Partition,
    pub lambda: f64,
}

impl PhiResult {
    pub fn k(&self) -> usize {
        self.partition.k()
    }
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "lambda {lambda} must be positive"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(t: &[f64], v: &[f64]) -> SampledPath {
        SampledPath::new(t.to_vec(), v.to_vec()).unwrap()
    }

    #[test]
    fn validation() {
        assert!(SampledPath::new(vec![0.0, 1.0], vec![0.0, 1.0]).is_ok());
        assert_eq!(
            SampledPath::new(vec![0.0, 0.5, 0.5], vec![0.0, 1.0, 2.0]),
            Err(Error::NonMonotoneTimes { index: 2 })
        );
        assert_eq!(
            SampledPath::new(vec![0.0, 1.0], vec![0.0, f64::NAN]),
            Err(Error::NonFiniteValue { index: 1 })
        );
        assert_eq!(
            SampledPath::new(vec![0.0], vec![0.0]),
            Err(Error::TooShort { len: 1 })
        );
        assert!(matches!(
            SampledPath::new(vec![0.0, 1.0], vec![0.0]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn restrict_examples() {
        let ramp = p(&[0.0, 1.0], &[0.0, 2.0]);
        assert_eq!(
            ramp.restrict(0.0, 0.5).unwrap(),
            p(&[0.0, 0.5], &[0.0, 1.0])
        );
        assert_eq!(ramp.restrict(0.0, 1.0).unwrap(), ramp);

        let tent = p(&[0.0, 1.0, 2.0], &[0.0, 1.0, 0.0]);
        assert_eq!(
            tent.restrict(0.5, 1.5).unwrap(),
            p(&[0.5, 1.0, 1.5], &[0.5, 1.0, 0.5])
        );
        assert!(matches!(
            tent.restrict(-0.1, 1.0),
            Err(Error::OutOfRange { .. })
        ));
        assert!(matches!(
            tent.restrict(1.0, 1.0),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn transforms() {
        let path = p(&[0.0, 0.3, 1.0], &[0.2, -1.0, 0.7]);
        let twice = path
            .transform(PathTransform::Negate)
            .unwrap()
            .transform(PathTransform::Negate)
            .unwrap();
        assert_eq!(twice, path);

        let shifted = path.transform(PathTransform::AddConstant(5.0)).unwrap();
        for i in 1..path.len() {
            let d0 = path.values()[i] - path.values()[i - 1];
            let d1 = shifted.values()[i] - shifted.values()[i - 1];
            assert!((d0 - d1).abs() < 1e-12);
        }

        let scaled = p(&[0.0, 4.0], &[0.0, 2.0])
            .transform(PathTransform::TimeScale(4.0))
            .unwrap();
        assert_eq!(scaled, p(&[0.0, 1.0], &[0.0, 1.0]));

        assert!(matches!(
            path.transform(PathTransform::TimeScale(0.0)),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            path.transform(PathTransform::ScaleValues(-1.0)),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn csv_rejects_bad_rows() {
        let ok = "time,value\n0,0\n0.5,1\n1,0\n";
        let path = SampledPath::read_csv(ok.as_bytes()).unwrap();
        assert_eq!(path.values(), &[0.0, 1.0, 0.0]);

        let dup = "time,value\n0,0\n0.5,1\n0.5,0\n";
        assert_eq!(
            SampledPath::read_csv(dup.as_bytes()).unwrap_err(),
            Error::Csv {
                row: 4,
                msg: "times must be strictly increasing".into()
            }
        );
        let junk = "time,value\n0,0\n0.5,abc\n";
        assert!(matches!(
            SampledPath::read_csv(junk.as_bytes()),
            Err(Error::Csv { row: 3, .. })
        ));
        let header = "t,v\n0,0\n1,1\n";
        assert!(matches!(
            SampledPath::read_csv(header.as_bytes()),
            Err(Error::Csv { row: 1, .. })
        ));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let path = p(&[0.0, 1.0 / 3.0, 0.7], &[0.1, -2.0 / 7.0, 1e-300]);
        let mut buf = Vec::new();
        path.write_csv(&mut buf).unwrap();
        assert_eq!(SampledPath::read_csv(buf.as_slice()).unwrap(), path);
    }

    #[test]
    fn partition_bounds() {
        let path = p(&[0.0, 0.5, 1.0], &[0.0, 1.0, 0.0]);
        assert!(Partition::new(&path, vec![0.5]).is_ok());
        assert!(Partition::new(&path, vec![0.0]).is_err());
        assert!(Partition::new(&path, vec![0.6, 0.5]).is_err());
        let part = Partition::new(&path, vec![0.5]).unwrap();
        assert_eq!(objective(&path, 0.5, &part).unwrap(), 1.5);
    }
}
