//! Numeric single-attribute datasets with an explicit attribute domain.

use std::fmt;
use std::fs::File;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::noise::RandomSource;

/// Domain of the attribute, `Dom(A)`. `None` marks an unbounded side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainBounds {
    lower: Option<f64>,
    upper: Option<f64>,
}

impl DomainBounds {
    pub fn new(lower: Option<f64>, upper: Option<f64>) -> Result<Self> {
        for b in [lower, upper].into_iter().flatten() {
            if !b.is_finite() {
                return Err(Error::InvalidBounds(format!(
                    "bound {b} is not finite; use \"unbounded\" instead"
                )));
            }
        }
        if let (Some(lo), Some(hi)) = (lower, upper) {
            if lo > hi {
                return Err(Error::InvalidBounds(format!(
                    "lower {lo} exceeds upper {hi}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn closed(lower: f64, upper: f64) -> Result<Self> {
        Self::new(Some(lower), Some(upper))
    }

    pub fn unbounded() -> Self {
        Self {
            lower: None,
            upper: None,
        }
    }

    pub fn lower(&self) -> Option<f64> {
        self.lower
    }

    pub fn upper(&self) -> Option<f64> {
        self.upper
    }

    /// `(min Dom, max Dom)` when both sides are finite.
    pub fn finite(&self) -> Option<(f64, f64)> {
        Some((self.lower?, self.upper?))
    }

    /// `max Dom - min Dom`, if the domain is bounded.
    pub fn width(&self) -> Option<f64> {
        self.finite().map(|(lo, hi)| hi - lo)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower.is_none_or(|lo| x >= lo) && self.upper.is_none_or(|hi| x <= hi)
    }
}

impl fmt::Display for DomainBounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let side = |b: Option<f64>| b.map_or_else(|| "unbounded".to_string(), |v| v.to_string());
        write!(f, "[{}, {}]", side(self.lower), side(self.upper))
    }
}

/// Parses a bound given on the command line: a number or the literal `unbounded`.
pub fn parse_bound(text: &str) -> Result<Option<f64>> {
    let text = text.trim();
    if text.eq_ignore_ascii_case("unbounded") {
        return Ok(None);
    }
    text.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::InvalidBounds(format!("cannot parse bound {text:?}")))
}

/// An immutable, sorted column of reals together with its domain bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    values: Vec<f64>,
    bounds: DomainBounds,
}

impl Dataset {
    /// Builds a dataset from raw values in any order. The values are sorted
    /// ascending; the original order is not kept.
    pub fn new(
        name: impl Into<String>,
        mut values: Vec<f64>,
        bounds: DomainBounds,
    ) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite(v));
            }
            if !bounds.contains(v) {
                return Err(out_of_bounds(i + 1, v, &bounds));
            }
        }
        values.sort_by(f64::total_cmp);
        let dataset = Self {
            name: name.into(),
            values,
            bounds,
        };
        debug_assert!(dataset.values.windows(2).all(|w| w[0] <= w[1]));
        Ok(dataset)
    }

    /// Sorted values `x_1 <= ... <= x_n`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn bounds(&self) -> &DomainBounds {
        &self.bounds
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Same values under different bounds.
    pub fn with_bounds(&self, bounds: DomainBounds) -> Result<Self> {
        Self::new(self.name.clone(), self.values.clone(), bounds)
    }

    /// The order statistic `x_i` with 1-based `i`, clamped to the domain edges:
    /// `min Dom` for `i < 1` and `max Dom` for `i > n`. `None` when the needed
    /// edge is unbounded.
    pub fn clamped(&self, i: i64) -> Option<f64> {
        let n = self.values.len() as i64;
        if i < 1 {
            self.bounds.lower
        } else if i > n {
            self.bounds.upper
        } else {
            Some(self.values[(i - 1) as usize])
        }
    }

    /// `x_i` with 1-based `i` in `1..=n`.
    pub(crate) fn x(&self, i: usize) -> f64 {
        self.values[i - 1]
    }
}

fn out_of_bounds(row: usize, value: f64, bounds: &DomainBounds) -> Error {
    Error::OutOfBounds {
        row,
        value,
        lower: bounds.lower.unwrap_or(f64::NEG_INFINITY),
        upper: bounds.upper.unwrap_or(f64::INFINITY),
    }
}

/// Loads a single-column CSV file. A first line whose token is not numeric
/// is treated as a header.
pub fn load_csv(path: impl AsRef<Path>, bounds: DomainBounds) -> Result<Dataset> {
    let path = path.as_ref();
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_csv(&text, name, bounds)
}

/// Parses single-column CSV text. Rows are reported 1-based as they appear in
/// the input, header included.
pub fn parse_csv(text: &str, name: impl Into<String>, bounds: DomainBounds) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut values = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let row = record.position().map_or(idx + 1, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != 1 {
            return Err(Error::ColumnCount {
                row,
                columns: record.len(),
            });
        }
        let token = &record[0];
        match token.parse::<f64>() {
            Ok(v) if !v.is_finite() => return Err(Error::NonFinite(v)),
            Ok(v) => {
                if !bounds.contains(v) {
                    return Err(out_of_bounds(row, v, &bounds));
                }
                values.push(v);
            }
            // header: only the first line may be non-numeric
            Err(_) if idx == 0 => continue,
            Err(_) => {
                return Err(Error::Parse {
                    row,
                    text: token.to_string(),
                })
            }
        }
    }
    Dataset::new(name, values, bounds)
}

/// Generators used for the accuracy experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SyntheticDistribution {
    /// U\[0,1\], domain `[0, 1]`.
    Uniform01,
    /// N(0,1), domain restricted to the sample range.
    StandardNormal,
    /// Exp(1), domain restricted to the sample range.
    Exponential1,
}

impl SyntheticDistribution {
    pub const ALL: [SyntheticDistribution; 3] = [
        SyntheticDistribution::Uniform01,
        SyntheticDistribution::StandardNormal,
        SyntheticDistribution::Exponential1,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SyntheticDistribution::Uniform01 => "uniform01",
            SyntheticDistribution::StandardNormal => "standard_normal",
            SyntheticDistribution::Exponential1 => "exponential1",
        }
    }
}

impl fmt::Display for SyntheticDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SyntheticDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "uniform01" | "uniform" => Ok(Self::Uniform01),
            "standard_normal" | "normal" => Ok(Self::StandardNormal),
            "exponential1" | "exponential" => Ok(Self::Exponential1),
            other => Err(Error::InvalidParameter(format!(
                "unknown distribution {other:?}"
            ))),
        }
    }
}

impl Serialize for SyntheticDistribution {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for SyntheticDistribution {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Draws `n` i.i.d. values from `dist` with a seeded stream.
pub fn synthesize(dist: SyntheticDistribution, n: usize, seed: u64) -> Result<Dataset> {
    synthesize_with(dist, n, &mut RandomSource::new(seed))
}

pub(crate) fn synthesize_with(
    dist: SyntheticDistribution,
    n: usize,
    rng: &mut RandomSource,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let values: Vec<f64> = match dist {
        SyntheticDistribution::Uniform01 => (0..n).map(|_| rng.random::<f64>()).collect(),
        SyntheticDistribution::StandardNormal => (0..n)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect(),
        SyntheticDistribution::Exponential1 => (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect(),
    };
    let bounds = match dist {
        SyntheticDistribution::Uniform01 => DomainBounds::closed(0.0, 1.0)?,
        _ => {
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            DomainBounds::closed(lo, hi)?
        }
    };
    Dataset::new(format!("{dist}-{n}"), values, bounds)
}
