//! Closed-form global, local, smooth and group-local sensitivities.
//!
//! Order statistics are addressed 1-based on the sorted data. Positions outside
//! `1..=n` are clamped to the domain edges (`x̃_i = min Dom` for `i < 1`,
//! `x̃_i = max Dom` for `i > n`), which is how the worst-case neighbours are
//! built: moved records go to an edge of the domain. With the median at
//! position `c = m + 1` for `n = 2m + 1`:
//!
//! | query  | local                                  | smooth, distance-`k` term `A(k)`                     |
//! |--------|----------------------------------------|------------------------------------------------------|
//! | median | `max(x_c − x_{c−1}, x_{c+1} − x_c)`    | `max_{0≤t≤k+1} (x̃_{c+t} − x̃_{c+t−k−1})`              |
//! | max    | `max(max Dom − x_n, x_n − x_{n−1})`    | `max(max Dom − x̃_{n−k}, x_n − x̃_{n−k−1})`           |
//! | max2   | `max(x_n − x_{n−1}, x_{n−1} − x_{n−2})`| `max(max Dom − x̃_{n−k}, x_n − x̃_{n−k−1}, x_{n−1} − x̃_{n−k−2})`, `k ≥ 1` |
//!
//! and `S_β(D) = max_k exp(−kβ) A(k)`. Counting queries have sensitivity 1
//! everywhere (per bin for histograms).

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dataset::{Dataset, DomainBounds};
use crate::error::{Error, Result};
use crate::query::{count_closed, histogram_counts, QuerySpec};

/// A sensitivity value, or `Unbounded` when the domain makes it infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sensitivity {
    Finite(f64),
    Unbounded,
}

impl Sensitivity {
    pub fn finite(self) -> Option<f64> {
        match self {
            Sensitivity::Finite(v) => Some(v),
            Sensitivity::Unbounded => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Sensitivity::Finite(_))
    }

    fn from_diff(hi: Option<f64>, lo: Option<f64>) -> Self {
        match (hi, lo) {
            (Some(a), Some(b)) => Sensitivity::Finite(a - b),
            _ => Sensitivity::Unbounded,
        }
    }

    fn max(self, other: Sensitivity) -> Sensitivity {
        match (self, other) {
            (Sensitivity::Finite(a), Sensitivity::Finite(b)) => Sensitivity::Finite(a.max(b)),
            _ => Sensitivity::Unbounded,
        }
    }
}

impl fmt::Display for Sensitivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sensitivity::Finite(v) => write!(f, "{v}"),
            Sensitivity::Unbounded => f.write_str("unbounded"),
        }
    }
}

impl Serialize for Sensitivity {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Sensitivity::Finite(v) => serializer.serialize_f64(*v),
            Sensitivity::Unbounded => serializer.serialize_str("unbounded"),
        }
    }
}

impl<'de> Deserialize<'de> for Sensitivity {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Number(f64),
            Text(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Number(v) => Ok(Sensitivity::Finite(v)),
            Repr::Text(s) if s == "unbounded" => Ok(Sensitivity::Unbounded),
            Repr::Text(s) => Err(serde::de::Error::custom(format!(
                "expected a number or \"unbounded\", got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub global: Sensitivity,
    pub local: Sensitivity,
    pub smooth: Sensitivity,
    pub beta: f64,
}

/// Entry `i - 1` bounds `|f(y) − f(D)|` over all `y` within distance `i` of `D`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSensitivity {
    pub per_distance: Vec<Sensitivity>,
}

impl GroupSensitivity {
    pub fn at(&self, distance: usize) -> Option<Sensitivity> {
        distance
            .checked_sub(1)
            .and_then(|i| self.per_distance.get(i).copied())
    }

    pub fn max_distance(&self) -> usize {
        self.per_distance.len()
    }
}

/// `Δf` over the whole domain for datasets of size `n`.
pub fn global_sensitivity(q: &QuerySpec, bounds: &DomainBounds, _n: usize) -> Sensitivity {
    match q {
        QuerySpec::Median | QuerySpec::Maximum | QuerySpec::SecondMaximum => bounds
            .width()
            .map_or(Sensitivity::Unbounded, Sensitivity::Finite),
        QuerySpec::RangeCount { .. } | QuerySpec::Histogram { .. } => Sensitivity::Finite(1.0),
    }
}

fn check_sizes(d: &Dataset, q: &QuerySpec) -> Result<()> {
    let n = d.len();
    q.check_preconditions(n)?;
    let needed = match q {
        QuerySpec::Median | QuerySpec::SecondMaximum => 3,
        QuerySpec::Maximum => 2,
        _ => 1,
    };
    if n < needed {
        return Err(Error::Precondition(format!(
            "sensitivity of {q} needs at least {needed} records, got {n}"
        )));
    }
    Ok(())
}

/// `LS_f(D)` under the modify-one-record neighbour relation.
pub fn local_sensitivity(d: &Dataset, q: &QuerySpec) -> Result<Sensitivity> {
    check_sizes(d, q)?;
    let n = d.len();
    let ls = match q {
        QuerySpec::Median => {
            let c = n / 2 + 1;
            Sensitivity::Finite((d.x(c) - d.x(c - 1)).max(d.x(c + 1) - d.x(c)))
        }
        QuerySpec::Maximum => match d.bounds().upper() {
            Some(hi) => Sensitivity::Finite((hi - d.x(n)).max(d.x(n) - d.x(n - 1))),
            None => Sensitivity::Unbounded,
        },
        QuerySpec::SecondMaximum => {
            Sensitivity::Finite((d.x(n) - d.x(n - 1)).max(d.x(n - 1) - d.x(n - 2)))
        }
        QuerySpec::RangeCount { .. } | QuerySpec::Histogram { .. } => Sensitivity::Finite(1.0),
    };
    Ok(ls)
}

/// Largest `LS(y)` over datasets `y` at distance at most `k` from `d`.
/// Requires finite bounds.
fn local_envelope(d: &Dataset, q: &QuerySpec, k: usize) -> f64 {
    let n = d.len() as i64;
    let k = k as i64;
    let x = |i: i64| d.clamped(i).expect("finite bounds");
    match q {
        QuerySpec::Median => {
            let c = n / 2 + 1;
            (0..=k + 1)
                .map(|t| x(c + t) - x(c + t - k - 1))
                .fold(0.0, f64::max)
        }
        QuerySpec::Maximum => (x(n + 1) - x(n - k)).max(x(n) - x(n - k - 1)),
        QuerySpec::SecondMaximum => {
            if k == 0 {
                (x(n) - x(n - 1)).max(x(n - 1) - x(n - 2))
            } else {
                (x(n + 1) - x(n - k))
                    .max(x(n) - x(n - k - 1))
                    .max(x(n - 1) - x(n - k - 2))
            }
        }
        QuerySpec::RangeCount { .. } | QuerySpec::Histogram { .. } => 1.0,
    }
}

/// `S_{f,β}(D) = max_y LS_f(y) exp(−β d(D, y))`.
///
/// The median scan is quadratic in the worst case but stops as soon as
/// `exp(−kβ)·(max Dom − min Dom)` can no longer beat the running maximum.
pub fn smooth_sensitivity(d: &Dataset, q: &QuerySpec, beta: f64) -> Result<Sensitivity> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "smoothing parameter beta must be positive and finite, got {beta}"
        )));
    }
    check_sizes(d, q)?;
    if !q.is_order_statistic() {
        return Ok(Sensitivity::Finite(1.0));
    }
    let Some(width) = d.bounds().width() else {
        return Ok(Sensitivity::Unbounded);
    };
    let mut best = local_envelope(d, q, 0);
    for k in 1..=d.len() {
        let decay = (-(k as f64) * beta).exp();
        if decay * width <= best {
            break;
        }
        best = best.max(decay * local_envelope(d, q, k));
    }
    Ok(Sensitivity::Finite(best))
}

/// Counting-query change achievable by moving up to `i` records.
fn count_shift(i: usize, inside: usize, n: usize) -> f64 {
    i.min(inside.max(n - inside)) as f64
}

/// Per-distance sensitivity ladder for distances `1..=g`.
pub fn group_local_sensitivity(d: &Dataset, q: &QuerySpec, g: usize) -> Result<GroupSensitivity> {
    if g == 0 {
        return Err(Error::InvalidParameter(
            "group size must be at least 1".into(),
        ));
    }
    check_sizes(d, q)?;
    let n = d.len();
    let ni = n as i64;
    let per_distance = (1..=g)
        .map(|i| {
            let ii = i as i64;
            match q {
                QuerySpec::Median => {
                    let c = ni / 2 + 1;
                    let xc = d.clamped(c);
                    Sensitivity::from_diff(d.clamped(c + ii), xc)
                        .max(Sensitivity::from_diff(xc, d.clamped(c - ii)))
                }
                QuerySpec::Maximum => {
                    let top = Some(d.x(n));
                    Sensitivity::from_diff(d.bounds().upper(), top)
                        .max(Sensitivity::from_diff(top, d.clamped(ni - ii)))
                }
                QuerySpec::SecondMaximum => {
                    let second = Some(d.x(n - 1));
                    let ceiling = if i >= 2 {
                        d.bounds().upper()
                    } else {
                        Some(d.x(n))
                    };
                    Sensitivity::from_diff(ceiling, second)
                        .max(Sensitivity::from_diff(second, d.clamped(ni - 1 - ii)))
                }
                QuerySpec::RangeCount { lo, hi } => {
                    Sensitivity::Finite(count_shift(i, count_closed(d.values(), *lo, *hi), n))
                }
                QuerySpec::Histogram { edges } => Sensitivity::Finite(
                    histogram_counts(d.values(), edges)
                        .into_iter()
                        .map(|c| count_shift(i, c as usize, n))
                        .fold(0.0, f64::max),
                ),
            }
        })
        .collect();
    Ok(GroupSensitivity { per_distance })
}

/// Global, local and smooth sensitivity of `q` at `d` in one report.
pub fn report(d: &Dataset, q: &QuerySpec, beta: f64) -> Result<SensitivityReport> {
    Ok(SensitivityReport {
        global: global_sensitivity(q, d.bounds(), d.len()),
        local: local_sensitivity(d, q)?,
        smooth: smooth_sensitivity(d, q, beta)?,
        beta,
    })
}
