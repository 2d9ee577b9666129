//! Exact evaluation of the supported statistics.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum QuerySpec {
    /// `x_{m+1}` for `n = 2m + 1`.
    Median,
    Maximum,
    SecondMaximum,
    /// Number of values in the closed interval `[lo, hi]`.
    RangeCount {
        lo: f64,
        hi: f64,
    },
    /// Counts over `[e_i, e_{i+1})`, the last bin closed.
    Histogram {
        edges: Vec<f64>,
    },
}

impl QuerySpec {
    pub fn range_count(lo: f64, hi: f64) -> Result<Self> {
        let q = QuerySpec::RangeCount { lo, hi };
        q.validate()?;
        Ok(q)
    }

    pub fn histogram(edges: Vec<f64>) -> Result<Self> {
        let q = QuerySpec::Histogram { edges };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            QuerySpec::RangeCount { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                    return Err(Error::InvalidQuery(format!(
                        "range [{lo}, {hi}] must be finite with lo <= hi"
                    )));
                }
            }
            QuerySpec::Histogram { edges } => {
                if edges.len() < 2 {
                    return Err(Error::InvalidQuery(
                        "histogram needs at least two edges".into(),
                    ));
                }
                if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::InvalidQuery(
                        "histogram edges must be finite and strictly increasing".into(),
                    ));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Counting queries produce integers and may use discrete noise.
    pub fn is_integer_valued(&self) -> bool {
        matches!(
            self,
            QuerySpec::RangeCount { .. } | QuerySpec::Histogram { .. }
        )
    }

    pub fn is_order_statistic(&self) -> bool {
        matches!(
            self,
            QuerySpec::Median | QuerySpec::Maximum | QuerySpec::SecondMaximum
        )
    }

    pub fn bins(&self) -> Option<usize> {
        match self {
            QuerySpec::Histogram { edges } => Some(edges.len() - 1),
            _ => None,
        }
    }

    /// The 1-based sorted position returned by an order-statistic query.
    pub(crate) fn position(&self, n: usize) -> Option<usize> {
        match self {
            QuerySpec::Median => Some(n / 2 + 1),
            QuerySpec::Maximum => Some(n),
            QuerySpec::SecondMaximum => Some(n - 1),
            _ => None,
        }
    }

    pub(crate) fn check_preconditions(&self, n: usize) -> Result<()> {
        match self {
            QuerySpec::Median if n.is_multiple_of(2) => Err(Error::Precondition(format!(
                "median is defined for an odd number of records, got n = {n}"
            ))),
            QuerySpec::SecondMaximum if n < 2 => Err(Error::Precondition(format!(
                "second maximum needs n >= 2, got n = {n}"
            ))),
            _ => self.validate(),
        }
    }
}

impl fmt::Display for QuerySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuerySpec::Median => f.write_str("median"),
            QuerySpec::Maximum => f.write_str("max"),
            QuerySpec::SecondMaximum => f.write_str("max2"),
            QuerySpec::RangeCount { lo, hi } => write!(f, "count:{lo}:{hi}"),
            QuerySpec::Histogram { edges } => {
                f.write_str("hist:")?;
                for (i, e) in edges.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{e}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for QuerySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let number = |t: &str| {
            t.trim().parse::<f64>().map_err(|_| {
                Error::InvalidQuery(format!("cannot parse {t:?} as a number in {s:?}"))
            })
        };
        match s {
            "median" => return Ok(QuerySpec::Median),
            "max" | "maximum" => return Ok(QuerySpec::Maximum),
            "max2" | "second_maximum" => return Ok(QuerySpec::SecondMaximum),
            _ => {}
        }
        if let Some(rest) = s.strip_prefix("count:") {
            let (lo, hi) = rest
                .split_once(':')
                .ok_or_else(|| Error::InvalidQuery(format!("expected count:LO:HI, got {s:?}")))?;
            return QuerySpec::range_count(number(lo)?, number(hi)?);
        }
        if let Some(rest) = s.strip_prefix("hist:") {
            let edges = rest.split(',').map(number).collect::<Result<Vec<_>>>()?;
            return QuerySpec::histogram(edges);
        }
        Err(Error::InvalidQuery(format!("unknown query {s:?}")))
    }
}

impl Serialize for QuerySpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for QuerySpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `f(D)`: a scalar, or one count per histogram bin.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum QueryValue {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl QueryValue {
    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            QueryValue::Scalar(v) => Some(*v),
            QueryValue::Vector(_) => None,
        }
    }

    pub fn components(&self) -> &[f64] {
        match self {
            QueryValue::Scalar(v) => std::slice::from_ref(v),
            QueryValue::Vector(v) => v,
        }
    }

    /// L1 distance between two values of the same query.
    pub fn l1_distance(&self, other: &QueryValue) -> f64 {
        self.components()
            .iter()
            .zip(other.components())
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    /// Largest per-component difference.
    pub fn max_component_distance(&self, other: &QueryValue) -> f64 {
        self.components()
            .iter()
            .zip(other.components())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Evaluates `q` on `d` exactly.
pub fn evaluate(d: &Dataset, q: &QuerySpec) -> Result<QueryValue> {
    let n = d.len();
    q.check_preconditions(n)?;
    let v = d.values();
    Ok(match q {
        QuerySpec::Median | QuerySpec::Maximum | QuerySpec::SecondMaximum => {
            QueryValue::Scalar(d.x(q.position(n).expect("order statistic")))
        }
        QuerySpec::RangeCount { lo, hi } => QueryValue::Scalar(count_closed(v, *lo, *hi) as f64),
        QuerySpec::Histogram { edges } => QueryValue::Vector(histogram_counts(v, edges)),
    })
}

/// Number of sorted values in `[lo, hi]`.
pub(crate) fn count_closed(sorted: &[f64], lo: f64, hi: f64) -> usize {
    let start = sorted.partition_point(|&x| x < lo);
    let end = sorted.partition_point(|&x| x <= hi);
    end.saturating_sub(start)
}

pub(crate) fn histogram_counts(sorted: &[f64], edges: &[f64]) -> Vec<f64> {
    let last = edges.len() - 2;
    edges
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let start = sorted.partition_point(|&x| x < w[0]);
            let end = if i == last {
                sorted.partition_point(|&x| x <= w[1])
            } else {
                sorted.partition_point(|&x| x < w[1])
            };
            end.saturating_sub(start) as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::DomainBounds;
    use proptest::prelude::*;

    fn data(values: &[f64]) -> Dataset {
        Dataset::new(
            "d",
            values.to_vec(),
            DomainBounds::closed(0.0, 1.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn median_of_binary_examples() {
        assert_eq!(
            evaluate(&data(&[0., 0., 0., 0., 1.]), &QuerySpec::Median).unwrap(),
            QueryValue::Scalar(0.0)
        );
        assert_eq!(
            evaluate(&data(&[0., 0., 0., 1., 1.]), &QuerySpec::Median).unwrap(),
            QueryValue::Scalar(0.0)
        );
    }

    #[test]
    fn range_count_is_closed() {
        let d = data(&[0., 0., 0., 1., 1.]);
        let q = QuerySpec::range_count(0.5, 1.0).unwrap();
        assert_eq!(evaluate(&d, &q).unwrap(), QueryValue::Scalar(2.0));
        let q = QuerySpec::range_count(0.0, 0.0).unwrap();
        assert_eq!(evaluate(&d, &q).unwrap(), QueryValue::Scalar(3.0));
    }

    #[test]
    fn order_statistics() {
        let d = data(&[0.9, 0.1, 0.5, 0.3, 0.7]);
        let eval = |q| evaluate(&d, &q).unwrap().as_scalar().unwrap();
        assert_eq!(eval(QuerySpec::Median), 0.5);
        assert_eq!(eval(QuerySpec::Maximum), 0.9);
        assert_eq!(eval(QuerySpec::SecondMaximum), 0.7);
    }

    #[test]
    fn precondition_errors() {
        assert!(matches!(
            evaluate(&data(&[0.0, 1.0]), &QuerySpec::Median),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            evaluate(&data(&[0.5]), &QuerySpec::SecondMaximum),
            Err(Error::Precondition(_))
        ));
        assert!(QuerySpec::range_count(1.0, 0.0).is_err());
        assert!(QuerySpec::histogram(vec![0.0]).is_err());
        assert!(QuerySpec::histogram(vec![0.0, 0.5, 0.5]).is_err());
    }

    #[test]
    fn histogram_last_bin_is_closed() {
        let d = data(&[0.0, 0.25, 0.5, 0.75, 1.0]);
        let q = QuerySpec::histogram(vec![0.0, 0.5, 1.0]).unwrap();
        assert_eq!(
            evaluate(&d, &q).unwrap(),
            QueryValue::Vector(vec![2.0, 3.0])
        );
    }

    #[test]
    fn parse_and_display() {
        for text in ["median", "max", "max2", "count:0.5:1", "hist:0,0.5,1"] {
            let q: QuerySpec = text.parse().unwrap();
            assert_eq!(q.to_string(), text);
        }
        assert_eq!(
            "count:0:0.5".parse::<QuerySpec>().unwrap(),
            QuerySpec::RangeCount { lo: 0.0, hi: 0.5 }
        );
        assert!("mean".parse::<QuerySpec>().is_err());
        assert!("count:1".parse::<QuerySpec>().is_err());
        assert!("hist:1,x".parse::<QuerySpec>().is_err());
    }

    proptest! {
        #[test]
        fn permutation_invariance(mut raw in prop::collection::vec(0.0f64..1.0, 1..20usize), seed in any::<u64>()) {
            if raw.len() % 2 == 0 { raw.pop(); }
            prop_assume!(!raw.is_empty());
            let a = data(&raw);
            // deterministic shuffle via rotation + reversal
            let k = (seed as usize) % raw.len();
            raw.rotate_left(k);
            raw.reverse();
            let b = data(&raw);
            for q in [QuerySpec::Median, QuerySpec::Maximum, QuerySpec::range_count(0.2, 0.7).unwrap()] {
                prop_assert_eq!(evaluate(&a, &q).unwrap(), evaluate(&b, &q).unwrap());
            }
        }

        #[test]
        fn histogram_bins_sum_to_inside_count(raw in prop::collection::vec(0.0f64..1.0, 1..40usize), cut in 0.05f64..0.95) {
            let d = data(&raw);
            let edges = vec![0.1, cut.max(0.11), 0.95];
            let q = QuerySpec::histogram(edges).unwrap();
            let total: f64 = evaluate(&d, &q).unwrap().components().iter().sum();
            prop_assert_eq!(total as usize, count_closed(d.values(), 0.1, 0.95));
        }

        #[test]
        fn median_of_constant_dataset(c in 0.0f64..1.0, m in 0usize..10) {
            let d = data(&vec![c; 2 * m + 1]);
            prop_assert_eq!(evaluate(&d, &QuerySpec::Median).unwrap(), QueryValue::Scalar(c));
        }
    }
}
