//! Exhaustive ground truth on small grid domains.
//!
//! Datasets are multisets over a handful of grid points, so every dataset of
//! a given size can be enumerated. The distance between two datasets is the
//! number of records that must be modified to turn one into the other.
//! Sensitivities are recomputed from their definitions, and
//! indistinguishability ratios are evaluated exactly: in closed form for
//! Laplace noise and by pmf arithmetic for discrete Laplace noise.

use itertools::Itertools;
use serde::Serialize;

use crate::curator::{prepare, CalibratedNoise, MechanismConfig};
use crate::dataset::{Dataset, DomainBounds};
use crate::error::{Error, Result};
use crate::noise::{DiscreteLaplaceParams, ShiftRatioBound};
use crate::query::{evaluate, QuerySpec, QueryValue};

pub const MAX_GRID_POINTS: usize = 6;
pub const MAX_GRID_RECORDS: usize = 7;

/// Relative slack allowed on an exact supremum before a check fails.
pub const RATIO_TOLERANCE: f64 = 1e-9;

/// Pmf tail mass ignored by the pointwise scan; the ratio beyond it is
/// constant and is evaluated at the window edge.
const PMF_TAIL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct GridDomain {
    points: Vec<f64>,
    n: usize,
}

impl GridDomain {
    pub fn new(points: Vec<f64>, n: usize) -> Result<Self> {
        if points.is_empty() || points.len() > MAX_GRID_POINTS {
            return Err(Error::InvalidParameter(format!(
                "grid needs 1..={MAX_GRID_POINTS} points, got {}",
                points.len()
            )));
        }
        if points.iter().any(|p| !p.is_finite()) || points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "grid points must be finite and strictly increasing".into(),
            ));
        }
        if n == 0 || n > MAX_GRID_RECORDS {
            return Err(Error::InvalidParameter(format!(
                "grid datasets need 1..={MAX_GRID_RECORDS} records, got {n}"
            )));
        }
        Ok(Self { points, n })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `[first point, last point]`.
    pub fn bounds(&self) -> DomainBounds {
        DomainBounds::closed(self.points[0], self.points[self.points.len() - 1])
            .expect("grid points are ascending")
    }

    pub fn dataset(&self, values: Vec<f64>) -> Result<Dataset> {
        Dataset::new("grid", values, self.bounds())
    }

    /// Every dataset of `n` records over the grid, as sorted multisets.
    pub fn datasets(&self) -> Vec<Dataset> {
        (0..self.n)
            .map(|_| self.points.iter().copied())
            .multi_cartesian_product()
            .filter(|v| v.windows(2).all(|w| w[0] <= w[1]))
            .map(|v| self.dataset(v).expect("grid values lie in the grid bounds"))
            .collect()
    }

    fn check(&self, d: &Dataset) -> Result<()> {
        if d.len() != self.n {
            return Err(Error::InvalidParameter(format!(
                "dataset has {} records, grid datasets have {}",
                d.len(),
                self.n
            )));
        }
        match d.values().iter().find(|v| !self.points.contains(v)) {
            Some(&v) => Err(Error::OffGrid(v)),
            None => Ok(()),
        }
    }

    /// All datasets reachable from `d` by modifying one record.
    pub fn neighbours(&self, d: &Dataset) -> Vec<Dataset> {
        let mut out = Vec::with_capacity(d.len() * self.points.len());
        for i in 0..d.len() {
            for &p in &self.points {
                let mut v = d.values().to_vec();
                v[i] = p;
                out.push(self.dataset(v).expect("grid values lie in the grid bounds"));
            }
        }
        out
    }
}

/// Minimum number of record modifications turning `a` into `b`.
pub fn dataset_distance(a: &Dataset, b: &Dataset) -> usize {
    let (x, y) = (a.values(), b.values());
    let (mut i, mut j, mut common) = (0, 0, 0);
    while i < x.len() && j < y.len() {
        if x[i] == y[j] {
            common += 1;
            i += 1;
            j += 1;
        } else if x[i] < y[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    x.len().max(y.len()) - common
}

/// Per-bin (largest component) change, the metric the sensitivity module
/// reports for histograms.
fn change(a: &QueryValue, b: &QueryValue) -> f64 {
    a.max_component_distance(b)
}

/// `max |f(y) − f(D)|` over one-record modifications `y` of `d` on the grid.
pub fn brute_local_sensitivity(d: &Dataset, q: &QuerySpec, grid: &GridDomain) -> Result<f64> {
    grid.check(d)?;
    let fd = evaluate(d, q)?;
    grid.neighbours(d)
        .iter()
        .try_fold(0.0f64, |acc, y| Ok(acc.max(change(&evaluate(y, q)?, &fd))))
}

/// `max_y LS(y) exp(−β d(D, y))` over every grid dataset `y`.
pub fn brute_smooth_sensitivity(
    d: &Dataset,
    q: &QuerySpec,
    beta: f64,
    grid: &GridDomain,
) -> Result<f64> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "beta must be positive, got {beta}"
        )));
    }
    grid.check(d)?;
    grid.datasets().iter().try_fold(0.0f64, |acc, y| {
        let weight = (-beta * dataset_distance(d, y) as f64).exp();
        Ok(acc.max(brute_local_sensitivity(y, q, grid)? * weight))
    })
}

/// Entry `i − 1`: `max |f(y) − f(D)|` over grid datasets within distance `i`.
pub fn brute_group_sensitivity(
    d: &Dataset,
    q: &QuerySpec,
    grid: &GridDomain,
    g: usize,
) -> Result<Vec<f64>> {
    grid.check(d)?;
    let fd = evaluate(d, q)?;
    let mut ladder = vec![0.0f64; g];
    for y in grid.datasets() {
        let dist = dataset_distance(d, &y);
        if dist == 0 {
            continue;
        }
        let delta = change(&evaluate(&y, q)?, &fd);
        for entry in ladder.iter_mut().skip(dist - 1) {
            *entry = entry.max(delta);
        }
    }
    Ok(ladder)
}

/// Exact `sup_s max(P(z+N=s)/P(z'+N=s), P(z'+N=s)/P(z+N=s))` by pointwise
/// pmf arithmetic. Outside the scanned window the ratio is constant, so the
/// window edges cover the tails.
pub fn discrete_shift_ratio_sup(params: &DiscreteLaplaceParams, z: i64, z_prime: i64) -> f64 {
    let k = params.support_radius(PMF_TAIL);
    let lo = z.min(z_prime) - k - 1;
    let hi = z.max(z_prime) + k + 1;
    (lo..=hi)
        .map(|s| {
            let a = params.pmf(s - z);
            let b = params.pmf(s - z_prime);
            (a / b).max(b / a)
        })
        .fold(1.0, f64::max)
}

fn output_ratio_sup(noise: &CalibratedNoise, fd: &QueryValue, fy: &QueryValue) -> Result<f64> {
    Ok(match noise {
        CalibratedNoise::Exact => {
            if fd == fy {
                1.0
            } else {
                f64::INFINITY
            }
        }
        // independent noise per component: the sup of a product of
        // per-component ratios is the product of the sups
        CalibratedNoise::Laplace(p) => p.density_ratio_bound(fd.l1_distance(fy)),
        CalibratedNoise::DiscreteLaplace(p) => fd
            .components()
            .iter()
            .zip(fy.components())
            .map(|(&a, &b)| discrete_shift_ratio_sup(p, a as i64, b as i64))
            .product(),
        CalibratedNoise::Admissible(_) => {
            return Err(Error::Unsupported(
                "ratio bounds of the heavy-tailed smooth-sensitivity noise".into(),
            ))
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceCheck {
    pub distance: usize,
    pub neighbours: usize,
    pub worst_ratio: f64,
    pub bound: f64,
    pub passed: bool,
    /// A neighbour attaining `worst_ratio`.
    pub witness: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioReport {
    pub dataset: Vec<f64>,
    pub query: QuerySpec,
    pub checks: Vec<DistanceCheck>,
}

impl RatioReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn worst_ratio(&self) -> f64 {
        self.checks
            .iter()
            .map(|c| c.worst_ratio)
            .fold(1.0, f64::max)
    }
}

/// Checks the mechanism calibrated at `d` against every grid dataset within
/// `distance` of `d`. Distance `i` is held to `exp(ε_i)`, where `ε_i = iε`
/// for gdp and `ε` for every other regime.
pub fn verify_ratio_bound(
    d: &Dataset,
    q: &QuerySpec,
    cfg: &MechanismConfig,
    grid: &GridDomain,
    distance: usize,
) -> Result<RatioReport> {
    grid.check(d)?;
    if distance == 0 {
        return Err(Error::InvalidParameter(
            "distance must be at least 1".into(),
        ));
    }
    let prepared = prepare(d, q, cfg)?;
    let fd = &prepared.exact;
    let mut checks: Vec<DistanceCheck> = (1..=distance)
        .map(|i| DistanceCheck {
            distance: i,
            neighbours: 0,
            worst_ratio: 1.0,
            bound: cfg.promised_epsilon(i).exp(),
            passed: true,
            witness: None,
        })
        .collect();
    for y in grid.datasets() {
        let dist = dataset_distance(d, &y);
        if dist == 0 || dist > distance {
            continue;
        }
        let ratio = output_ratio_sup(&prepared.noise, fd, &evaluate(&y, q)?)?;
        let check = &mut checks[dist - 1];
        check.neighbours += 1;
        if check.witness.is_none() || ratio > check.worst_ratio {
            check.worst_ratio = check.worst_ratio.max(ratio);
            check.witness = Some(y.values().to_vec());
        }
    }
    for c in &mut checks {
        c.passed = c.worst_ratio <= c.bound * (1.0 + RATIO_TOLERANCE);
    }
    Ok(RatioReport {
        dataset: d.values().to_vec(),
        query: q.clone(),
        checks,
    })
}

/// Deterministic post-processing map on integer outputs: a partition of the
/// integers into consecutive intervals, `(−∞, c_1), [c_1, c_2), …, [c_m, ∞)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalMap {
    cuts: Vec<i64>,
}

impl IntervalMap {
    pub fn new(cuts: Vec<i64>) -> Result<Self> {
        if cuts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "cuts must be strictly increasing".into(),
            ));
        }
        Ok(Self { cuts })
    }

    /// Rounds down to multiples of `width` inside `[lo, hi]`, lumping
    /// everything outside into the two end labels.
    pub fn rounding(width: i64, lo: i64, hi: i64) -> Result<Self> {
        if width <= 0 || lo > hi {
            return Err(Error::InvalidParameter(
                "rounding needs width > 0 and lo <= hi".into(),
            ));
        }
        Self::new((lo..=hi).step_by(width as usize).collect())
    }

    /// `s ↦ min(max(s, lo), hi)`.
    pub fn clamp(lo: i64, hi: i64) -> Result<Self> {
        if lo >= hi {
            return Err(Error::InvalidParameter("clamp needs lo < hi".into()));
        }
        Self::new((lo + 1..=hi).collect())
    }

    pub fn labels(&self) -> usize {
        self.cuts.len() + 1
    }

    pub fn label(&self, s: i64) -> usize {
        self.cuts.partition_point(|&c| c <= s)
    }

    /// Distribution of `label(center + N)`, each entry an exact interval mass.
    pub fn mapped_pmf(&self, params: &DiscreteLaplaceParams, center: i64) -> Vec<f64> {
        // mass of N in [a, b), b = None for +∞
        let mass = |a: Option<i64>, b: Option<i64>| -> f64 {
            match (a, b) {
                (None, None) => 1.0,
                (None, Some(b)) => params.cdf(b - 1 - center),
                (Some(a), None) => params.survival(a - center),
                (Some(a), Some(b)) if a - center > 0 => {
                    params.survival(a - center) - params.survival(b - center)
                }
                (Some(a), Some(b)) => params.cdf(b - 1 - center) - params.cdf(a - 1 - center),
            }
        };
        (0..self.labels())
            .map(|j| {
                let a = j.checked_sub(1).map(|i| self.cuts[i]);
                let b = self.cuts.get(j).copied();
                mass(a, b)
            })
            .collect()
    }
}

fn discrete_params(
    cfg: &MechanismConfig,
    d: &Dataset,
    q: &QuerySpec,
) -> Result<(i64, DiscreteLaplaceParams)> {
    let prepared = prepare(d, q, cfg)?;
    let center = prepared
        .exact
        .as_scalar()
        .ok_or_else(|| Error::Unsupported("vector-valued queries in pmf checks".into()))?
        as i64;
    match prepared.noise {
        CalibratedNoise::DiscreteLaplace(p) => Ok((center, p)),
        _ => Err(Error::Unsupported(
            "exact pmf checks need a discrete Laplace mechanism".into(),
        )),
    }
}

fn pmf_ratio_sup(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .filter(|(x, y)| **x > 0.0 || **y > 0.0)
        .map(|(x, y)| (x / y).max(y / x))
        .fold(1.0, f64::max)
}

/// Worst output-probability ratio of `map(κ(·))` between `d` and any grid
/// neighbour, where `κ` is the discrete mechanism calibrated at `d`.
pub fn post_processed_ratio(
    d: &Dataset,
    q: &QuerySpec,
    cfg: &MechanismConfig,
    grid: &GridDomain,
    map: &IntervalMap,
) -> Result<f64> {
    grid.check(d)?;
    let (center, params) = discrete_params(cfg, d, q)?;
    let base = map.mapped_pmf(&params, center);
    grid.neighbours(d).iter().try_fold(1.0f64, |acc, y| {
        let other = evaluate(y, q)?.as_scalar().expect("scalar query") as i64;
        Ok(acc.max(pmf_ratio_sup(&base, &map.mapped_pmf(&params, other))))
    })
}

/// Worst ratio between `d` and any grid neighbour for the mechanism that
/// runs `first` with probability `p` and `second` otherwise. Both components
/// are calibrated at `d` and must use discrete Laplace noise.
pub fn mixture_ratio(
    d: &Dataset,
    q: &QuerySpec,
    first: &MechanismConfig,
    second: &MechanismConfig,
    p: f64,
    grid: &GridDomain,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "mixture weight {p} outside [0, 1]"
        )));
    }
    grid.check(d)?;
    let (center, m1) = discrete_params(first, d, q)?;
    let (_, m2) = discrete_params(second, d, q)?;
    let k = m1.support_radius(PMF_TAIL).max(m2.support_radius(PMF_TAIL));
    let pmf = |c: i64, s: i64| p * m1.pmf(s - c) + (1.0 - p) * m2.pmf(s - c);
    // in the far tails the component with the larger α (and non-zero weight)
    // dominates, so the ratio tends to that component's shift ratio
    let dominant = if p == 1.0 || (p > 0.0 && m1.alpha() >= m2.alpha()) {
        m1
    } else {
        m2
    };
    grid.neighbours(d).iter().try_fold(1.0f64, |acc, y| {
        let other = evaluate(y, q)?.as_scalar().expect("scalar query") as i64;
        let lo = center.min(other) - k - 1;
        let hi = center.max(other) + k + 1;
        let window = (lo..=hi)
            .map(|s| {
                let (a, b) = (pmf(center, s), pmf(other, s));
                (a / b).max(b / a)
            })
            .fold(1.0, f64::max);
        let tail = dominant.density_ratio_bound((center - other).abs() as f64);
        Ok(acc.max(window).max(tail))
    })
}

/// Ratio between the outputs on `x` and `x_prime` when each dataset gets
/// Laplace noise scaled to its own local sensitivity, i.e. local sensitivity
/// plugged into a mechanism built for global sensitivity.
pub fn per_dataset_scale_ratio(
    x: &Dataset,
    x_prime: &Dataset,
    q: &QuerySpec,
    epsilon: f64,
) -> Result<f64> {
    let cfg = MechanismConfig::idp_local(epsilon, crate::curator::NoiseFamily::Laplace)?;
    let a = prepare(x, q, &cfg)?;
    let b = prepare(x_prime, q, &cfg)?;
    Ok(match (&a.noise, &b.noise) {
        (CalibratedNoise::Exact, CalibratedNoise::Exact) => {
            if a.exact == b.exact {
                1.0
            } else {
                f64::INFINITY
            }
        }
        (CalibratedNoise::Laplace(p1), CalibratedNoise::Laplace(p2))
            if p1.scale() == p2.scale() =>
        {
            p1.density_ratio_bound(a.exact.l1_distance(&b.exact))
        }
        // a point mass against a density, or two different Laplace scales
        // whose tail ratio grows without bound
        _ => f64::INFINITY,
    })
}
