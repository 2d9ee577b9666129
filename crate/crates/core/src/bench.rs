//! Monte Carlo accuracy experiments.
//!
//! Three experiments are provided:
//!
//! * [`run_ci_table`]: empirical central 95% intervals of the Laplace noise
//!   and of the heavy-tailed smooth-sensitivity noise at γ = 2 and γ = 3;
//! * [`run_error_grid`]: mean absolute error of the median under iDP with
//!   local sensitivity and under DP with smooth sensitivity, over synthetic
//!   datasets;
//! * [`run_noise_profile`]: the analytic densities of the same three noise
//!   families on a grid.
//!
//! Every table can be written as CSV. Trials run in parallel, each on its own
//! derived random stream, and are reduced in trial order, so results are
//! reproducible for a fixed seed.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::curator::{prepare, MechanismConfig, NoiseFamily, Regime};
use crate::dataset::{synthesize_with, SyntheticDistribution};
use crate::error::{Error, Result};
use crate::noise::{AdmissibleNoiseParams, LaplaceParams, RandomSource};
use crate::oracle::{self, GridDomain};
use crate::query::QuerySpec;
use crate::sensitivity::{local_sensitivity, smooth_sensitivity};

pub const DEFAULT_SEED: u64 = 20_240_229;
pub const DEFAULT_TRIALS: usize = 1000;
pub const DEFAULT_CI_SAMPLES: usize = 1_000_000;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

fn write_csv<W: Write>(
    out: W,
    header: &[&str],
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

fn create(path: &Path) -> Result<std::fs::File> {
    std::fs::File::create(path).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentPlan {
    pub distributions: Vec<SyntheticDistribution>,
    pub sizes: Vec<usize>,
    pub epsilons: Vec<f64>,
    pub trials: usize,
    pub gamma: f64,
    pub seed: u64,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            distributions: SyntheticDistribution::ALL.to_vec(),
            sizes: vec![10, 100, 1000],
            epsilons: vec![0.5, 0.75, 1.0],
            trials: DEFAULT_TRIALS,
            gamma: 3.0,
            seed: DEFAULT_SEED,
        }
    }
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.epsilons.is_empty() || self.distributions.is_empty() || self.sizes.is_empty() {
            return bad("plan needs at least one distribution, size and epsilon".into());
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return bad(format!("epsilon must be positive, got {e}"));
        }
        if self.sizes.iter().any(|&n| n < 2) {
            return bad("sizes must be at least 2".into());
        }
        if !(self.gamma > 1.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must exceed 1, got {}", self.gamma));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRow {
    pub distribution: SyntheticDistribution,
    pub n: usize,
    pub epsilon: f64,
    pub regime: Regime,
    pub mae: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ErrorTable {
    pub rows: Vec<ErrorRow>,
}

impl ErrorTable {
    pub const HEADER: [&'static str; 6] =
        ["distribution", "n", "epsilon", "regime", "mae", "trials"];

    pub fn get(
        &self,
        dist: SyntheticDistribution,
        n: usize,
        epsilon: f64,
        regime: Regime,
    ) -> Option<&ErrorRow> {
        self.rows.iter().find(|r| {
            r.distribution == dist && r.n == n && r.epsilon == epsilon && r.regime == regime
        })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_csv(
            out,
            &Self::HEADER,
            self.rows.iter().map(|r| {
                vec![
                    r.distribution.to_string(),
                    r.n.to_string(),
                    r.epsilon.to_string(),
                    r.regime.to_string(),
                    r.mae.to_string(),
                    r.trials.to_string(),
                ]
            }),
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(create(path)?)
    }
}

/// Regimes compared in the error grid: iDP with Laplace noise scaled to the
/// local sensitivity, DP with heavy-tailed noise scaled to the smooth one.
pub const ERROR_GRID_REGIMES: [Regime; 2] = [Regime::IdpLocal, Regime::DpSmooth];

/// Records drawn for nominal size `n`: the median needs an odd count, so
/// even sizes get one extra record.
pub fn median_size(n: usize) -> usize {
    n | 1
}

pub fn run_error_grid(plan: &ExperimentPlan) -> Result<ErrorTable> {
    plan.validate()?;
    let root = RandomSource::new(plan.seed);
    let configs: Vec<(f64, Regime, MechanismConfig)> = plan
        .epsilons
        .iter()
        .flat_map(|&eps| {
            [
                MechanismConfig::idp_local(eps, NoiseFamily::Laplace)
                    .map(|c| (eps, Regime::IdpLocal, c)),
                MechanismConfig::dp_smooth(eps, plan.gamma).map(|c| (eps, Regime::DpSmooth, c)),
            ]
        })
        .collect::<Result<_>>()?;
    let q = QuerySpec::Median;
    let mut table = ErrorTable::default();
    for (di, &dist) in plan.distributions.iter().enumerate() {
        for (si, &n) in plan.sizes.iter().enumerate() {
            let cell = root.derive(di as u64).derive(si as u64);
            // one dataset per trial, shared by every (ε, regime) column
            let errors: Vec<Vec<f64>> = (0..plan.trials)
                .into_par_iter()
                .map(|t| -> Result<Vec<f64>> {
                    let trial = cell.derive(t as u64);
                    let d = synthesize_with(dist, median_size(n), &mut trial.derive(0))?;
                    configs
                        .iter()
                        .enumerate()
                        .map(|(k, (_, _, cfg))| {
                            let prepared = prepare(&d, &q, cfg)?;
                            let truth = prepared.exact.as_scalar().expect("median is scalar");
                            let noisy = prepared.sample(&mut trial.derive(1 + k as u64));
                            Ok((noisy.value.as_f64().expect("median is scalar") - truth).abs())
                        })
                        .collect()
                })
                .collect::<Result<_>>()?;
            for (k, &(epsilon, regime, _)) in configs.iter().enumerate() {
                let mut sum = CompensatedSum::default();
                errors.iter().for_each(|e| sum.add(e[k]));
                table.rows.push(ErrorRow {
                    distribution: dist,
                    n,
                    epsilon,
                    regime,
                    mae: sum.total() / plan.trials as f64,
                    trials: plan.trials,
                });
            }
        }
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CiRow {
    /// `laplace`, `gamma2` or `gamma3`.
    pub family: String,
    pub scale: f64,
    pub lower: f64,
    pub upper: f64,
    pub half_width: f64,
    /// Half-width from the exact quantile function.
    pub analytic_half_width: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CiTable {
    pub epsilon: f64,
    pub sensitivity: f64,
    pub rows: Vec<CiRow>,
}

impl CiTable {
    pub const HEADER: [&'static str; 7] = [
        "family",
        "scale",
        "lower",
        "upper",
        "half_width",
        "analytic_half_width",
        "samples",
    ];

    pub fn row(&self, family: &str) -> Option<&CiRow> {
        self.rows.iter().find(|r| r.family == family)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_csv(
            out,
            &Self::HEADER,
            self.rows.iter().map(|r| {
                vec![
                    r.family.clone(),
                    r.scale.to_string(),
                    r.lower.to_string(),
                    r.upper.to_string(),
                    r.half_width.to_string(),
                    r.analytic_half_width.to_string(),
                    r.samples.to_string(),
                ]
            }),
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(create(path)?)
    }
}

pub const MIN_CI_SAMPLES: usize = 100_000;
const CHUNK: usize = 1 << 14;

/// Draws `trials` samples in parallel, `CHUNK` at a time on streams derived
/// from `rng`. The output does not depend on the thread count.
pub fn draw<F>(trials: usize, rng: &RandomSource, sample: F) -> Vec<f64>
where
    F: Fn(&mut RandomSource) -> f64 + Sync,
{
    let chunks = trials.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut r = rng.derive(c as u64);
            let len = CHUNK.min(trials - c * CHUNK);
            (0..len).map(|_| sample(&mut r)).collect::<Vec<_>>()
        })
        .collect()
}

/// Type-7 empirical quantile of sorted data.
pub fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn run_ci_table(epsilon: f64, sensitivity: f64, trials: usize, seed: u64) -> Result<CiTable> {
    if trials < MIN_CI_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "interval estimates need at least {MIN_CI_SAMPLES} samples, got {trials}"
        )));
    }
    let root = RandomSource::new(seed);
    let laplace = LaplaceParams::calibrated(sensitivity, epsilon)?;
    let g2 = AdmissibleNoiseParams::calibrated(2.0, sensitivity, epsilon)?;
    let g3 = AdmissibleNoiseParams::calibrated(3.0, sensitivity, epsilon)?;
    let interval = |family: &str, scale: f64, analytic: f64, mut xs: Vec<f64>| {
        xs.sort_unstable_by(f64::total_cmp);
        let lower = empirical_quantile(&xs, 0.025);
        let upper = empirical_quantile(&xs, 0.975);
        CiRow {
            family: family.to_string(),
            scale,
            lower,
            upper,
            half_width: (upper - lower) / 2.0,
            analytic_half_width: analytic,
            samples: xs.len(),
        }
    };
    let rows = vec![
        interval(
            "laplace",
            laplace.scale(),
            laplace.quantile(0.975),
            draw(trials, &root.derive(0), |r| laplace.sample(r)),
        ),
        interval(
            "gamma2",
            g2.scale(),
            g2.quantile(0.975),
            draw(trials, &root.derive(1), |r| g2.sample(r)),
        ),
        interval(
            "gamma3",
            g3.scale(),
            g3.quantile(0.975),
            draw(trials, &root.derive(2), |r| g3.sample(r)),
        ),
    ];
    Ok(CiTable {
        epsilon,
        sensitivity,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseProfile {
    pub x: Vec<f64>,
    pub laplace: Vec<f64>,
    pub gamma2: Vec<f64>,
    pub gamma3: Vec<f64>,
}

impl NoiseProfile {
    pub const HEADER: [&'static str; 4] = ["x", "laplace", "gamma2", "gamma3"];

    pub fn columns(&self) -> [(&'static str, &[f64]); 3] {
        [
            ("laplace", &self.laplace),
            ("gamma2", &self.gamma2),
            ("gamma3", &self.gamma3),
        ]
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_csv(
            out,
            &Self::HEADER,
            (0..self.x.len()).map(|i| {
                [self.x[i], self.laplace[i], self.gamma2[i], self.gamma3[i]]
                    .iter()
                    .map(f64::to_string)
                    .collect()
            }),
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(create(path)?)
    }
}

/// Evenly spaced points on `[-half_width, half_width]`.
pub fn uniform_grid(half_width: f64, points: usize) -> Vec<f64> {
    let step = 2.0 * half_width / (points.max(2) - 1) as f64;
    (0..points.max(2))
        .map(|i| -half_width + i as f64 * step)
        .collect()
}

/// Symmetric grid, `step`-spaced on `[-core, core]` and geometrically spaced
/// beyond it out to `reach`. Wide enough to integrate heavy tails.
pub fn wide_grid(core: f64, step: f64, reach: f64) -> Vec<f64> {
    let mut right: Vec<f64> = (0..)
        .map(|i| i as f64 * step)
        .take_while(|&x| x < core)
        .collect();
    let mut x = core;
    while x < reach {
        right.push(x);
        x *= 1.0 + step / core;
    }
    right.push(reach);
    let mut grid: Vec<f64> = right.iter().skip(1).rev().map(|x| -x).collect();
    grid.extend(right);
    grid
}

pub fn run_noise_profile(epsilon: f64, sensitivity: f64, grid: &[f64]) -> Result<NoiseProfile> {
    if !(sensitivity > 0.0 && sensitivity.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sensitivity must be positive, got {sensitivity}"
        )));
    }
    let laplace = LaplaceParams::calibrated(sensitivity, epsilon)?;
    let g2 = AdmissibleNoiseParams::calibrated(2.0, sensitivity, epsilon)?;
    let g3 = AdmissibleNoiseParams::calibrated(3.0, sensitivity, epsilon)?;
    Ok(NoiseProfile {
        x: grid.to_vec(),
        laplace: grid.iter().map(|&x| laplace.pdf(x)).collect(),
        gamma2: grid.iter().map(|&x| g2.pdf(x)).collect(),
        gamma3: grid.iter().map(|&x| g3.pdf(x)).collect(),
    })
}

pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    let mut sum = CompensatedSum::default();
    for i in 1..x.len().min(y.len()) {
        sum.add(0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]));
    }
    sum.total()
}

/// One line of the exhaustive oracle sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationRow {
    pub check: String,
    pub cases: usize,
    pub failures: usize,
}

impl VerificationRow {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Closed-form sensitivities and privacy ratios against the brute-force
/// oracle on small grids.
pub fn run_verification(epsilon: f64) -> Result<Vec<VerificationRow>> {
    let mut rows = Vec::new();
    let queries = [
        QuerySpec::Median,
        QuerySpec::Maximum,
        QuerySpec::SecondMaximum,
        QuerySpec::RangeCount { lo: 0.5, hi: 1.0 },
    ];
    let mut sens = VerificationRow {
        check: "sensitivity closed form vs brute force".into(),
        cases: 0,
        failures: 0,
    };
    for points in [vec![0.0, 1.0], vec![0.0, 0.5, 1.0]] {
        for n in [3usize, 5] {
            let grid = GridDomain::new(points.clone(), n)?;
            for d in grid.datasets() {
                for q in &queries {
                    let ls = local_sensitivity(&d, q)?.finite().unwrap_or(f64::INFINITY);
                    let ss = smooth_sensitivity(&d, q, epsilon)?
                        .finite()
                        .unwrap_or(f64::INFINITY);
                    let bls = oracle::brute_local_sensitivity(&d, q, &grid)?;
                    let bss = oracle::brute_smooth_sensitivity(&d, q, epsilon, &grid)?;
                    sens.cases += 1;
                    if (ls - bls).abs() > 1e-12 || (ss - bss).abs() > 1e-12 {
                        sens.failures += 1;
                    }
                }
            }
        }
    }
    rows.push(sens);

    let grid = GridDomain::new(vec![0.0, 1.0], 5)?;
    let count = QuerySpec::RangeCount { lo: 0.5, hi: 1.0 };
    let checks: [(&str, QuerySpec, MechanismConfig, usize); 4] = [
        (
            "idp discrete range count, distance 1",
            count.clone(),
            MechanismConfig::idp_local(epsilon, NoiseFamily::DiscreteLaplace)?,
            1,
        ),
        (
            "dp-global discrete range count, distance 1",
            count,
            MechanismConfig::dp_global(epsilon, NoiseFamily::DiscreteLaplace)?,
            1,
        ),
        (
            "idp laplace median, distance 1",
            QuerySpec::Median,
            MechanismConfig::idp_local(epsilon, NoiseFamily::Laplace)?,
            1,
        ),
        (
            "gdp g=2 laplace median, distances 1-2",
            QuerySpec::Median,
            MechanismConfig::gdp(epsilon, 2, NoiseFamily::Laplace)?,
            2,
        ),
    ];
    for (name, q, cfg, distance) in checks {
        let mut row = VerificationRow {
            check: name.into(),
            cases: 0,
            failures: 0,
        };
        for d in grid.datasets() {
            row.cases += 1;
            if !oracle::verify_ratio_bound(&d, &q, &cfg, &grid, distance)?.passed() {
                row.failures += 1;
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::default();
        s.add(1e16);
        for _ in 0..10 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.total(), 10.0);
    }

    #[test]
    fn empirical_quantile_interpolates() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(empirical_quantile(&xs, 0.0), 0.0);
        assert_eq!(empirical_quantile(&xs, 0.5), 2.0);
        assert_eq!(empirical_quantile(&xs, 0.625), 2.5);
        assert_eq!(empirical_quantile(&xs, 1.0), 4.0);
    }

    #[test]
    fn plan_validation() {
        assert!(ExperimentPlan::default().validate().is_ok());
        let bad = |f: fn(&mut ExperimentPlan)| {
            let mut p = ExperimentPlan::default();
            f(&mut p);
            p.validate().is_err()
        };
        assert!(bad(|p| p.trials = 0));
        assert!(bad(|p| p.epsilons.clear()));
        assert!(bad(|p| p.sizes = vec![1]));
        assert!(bad(|p| p.gamma = 1.0));
    }

    #[test]
    fn draw_is_reproducible_and_sized() {
        let rng = RandomSource::new(5);
        let a = draw(CHUNK * 2 + 7, &rng, |r| r.open01());
        let b = draw(CHUNK * 2 + 7, &rng, |r| r.open01());
        assert_eq!(a.len(), CHUNK * 2 + 7);
        assert_eq!(a, b);
    }

    #[test]
    fn noise_profile_values() {
        let grid = [0.0, 50.0];
        let p = run_noise_profile(1.0, 1.0, &grid).unwrap();
        assert_eq!(p.laplace[0], 0.5);
        assert!(p.gamma2[0] > p.gamma2[1] && p.gamma2[1] > 0.0);
        assert!(run_noise_profile(1.0, 0.0, &grid).is_err());
    }

    #[test]
    fn noise_profile_columns_integrate_to_one() {
        let grid = wide_grid(50.0, 0.01, 1e8);
        let p = run_noise_profile(1.0, 1.0, &grid).unwrap();
        for (name, col) in p.columns() {
            let mass = trapezoid(&p.x, col);
            assert!((mass - 1.0).abs() < 1e-3, "{name}: {mass}");
        }
    }

    #[test]
    fn wide_grid_is_symmetric_and_sorted() {
        let g = wide_grid(2.0, 0.5, 100.0);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(g.first(), Some(&-100.0));
        assert_eq!(g.last(), Some(&100.0));
        assert!(g.contains(&0.0));
    }

    #[test]
    fn small_error_grid_shape_and_reproducibility() {
        let plan = ExperimentPlan {
            distributions: vec![SyntheticDistribution::Uniform01],
            sizes: vec![11],
            epsilons: vec![1.0],
            trials: 50,
            ..ExperimentPlan::default()
        };
        let a = run_error_grid(&plan).unwrap();
        assert_eq!(a.rows.len(), 2);
        assert!(a.rows.iter().all(|r| r.mae >= 0.0 && r.trials == 50));
        assert_eq!(a, run_error_grid(&plan).unwrap());
        let mut csv = Vec::new();
        a.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("distribution,n,epsilon,regime,mae,trials\n"));
        assert!(text.contains("uniform01,11,1,idp,"));
    }

    #[test]
    fn ci_table_needs_enough_samples() {
        assert!(run_ci_table(1.0, 1.0, 1000, 1).is_err());
    }

    #[test]
    fn verification_sweep_passes() {
        let rows = run_verification(1.0).unwrap();
        for r in &rows {
            assert!(r.passed(), "{r:?}");
            assert!(r.cases > 0);
        }
    }
}
