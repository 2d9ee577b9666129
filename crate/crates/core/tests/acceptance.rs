//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use idp_core::bench::{self, ExperimentPlan};
use idp_core::curator::CalibratedNoise;
use idp_core::oracle::{self, GridDomain, IntervalMap};
use idp_core::{
    local_sensitivity, prepare, smooth_sensitivity, BudgetLedger, Dataset, DiscreteLaplaceParams,
    DomainBounds, LaplaceParams, MechanismConfig, NoiseFamily, PartitionTag, QuerySpec,
    RandomSource, Regime, SyntheticDistribution,
};
use rand::Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
        }
    }
}

fn within(value: f64, target: f64, rel: f64) -> bool {
    (value - target).abs() <= rel * target.abs()
}

fn binary(zeros: usize, ones: usize) -> Dataset {
    let mut v = vec![0.0; zeros];
    v.extend(std::iter::repeat_n(1.0, ones));
    Dataset::new("binary", v, DomainBounds::closed(0.0, 1.0).unwrap()).unwrap()
}

fn ci_table() -> Outcome {
    let start = Instant::now();
    let t = bench::run_ci_table(1.0, 1.0, 1_000_000, bench::DEFAULT_SEED).unwrap();
    let elapsed = start.elapsed();
    let targets = [("laplace", 3.0), ("gamma2", 101.7), ("gamma3", 34.2)];
    let mut ok = elapsed < Duration::from_secs(30);
    let mut parts = Vec::new();
    for (family, target) in targets {
        let hw = t.row(family).unwrap().half_width;
        ok &= within(hw, target, 0.02);
        parts.push(format!("{family} {hw:.3} (target {target})"));
    }
    Outcome::new(
        ok,
        format!("{}; {:.1}s", parts.join(", "), elapsed.as_secs_f64()),
    )
}

fn error_grid() -> Outcome {
    let start = Instant::now();
    let plan = ExperimentPlan::default();
    let t = bench::run_error_grid(&plan).unwrap();
    let elapsed = start.elapsed();
    let mut ok = elapsed < Duration::from_secs(300);
    let mut worst_ratio = 0.0f64;
    for &dist in &plan.distributions {
        for &n in &plan.sizes {
            for &eps in &plan.epsilons {
                let idp = t.get(dist, n, eps, Regime::IdpLocal).unwrap().mae;
                let dp = t.get(dist, n, eps, Regime::DpSmooth).unwrap().mae;
                worst_ratio = worst_ratio.max(idp / dp);
                if idp >= dp {
                    ok = false;
                    eprintln!("  ordering violated: {dist} n={n} eps={eps}: idp {idp} dp {dp}");
                }
            }
        }
    }
    let mut uniform = Vec::new();
    for &n in &plan.sizes {
        let idp = t
            .get(SyntheticDistribution::Uniform01, n, 1.0, Regime::IdpLocal)
            .unwrap()
            .mae;
        ok &= idp < 1.0;
        uniform.push(format!("{idp:.4}"));
    }
    Outcome::new(
        ok,
        format!(
            "{} cells, max MAE(idp)/MAE(dp) = {worst_ratio:.4}; uniform01 eps=1 idp MAE [{}]; {:.1}s",
            t.rows.len() / 2,
            uniform.join(", "),
            elapsed.as_secs_f64()
        ),
    )
}

fn closed_form_matches(d: &Dataset, q: &QuerySpec, grid: &GridDomain, beta: f64) -> bool {
    let ls = local_sensitivity(d, q).unwrap().finite().unwrap();
    let ss = smooth_sensitivity(d, q, beta).unwrap().finite().unwrap();
    let bls = oracle::brute_local_sensitivity(d, q, grid).unwrap();
    let bss = oracle::brute_smooth_sensitivity(d, q, beta, grid).unwrap();
    (ls - bls).abs() <= 1e-12 && (ss - bss).abs() <= 1e-12
}

fn oracle_equivalence() -> Outcome {
    let betas = [0.1, 0.5, 1.0];
    let small_queries = [
        QuerySpec::Median,
        QuerySpec::Maximum,
        QuerySpec::SecondMaximum,
        QuerySpec::RangeCount { lo: 0.5, hi: 1.0 },
    ];
    let (mut cases, mut failures) = (0usize, 0usize);
    for points in [vec![0.0, 1.0], vec![0.0, 0.5, 1.0]] {
        for n in [3, 5] {
            let grid = GridDomain::new(points.clone(), n).unwrap();
            for d in grid.datasets() {
                for q in &small_queries {
                    for &beta in &betas {
                        cases += 1;
                        if !closed_form_matches(&d, q, &grid, beta) {
                            failures += 1;
                        }
                    }
                }
            }
        }
    }
    let points = vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
    let grid = GridDomain::new(points.clone(), 7).unwrap();
    let large_queries = [
        QuerySpec::Median,
        QuerySpec::Maximum,
        QuerySpec::SecondMaximum,
        QuerySpec::RangeCount { lo: 0.3, hi: 0.7 },
    ];
    let mut rng = RandomSource::new(7);
    for _ in 0..100 {
        let values = (0..7)
            .map(|_| points[rng.random_range(0..points.len())])
            .collect();
        let d = grid.dataset(values).unwrap();
        for q in &large_queries {
            cases += 1;
            if !closed_form_matches(&d, q, &grid, 0.5) {
                failures += 1;
            }
        }
    }
    Outcome::new(
        failures == 0,
        format!("{cases} cases, {failures} mismatches"),
    )
}

fn idp_ratio() -> Outcome {
    let grid = GridDomain::new(vec![0.0, 1.0], 5).unwrap();
    let q = QuerySpec::RangeCount { lo: 0.5, hi: 1.0 };
    let (mut cases, mut failures, mut worst) = (0, 0, 0.0f64);
    for eps in [0.25, 0.5, 1.0] {
        let cfg = MechanismConfig::idp_local(eps, NoiseFamily::DiscreteLaplace).unwrap();
        for d in grid.datasets() {
            let r = oracle::verify_ratio_bound(&d, &q, &cfg, &grid, 1).unwrap();
            cases += 1;
            worst = worst.max(r.worst_ratio().ln() / eps);
            if !r.passed() {
                failures += 1;
            }
        }
    }
    Outcome::new(
        failures == 0,
        format!("{cases} datasets, {failures} failures, worst ln(ratio)/eps = {worst:.12}"),
    )
}

fn gdp_ratio() -> Outcome {
    let grid = GridDomain::new(vec![0.0, 1.0], 5).unwrap();
    let eps = 0.5;
    let gdp = MechanismConfig::gdp(eps, 2, NoiseFamily::Laplace).unwrap();
    let idp = MechanismConfig::idp_local(eps, NoiseFamily::Laplace).unwrap();
    let gdp_counts = MechanismConfig::gdp(eps, 2, NoiseFamily::DiscreteLaplace).unwrap();
    let count = QuerySpec::RangeCount { lo: 0.5, hi: 1.0 };
    let (mut cases, mut failures, mut control) = (0, 0, 0);
    for d in grid.datasets() {
        for (q, cfg) in [(&QuerySpec::Median, &gdp), (&count, &gdp_counts)] {
            cases += 1;
            if !oracle::verify_ratio_bound(&d, q, cfg, &grid, 2)
                .unwrap()
                .passed()
            {
                failures += 1;
            }
        }
        let r = oracle::verify_ratio_bound(&d, &QuerySpec::Median, &idp, &grid, 2).unwrap();
        if !r.checks[1].passed {
            control += 1;
        }
    }
    Outcome::new(
        failures == 0 && control > 0,
        format!(
            "{cases} gdp checks, {failures} failures; idp fails distance 2 on {control} datasets"
        ),
    )
}

fn worked_examples() -> Outcome {
    let ls = |d: &Dataset| {
        local_sensitivity(d, &QuerySpec::Median)
            .unwrap()
            .finite()
            .unwrap()
    };
    let ls_a = ls(&binary(4, 1));
    let ls_b = ls(&binary(3, 2));
    let eps = 0.8;
    let d = binary(9, 90);
    let idp = prepare(
        &d,
        &QuerySpec::Median,
        &MechanismConfig::idp_local(eps, NoiseFamily::Laplace).unwrap(),
    )
    .unwrap();
    let dp = prepare(
        &d,
        &QuerySpec::Median,
        &MechanismConfig::dp_global(eps, NoiseFamily::Laplace).unwrap(),
    )
    .unwrap();
    let idp_scale = idp.noise_scale().unwrap_or(f64::NAN);
    let dp_scale = dp.noise_scale().unwrap_or(f64::NAN);
    let ok = ls_a == 0.0
        && ls_b == 1.0
        && idp.exact.as_scalar() == Some(1.0)
        && idp_scale == 0.0
        && matches!(idp.noise, CalibratedNoise::Exact)
        && within(dp_scale, 1.0 / eps, 1e-12);
    Outcome::new(
        ok,
        format!("LS {{0,0,0,0,1}} = {ls_a}, LS {{0,0,0,1,1}} = {ls_b}; 99 records: idp scale {idp_scale}, dp-global scale {dp_scale}"),
    )
}

/// Spend under sequential (sum) and parallel (max within a family) composition.
fn model_spend(entries: &[(Option<(u8, u8)>, f64)]) -> f64 {
    let mut whole = 0.0;
    let mut parts: BTreeMap<(u8, u8), f64> = BTreeMap::new();
    for &(tag, eps) in entries {
        match tag {
            None => whole += eps,
            Some(k) => *parts.entry(k).or_default() += eps,
        }
    }
    let mut family_max: BTreeMap<u8, f64> = BTreeMap::new();
    for ((f, _), v) in parts {
        let m = family_max.entry(f).or_default();
        *m = m.max(v);
    }
    whole + family_max.values().sum::<f64>()
}

fn ledger() -> Outcome {
    let mut rng = RandomSource::new(11);
    let mut violations = 0;
    let mut rejected = 0;
    for _ in 0..10_000 {
        let total = rng.random_range(0.5..3.0);
        let mut ledger = BudgetLedger::new(total).unwrap();
        let mut accepted: Vec<(Option<(u8, u8)>, f64)> = Vec::new();
        for _ in 0..rng.random_range(1..30) {
            let eps = rng.random_range(0.01..0.6);
            let tag = rng
                .random_bool(0.5)
                .then(|| (rng.random_range(0..3u8), rng.random_range(0..4u8)));
            let partition = match tag {
                None => PartitionTag::Whole,
                Some((f, p)) => PartitionTag::part(format!("f{f}"), format!("p{p}")),
            };
            let mut candidate = accepted.clone();
            candidate.push((tag, eps));
            let fits = model_spend(&candidate) <= total;
            match ledger.try_charge("q", eps, partition) {
                Ok(()) => {
                    if !fits {
                        violations += 1;
                    }
                    accepted = candidate;
                }
                Err(_) => {
                    rejected += 1;
                    if fits {
                        violations += 1;
                    }
                }
            }
            if ledger.spent() > total || (ledger.spent() - model_spend(&accepted)).abs() > 1e-12 {
                violations += 1;
            }
        }
    }
    let mut parallel = BudgetLedger::new(1.0).unwrap();
    for p in ["a", "b", "c"] {
        parallel
            .try_charge("q", 0.4, PartitionTag::part("bins", p))
            .unwrap();
    }
    let mut sequential = BudgetLedger::new(2.0).unwrap();
    for _ in 0..3 {
        sequential
            .try_charge("q", 0.4, PartitionTag::Whole)
            .unwrap();
    }
    let ok = violations == 0
        && (parallel.spent() - 0.4).abs() < 1e-12
        && (sequential.spent() - 1.2).abs() < 1e-12;
    Outcome::new(
        ok,
        format!(
            "10000 sequences, {rejected} rejections, {violations} violations; disjoint 3x0.4 -> {}, whole 3x0.4 -> {}",
            parallel.spent(),
            sequential.spent()
        ),
    )
}

fn ks_distance(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_unstable_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

fn sampler_fidelity() -> Outcome {
    const DRAWS: usize = 1_000_000;
    let root = RandomSource::new(3);
    let laplace = LaplaceParams::new(0.0, 1.0).unwrap();
    let ks_l = ks_distance(
        bench::draw(DRAWS, &root.derive(0), |r| laplace.sample(r)),
        |x| laplace.cdf(x),
    );
    let mut ok = ks_l < 0.002;
    let mut detail = vec![format!("KS laplace {ks_l:.5}")];
    for (i, gamma) in [2.0, 3.0].into_iter().enumerate() {
        let p = idp_core::AdmissibleNoiseParams::new(gamma, 1.0).unwrap();
        let ks = ks_distance(
            bench::draw(DRAWS, &root.derive(1 + i as u64), |r| p.sample(r)),
            |x| p.cdf(x),
        );
        ok &= ks < 0.005;
        detail.push(format!("KS gamma{gamma} {ks:.5}"));
    }
    let dl = DiscreteLaplaceParams::new(0.5).unwrap();
    let draws = bench::draw(DRAWS, &root.derive(9), |r| dl.sample(r) as f64);
    let mut worst = 0.0f64;
    for i in -5..=5i64 {
        let freq = draws.iter().filter(|&&x| x == i as f64).count() as f64 / DRAWS as f64;
        worst = worst.max((freq - dl.pmf(i)).abs());
    }
    ok &= worst <= 0.002;
    detail.push(format!("discrete max |freq - pmf| {worst:.5}"));
    Outcome::new(ok, detail.join(", "))
}

fn post_processing_and_mixtures() -> Outcome {
    let grid = GridDomain::new(vec![0.0, 1.0], 5).unwrap();
    let q = QuerySpec::RangeCount { lo: 0.5, hi: 1.0 };
    let maps = [
        ("round3", IntervalMap::rounding(3, -9, 9).unwrap()),
        ("clamp", IntervalMap::clamp(0, 5).unwrap()),
    ];
    let (mut cases, mut failures) = (0, 0);
    for eps in [0.5, 1.0] {
        let bound = f64::exp(eps) * (1.0 + oracle::RATIO_TOLERANCE);
        let idp = MechanismConfig::idp_local(eps, NoiseFamily::DiscreteLaplace).unwrap();
        let other = MechanismConfig::dp_global(eps / 2.0, NoiseFamily::DiscreteLaplace).unwrap();
        for d in grid.datasets() {
            for (_, map) in &maps {
                cases += 1;
                if oracle::post_processed_ratio(&d, &q, &idp, &grid, map).unwrap() > bound {
                    failures += 1;
                }
            }
            for p in [0.0, 0.3, 1.0] {
                cases += 1;
                if oracle::mixture_ratio(&d, &q, &idp, &other, p, &grid).unwrap() > bound {
                    failures += 1;
                }
            }
        }
    }
    Outcome::new(
        failures == 0,
        format!("{cases} pmf checks, {failures} failures"),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("ci-table reproduction", ci_table),
        ("error-grid ordering", error_grid),
        ("sensitivity oracle equivalence", oracle_equivalence),
        ("idp ratio verification", idp_ratio),
        ("gdp verification", gdp_ratio),
        ("worked examples", worked_examples),
        ("composition ledger", ledger),
        ("sampler fidelity", sampler_fidelity),
        ("post-processing and mixtures", post_processing_and_mixtures),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let outcome = run();
        let status = if outcome.passed { "PASS" } else { "FAIL" };
        println!("{status} {name}: {}", outcome.detail);
        if !outcome.passed {
            failed += 1;
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
