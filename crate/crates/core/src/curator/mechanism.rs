use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::ledger::{BudgetLedger, LedgerEntry, PartitionTag};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::noise::{AdmissibleNoiseParams, DiscreteLaplaceParams, LaplaceParams, RandomSource};
use crate::query::{evaluate, QuerySpec, QueryValue};
use crate::sensitivity::{
    global_sensitivity, group_local_sensitivity, local_sensitivity, smooth_sensitivity, Sensitivity,
};

/// Which guarantee an answer is calibrated for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Regime {
    /// ε-DP, Laplace noise scaled to the global sensitivity.
    #[serde(rename = "dp-global")]
    DpGlobal,
    /// ε-DP, heavy-tailed noise scaled to the smooth sensitivity.
    #[serde(rename = "dp-smooth")]
    DpSmooth,
    /// ε-iDP, noise scaled to the local sensitivity.
    #[serde(rename = "idp")]
    IdpLocal,
    /// Group DP with the schedule `ε_i = i·ε`.
    #[serde(rename = "gdp")]
    Gdp,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::DpGlobal => "dp-global",
            Regime::DpSmooth => "dp-smooth",
            Regime::IdpLocal => "idp",
            Regime::Gdp => "gdp",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "dp-global" | "dp_global" => Ok(Regime::DpGlobal),
            "dp-smooth" | "dp_smooth" => Ok(Regime::DpSmooth),
            "idp" | "idp-local" | "idp_local" => Ok(Regime::IdpLocal),
            "gdp" => Ok(Regime::Gdp),
            other => Err(Error::InvalidParameter(format!("unknown regime {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum NoiseFamily {
    #[serde(rename = "laplace")]
    Laplace,
    #[serde(rename = "dlaplace")]
    DiscreteLaplace,
}

impl FromStr for NoiseFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "laplace" => Ok(NoiseFamily::Laplace),
            "dlaplace" | "discrete_laplace" | "discrete-laplace" => {
                Ok(NoiseFamily::DiscreteLaplace)
            }
            other => Err(Error::InvalidParameter(format!(
                "unknown noise family {other:?}"
            ))),
        }
    }
}

/// Mechanism parameters. Build through the per-regime constructors, which
/// only accept the fields that regime uses.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MechanismConfig {
    regime: Regime,
    epsilon: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    noise: Option<NoiseFamily>,
    #[serde(skip_serializing_if = "Option::is_none")]
    group_size: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    epsilon_schedule: Vec<f64>,
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "epsilon must be positive and finite, got {epsilon}"
        )))
    }
}

impl MechanismConfig {
    pub fn dp_global(epsilon: f64, noise: NoiseFamily) -> Result<Self> {
        check_epsilon(epsilon)?;
        Ok(Self {
            regime: Regime::DpGlobal,
            epsilon,
            gamma: None,
            noise: Some(noise),
            group_size: None,
            epsilon_schedule: Vec::new(),
        })
    }

    pub fn dp_smooth(epsilon: f64, gamma: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        if !(gamma > 1.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be a finite number greater than 1, got {gamma}"
            )));
        }
        Ok(Self {
            regime: Regime::DpSmooth,
            epsilon,
            gamma: Some(gamma),
            noise: None,
            group_size: None,
            epsilon_schedule: Vec::new(),
        })
    }

    pub fn idp_local(epsilon: f64, noise: NoiseFamily) -> Result<Self> {
        check_epsilon(epsilon)?;
        Ok(Self {
            regime: Regime::IdpLocal,
            epsilon,
            gamma: None,
            noise: Some(noise),
            group_size: None,
            epsilon_schedule: Vec::new(),
        })
    }

    pub fn gdp(epsilon: f64, group_size: usize, noise: NoiseFamily) -> Result<Self> {
        check_epsilon(epsilon)?;
        if group_size == 0 {
            return Err(Error::InvalidParameter(
                "group size must be at least 1".into(),
            ));
        }
        Ok(Self {
            regime: Regime::Gdp,
            epsilon,
            gamma: None,
            noise: Some(noise),
            group_size: Some(group_size),
            epsilon_schedule: (1..=group_size).map(|i| i as f64 * epsilon).collect(),
        })
    }

    /// Builds a config from loosely specified parts, e.g. CLI flags.
    pub fn from_parts(
        regime: Regime,
        epsilon: f64,
        gamma: Option<f64>,
        noise: Option<NoiseFamily>,
        group_size: Option<usize>,
    ) -> Result<Self> {
        let unused = |what: &str| {
            Err(Error::InvalidParameter(format!(
                "{what} does not apply to regime {regime}"
            )))
        };
        match regime {
            Regime::DpSmooth => {
                if noise.is_some() {
                    return unused("noise family");
                }
                if group_size.is_some() {
                    return unused("group size");
                }
                Self::dp_smooth(epsilon, gamma.unwrap_or(3.0))
            }
            _ if gamma.is_some() => unused("gamma"),
            Regime::Gdp => Self::gdp(
                epsilon,
                group_size
                    .ok_or_else(|| Error::InvalidParameter("gdp needs a group size".into()))?,
                noise.unwrap_or(NoiseFamily::Laplace),
            ),
            _ if group_size.is_some() => unused("group size"),
            Regime::DpGlobal => Self::dp_global(epsilon, noise.unwrap_or(NoiseFamily::Laplace)),
            Regime::IdpLocal => Self::idp_local(epsilon, noise.unwrap_or(NoiseFamily::Laplace)),
        }
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    pub fn noise(&self) -> Option<NoiseFamily> {
        self.noise
    }

    pub fn group_size(&self) -> Option<usize> {
        self.group_size
    }

    /// `ε_i = i·ε` for `i = 1..=g` (gdp only; empty otherwise).
    pub fn epsilon_schedule(&self) -> &[f64] {
        &self.epsilon_schedule
    }

    /// Ratio bound exponent the mechanism promises at `distance`.
    pub fn promised_epsilon(&self, distance: usize) -> f64 {
        match self.regime {
            Regime::Gdp => distance as f64 * self.epsilon,
            _ => self.epsilon,
        }
    }
}

/// Noise distribution chosen for one answer.
#[derive(Debug, Clone, PartialEq)]
pub enum CalibratedNoise {
    /// Zero sensitivity: the exact value is released.
    Exact,
    Laplace(LaplaceParams),
    DiscreteLaplace(DiscreteLaplaceParams),
    Admissible(AdmissibleNoiseParams),
}

/// A calibrated but not yet randomized answer.
#[derive(Debug, Clone)]
pub struct PreparedAnswer {
    pub query: QuerySpec,
    pub config: MechanismConfig,
    pub exact: QueryValue,
    pub sensitivity_used: f64,
    pub noise: CalibratedNoise,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum AnswerValue {
    Real(f64),
    Integer(i64),
    Vector(Vec<f64>),
    IntegerVector(Vec<i64>),
}

impl AnswerValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            AnswerValue::Real(v) => Some(*v),
            AnswerValue::Integer(v) => Some(*v as f64),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoisyAnswer {
    pub value: AnswerValue,
    pub query: QuerySpec,
    pub mechanism: MechanismConfig,
    pub sensitivity_used: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

fn required(s: Sensitivity, regime: &'static str, what: &'static str) -> Result<f64> {
    s.finite()
        .ok_or(Error::UnboundedSensitivity { regime, what })
}

/// Computes `f(D)` and the noise distribution for `cfg`, without drawing.
pub fn prepare(d: &Dataset, q: &QuerySpec, cfg: &MechanismConfig) -> Result<PreparedAnswer> {
    if cfg.noise == Some(NoiseFamily::DiscreteLaplace) && !q.is_integer_valued() {
        return Err(Error::InvalidParameter(format!(
            "discrete Laplace noise needs an integer-valued query, {q} is real-valued"
        )));
    }
    let exact = evaluate(d, q)?;
    let eps = cfg.epsilon;
    let per_component = match cfg.regime {
        Regime::DpGlobal => required(
            global_sensitivity(q, d.bounds(), d.len()),
            "dp-global",
            "global",
        )?,
        Regime::DpSmooth => {
            let gamma = cfg.gamma.expect("dp-smooth config carries gamma");
            required(
                smooth_sensitivity(d, q, eps / gamma)?,
                "dp-smooth",
                "smooth",
            )?
        }
        Regime::IdpLocal => required(local_sensitivity(d, q)?, "idp", "local")?,
        Regime::Gdp => {
            let g = cfg.group_size.expect("gdp config carries a group size");
            let ladder = group_local_sensitivity(d, q, g)?;
            let mut worst: f64 = 0.0;
            for (i, s) in ladder.per_distance.iter().enumerate() {
                worst = worst.max(required(*s, "gdp", "group-local")? / (i + 1) as f64);
            }
            worst
        }
    };
    // one moved record leaves one bin and enters another
    let sensitivity_used = if q.bins().is_some() {
        2.0 * per_component
    } else {
        per_component
    };

    let noise = if sensitivity_used == 0.0 {
        CalibratedNoise::Exact
    } else {
        match (cfg.regime, cfg.noise) {
            (Regime::DpSmooth, _) => {
                CalibratedNoise::Admissible(AdmissibleNoiseParams::calibrated(
                    cfg.gamma.expect("dp-smooth config carries gamma"),
                    sensitivity_used,
                    eps,
                )?)
            }
            (_, Some(NoiseFamily::DiscreteLaplace)) => CalibratedNoise::DiscreteLaplace(
                DiscreteLaplaceParams::calibrated(sensitivity_used, eps)?,
            ),
            _ => CalibratedNoise::Laplace(LaplaceParams::calibrated(sensitivity_used, eps)?),
        }
    };

    Ok(PreparedAnswer {
        query: q.clone(),
        config: cfg.clone(),
        exact,
        sensitivity_used,
        noise,
    })
}

impl PreparedAnswer {
    /// Ledger entries for this answer: one whole-dataset charge, or one
    /// charge per histogram bin in a family of its own.
    pub fn charges(&self) -> Vec<LedgerEntry> {
        let query = self.query.to_string();
        let eps = self.config.epsilon;
        match self.query.bins() {
            Some(bins) => (0..bins)
                .map(|b| {
                    LedgerEntry::new(&query, eps, PartitionTag::part(&query, format!("bin{b}")))
                })
                .collect(),
            None => vec![LedgerEntry::new(query, eps, PartitionTag::Whole)],
        }
    }

    pub fn noise_scale(&self) -> Option<f64> {
        match &self.noise {
            CalibratedNoise::Exact => Some(0.0),
            CalibratedNoise::Laplace(p) => Some(p.scale()),
            CalibratedNoise::Admissible(p) => Some(p.scale()),
            CalibratedNoise::DiscreteLaplace(_) => None,
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match &self.noise {
            CalibratedNoise::DiscreteLaplace(p) => Some(p.alpha()),
            _ => None,
        }
    }

    /// Adds independent noise to every component of `f(D)`.
    pub fn sample(&self, rng: &mut RandomSource) -> NoisyAnswer {
        let parts = self.exact.components();
        let value = match &self.noise {
            CalibratedNoise::DiscreteLaplace(p) => {
                let ints: Vec<i64> = parts.iter().map(|&v| v as i64 + p.sample(rng)).collect();
                match self.exact {
                    QueryValue::Scalar(_) => AnswerValue::Integer(ints[0]),
                    QueryValue::Vector(_) => AnswerValue::IntegerVector(ints),
                }
            }
            noise => {
                let reals: Vec<f64> = parts
                    .iter()
                    .map(|&v| match noise {
                        CalibratedNoise::Exact => v,
                        CalibratedNoise::Laplace(p) => v + p.sample(rng),
                        CalibratedNoise::Admissible(p) => v + p.sample(rng),
                        CalibratedNoise::DiscreteLaplace(_) => unreachable!(),
                    })
                    .collect();
                match self.exact {
                    QueryValue::Scalar(_) => AnswerValue::Real(reals[0]),
                    QueryValue::Vector(_) => AnswerValue::Vector(reals),
                }
            }
        };
        NoisyAnswer {
            value,
            query: self.query.clone(),
            mechanism: self.config.clone(),
            sensitivity_used: self.sensitivity_used,
            noise_scale: self.noise_scale(),
            alpha: self.alpha(),
        }
    }
}

/// Calibrated answer without budget accounting.
pub fn release(
    d: &Dataset,
    q: &QuerySpec,
    cfg: &MechanismConfig,
    rng: &mut RandomSource,
) -> Result<NoisyAnswer> {
    Ok(prepare(d, q, cfg)?.sample(rng))
}

/// Calibrated answer charged to `ledger`. On any error the ledger is left
/// unchanged.
pub fn answer(
    d: &Dataset,
    q: &QuerySpec,
    cfg: &MechanismConfig,
    rng: &mut RandomSource,
    ledger: &mut BudgetLedger,
) -> Result<NoisyAnswer> {
    let prepared = prepare(d, q, cfg)?;
    ledger.try_charge_all(&prepared.charges())?;
    Ok(prepared.sample(rng))
}
