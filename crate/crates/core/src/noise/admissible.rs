//! Heavy-tailed noise with density `c_γ / (1 + |z|^γ)`, `γ > 1`.
//!
//! The substitution `w = |z|^γ / (1 + |z|^γ)` maps `|Z|` to a
//! `Beta(1/γ, 1 − 1/γ)` variable, so both tails of the CDF are regularized
//! incomplete beta functions. Quantiles are found by Newton iteration on
//! `ln P(|Z| > z)` in `ln z`, bracketed by a table tabulated once per `γ`.
//! For `γ = 2` the family is the standard Cauchy and the quantile is analytic.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;
use statrs::function::beta::beta_reg;

use super::RandomSource;
use crate::error::{Error, Result};

const TABLE_POINTS: usize = 1024;
const LN_Z_MIN: f64 = -30.0;

/// `c_γ` such that `c_γ / (1 + |z|^γ)` integrates to one.
pub fn normalizing_constant(gamma: f64) -> f64 {
    gamma * (PI / gamma).sin() / (2.0 * PI)
}

/// Unit-scale member of the family for one `γ`, with its quantile table.
pub struct AdmissibleShape {
    gamma: f64,
    a: f64,
    norm: f64,
    // (ln z, ln P(|Z| > z)), ln z ascending
    table: Vec<(f64, f64)>,
}

impl fmt::Debug for AdmissibleShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AdmissibleShape")
            .field("gamma", &self.gamma)
            .field("norm", &self.norm)
            .finish_non_exhaustive()
    }
}

impl AdmissibleShape {
    fn new(gamma: f64) -> Self {
        let mut shape = Self {
            gamma,
            a: 1.0 / gamma,
            norm: normalizing_constant(gamma),
            table: Vec::new(),
        };
        let ln_z_max = 690.0 / gamma;
        shape.table = (0..TABLE_POINTS)
            .map(|j| {
                let t = LN_Z_MIN + (ln_z_max - LN_Z_MIN) * j as f64 / (TABLE_POINTS - 1) as f64;
                (t, shape.abs_tail(t.exp()).ln())
            })
            .collect();
        shape
    }

    /// Shared instance for `gamma`, built on first use.
    pub fn get(gamma: f64) -> Arc<AdmissibleShape> {
        static CACHE: OnceLock<Mutex<HashMap<u64, Arc<AdmissibleShape>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        guard
            .entry(gamma.to_bits())
            .or_insert_with(|| Arc::new(AdmissibleShape::new(gamma)))
            .clone()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn normalizing_constant(&self) -> f64 {
        self.norm
    }

    pub fn density(&self, z: f64) -> f64 {
        self.norm / (1.0 + z.abs().powf(self.gamma))
    }

    /// `P(|Z| ≤ z)` for `z ≥ 0`.
    pub fn abs_cdf(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return 0.0;
        }
        let zg = z.powf(self.gamma);
        if zg <= 1.0 {
            beta_reg(self.a, 1.0 - self.a, zg / (1.0 + zg))
        } else {
            1.0 - self.abs_tail(z)
        }
    }

    /// `P(|Z| > z)` for `z ≥ 0`, accurate far into the tail.
    pub fn abs_tail(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return 1.0;
        }
        let zg = z.powf(self.gamma);
        if zg.is_infinite() {
            return 0.0;
        }
        if zg <= 1.0 {
            1.0 - beta_reg(self.a, 1.0 - self.a, zg / (1.0 + zg))
        } else {
            beta_reg(1.0 - self.a, self.a, 1.0 / (1.0 + zg))
        }
    }

    pub fn cdf(&self, z: f64) -> f64 {
        if z < 0.0 {
            0.5 * self.abs_tail(-z)
        } else {
            0.5 + 0.5 * self.abs_cdf(z)
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        if p < 0.5 {
            -self.abs_tail_quantile(2.0 * p)
        } else {
            self.abs_tail_quantile(2.0 * (1.0 - p))
        }
    }

    /// The `z ≥ 0` with `P(|Z| > z) = q`, for `q ∈ (0, 1]`.
    pub fn abs_tail_quantile(&self, q: f64) -> f64 {
        if q >= 1.0 {
            return 0.0;
        }
        if q <= 0.0 {
            return f64::INFINITY;
        }
        if self.gamma == 2.0 {
            return 1.0 / (0.5 * PI * q).tan();
        }
        let target = q.ln();
        let (first, last) = (self.table[0], self.table[TABLE_POINTS - 1]);
        if target >= first.1 {
            // |Z| below e^-30: the density is flat at c_γ there
            return (1.0 - q) / (2.0 * self.norm);
        }
        if target <= last.1 {
            // beyond the table the tail is c_γ·2 z^{1−γ}/(γ − 1) to double precision
            let g = self.gamma;
            return (2.0 * self.norm / ((g - 1.0) * q)).powf(1.0 / (g - 1.0));
        }
        // table is decreasing in its second coordinate
        let j = self.table.partition_point(|&(_, lt)| lt > target);
        let (mut lo, mut hi) = (self.table[j - 1].0, self.table[j].0);
        let (llo, lhi) = (self.table[j - 1].1, self.table[j].1);
        let mut t = lo + (hi - lo) * (llo - target) / (llo - lhi);
        for _ in 0..100 {
            let z = t.exp();
            let tail = self.abs_tail(z);
            let g = tail.ln() - target;
            if g > 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            // d ln T / d ln z = −z f_{|Z|}(z) / T(z)
            let slope = -z * 2.0 * self.density(z) / tail;
            let mut next = t - g / slope;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            let done = (next - t).abs() <= 1e-15 * t.abs().max(1.0);
            t = next;
            if done || hi - lo <= 1e-15 * t.abs().max(1.0) {
                break;
            }
        }
        t.exp()
    }
}

/// The heavy-tailed family at scale `scale`: `X = scale · Z`.
#[derive(Debug, Clone)]
pub struct AdmissibleNoiseParams {
    gamma: f64,
    scale: f64,
    shape: Arc<AdmissibleShape>,
}

impl PartialEq for AdmissibleNoiseParams {
    fn eq(&self, other: &Self) -> bool {
        self.gamma == other.gamma && self.scale == other.scale
    }
}

impl AdmissibleNoiseParams {
    pub fn new(gamma: f64, scale: f64) -> Result<Self> {
        if !(gamma > 1.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be a finite number greater than 1, got {gamma}"
            )));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise scale must be positive and finite, got {scale}"
            )));
        }
        Ok(Self {
            gamma,
            scale,
            shape: AdmissibleShape::get(gamma),
        })
    }

    /// Scale `4γ · S / ε` used with smooth sensitivity `S`.
    pub fn calibrated(gamma: f64, smooth_sensitivity: f64, epsilon: f64) -> Result<Self> {
        Self::new(gamma, 4.0 * gamma * smooth_sensitivity / epsilon)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn shape(&self) -> &AdmissibleShape {
        &self.shape
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.shape.density(x / self.scale) / self.scale
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.shape.cdf(x / self.scale)
    }

    pub fn quantile(&self, p: f64) -> f64 {
        self.scale * self.shape.quantile(p)
    }

    /// Random sign times the inverse tail of `|Z|`.
    pub fn sample(&self, rng: &mut RandomSource) -> f64 {
        let magnitude = self.scale * self.shape.abs_tail_quantile(rng.open01());
        if rng.random::<bool>() {
            magnitude
        } else {
            -magnitude
        }
    }
}
