use super::{RandomSource, ShiftRatioBound};
use crate::error::{Error, Result};

/// Discrete Laplace on the integers: `Pr(N = i) = ((1 − α)/(1 + α)) α^|i|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteLaplaceParams {
    alpha: f64,
    ln_alpha: f64,
}

impl DiscreteLaplaceParams {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "discrete Laplace alpha must lie in (0, 1), got {alpha}"
            )));
        }
        Ok(Self {
            alpha,
            ln_alpha: alpha.ln(),
        })
    }

    /// `α = exp(−ε / sensitivity)`.
    pub fn calibrated(sensitivity: f64, epsilon: f64) -> Result<Self> {
        Self::new((-epsilon / sensitivity).exp())
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn pmf(&self, i: i64) -> f64 {
        (1.0 - self.alpha) / (1.0 + self.alpha) * self.alpha.powf(i.unsigned_abs() as f64)
    }

    /// `Pr(N ≤ t)`.
    pub fn cdf(&self, t: i64) -> f64 {
        if t < 0 {
            self.alpha.powf(t.unsigned_abs() as f64) / (1.0 + self.alpha)
        } else {
            1.0 - self.alpha.powf((t as f64) + 1.0) / (1.0 + self.alpha)
        }
    }

    /// `Pr(N ≥ t)`, accurate in the upper tail.
    pub fn survival(&self, t: i64) -> f64 {
        if t > 0 {
            self.alpha.powf(t as f64) / (1.0 + self.alpha)
        } else {
            1.0 - self.cdf(t - 1)
        }
    }

    /// Smallest `t` with `Pr(N ≤ t) ≥ u`.
    pub fn quantile(&self, u: f64) -> i64 {
        let a = self.alpha;
        if u <= a / (1.0 + a) {
            let j = ((u * (1.0 + a)).ln() / self.ln_alpha).floor().max(1.0);
            -(j as i64)
        } else if u <= 1.0 / (1.0 + a) {
            0
        } else {
            let r = ((1.0 - u) * (1.0 + a)).ln() / self.ln_alpha;
            (r.ceil() - 1.0).max(1.0) as i64
        }
    }

    pub fn sample(&self, rng: &mut RandomSource) -> i64 {
        self.quantile(rng.open01())
    }

    /// Half-width `K` such that `Pr(|N| > K) < tail`.
    pub fn support_radius(&self, tail: f64) -> i64 {
        // Pr(|N| > K) = 2 α^{K+1} / (1 + α)
        let k = ((tail * (1.0 + self.alpha) / 2.0).ln() / self.ln_alpha).floor();
        k.max(0.0) as i64
    }
}

impl ShiftRatioBound for DiscreteLaplaceParams {
    /// `α^{−shift}`.
    fn density_ratio_bound(&self, shift: f64) -> f64 {
        (-shift * self.ln_alpha).exp()
    }
}
