use rand::Rng;

use super::{RandomSource, ShiftRatioBound};
use crate::error::{Error, Result};

/// Laplace distribution with density `(1/2b) exp(−|x − μ|/b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceParams {
    location: f64,
    scale: f64,
}

impl LaplaceParams {
    pub fn new(location: f64, scale: f64) -> Result<Self> {
        if !location.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "Laplace location {location} is not finite"
            )));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "Laplace scale must be positive and finite, got {scale}"
            )));
        }
        Ok(Self { location, scale })
    }

    /// Zero-centred noise with scale `sensitivity / epsilon`.
    pub fn calibrated(sensitivity: f64, epsilon: f64) -> Result<Self> {
        Self::new(0.0, sensitivity / epsilon)
    }

    pub fn location(&self) -> f64 {
        self.location
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn pdf(&self, x: f64) -> f64 {
        (-(x - self.location).abs() / self.scale).exp() / (2.0 * self.scale)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let z = (x - self.location) / self.scale;
        if z < 0.0 {
            0.5 * z.exp()
        } else {
            1.0 - 0.5 * (-z).exp()
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        if p < 0.5 {
            self.location + self.scale * (2.0 * p).ln()
        } else {
            self.location - self.scale * (2.0 * (1.0 - p)).ln()
        }
    }

    /// Random sign times the inverse tail `|X − μ| = −b ln q`.
    pub fn sample(&self, rng: &mut RandomSource) -> f64 {
        let magnitude = -self.scale * rng.open01().ln();
        if rng.random::<bool>() {
            self.location + magnitude
        } else {
            self.location - magnitude
        }
    }
}

impl ShiftRatioBound for LaplaceParams {
    /// `exp(shift / b)`.
    fn density_ratio_bound(&self, shift: f64) -> f64 {
        (shift / self.scale).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_scale() {
        assert!(LaplaceParams::new(0.0, 0.0).is_err());
        assert!(LaplaceParams::new(0.0, -1.0).is_err());
        assert!(LaplaceParams::new(0.0, f64::NAN).is_err());
    }

    #[test]
    fn density_at_mode() {
        assert_eq!(LaplaceParams::new(0.0, 1.0).unwrap().pdf(0.0), 0.5);
    }

    #[test]
    fn quantile_inverts_cdf() {
        let l = LaplaceParams::new(0.3, 2.0).unwrap();
        for p in [1e-9, 0.01, 0.3, 0.5, 0.77, 0.999] {
            assert!((l.cdf(l.quantile(p)) - p).abs() < 1e-12);
        }
        // 95% central interval of Laplace(1) is ±ln 20
        let unit = LaplaceParams::new(0.0, 1.0).unwrap();
        assert!((unit.quantile(0.975) - 20f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn ratio_bound_examples() {
        let unit = LaplaceParams::new(0.0, 1.0).unwrap();
        assert!((unit.density_ratio_bound(1.0) - std::f64::consts::E).abs() < 1e-12);
        let (ls, eps) = (0.4, 0.7);
        let l = LaplaceParams::calibrated(ls, eps).unwrap();
        assert!((l.density_ratio_bound(ls) - eps.exp()).abs() < 1e-12);
    }

    #[test]
    fn pointwise_ratio_never_exceeds_bound() {
        let l = LaplaceParams::new(0.0, 0.5).unwrap();
        let shift = 0.8;
        let bound = l.density_ratio_bound(shift);
        let shifted = LaplaceParams::new(shift, 0.5).unwrap();
        for i in -200..=200 {
            let x = i as f64 * 0.05;
            let r = l.pdf(x) / shifted.pdf(x);
            assert!(r <= bound * (1.0 + 1e-12) && r >= (1.0 - 1e-12) / bound);
        }
    }
}
