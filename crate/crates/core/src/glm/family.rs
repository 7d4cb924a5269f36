//! Per-observation losses of the supported response families.

use serde::{Deserialize, Serialize};

use crate::model::logistic;

/// Natural parameters of exponential responses are kept at or below this.
pub const EXPONENTIAL_ETA_MAX: f64 = -1e-3;
/// Lower bound on IRLS weights for binomial and multinomial fits.
pub const WEIGHT_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum GlmFamily {
    Gaussian,
    Binomial,
    Multinomial { classes: usize },
    Poisson,
    Exponential,
}

impl GlmFamily {
    pub fn name(&self) -> &'static str {
        match self {
            GlmFamily::Gaussian => "gaussian",
            GlmFamily::Binomial => "binomial",
            GlmFamily::Multinomial { .. } => "multinomial",
            GlmFamily::Poisson => "poisson",
            GlmFamily::Exponential => "exponential",
        }
    }

    /// Number of linear predictors (classes for multinomial, else one).
    pub fn responses(&self) -> usize {
        match self {
            GlmFamily::Multinomial { classes } => *classes,
            _ => 1,
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, GlmFamily::Binomial | GlmFamily::Multinomial { .. })
    }

    pub(crate) fn valid_response(&self, y: f64) -> bool {
        match *self {
            GlmFamily::Gaussian => y.is_finite(),
            GlmFamily::Binomial => y == 0.0 || y == 1.0,
            GlmFamily::Multinomial { classes } => {
                y >= 0.0 && y.fract() == 0.0 && (y as usize) < classes
            }
            GlmFamily::Poisson => y >= 0.0 && y.fract() == 0.0 && y.is_finite(),
            GlmFamily::Exponential => y > 0.0 && y.is_finite(),
        }
    }

    /// Loss `ℓ(y, η)` for single-predictor families.
    pub(crate) fn loss(&self, y: f64, eta: f64) -> f64 {
        match self {
            GlmFamily::Gaussian => 0.5 * (y - eta) * (y - eta),
            GlmFamily::Binomial => softplus(eta) - y * eta,
            GlmFamily::Poisson => eta.exp() - y * eta,
            GlmFamily::Exponential => {
                if eta >= 0.0 {
                    f64::INFINITY
                } else {
                    -y * eta - (-eta).ln()
                }
            }
            GlmFamily::Multinomial { .. } => unreachable!("multinomial uses class losses"),
        }
    }

    /// First and second derivative of `ℓ` in `η`.
    pub(crate) fn derivs(&self, y: f64, eta: f64) -> (f64, f64) {
        match self {
            GlmFamily::Gaussian => (eta - y, 1.0),
            GlmFamily::Binomial => {
                let p = logistic(eta);
                (p - y, (p * (1.0 - p)).max(WEIGHT_FLOOR))
            }
            GlmFamily::Poisson => {
                let m = eta.exp();
                (m - y, m)
            }
            GlmFamily::Exponential => (-y - 1.0 / eta, 1.0 / (eta * eta)),
            GlmFamily::Multinomial { .. } => unreachable!("multinomial uses class losses"),
        }
    }

    /// Loss at the saturated fit, so that deviance is `2 (ℓ − ℓ_sat)`.
    pub(crate) fn saturated_loss(&self, y: f64) -> f64 {
        match self {
            GlmFamily::Gaussian | GlmFamily::Binomial | GlmFamily::Multinomial { .. } => 0.0,
            GlmFamily::Poisson => {
                if y > 0.0 {
                    y - y * y.ln()
                } else {
                    0.0
                }
            }
            GlmFamily::Exponential => 1.0 + y.ln(),
        }
    }
}

/// `log(1 + e^x)` without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Multinomial loss `log Σ_k e^{η_k} − η_y`.
pub(crate) fn multinomial_loss(y: usize, eta: &[f64]) -> f64 {
    let m = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + eta.iter().map(|e| (e - m).exp()).sum::<f64>().ln();
    lse - eta[y]
}
