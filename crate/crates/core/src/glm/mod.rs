//! l1-penalized generalized linear models fitted by coordinate descent.
//!
//! The objective for a penalty level `λ` is
//! `(1/n) Σ ℓ(y_i, η_i) + λ Σ_j w_j |β_j|` with an unpenalized intercept.
//! Non-indicator columns are scaled to unit standard deviation for fitting,
//! so on the original scale column `j` carries the penalty weight
//! `w_j · sd_j` (see [`DesignProblem::effective_weights`]). Coefficients are
//! always reported on the original scale.

mod family;
pub mod select;
mod solver;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use family::{GlmFamily, EXPONENTIAL_ETA_MAX, WEIGHT_FLOOR};
pub use select::{cv_select, ebic_select, CvOptions, CvResult, EbicResult, DEFAULT_EBIC_GAMMA};
pub use solver::{fit_lasso_path, fit_single, SolverOptions};

pub(crate) use family::multinomial_loss;

/// Response and predictors of one penalized regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignProblem {
    /// Column-major predictors, `q` columns of length `n`.
    pub x: Vec<Vec<f64>>,
    pub labels: Vec<String>,
    /// Response; class index for multinomial.
    pub y: Vec<f64>,
    pub family: GlmFamily,
    /// Per-column penalty multipliers (0 leaves a column unpenalized).
    pub penalty_weights: Vec<f64>,
    /// Scale non-indicator columns to unit standard deviation.
    pub standardize: bool,
}

impl DesignProblem {
    /// Unit penalty weights, standardization on.
    pub fn new(x: Vec<Vec<f64>>, y: Vec<f64>, family: GlmFamily) -> Result<Self> {
        let q = x.len();
        let labels = (0..q).map(|j| format!("x{j}")).collect();
        let prob = DesignProblem {
            x,
            labels,
            y,
            family,
            penalty_weights: vec![1.0; q],
            standardize: true,
        };
        prob.validate()?;
        Ok(prob)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        self.labels = labels;
        self.validate()?;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn q(&self) -> usize {
        self.x.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 {
            return Err(Error::InvalidArgument("empty response".into()));
        }
        if let Some((j, c)) = self.x.iter().enumerate().find(|(_, c)| c.len() != n) {
            return Err(Error::InvalidArgument(format!(
                "column {j} has {} rows, response has {n}",
                c.len()
            )));
        }
        if self.labels.len() != self.q() || self.penalty_weights.len() != self.q() {
            return Err(Error::InvalidArgument("labels/weights do not match columns".into()));
        }
        if let Some(w) = self.penalty_weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidArgument(format!("invalid penalty weight {w}")));
        }
        if let Some(v) = self.y.iter().find(|&&v| !self.family.valid_response(v)) {
            return Err(Error::InvalidArgument(format!(
                "response value {v} invalid for {} family",
                self.family.name()
            )));
        }
        if self.x.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite predictor value".into()));
        }
        Ok(())
    }

    /// Centering and scaling applied to each column before fitting. Constant
    /// columns get scale 0 and are held at zero.
    pub fn column_transforms(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n() as f64;
        self.x
            .iter()
            .map(|c| {
                let mean = c.iter().sum::<f64>() / n;
                let var = c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                let indicator = c.iter().all(|&v| v == 0.0 || v == 1.0);
                let scale = if var <= 1e-24 * (1.0 + mean * mean) {
                    0.0
                } else if indicator || !self.standardize {
                    1.0
                } else {
                    var.sqrt()
                };
                (mean, scale)
            })
            .unzip()
    }

    /// Penalty weights on the original coefficient scale.
    pub fn effective_weights(&self) -> Vec<f64> {
        let (_, scale) = self.column_transforms();
        self.penalty_weights
            .iter()
            .zip(scale)
            .map(|(w, s)| w * if s == 0.0 { 1.0 } else { s })
            .collect()
    }

    /// Copy restricted to the given rows.
    pub fn subset(&self, rows: &[usize]) -> DesignProblem {
        DesignProblem {
            x: self
                .x
                .iter()
                .map(|c| rows.iter().map(|&i| c[i]).collect())
                .collect(),
            labels: self.labels.clone(),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            family: self.family,
            penalty_weights: self.penalty_weights.clone(),
            standardize: self.standardize,
        }
    }
}

/// Original-scale coefficients, one intercept and one vector per response
/// (classes for multinomial).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub intercept: Vec<f64>,
    pub beta: Vec<Vec<f64>>,
}

impl Coefficients {
    pub fn zeros(responses: usize, q: usize) -> Self {
        Coefficients {
            intercept: vec![0.0; responses],
            beta: vec![vec![0.0; q]; responses],
        }
    }

    /// Count of nonzero slope entries.
    pub fn nonzero(&self) -> usize {
        self.beta.iter().flatten().filter(|v| **v != 0.0).count()
    }

    /// Columns with a nonzero entry in any response.
    pub fn support(&self) -> Vec<usize> {
        let q = self.beta.first().map_or(0, Vec::len);
        (0..q)
            .filter(|&j| self.beta.iter().any(|b| b[j] != 0.0))
            .collect()
    }

    /// Linear predictors for each response at each row of `x`.
    pub fn linear_predictors(&self, x: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
        self.intercept
            .iter()
            .zip(&self.beta)
            .map(|(&b0, b)| {
                let mut eta = vec![b0; n];
                for (col, &bj) in x.iter().zip(b) {
                    if bj != 0.0 {
                        eta.iter_mut().zip(col).for_each(|(e, v)| *e += bj * v);
                    }
                }
                eta
            })
            .collect()
    }
}

/// One point of a regularization path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub lambda: f64,
    pub coefficients: Coefficients,
    /// `2 Σ (ℓ_i − ℓ_sat,i)` on the training data.
    pub deviance: f64,
    pub nonzero: usize,
    pub outer_iterations: usize,
    pub converged: bool,
    /// Penalized objective never increased across outer iterations.
    pub monotone: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoPath {
    pub lambda_max: f64,
    pub null_deviance: f64,
    pub points: Vec<PathPoint>,
}

impl LassoPath {
    pub fn lambdas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.lambda).collect()
    }
}

/// Mean loss `(1/n) Σ ℓ(y_i, η_i)` at original-scale coefficients.
pub fn loss(prob: &DesignProblem, coef: &Coefficients) -> f64 {
    let n = prob.n();
    let eta = coef.linear_predictors(&prob.x, n);
    mean_loss(prob.family, &prob.y, &eta)
}

pub(crate) fn mean_loss(family: GlmFamily, y: &[f64], eta: &[Vec<f64>]) -> f64 {
    let n = y.len();
    let total: f64 = match family {
        GlmFamily::Multinomial { classes } => {
            let mut e = vec![0.0; classes];
            (0..n)
                .map(|i| {
                    for k in 0..classes {
                        e[k] = eta[k][i];
                    }
                    multinomial_loss(y[i] as usize, &e)
                })
                .sum()
        }
        f => y.iter().zip(&eta[0]).map(|(&yi, &ei)| f.loss(yi, ei)).sum(),
    };
    total / n as f64
}

/// Per-observation derivative of the loss in each linear predictor.
pub(crate) fn loss_derivatives(family: GlmFamily, y: &[f64], eta: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = y.len();
    match family {
        GlmFamily::Multinomial { classes } => {
            let mut g = vec![vec![0.0; n]; classes];
            let mut e = vec![0.0; classes];
            for i in 0..n {
                for k in 0..classes {
                    e[k] = eta[k][i];
                }
                let p = crate::model::softmax(&e);
                for k in 0..classes {
                    g[k][i] = p[k] - (y[i] as usize == k) as u8 as f64;
                }
            }
            g
        }
        f => vec![y
            .iter()
            .zip(&eta[0])
            .map(|(&yi, &ei)| f.derivs(yi, ei).0)
            .collect()],
    }
}

/// Gradient of [`loss`] in the original-scale coefficients.
pub fn loss_gradient(prob: &DesignProblem, coef: &Coefficients) -> Coefficients {
    let n = prob.n();
    let eta = coef.linear_predictors(&prob.x, n);
    let g = loss_derivatives(prob.family, &prob.y, &eta);
    let nf = n as f64;
    Coefficients {
        intercept: g.iter().map(|gk| gk.iter().sum::<f64>() / nf).collect(),
        beta: g
            .iter()
            .map(|gk| {
                prob.x
                    .iter()
                    .map(|c| c.iter().zip(gk).map(|(a, b)| a * b).sum::<f64>() / nf)
                    .collect()
            })
            .collect(),
    }
}

/// Penalized objective at original-scale coefficients.
pub fn objective(prob: &DesignProblem, lambda: f64, coef: &Coefficients) -> f64 {
    let w = prob.effective_weights();
    let pen: f64 = coef
        .beta
        .iter()
        .map(|b| b.iter().zip(&w).map(|(v, wj)| wj * v.abs()).sum::<f64>())
        .sum();
    loss(prob, coef) + lambda * pen
}

/// Training deviance `2 Σ (ℓ_i − ℓ_sat,i)`.
pub fn deviance(family: GlmFamily, y: &[f64], eta: &[Vec<f64>]) -> f64 {
    let sat: f64 = y.iter().map(|&v| family.saturated_loss(v)).sum();
    2.0 * (mean_loss(family, y, eta) * y.len() as f64 - sat)
}

/// Largest optimality violation of `coef` at penalty `λ`: the intercept
/// gradient, `|∇_j + λ w_j sign β_j|` on nonzero entries and
/// `max(0, |∇_j| − λ w_j)` on zero entries, with original-scale weights.
/// Constant columns are skipped.
pub fn kkt_check(prob: &DesignProblem, lambda: f64, coef: &Coefficients) -> f64 {
    let grad = loss_gradient(prob, coef);
    let w = prob.effective_weights();
    let (_, scale) = prob.column_transforms();
    let mut worst: f64 = grad.intercept.iter().fold(0.0, |m, g| m.max(g.abs()));
    for (gk, bk) in grad.beta.iter().zip(&coef.beta) {
        for j in 0..prob.q() {
            if scale[j] == 0.0 {
                continue;
            }
            let v = if bk[j] != 0.0 {
                (gk[j] + lambda * w[j] * bk[j].signum()).abs()
            } else {
                (gk[j].abs() - lambda * w[j]).max(0.0)
            };
            worst = worst.max(v);
        }
    }
    worst
}

/// Smallest `λ` at which all penalized coefficients are zero.
pub fn lambda_max(prob: &DesignProblem) -> Result<f64> {
    prob.validate()?;
    let prep = solver::Prepared::new(prob)?;
    Ok(prep.lambda_max(&prep.null_state()?))
}

/// Default grid: 100 log-spaced values from `λ_max` down to `λ_max · r`,
/// `r = 0.01` when `n ≤ q`, else `1e-4`.
pub fn default_lambda_grid(lambda_max: f64, n: usize, q: usize) -> Vec<f64> {
    let ratio: f64 = if n <= q { 0.01 } else { 1e-4 };
    if lambda_max <= 0.0 {
        return vec![0.0];
    }
    let steps = 100;
    (0..steps)
        .map(|i| lambda_max * ratio.powf(i as f64 / (steps - 1) as f64))
        .collect()
}

#[cfg(test)]
mod tests;
