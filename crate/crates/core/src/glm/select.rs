//! Penalty selection by K-fold cross-validation or the extended BIC.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::family::{GlmFamily, EXPONENTIAL_ETA_MAX};
use super::solver::{fit_lasso_path, SolverOptions};
use super::{default_lambda_grid, deviance, lambda_max, DesignProblem, LassoPath};
use crate::error::{Error, Result};
use crate::{par, rng};

pub const DEFAULT_EBIC_GAMMA: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    pub folds: usize,
    pub seed: u64,
    /// Pick the largest `λ` within one standard error of the minimum.
    pub one_se: bool,
    pub jobs: usize,
    pub solver: SolverOptions,
}

impl CvOptions {
    pub fn new(seed: u64) -> Self {
        CvOptions {
            folds: 10,
            seed,
            one_se: false,
            jobs: 1,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub path: LassoPath,
    pub index: usize,
    pub lambda: f64,
    /// Mean held-out deviance per observation, per grid point.
    pub mean_deviance: Vec<f64>,
    pub se_deviance: Vec<f64>,
    pub fold_of: Vec<usize>,
}

/// Seeded fold labels; stratified by response level for discrete families.
pub fn assign_folds(prob: &DesignProblem, folds: usize, seed: u64) -> Vec<usize> {
    let n = prob.n();
    let mut rng = rng::from_seed(seed);
    let mut fold_of = vec![0; n];
    let groups: Vec<Vec<usize>> = if prob.family.is_discrete() {
        let levels = match prob.family {
            GlmFamily::Multinomial { classes } => classes,
            _ => 2,
        };
        let mut g = vec![Vec::new(); levels];
        for (i, &v) in prob.y.iter().enumerate() {
            g[v as usize].push(i);
        }
        g
    } else {
        vec![(0..n).collect()]
    };
    let mut next = 0;
    for mut g in groups {
        g.shuffle(&mut rng);
        for i in g {
            fold_of[i] = next % folds;
            next += 1;
        }
    }
    fold_of
}

fn held_out_deviance(prob: &DesignProblem, rows: &[usize], coef: &super::Coefficients) -> f64 {
    let sub = prob.subset(rows);
    let mut eta = coef.linear_predictors(&sub.x, sub.n());
    if prob.family == GlmFamily::Exponential {
        eta[0].iter_mut().for_each(|e| *e = e.min(EXPONENTIAL_ETA_MAX));
    }
    deviance(prob.family, &sub.y, &eta)
}

/// Fits the full-data path (default grid, early stopping) and selects the
/// `λ` with the smallest mean held-out deviance across folds. Every fold
/// refits the same grid, also with early stopping.
pub fn cv_select(prob: &DesignProblem, opts: &CvOptions) -> Result<CvResult> {
    prob.validate()?;
    let n = prob.n();
    if opts.folds < 2 || opts.folds > n {
        return Err(Error::InvalidArgument(format!(
            "fold count {} invalid for {n} rows",
            opts.folds
        )));
    }
    let fold_of = assign_folds(prob, opts.folds, opts.seed);
    let train_rows: Vec<Vec<usize>> = (0..opts.folds)
        .map(|f| (0..n).filter(|&i| fold_of[i] != f).collect())
        .collect();
    if prob.family.is_discrete() {
        let levels = match prob.family {
            GlmFamily::Multinomial { classes } => classes,
            _ => 2,
        };
        for (f, rows) in train_rows.iter().enumerate() {
            let mut seen = vec![false; levels];
            rows.iter().for_each(|&i| seen[prob.y[i] as usize] = true);
            if let Some(l) = seen.iter().position(|s| !s) {
                return Err(Error::CvInfeasible {
                    node: None,
                    reason: format!("response level {l} absent from training split of fold {f}"),
                });
            }
        }
    }
    let lmax = lambda_max(prob)?;
    let grid = default_lambda_grid(lmax, n, prob.q());
    let full = fit_lasso_path(
        prob,
        &grid,
        &SolverOptions {
            early_stop: true,
            ..opts.solver
        },
    )?;
    let lambdas = full.lambdas();
    let fold_solver = SolverOptions {
        early_stop: true,
        ..opts.solver
    };
    let per_fold: Vec<Result<Vec<f64>>> = par::map_indexed(opts.folds, opts.jobs, |f| {
        let train = prob.subset(&train_rows[f]);
        let test: Vec<usize> = (0..n).filter(|&i| fold_of[i] == f).collect();
        let path = fit_lasso_path(&train, &lambdas, &fold_solver).map_err(|e| match e {
            Error::ConstantResponse(r) => Error::CvInfeasible {
                node: None,
                reason: format!("fold {f}: {r}"),
            },
            other => other,
        })?;
        // A fold path that stopped early (saturated fit) keeps its last
        // solution for the remaining grid points.
        let last = path.points.len() - 1;
        Ok((0..lambdas.len())
            .map(|l| {
                let pt = &path.points[l.min(last)];
                held_out_deviance(prob, &test, &pt.coefficients) / test.len() as f64
            })
            .collect())
    });
    let per_fold: Vec<Vec<f64>> = per_fold.into_iter().collect::<Result<_>>()?;
    let k = opts.folds as f64;
    let mean: Vec<f64> = (0..lambdas.len())
        .map(|l| per_fold.iter().map(|d| d[l]).sum::<f64>() / k)
        .collect();
    let se: Vec<f64> = (0..lambdas.len())
        .map(|l| {
            let var = per_fold.iter().map(|d| (d[l] - mean[l]).powi(2)).sum::<f64>() / (k - 1.0);
            (var / k).sqrt()
        })
        .collect();
    let mut best = 0;
    for l in 1..mean.len() {
        if mean[l] < mean[best] {
            best = l;
        }
    }
    let index = if opts.one_se {
        let bound = mean[best] + se[best];
        (0..=best).find(|&l| mean[l] <= bound).unwrap_or(best)
    } else {
        best
    };
    Ok(CvResult {
        lambda: lambdas[index],
        path: full,
        index,
        mean_deviance: mean,
        se_deviance: se,
        fold_of,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EbicResult {
    pub index: usize,
    pub lambda: f64,
    pub scores: Vec<f64>,
}

/// Extended BIC `−2ℓ + k log n + 2γ k log q` along a fitted path, where `k`
/// counts nonzero penalized coefficients. Gaussian responses use the profile
/// likelihood `n log(RSS/n)`.
pub fn ebic_select(prob: &DesignProblem, path: &LassoPath, gamma: f64) -> Result<EbicResult> {
    if path.points.is_empty() {
        return Err(Error::InvalidArgument("empty path".into()));
    }
    let n = prob.n() as f64;
    let penalized: Vec<usize> = (0..prob.q()).filter(|&j| prob.penalty_weights[j] > 0.0).collect();
    let q = (penalized.len().max(1)) as f64;
    let scores: Vec<f64> = path
        .points
        .iter()
        .map(|pt| {
            let eta = pt.coefficients.linear_predictors(&prob.x, prob.n());
            let neg2ll = match prob.family {
                GlmFamily::Gaussian => {
                    let rss: f64 = prob.y.iter().zip(&eta[0]).map(|(y, e)| (y - e).powi(2)).sum();
                    n * (rss / n).max(1e-300).ln()
                }
                f => 2.0 * n * super::mean_loss(f, &prob.y, &eta),
            };
            let k = pt
                .coefficients
                .beta
                .iter()
                .map(|b| penalized.iter().filter(|&&j| b[j] != 0.0).count())
                .sum::<usize>() as f64;
            neg2ll + k * n.ln() + 2.0 * gamma * k * q.ln()
        })
        .collect();
    let mut index = 0;
    for l in 1..scores.len() {
        if scores[l] < scores[index] {
            index = l;
        }
    }
    Ok(EbicResult {
        index,
        lambda: path.points[index].lambda,
        scores,
    })
}
