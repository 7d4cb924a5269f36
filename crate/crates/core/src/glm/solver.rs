//! Cyclic coordinate descent with IRLS outer loops, strong-rule screening and
//! KKT-verified active sets.

use serde::{Deserialize, Serialize};

use super::family::{GlmFamily, EXPONENTIAL_ETA_MAX, WEIGHT_FLOOR};
use super::{deviance, mean_loss, Coefficients, DesignProblem, LassoPath, PathPoint};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Convergence threshold, applied both to the largest curvature-weighted
    /// coefficient change between outer iterations and to the optimality
    /// residual (a converged fit has residual below `10 * tol`).
    pub tol: f64,
    pub max_outer: usize,
    /// Budget of coordinate sweeps per penalty level, shared by all outer
    /// iterations.
    pub max_inner: usize,
    /// Stop the path once the deviance stops improving.
    pub early_stop: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-7,
            max_outer: 200,
            max_inner: 100_000,
            early_stop: false,
        }
    }
}

/// Standardized copy of a problem.
pub(crate) struct Prepared<'a> {
    prob: &'a DesignProblem,
    n: usize,
    q: usize,
    z: Vec<Vec<f64>>,
    center: Vec<f64>,
    scale: Vec<f64>,
    pw: Vec<f64>,
    free: Vec<bool>,
    family: GlmFamily,
    k: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct State {
    b0: Vec<f64>,
    b: Vec<Vec<f64>>,
    eta: Vec<Vec<f64>>,
}

/// Dot product with eight independent accumulators (lets the compiler use
/// vector registers).
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    acc.iter().sum::<f64>() + tail
}

fn soft(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

impl<'a> Prepared<'a> {
    pub(crate) fn new(prob: &'a DesignProblem) -> Result<Self> {
        let (center, scale) = prob.column_transforms();
        let z = prob
            .x
            .iter()
            .enumerate()
            .map(|(j, c)| {
                if scale[j] == 0.0 {
                    vec![0.0; c.len()]
                } else {
                    c.iter().map(|v| (v - center[j]) / scale[j]).collect()
                }
            })
            .collect();
        let free = scale.iter().map(|&s| s > 0.0).collect();
        Ok(Prepared {
            prob,
            n: prob.n(),
            q: prob.q(),
            z,
            center,
            scale,
            pw: prob.penalty_weights.clone(),
            free,
            family: prob.family,
            k: prob.family.responses(),
        })
    }

    fn eta_of(&self, b0: &[f64], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
        b0.iter().zip(b).map(|(&c0, bc)| self.eta_one(c0, bc)).collect()
    }

    fn eta_one(&self, b0: f64, b: &[f64]) -> Vec<f64> {
        let mut eta = vec![b0; self.n];
        for (j, &bj) in b.iter().enumerate() {
            if bj != 0.0 {
                eta.iter_mut().zip(&self.z[j]).for_each(|(e, v)| *e += bj * v);
            }
        }
        eta
    }

    fn feasible(&self, eta: &[Vec<f64>]) -> bool {
        match self.family {
            GlmFamily::Exponential => eta[0].iter().all(|&e| e <= EXPONENTIAL_ETA_MAX),
            _ => eta.iter().flatten().all(|e| e.is_finite()),
        }
    }

    fn objective(&self, st: &State, lambda: f64) -> f64 {
        if !self.feasible(&st.eta) {
            return f64::INFINITY;
        }
        let pen: f64 = st
            .b
            .iter()
            .map(|bk| bk.iter().zip(&self.pw).map(|(v, w)| w * v.abs()).sum::<f64>())
            .sum();
        mean_loss(self.family, &self.prob.y, &st.eta) + lambda * pen
    }

    /// Intercept-only fit (plus any unpenalized columns).
    pub(crate) fn null_state(&self) -> Result<State> {
        let y = &self.prob.y;
        let nf = self.n as f64;
        let mean = y.iter().sum::<f64>() / nf;
        let b0 = match self.family {
            GlmFamily::Gaussian => vec![mean],
            GlmFamily::Binomial => {
                if mean <= 0.0 || mean >= 1.0 {
                    return Err(Error::ConstantResponse("binary response has a single level".into()));
                }
                vec![(mean / (1.0 - mean)).ln()]
            }
            GlmFamily::Poisson => {
                if mean <= 0.0 {
                    return Err(Error::ConstantResponse("count response is all zero".into()));
                }
                vec![mean.ln()]
            }
            GlmFamily::Exponential => {
                let eta = -1.0 / mean;
                if eta > EXPONENTIAL_ETA_MAX {
                    return Err(Error::Numerical(format!(
                        "exponential fit infeasible at intercept only (mean response {mean})"
                    )));
                }
                vec![eta]
            }
            GlmFamily::Multinomial { classes } => {
                let mut counts = vec![0usize; classes];
                for &v in y {
                    counts[v as usize] += 1;
                }
                if let Some(c) = counts.iter().position(|&c| c == 0) {
                    return Err(Error::ConstantResponse(format!("class {c} absent from response")));
                }
                let logs: Vec<f64> = counts.iter().map(|&c| (c as f64 / nf).ln()).collect();
                let m = logs.iter().sum::<f64>() / classes as f64;
                logs.iter().map(|l| l - m).collect()
            }
        };
        let b = vec![vec![0.0; self.q]; self.k];
        let eta = self.eta_of(&b0, &b);
        let mut st = State { b0, b, eta };
        let unpenalized: Vec<usize> = (0..self.q)
            .filter(|&j| self.free[j] && self.pw[j] == 0.0)
            .collect();
        if !unpenalized.is_empty() {
            let opts = SolverOptions::default();
            let mut budget = opts.max_inner;
            self.fit_active(&mut st, 0.0, &unpenalized, &opts, &mut budget);
        }
        Ok(st)
    }

    /// Loss gradient on the standardized scale, per response and column.
    fn gradient(&self, st: &State) -> Vec<Vec<f64>> {
        let g = super::loss_derivatives(self.family, &self.prob.y, &st.eta);
        let nf = self.n as f64;
        g.iter()
            .map(|gk| {
                self.z
                    .iter()
                    .map(|zj| zj.iter().zip(gk).map(|(a, b)| a * b).sum::<f64>() / nf)
                    .collect()
            })
            .collect()
    }

    /// Largest optimality violation over the intercepts and `active`,
    /// in original-scale units.
    fn kkt_residual(&self, st: &State, lambda: f64, active: &[usize]) -> f64 {
        let g = super::loss_derivatives(self.family, &self.prob.y, &st.eta);
        let nf = self.n as f64;
        let mut worst: f64 = 0.0;
        for (gk, bk) in g.iter().zip(&st.b) {
            worst = worst.max((gk.iter().sum::<f64>() / nf).abs());
            for &j in active {
                let gj = dot(&self.z[j], gk) / nf;
                let pen = lambda * self.pw[j];
                let v = if bk[j] != 0.0 {
                    (gj + pen * bk[j].signum()).abs()
                } else {
                    (gj.abs() - pen).max(0.0)
                };
                worst = worst.max(v / self.scale[j]);
            }
        }
        worst
    }

    pub(crate) fn lambda_max(&self, st: &State) -> f64 {
        let g = self.gradient(st);
        let mut m: f64 = 0.0;
        for gk in &g {
            for j in 0..self.q {
                if self.free[j] && self.pw[j] > 0.0 {
                    m = m.max(gk[j].abs() / self.pw[j]);
                }
            }
        }
        m
    }

    fn to_original(&self, st: &State) -> Coefficients {
        let beta: Vec<Vec<f64>> = st
            .b
            .iter()
            .map(|bk| {
                bk.iter()
                    .zip(&self.scale)
                    .map(|(&v, &s)| if s == 0.0 || v == 0.0 { 0.0 } else { v / s })
                    .collect()
            })
            .collect();
        let intercept = st
            .b0
            .iter()
            .zip(&beta)
            .map(|(&b0, bk)| b0 - bk.iter().zip(&self.center).map(|(b, c)| b * c).sum::<f64>())
            .collect();
        Coefficients { intercept, beta }
    }

    /// Fits at `lambda` over the given columns, others held at their values.
    /// Returns (converged, outer iterations, monotone).
    fn fit_active(
        &self,
        st: &mut State,
        lambda: f64,
        active: &[usize],
        opts: &SolverOptions,
        budget: &mut usize,
    ) -> (bool, usize, bool) {
        let mut obj = self.objective(st, lambda);
        let mut monotone = true;
        let inner_tol = opts.tol;
        let mut relax = 1.0;
        for outer in 1..=opts.max_outer {
            let mut change: f64 = 0.0;
            let mut failed = false;
            let start = (self.k > 1).then(|| (st.b0.clone(), st.b.clone()));
            for c in 0..self.k {
                let (g, h) = self.class_derivs(st, c);
                let old_b0 = st.b0[c];
                let old_b: Vec<f64> = active.iter().map(|&j| st.b[c][j]).collect();
                let (new_b0, new_b) =
                    self.coordinate_descent(&g, &h, old_b0, &old_b, active, lambda, inner_tol, budget);
                // Step halving on the penalized objective.
                let mut step = 1.0;
                let mut accepted = false;
                for _ in 0..50 {
                    st.b0[c] = old_b0 + step * (new_b0 - old_b0);
                    for (a, &j) in active.iter().enumerate() {
                        st.b[c][j] = old_b[a] + step * (new_b[a] - old_b[a]);
                    }
                    st.eta[c] = self.eta_one(st.b0[c], &st.b[c]);
                    let cand = self.objective(st, lambda);
                    if cand <= obj + 1e-12 * (1.0 + obj.abs()) {
                        if cand > obj {
                            monotone &= cand - obj <= 1e-12 * (1.0 + obj.abs());
                        }
                        obj = cand.min(obj);
                        accepted = true;
                        break;
                    }
                    step *= 0.5;
                }
                if !accepted {
                    st.b0[c] = old_b0;
                    for (a, &j) in active.iter().enumerate() {
                        st.b[c][j] = old_b[a];
                    }
                    st.eta[c] = self.eta_one(st.b0[c], &st.b[c]);
                    failed = true;
                    continue;
                }
                // Changes are scaled by the root curvature so flat directions
                // (near-separated responses) do not stall convergence.
                let w0 = (h.iter().sum::<f64>() / self.n as f64).sqrt().min(1.0);
                change = change.max(w0 * (st.b0[c] - old_b0).abs());
                for (a, &j) in active.iter().enumerate() {
                    let hj = self.z[j].iter().zip(&h).map(|(z, w)| w * z * z).sum::<f64>() / self.n as f64;
                    change = change.max(hj.sqrt().min(1.0) * (st.b[c][j] - old_b[a]).abs());
                }
            }
            if self.k > 1 {
                let m = st.b0.iter().sum::<f64>() / self.k as f64;
                for c in 0..self.k {
                    st.b0[c] -= m;
                    st.eta[c].iter_mut().for_each(|e| *e -= m);
                }
                self.median_center(st, active);
                obj = self.objective(st, lambda);
                if let Some((b0, b)) = start.filter(|_| !failed) {
                    // Over-relaxation along the last step, kept only if it
                    // lowers the objective.
                    let mut cand = st.clone();
                    for c in 0..self.k {
                        cand.b0[c] += relax * (st.b0[c] - b0[c]);
                        for &j in active {
                            cand.b[c][j] += relax * (st.b[c][j] - b[c][j]);
                        }
                        cand.eta[c] = self.eta_one(cand.b0[c], &cand.b[c]);
                    }
                    let v = self.objective(&cand, lambda);
                    if v < obj {
                        *st = cand;
                        obj = v;
                        relax = (relax * 2.0).min(64.0);
                    } else {
                        relax = 1.0;
                    }
                }
            }
            let kkt = self.kkt_residual(st, lambda, active);
            if kkt < opts.tol || change < opts.tol && kkt < 10.0 * opts.tol {
                return (!failed, outer, monotone);
            }
            if *budget == 0 {
                return (false, outer, monotone);
            }
            if failed && change == 0.0 {
                return (false, outer, monotone);
            }
        }
        (false, opts.max_outer, monotone)
    }

    /// Shifts each column's class coefficients so that zero is a median.
    /// The likelihood is invariant to the shift and the penalty cannot grow.
    fn median_center(&self, st: &mut State, active: &[usize]) {
        let mut v = vec![0.0; self.k];
        for &j in active {
            if self.pw[j] == 0.0 {
                continue;
            }
            for c in 0..self.k {
                v[c] = st.b[c][j];
            }
            v.sort_by(f64::total_cmp);
            let (lo, hi) = (v[(self.k - 1) / 2], v[self.k / 2]);
            let m = if lo > 0.0 {
                lo
            } else if hi < 0.0 {
                hi
            } else {
                continue;
            };
            for c in 0..self.k {
                st.b[c][j] -= m;
                st.eta[c].iter_mut().zip(&self.z[j]).for_each(|(e, z)| *e -= m * z);
            }
        }
    }

    /// Loss derivatives in the linear predictor of response `c`.
    fn class_derivs(&self, st: &State, c: usize) -> (Vec<f64>, Vec<f64>) {
        let y = &self.prob.y;
        match self.family {
            GlmFamily::Multinomial { classes } => {
                let mut g = Vec::with_capacity(self.n);
                let mut h = Vec::with_capacity(self.n);
                let mut e = vec![0.0; classes];
                for i in 0..self.n {
                    for k in 0..classes {
                        e[k] = st.eta[k][i];
                    }
                    let p = crate::model::softmax(&e)[c];
                    g.push(p - (y[i] as usize == c) as u8 as f64);
                    h.push((p * (1.0 - p)).max(WEIGHT_FLOOR));
                }
                (g, h)
            }
            f => y
                .iter()
                .zip(&st.eta[0])
                .map(|(&yi, &ei)| f.derivs(yi, ei))
                .unzip(),
        }
    }

    /// Minimizes the local quadratic model `(1/2n) Σ h_i (r_i − Δη_i)² +
    /// λ Σ w_j |b_j|` over the intercept and the active coefficients.
    #[allow(clippy::too_many_arguments)]
    fn coordinate_descent(
        &self,
        g: &[f64],
        h: &[f64],
        b0: f64,
        b: &[f64],
        active: &[usize],
        lambda: f64,
        tol: f64,
        budget: &mut usize,
    ) -> (f64, Vec<f64>) {
        let nf = self.n as f64;
        let na = active.len();
        // Covariance updates: `c[a]` is the weighted inner product of column
        // `a` with the current working residual, `s_r` the weighted residual
        // sum. Gram columns are computed when a coefficient first moves.
        let sum_h: f64 = h.iter().sum();
        let mut s_r: f64 = -g.iter().sum::<f64>();
        let mut c = vec![0.0; na];
        let mut m = vec![0.0; na];
        let mut hjj = vec![0.0; na];
        for (a, &j) in active.iter().enumerate() {
            let (mut cj, mut mj, mut hj) = (0.0, 0.0, 0.0);
            for ((z, w), gi) in self.z[j].iter().zip(h).zip(g) {
                cj -= z * gi;
                mj += w * z;
                hj += w * z * z;
            }
            c[a] = cj / nf;
            m[a] = mj / nf;
            hjj[a] = hj / nf;
        }
        let mut gram: Vec<Option<Vec<f64>>> = vec![None; na];
        let w0 = (sum_h / nf).sqrt().min(1.0);
        let wj: Vec<f64> = hjj.iter().map(|v| v.sqrt().min(1.0)).collect();
        let mut b0 = b0;
        let mut b = b.to_vec();
        let all: Vec<usize> = (0..na).collect();
        // Full sweeps alternate with sweeps over the nonzero coefficients
        // only, until a full sweep moves nothing by more than `tol`.
        let mut full = true;
        while *budget > 0 {
            *budget -= 1;
            let subset: Vec<usize> = if full {
                all.clone()
            } else {
                all.iter().copied().filter(|&a| b[a] != 0.0).collect()
            };
            let mut maxd: f64 = 0.0;
            let d0 = s_r / sum_h;
            if d0 != 0.0 {
                b0 += d0;
                s_r = 0.0;
                c.iter_mut().zip(&m).for_each(|(ci, mi)| *ci -= d0 * mi);
                maxd = w0 * d0.abs();
            }
            for a in subset {
                if hjj[a] <= 0.0 {
                    continue;
                }
                let j = active[a];
                let grad = c[a] + hjj[a] * b[a];
                let new = soft(grad, lambda * self.pw[j]) / hjj[a];
                let d = new - b[a];
                if d != 0.0 {
                    let col = gram[a].get_or_insert_with(|| {
                        let zk = &self.z[j];
                        let hz: Vec<f64> = zk.iter().zip(h).map(|(z, w)| z * w).collect();
                        active
                            .iter()
                            .map(|&i| dot(&self.z[i], &hz) / nf)
                            .collect()
                    });
                    c.iter_mut().zip(col.iter()).for_each(|(ci, gk)| *ci -= d * gk);
                    s_r -= d * nf * m[a];
                    b[a] = new;
                    maxd = maxd.max(wj[a] * d.abs());
                }
            }
            if maxd < tol {
                if full {
                    break;
                }
                full = true;
            } else {
                full = false;
            }
        }
        (b0, b)
    }

    /// Fits one penalty level with strong-rule screening and a KKT loop over
    /// all columns.
    fn fit_lambda(
        &self,
        st: &mut State,
        lambda: f64,
        prev_lambda: f64,
        ever_active: &mut Vec<bool>,
        opts: &SolverOptions,
    ) -> (bool, usize, bool) {
        let grad = self.gradient(st);
        let mut set: Vec<bool> = (0..self.q)
            .map(|j| {
                self.free[j]
                    && (ever_active[j]
                        || self.pw[j] == 0.0
                        || grad
                            .iter()
                            .any(|gk| gk[j].abs() >= self.pw[j] * (2.0 * lambda - prev_lambda)))
            })
            .collect();
        let mut total_outer = 0;
        let mut monotone = true;
        let mut budget = opts.max_inner;
        loop {
            let active: Vec<usize> = (0..self.q).filter(|&j| set[j]).collect();
            let (conv, outer, mono) = self.fit_active(st, lambda, &active, opts, &mut budget);
            total_outer += outer;
            monotone &= mono;
            let grad = self.gradient(st);
            let mut added = false;
            for j in 0..self.q {
                if self.free[j]
                    && !set[j]
                    && grad.iter().any(|gk| gk[j].abs() - lambda * self.pw[j] > 1e-12)
                {
                    set[j] = true;
                    added = true;
                }
            }
            if !added || !conv {
                for j in 0..self.q {
                    if st.b.iter().any(|bk| bk[j] != 0.0) {
                        ever_active[j] = true;
                    }
                }
                return (conv, total_outer, monotone);
            }
        }
    }
}

/// Regularization path over a descending grid, warm-started from the
/// intercept-only fit. Points with `λ ≥ λ_max` are returned as that fit.
pub fn fit_lasso_path(
    prob: &DesignProblem,
    lambdas: &[f64],
    opts: &SolverOptions,
) -> Result<LassoPath> {
    prob.validate()?;
    if lambdas.is_empty() {
        return Err(Error::InvalidArgument("empty lambda grid".into()));
    }
    if lambdas.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidArgument("lambda grid must be descending".into()));
    }
    if lambdas.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
        return Err(Error::InvalidArgument("lambda values must be finite and >= 0".into()));
    }
    if lambdas.contains(&0.0) && !(prob.family == GlmFamily::Gaussian && prob.n() > prob.q()) {
        return Err(Error::InvalidArgument(
            "lambda = 0 requires a gaussian problem with n > q".into(),
        ));
    }
    let prep = Prepared::new(prob)?;
    let null = prep.null_state()?;
    let lmax = prep.lambda_max(&null);
    let null_deviance = deviance(prob.family, &prob.y, &null.eta);
    let mut st = null.clone();
    let mut ever = vec![false; prep.q];
    let mut prev = lmax;
    let mut points: Vec<PathPoint> = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let (converged, outer, monotone) = if lambda >= lmax {
            st = null.clone();
            (true, 0, true)
        } else {
            prep.fit_lambda(&mut st, lambda, prev.max(lambda), &mut ever, opts)
        };
        prev = lambda;
        let coefficients = prep.to_original(&st);
        let dev = deviance(prob.family, &prob.y, &st.eta);
        let stop = opts.early_stop
            && null_deviance > 0.0
            && (dev <= 1e-3 * null_deviance
                || points.len() >= 5
                    && points.last().is_some_and(|p| p.deviance - dev < 1e-5 * null_deviance));
        points.push(PathPoint {
            lambda,
            nonzero: coefficients.nonzero(),
            coefficients,
            deviance: dev,
            outer_iterations: outer,
            converged,
            monotone,
        });
        if stop {
            break;
        }
    }
    Ok(LassoPath {
        lambda_max: lmax,
        null_deviance,
        points,
    })
}

/// Cold-start fit at a single penalty level.
pub fn fit_single(prob: &DesignProblem, lambda: f64, opts: &SolverOptions) -> Result<PathPoint> {
    let mut path = fit_lasso_path(prob, &[lambda], opts)?;
    Ok(path.points.pop().expect("one point"))
}
