//! Gibbs sampling from [`MixedModel`]s and the data-quality repair applied
//! before cross-validation.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{Distribution, Exp, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{logistic, softmax, Family, MixedModel, NodeSpec};
use crate::rng::{self, Rng};

pub const DEFAULT_BURN_IN: usize = 200;
pub const DEFAULT_THINNING: usize = 5;

/// Minimum share of the rarest category (strict).
pub const MIN_CATEGORY_SHARE: f64 = 0.10;
/// Maximum share of the modal count value (strict).
pub const MAX_POISSON_MODE_SHARE: f64 = 0.90;
/// Rate of the Poisson draws used to repair count columns.
pub const POISSON_REPAIR_RATE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub burn_in: usize,
    pub thinning: usize,
}

/// Column-major `n × p` table whose columns follow their node specs.
/// Categorical entries are level indices `0..m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    specs: Vec<NodeSpec>,
    columns: Vec<Vec<f64>>,
    provenance: Option<Provenance>,
}

impl Dataset {
    pub fn new(specs: Vec<NodeSpec>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if specs.len() != columns.len() {
            return Err(Error::Schema(format!(
                "{} node specs for {} columns",
                specs.len(),
                columns.len()
            )));
        }
        let n = columns.first().map_or(0, Vec::len);
        for (s, (spec, col)) in specs.iter().zip(&columns).enumerate() {
            if col.len() != n {
                return Err(Error::Schema(format!("column {s} has {} rows, expected {n}", col.len())));
            }
            if let Some(&bad) = col.iter().find(|&&v| !spec.family.in_support(v)) {
                return Err(Error::Support {
                    node: s,
                    value: bad,
                    family: spec.family.to_string(),
                });
            }
        }
        Ok(Dataset {
            specs,
            columns,
            provenance: None,
        })
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    pub fn n(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn p(&self) -> usize {
        self.specs.len()
    }

    pub fn specs(&self) -> &[NodeSpec] {
        &self.specs
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn column(&self, s: usize) -> &[f64] {
        &self.columns[s]
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    /// Same values, every node declared unit-variance Gaussian.
    pub fn as_all_gaussian(&self) -> Dataset {
        Dataset {
            specs: self
                .specs
                .iter()
                .map(|s| NodeSpec::new(s.name.clone(), Family::Gaussian { sigma: 1.0 }))
                .collect(),
            columns: self.columns.clone(),
            provenance: self.provenance.clone(),
        }
    }

    /// Row subset, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            specs: self.specs.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| rows.iter().map(|&i| c[i]).collect())
                .collect(),
            provenance: self.provenance.clone(),
        }
    }
}

/// Systematic-scan Gibbs sampler with exact node conditionals. Rows are
/// recorded every `thinning` sweeps after `burn_in` sweeps.
pub fn gibbs_sample(
    model: &MixedModel,
    n: usize,
    burn_in: usize,
    thinning: usize,
    seed: u64,
) -> Result<Dataset> {
    let p = model.p();
    let thinning = thinning.max(1);
    let mut rng = rng::from_seed(seed);
    let mut state = vec![0.0; p];
    let mut columns = vec![Vec::with_capacity(n); p];
    let mut eta = Vec::new();
    let total = burn_in + n * thinning;
    for sweep in 1..=total {
        for s in 0..p {
            model.eta_into(s, &state, &mut eta);
            state[s] = draw_conditional(model.family(s), &eta, &mut rng).map_err(|msg| {
                Error::SamplerAbort(format!(
                    "node {s} at sweep {sweep}: {msg}; state = {state:?}"
                ))
            })?;
        }
        if sweep > burn_in && (sweep - burn_in) % thinning == 0 {
            for (col, &v) in columns.iter_mut().zip(&state) {
                col.push(v);
            }
        }
    }
    Ok(Dataset::new(model.nodes().to_vec(), columns)?.with_provenance(Provenance {
        seed,
        burn_in,
        thinning,
    }))
}

fn draw_conditional(
    family: Family,
    eta: &[f64],
    rng: &mut Rng,
) -> std::result::Result<f64, String> {
    match family {
        Family::Bernoulli => Ok(if rng.random::<f64>() < logistic(eta[0]) {
            1.0
        } else {
            0.0
        }),
        Family::Categorical { .. } => {
            let probs = softmax(eta);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (k, pk) in probs.iter().enumerate() {
                acc += pk;
                if u < acc {
                    return Ok(k as f64);
                }
            }
            Ok((probs.len() - 1) as f64)
        }
        Family::Gaussian { sigma } => Normal::new(sigma * eta[0], sigma)
            .map(|d| d.sample(rng))
            .map_err(|e| e.to_string()),
        Family::Poisson => {
            let rate = eta[0].exp();
            if !rate.is_finite() {
                return Err(format!("poisson rate exp({}) overflows", eta[0]));
            }
            Poisson::new(rate)
                .map(|d| d.sample(rng))
                .map_err(|e| e.to_string())
        }
        Family::Exponential => {
            if eta[0] >= 0.0 {
                return Err(format!("exponential natural parameter {} >= 0", eta[0]));
            }
            Exp::new(-eta[0])
                .map(|d| d.sample(rng))
                .map_err(|e| e.to_string())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairReport {
    /// Distinct entries replaced per column.
    pub replaced: Vec<usize>,
    /// Replaced entries over `n·p`.
    pub proportion: f64,
}

enum ColumnTally {
    Levels(Vec<usize>),
    Counts(BTreeMap<u64, usize>),
    Untracked,
}

impl ColumnTally {
    fn new(family: Family, col: &[f64]) -> Self {
        match family {
            Family::Bernoulli | Family::Categorical { .. } => {
                let levels = if let Family::Categorical { levels } = family { levels } else { 2 };
                let mut c = vec![0; levels];
                for &v in col {
                    c[v as usize] += 1;
                }
                ColumnTally::Levels(c)
            }
            Family::Poisson => {
                let mut c = BTreeMap::new();
                for &v in col {
                    *c.entry(v as u64).or_insert(0) += 1;
                }
                ColumnTally::Counts(c)
            }
            _ => ColumnTally::Untracked,
        }
    }

    fn violates(&self, n: usize) -> bool {
        let n = n as f64;
        match self {
            ColumnTally::Levels(c) => c.iter().any(|&k| k as f64 <= MIN_CATEGORY_SHARE * n),
            ColumnTally::Counts(c) => {
                c.values().copied().max().unwrap_or(0) as f64 >= MAX_POISSON_MODE_SHARE * n
            }
            ColumnTally::Untracked => false,
        }
    }

    fn replace(&mut self, old: f64, rng: &mut Rng) -> f64 {
        match self {
            ColumnTally::Levels(c) => {
                let new = rng.random_range(0..c.len());
                c[old as usize] -= 1;
                c[new] += 1;
                new as f64
            }
            ColumnTally::Counts(c) => {
                let new = Poisson::new(POISSON_REPAIR_RATE)
                    .expect("valid rate")
                    .sample(rng) as u64;
                let e = c.get_mut(&(old as u64)).expect("tallied value");
                *e -= 1;
                if *e == 0 {
                    c.remove(&(old as u64));
                }
                *c.entry(new).or_insert(0) += 1;
                new as f64
            }
            ColumnTally::Untracked => old,
        }
    }
}

/// Replaces random entries of non-compliant columns until every categorical
/// (and binary) column has each level above 10% and every Poisson column has
/// its modal value below 90%. One replacement per violating column per pass.
/// Other families are left untouched.
pub fn enforce_data_requirements(data: &Dataset, seed: u64) -> Result<(Dataset, RepairReport)> {
    let (n, p) = (data.n(), data.p());
    let mut rng = rng::from_seed(seed);
    let mut columns = data.columns.clone();
    let mut tallies: Vec<ColumnTally> = data
        .specs
        .iter()
        .zip(&columns)
        .map(|(spec, col)| ColumnTally::new(spec.family, col))
        .collect();
    let mut touched = vec![vec![false; n]; p];
    let mut replaced = vec![0usize; p];
    let cap = 50 * n * p;
    let mut total = 0usize;
    loop {
        let violating: Vec<usize> = (0..p).filter(|&s| tallies[s].violates(n)).collect();
        if violating.is_empty() {
            break;
        }
        if n == 0 {
            return Err(Error::RetryCapExceeded("cannot repair an empty dataset".into()));
        }
        for s in violating {
            if total >= cap {
                return Err(Error::RetryCapExceeded(format!(
                    "data repair exceeded {cap} replacements (column {s} still violates)"
                )));
            }
            let row = rng.random_range(0..n);
            columns[s][row] = tallies[s].replace(columns[s][row], &mut rng);
            total += 1;
            if !touched[s][row] {
                touched[s][row] = true;
                replaced[s] += 1;
            }
        }
    }
    let distinct: usize = replaced.iter().sum();
    let proportion = if n * p > 0 {
        distinct as f64 / (n * p) as f64
    } else {
        0.0
    };
    let repaired = Dataset {
        specs: data.specs.clone(),
        columns,
        provenance: data.provenance.clone(),
    };
    Ok((repaired, RepairReport { replaced, proportion }))
}

/// Whether `I - W` is positive definite, where `W` holds the interaction
/// weights between Gaussian nodes (the precision matrix of the Gaussian block
/// in standardized units).
pub fn check_gaussian_subgraph_pd(model: &MixedModel) -> Result<bool> {
    let gauss: Vec<usize> = (0..model.p())
        .filter(|&s| matches!(model.family(s), Family::Gaussian { .. }))
        .collect();
    if gauss.is_empty() {
        return Err(Error::InvalidArgument("model has no Gaussian nodes".into()));
    }
    Ok(gaussian_precision(model, &gauss).symmetric_eigenvalues().min() > 0.0)
}

/// `I - Θ_GG` over the given Gaussian nodes.
pub(crate) fn gaussian_precision(model: &MixedModel, gauss: &[usize]) -> DMatrix<f64> {
    let k = gauss.len();
    let mut m = DMatrix::identity(k, k);
    for (a, &s) in gauss.iter().enumerate() {
        for (b, &t) in gauss.iter().enumerate() {
            if a != b {
                if let Some(blk) = model.block(s, t) {
                    m[(a, b)] = -blk.data[0];
                }
            }
        }
    }
    m
}
