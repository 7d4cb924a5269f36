//! Pairwise mixed exponential-family MRFs.
//!
//! Every node carries a univariate exponential family with sufficient
//! statistic vector `phi_s(x)` and base measure `C_s(x)`:
//!
//! | family        | `phi_s(x)`                  | `C_s(x)`          |
//! |---------------|-----------------------------|-------------------|
//! | Gaussian(σ)   | `x / σ`                     | `-x² / (2σ²)`     |
//! | Bernoulli     | `x ∈ {0,1}`                 | 0                 |
//! | Categorical(m)| one-hot over all `m` levels | 0                 |
//! | Poisson       | `x ∈ ℕ₀`                    | `-log x!`         |
//! | Exponential   | `x ≥ 0`                     | 0                 |
//!
//! The joint log-density (up to the log-partition) is
//! `Σ_s θ_s·φ_s + Σ_{(s,t)∈E} φ_sᵀ Θ_st φ_t + Σ_s C_s`, and each node
//! conditional is the node's family with natural parameter
//! `θ_s + Σ_{t∈N(s)} Θ_st φ_t`.
//!
//! Categorical thresholds are stored for levels `0..m-1` only (the last level
//! is the reference with threshold 0); pairwise blocks are stored at full
//! `m_s × m_t` size so Potts interactions can be written directly.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng;

/// Natural parameters of an exponential node must stay at or below this.
pub const EXPONENTIAL_MARGIN: f64 = -1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Family {
    Gaussian { sigma: f64 },
    Bernoulli,
    Categorical { levels: usize },
    Poisson,
    Exponential,
}

impl Family {
    /// Dimension of the sufficient statistic vector.
    pub fn stat_dim(&self) -> usize {
        match self {
            Family::Categorical { levels } => *levels,
            _ => 1,
        }
    }

    /// Number of free threshold parameters.
    pub fn threshold_dim(&self) -> usize {
        match self {
            Family::Categorical { levels } => levels - 1,
            _ => 1,
        }
    }

    pub fn is_discrete_finite(&self) -> bool {
        matches!(self, Family::Bernoulli | Family::Categorical { .. })
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self, Family::Gaussian { .. } | Family::Exponential)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::Gaussian { .. } => "gaussian",
            Family::Bernoulli => "bernoulli",
            Family::Categorical { .. } => "categorical",
            Family::Poisson => "poisson",
            Family::Exponential => "exponential",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Family::Gaussian { sigma } if !(sigma > 0.0 && sigma.is_finite()) => Err(
                Error::InvalidModel(format!("gaussian sigma must be positive, got {sigma}")),
            ),
            Family::Categorical { levels } if levels < 2 => Err(Error::InvalidModel(format!(
                "categorical node needs >= 2 levels, got {levels}"
            ))),
            _ => Ok(()),
        }
    }

    pub fn in_support(&self, x: f64) -> bool {
        match *self {
            Family::Gaussian { .. } => x.is_finite(),
            Family::Bernoulli => x == 0.0 || x == 1.0,
            Family::Categorical { levels } => {
                x >= 0.0 && x.fract() == 0.0 && (x as usize) < levels
            }
            Family::Poisson => x >= 0.0 && x.fract() == 0.0 && x.is_finite(),
            Family::Exponential => x >= 0.0 && x.is_finite(),
        }
    }

    /// Scalar statistic for non-categorical families.
    pub fn scalar_stat(&self, x: f64) -> f64 {
        match *self {
            Family::Gaussian { sigma } => x / sigma,
            _ => x,
        }
    }

    /// Writes `phi(x)` into `out` (length `stat_dim`).
    pub fn stat_into(&self, x: f64, out: &mut [f64]) {
        match *self {
            Family::Categorical { .. } => {
                out.iter_mut().for_each(|v| *v = 0.0);
                out[x as usize] = 1.0;
            }
            _ => out[0] = self.scalar_stat(x),
        }
    }

    pub fn base_measure(&self, x: f64) -> f64 {
        match *self {
            Family::Gaussian { sigma } => -x * x / (2.0 * sigma * sigma),
            Family::Poisson => -ln_factorial(x as u64),
            _ => 0.0,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Gaussian { sigma } => write!(f, "gaussian(sigma={sigma})"),
            Family::Categorical { levels } => write!(f, "categorical(m={levels})"),
            other => f.write_str(other.name()),
        }
    }
}

pub fn ln_factorial(k: u64) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub name: String,
    #[serde(flatten)]
    pub family: Family,
}

impl NodeSpec {
    pub fn new(name: impl Into<String>, family: Family) -> Self {
        NodeSpec {
            name: name.into(),
            family,
        }
    }
}

/// Dense row-major block `rows × cols`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Block {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Block {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn scalar(v: f64) -> Self {
        Block {
            rows: 1,
            cols: 1,
            data: vec![v],
        }
    }

    pub fn identity(m: usize) -> Self {
        let mut b = Block::zeros(m, m);
        for i in 0..m {
            b.data[i * m + i] = 1.0;
        }
        b
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
            return Err(Error::InvalidModel("ragged or empty block".into()));
        }
        Ok(Block {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn transpose(&self) -> Block {
        let mut t = Block::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.get(i, j);
            }
        }
        t
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }
}

/// Natural parameter of a node conditional: a scalar for single-statistic
/// families, a vector over all levels for categorical nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaturalParam {
    pub family: Family,
    pub value: Vec<f64>,
}

impl NaturalParam {
    pub fn scalar(&self) -> f64 {
        self.value[0]
    }

    /// Mean of the conditional distribution (category probabilities are not
    /// a scalar mean; for categorical nodes this is the expected level index).
    pub fn mean(&self) -> f64 {
        match self.family {
            Family::Gaussian { sigma } => sigma * self.value[0],
            Family::Bernoulli => logistic(self.value[0]),
            Family::Categorical { .. } => self
                .probabilities()
                .iter()
                .enumerate()
                .map(|(k, p)| k as f64 * p)
                .sum(),
            Family::Poisson => self.value[0].exp(),
            Family::Exponential => -1.0 / self.value[0],
        }
    }

    /// Level probabilities for discrete-finite families.
    pub fn probabilities(&self) -> Vec<f64> {
        match self.family {
            Family::Bernoulli => {
                let p1 = logistic(self.value[0]);
                vec![1.0 - p1, p1]
            }
            Family::Categorical { .. } => softmax(&self.value),
            _ => Vec::new(),
        }
    }
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softmax(eta: &[f64]) -> Vec<f64> {
    let m = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = eta.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelFile {
    nodes: Vec<NodeSpec>,
    thresholds: Vec<Vec<f64>>,
    edges: Vec<EdgeBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EdgeBlock {
    s: usize,
    t: usize,
    block: Vec<Vec<f64>>,
}

/// Immutable pairwise mixed MRF.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedModel {
    nodes: Vec<NodeSpec>,
    thresholds: Vec<Vec<f64>>,
    /// Blocks keyed by `(s, t)` with `s < t`, shaped `dim_s × dim_t`.
    blocks: BTreeMap<(usize, usize), Block>,
    graph: Graph,
    /// Per node: `(neighbor, block oriented as dim_s × dim_t)`.
    oriented: Vec<Vec<(usize, Block)>>,
    warnings: Vec<String>,
}

impl MixedModel {
    /// Builds and validates a model. Zero blocks are dropped so that the
    /// block set matches the edge set of [`MixedModel::graph`].
    pub fn new(
        nodes: Vec<NodeSpec>,
        thresholds: Vec<Vec<f64>>,
        blocks: BTreeMap<(usize, usize), Block>,
    ) -> Result<Self> {
        let p = nodes.len();
        if thresholds.len() != p {
            return Err(Error::InvalidModel(format!(
                "{} thresholds for {p} nodes",
                thresholds.len()
            )));
        }
        for (s, spec) in nodes.iter().enumerate() {
            spec.family.validate()?;
            if thresholds[s].len() != spec.family.threshold_dim() {
                return Err(Error::InvalidModel(format!(
                    "node {s}: expected {} threshold values, got {}",
                    spec.family.threshold_dim(),
                    thresholds[s].len()
                )));
            }
            if thresholds[s].iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidModel(format!("node {s}: non-finite threshold")));
            }
        }
        let mut graph = Graph::new(p);
        let mut normalized = BTreeMap::new();
        for ((s, t), block) in blocks {
            if s >= p || t >= p || s == t {
                return Err(Error::InvalidModel(format!("bad edge ({s},{t})")));
            }
            let (a, b, block) = if s < t {
                (s, t, block)
            } else {
                (t, s, block.transpose())
            };
            let (ra, cb) = (nodes[a].family.stat_dim(), nodes[b].family.stat_dim());
            if block.rows != ra || block.cols != cb || block.data.len() != ra * cb {
                return Err(Error::InvalidModel(format!(
                    "edge ({a},{b}): block must be {ra}x{cb}, got {}x{}",
                    block.rows, block.cols
                )));
            }
            if block.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidModel(format!("edge ({a},{b}): non-finite entry")));
            }
            if normalized.contains_key(&(a, b)) {
                return Err(Error::InvalidModel(format!("duplicate edge ({a},{b})")));
            }
            if block.is_zero() {
                continue;
            }
            graph.add_edge(a, b)?;
            normalized.insert((a, b), block);
        }
        let mut oriented = vec![Vec::new(); p];
        for (&(s, t), block) in &normalized {
            oriented[s].push((t, block.clone()));
            oriented[t].push((s, block.transpose()));
        }
        for list in &mut oriented {
            list.sort_by_key(|(t, _)| *t);
        }
        let mut model = MixedModel {
            nodes,
            thresholds,
            blocks: normalized,
            graph,
            oriented,
            warnings: Vec::new(),
        };
        model.check_normalizability()?;
        Ok(model)
    }

    fn check_normalizability(&mut self) -> Result<()> {
        for s in 0..self.p() {
            let fam = self.nodes[s].family;
            if fam == Family::Exponential {
                let mut sup = self.thresholds[s][0];
                for (t, block) in &self.oriented[s] {
                    sup += self.sup_contribution(*t, block);
                }
                if !(sup < EXPONENTIAL_MARGIN) {
                    return Err(Error::InvalidModel(format!(
                        "exponential node {s}: natural parameter can reach {sup} (must stay < {EXPONENTIAL_MARGIN})"
                    )));
                }
            }
            if matches!(fam, Family::Gaussian { .. }) {
                for (t, _) in &self.oriented[s] {
                    if matches!(self.nodes[*t].family, Family::Poisson | Family::Exponential) {
                        self.warnings.push(format!(
                            "nodes {s} ({fam}) and {t} ({}) both have infinite domains; joint normalizability is not guaranteed",
                            self.nodes[*t].family
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Supremum of `block · phi_t(x_t)` over the support of node `t`
    /// (for a scalar-statistic receiving node).
    fn sup_contribution(&self, t: usize, block: &Block) -> f64 {
        let theta = block.data.as_slice();
        match self.nodes[t].family {
            Family::Bernoulli => theta[0].max(0.0),
            Family::Categorical { .. } => theta.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Family::Poisson | Family::Exponential => {
                if theta[0] > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            Family::Gaussian { .. } => {
                if theta[0] != 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
        }
    }

    pub fn p(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[NodeSpec] {
        &self.nodes
    }

    pub fn family(&self, s: usize) -> Family {
        self.nodes[s].family
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn thresholds(&self) -> &[Vec<f64>] {
        &self.thresholds
    }

    /// Threshold vector padded to the full statistic dimension.
    pub fn full_threshold(&self, s: usize) -> Vec<f64> {
        let mut th = self.thresholds[s].clone();
        if let Family::Categorical { .. } = self.nodes[s].family {
            th.push(0.0);
        }
        th
    }

    pub fn blocks(&self) -> &BTreeMap<(usize, usize), Block> {
        &self.blocks
    }

    /// Block oriented as `dim_s × dim_t`, if `(s,t)` is an edge.
    pub fn block(&self, s: usize, t: usize) -> Option<Block> {
        if s < t {
            self.blocks.get(&(s, t)).cloned()
        } else {
            self.blocks.get(&(t, s)).map(Block::transpose)
        }
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    fn check_support(&self, s: usize, x: f64) -> Result<()> {
        let fam = self.nodes[s].family;
        if fam.in_support(x) {
            Ok(())
        } else {
            Err(Error::Support {
                node: s,
                value: x,
                family: fam.to_string(),
            })
        }
    }

    /// Natural parameter `θ_s + Σ_t Θ_st φ_t(x_t)` without support or
    /// normalizability checks; `x` is a full assignment (entry `s` ignored).
    pub(crate) fn eta_into(&self, s: usize, x: &[f64], eta: &mut Vec<f64>) {
        eta.clear();
        eta.extend_from_slice(&self.thresholds[s]);
        if let Family::Categorical { .. } = self.nodes[s].family {
            eta.push(0.0);
        }
        let rows = eta.len();
        for (t, block) in &self.oriented[s] {
            match self.nodes[*t].family {
                Family::Categorical { .. } => {
                    let level = x[*t] as usize;
                    for (k, e) in eta.iter_mut().enumerate().take(rows) {
                        *e += block.data[k * block.cols + level];
                    }
                }
                fam => {
                    let phi = fam.scalar_stat(x[*t]);
                    for (k, e) in eta.iter_mut().enumerate().take(rows) {
                        *e += block.data[k] * phi;
                    }
                }
            }
        }
    }

    /// Natural parameter of node `s` given the rest of the assignment.
    /// `x` is a full assignment; its entry `s` is ignored.
    pub fn node_conditional(&self, s: usize, x: &[f64]) -> Result<NaturalParam> {
        if s >= self.p() {
            return Err(Error::NodeOutOfRange { node: s, p: self.p() });
        }
        if x.len() != self.p() {
            return Err(Error::SizeMismatch(x.len(), self.p()));
        }
        for t in 0..self.p() {
            if t != s {
                self.check_support(t, x[t])?;
            }
        }
        let mut eta = Vec::new();
        self.eta_into(s, x, &mut eta);
        let family = self.nodes[s].family;
        if family == Family::Exponential && eta[0] >= 0.0 {
            return Err(Error::NotNormalizable { node: s, eta: eta[0] });
        }
        Ok(NaturalParam { family, value: eta })
    }

    /// Log density up to the log-partition constant.
    pub fn log_unnormalized_density(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.p() {
            return Err(Error::SizeMismatch(x.len(), self.p()));
        }
        let mut total = 0.0;
        for s in 0..self.p() {
            self.check_support(s, x[s])?;
            let fam = self.nodes[s].family;
            total += match fam {
                Family::Categorical { levels } => {
                    let k = x[s] as usize;
                    if k + 1 < levels {
                        self.thresholds[s][k]
                    } else {
                        0.0
                    }
                }
                _ => self.thresholds[s][0] * fam.scalar_stat(x[s]),
            };
            total += fam.base_measure(x[s]);
        }
        for (&(s, t), block) in &self.blocks {
            total += self.pair_energy(s, t, block, x[s], x[t]);
        }
        Ok(total)
    }

    fn pair_energy(&self, s: usize, t: usize, block: &Block, xs: f64, xt: f64) -> f64 {
        let (fs, ft) = (self.nodes[s].family, self.nodes[t].family);
        let i = match fs {
            Family::Categorical { .. } => xs as usize,
            _ => 0,
        };
        let j = match ft {
            Family::Categorical { .. } => xt as usize,
            _ => 0,
        };
        let a = if fs.stat_dim() == 1 { fs.scalar_stat(xs) } else { 1.0 };
        let b = if ft.stat_dim() == 1 { ft.scalar_stat(xt) } else { 1.0 };
        block.get(i, j) * a * b
    }

    /// Multiplies every nonzero pairwise entry by an independent `U(0.3, 1)`
    /// draw and then by `-1`.
    pub fn apply_edge_noise(&self, seed: u64) -> Result<MixedModel> {
        MixedModel::new(
            self.nodes.clone(),
            self.thresholds.clone(),
            noisy_blocks(&self.blocks, seed),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            nodes: self.nodes.clone(),
            thresholds: self.thresholds.clone(),
            edges: self
                .blocks
                .iter()
                .map(|(&(s, t), b)| EdgeBlock {
                    s,
                    t,
                    block: b.to_rows(),
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        let mut blocks = BTreeMap::new();
        for e in file.edges {
            let key = (e.s, e.t);
            if blocks.insert(key, Block::from_rows(e.block)?).is_some() {
                return Err(Error::InvalidModel(format!("duplicate edge ({},{})", e.s, e.t)));
            }
        }
        MixedModel::new(file.nodes, file.thresholds, blocks)
    }

    /// Ising–Gaussian model of the worked generalized-covariance example: a
    /// 4-cycle 0-1-2-3-0 with nodes 0, 2 Bernoulli and 1, 3 unit-variance
    /// Gaussian, all thresholds `theta_node` and all edge weights
    /// `theta_edge`.
    pub fn four_cycle_example(theta_node: f64, theta_edge: f64) -> Self {
        let nodes = vec![
            NodeSpec::new("X1", Family::Bernoulli),
            NodeSpec::new("X2", Family::Gaussian { sigma: 1.0 }),
            NodeSpec::new("X3", Family::Bernoulli),
            NodeSpec::new("X4", Family::Gaussian { sigma: 1.0 }),
        ];
        let blocks = [(0, 1), (1, 2), (2, 3), (0, 3)]
            .into_iter()
            .map(|k| (k, Block::scalar(theta_edge)))
            .collect();
        MixedModel::new(nodes, vec![vec![theta_node]; 4], blocks)
            .expect("example model is valid")
    }
}

/// Model families used by the simulation grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SimulationKind {
    /// Potts model with `m` categories on every node.
    Categorical(usize),
    BinaryGaussian,
    BinaryPoisson,
    BinaryExponential,
}

impl SimulationKind {
    pub fn label(&self) -> String {
        match self {
            SimulationKind::Categorical(m) => format!("categorical-m{m}"),
            SimulationKind::BinaryGaussian => "binary-gaussian".into(),
            SimulationKind::BinaryPoisson => "binary-poisson".into(),
            SimulationKind::BinaryExponential => "binary-exponential".into(),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "binary-gaussian" => Ok(SimulationKind::BinaryGaussian),
            "binary-poisson" => Ok(SimulationKind::BinaryPoisson),
            "binary-exponential" => Ok(SimulationKind::BinaryExponential),
            other => other
                .strip_prefix("categorical-m")
                .and_then(|m| m.parse().ok())
                .filter(|&m| m >= 2)
                .map(SimulationKind::Categorical)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown model kind '{other}'"))),
        }
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self, SimulationKind::Categorical(_))
    }

    /// Family of node `s` out of `p`; in mixed kinds the first half is binary.
    pub fn family(&self, s: usize, p: usize) -> Family {
        match *self {
            SimulationKind::Categorical(m) => Family::Categorical { levels: m },
            _ if s < p / 2 => Family::Bernoulli,
            SimulationKind::BinaryGaussian => Family::Gaussian { sigma: 1.0 },
            SimulationKind::BinaryPoisson => Family::Poisson,
            SimulationKind::BinaryExponential => Family::Exponential,
        }
    }
}

impl Serialize for SimulationKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.label())
    }
}

impl<'de> Deserialize<'de> for SimulationKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        SimulationKind::parse(&s).map_err(serde::de::Error::custom)
    }
}

pub const DEFAULT_RETRY_CAP: usize = 1000;

/// Every nonzero entry multiplied by `-U(0.3, 1)`.
fn noisy_blocks(
    blocks: &BTreeMap<(usize, usize), Block>,
    seed: u64,
) -> BTreeMap<(usize, usize), Block> {
    let mut rng = rng::from_seed(seed);
    blocks
        .iter()
        .map(|(&k, b)| {
            let mut b = b.clone();
            for v in &mut b.data {
                if *v != 0.0 {
                    *v *= -rng.random_range(0.3..1.0);
                }
            }
            (k, b)
        })
        .collect()
}

/// Builds a simulation model on `graph`: Potts blocks (identity) between
/// categorical nodes, unit interactions otherwise, zero thresholds except
/// `-0.1` for Poisson/Exponential nodes, then edge noise with sign flip.
/// Models with Gaussian nodes are redrawn (fresh noise) until the Gaussian
/// sub-graph precision is positive definite.
pub fn build_simulation_model(
    kind: SimulationKind,
    graph: &Graph,
    seed: u64,
    retry_cap: usize,
) -> Result<MixedModel> {
    let p = graph.p();
    let nodes: Vec<NodeSpec> = (0..p)
        .map(|s| NodeSpec::new(format!("X{}", s + 1), kind.family(s, p)))
        .collect();
    let thresholds: Vec<Vec<f64>> = nodes
        .iter()
        .map(|n| match n.family {
            Family::Poisson | Family::Exponential => vec![-0.1],
            f => vec![0.0; f.threshold_dim()],
        })
        .collect();
    let blocks: BTreeMap<(usize, usize), Block> = graph
        .edges()
        .map(|(s, t, _)| {
            let block = match (nodes[s].family, nodes[t].family) {
                (Family::Categorical { levels: a }, Family::Categorical { levels: b }) => {
                    let mut blk = Block::zeros(a, b);
                    for k in 0..a.min(b) {
                        blk.data[k * b + k] = 1.0;
                    }
                    blk
                }
                (fa, fb) => {
                    let mut blk = Block::zeros(fa.stat_dim(), fb.stat_dim());
                    blk.data.iter_mut().for_each(|v| *v = 1.0);
                    blk
                }
            };
            ((s, t), block)
        })
        .collect();
    // The noiseless blocks may violate normalizability (positive weights into
    // exponential nodes), so only noisy models are validated.
    let has_gaussian = nodes
        .iter()
        .any(|n| matches!(n.family, Family::Gaussian { .. }));
    for attempt in 0..retry_cap.max(1) {
        let model = MixedModel::new(
            nodes.clone(),
            thresholds.clone(),
            noisy_blocks(&blocks, rng::derive(seed, attempt as u64)),
        )?;
        if !has_gaussian || crate::sampler::check_gaussian_subgraph_pd(&model)? {
            return Ok(model);
        }
    }
    Err(Error::RetryCapExceeded(format!(
        "gaussian sub-graph not positive definite after {retry_cap} redraws"
    )))
}
