//! Nodewise regression estimator: per-node augmented designs, penalized fits
//! with CV or EBIC selection, tau-thresholding and AND/OR combination.
//!
//! The order `d` is a clique-size assumption, not a degree bound: each node
//! is regressed on the products of every subset of the other nodes with at
//! most `d` members. `d = 2` suffices when the data come from a pairwise
//! model. Edges are read off the singleton columns only; higher-order columns
//! act as controls.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gencov::{expand_coordinates, nonempty_subsets, realize_coordinates, Coordinate};
use crate::glm::{
    self, cv_select, ebic_select, CvOptions, DesignProblem, GlmFamily, SolverOptions,
    DEFAULT_EBIC_GAMMA,
};
use crate::graph::Graph;
use crate::model::Family;
use crate::sampler::Dataset;
use crate::{par, rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    And,
    Or,
}

impl Rule {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "and" => Ok(Rule::And),
            "or" => Ok(Rule::Or),
            other => Err(Error::InvalidArgument(format!("unknown rule {other:?}"))),
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::And => "and",
            Rule::Or => "or",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Selector {
    Cv { folds: usize, one_se: bool },
    Ebic { gamma: f64 },
}

impl Default for Selector {
    fn default() -> Self {
        Selector::Cv {
            folds: 10,
            one_se: false,
        }
    }
}

impl Selector {
    pub fn ebic_default() -> Self {
        Selector::Ebic {
            gamma: DEFAULT_EBIC_GAMMA,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub d: usize,
    pub selector: Selector,
    pub rule: Rule,
    pub tau_constant: f64,
    pub treat_all_as_gaussian: bool,
    /// Aggregate categorical blocks by the mean of absolute nonzero entries
    /// instead of signed ones.
    pub absolute_blocks: bool,
    /// Master seed; node `s` uses a stream derived from it.
    pub seed: u64,
    /// Worker threads; results do not depend on it, so it is not serialized.
    #[serde(skip_serializing, default)]
    pub jobs: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            d: 2,
            selector: Selector::default(),
            rule: Rule::And,
            tau_constant: 1.0,
            treat_all_as_gaussian: false,
            absolute_blocks: false,
            seed: 0,
            jobs: 1,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidArgument("d must be >= 1".into()));
        }
        if !(self.tau_constant >= 0.0 && self.tau_constant.is_finite()) {
            return Err(Error::InvalidArgument("tau constant must be >= 0".into()));
        }
        Ok(())
    }
}

/// Regression problem for one node with the coordinates behind its columns.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeDesign {
    pub node: usize,
    pub problem: DesignProblem,
    pub coordinates: Vec<Coordinate>,
    /// Labels of constant or duplicate columns that were removed.
    pub dropped: Vec<String>,
}

fn response_family(f: Family) -> GlmFamily {
    match f {
        Family::Gaussian { .. } => GlmFamily::Gaussian,
        Family::Bernoulli => GlmFamily::Binomial,
        Family::Categorical { levels: 2 } => GlmFamily::Binomial,
        Family::Categorical { levels } => GlmFamily::Multinomial { classes: levels },
        Family::Poisson => GlmFamily::Poisson,
        Family::Exponential => GlmFamily::Exponential,
    }
}

/// Response column of node `s` and the products of sufficient statistics of
/// every nonempty subset of the other nodes of size at most `d`
/// (categorical members expanded to reference-coded indicators). Constant
/// and duplicate columns are dropped with a warning.
pub fn build_node_design(data: &Dataset, s: usize, d: usize) -> Result<NodeDesign> {
    let p = data.p();
    if s >= p {
        return Err(Error::NodeOutOfRange { node: s, p });
    }
    if d == 0 {
        return Err(Error::InvalidArgument("d must be >= 1".into()));
    }
    if data.n() < 2 {
        return Err(Error::InvalidArgument("need at least two rows".into()));
    }
    let families: Vec<Family> = data.specs().iter().map(|sp| sp.family).collect();
    let names: Vec<String> = data.specs().iter().map(|sp| sp.name.clone()).collect();
    let rest: Vec<usize> = (0..p).filter(|&t| t != s).collect();
    let all = expand_coordinates(&families, &nonempty_subsets(&rest, d));
    let cols = realize_coordinates(data, &all);
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut x = Vec::new();
    let mut coordinates: Vec<Coordinate> = Vec::new();
    let mut dropped = Vec::new();
    for (c, col) in all.into_iter().zip(cols) {
        let label = c.label(&names);
        let first = col[0];
        if col.iter().all(|&v| v == first) {
            log::warn!("node {s}: dropping constant column {label}");
            dropped.push(label);
            continue;
        }
        let bits: Vec<u64> = col.iter().map(|v| v.to_bits()).collect();
        if let Some(&k) = seen.get(&bits) {
            log::warn!(
                "node {s}: dropping column {label}, duplicate of {}",
                coordinates[k].label(&names)
            );
            dropped.push(label);
            continue;
        }
        seen.insert(bits, coordinates.len());
        x.push(col);
        coordinates.push(c);
    }
    let labels = coordinates.iter().map(|c: &Coordinate| c.label(&names)).collect();
    let problem = DesignProblem::new(x, data.column(s).to_vec(), response_family(families[s]))?
        .with_labels(labels)?;
    Ok(NodeDesign {
        node: s,
        problem,
        coordinates,
        dropped,
    })
}

/// `τ = c · √d · ‖θ‖₂ · √(log p / n)`; entries with `|θ_j| < τ` are zeroed.
pub fn threshold_tau(theta: &[f64], d: usize, p: usize, n: usize, c: f64) -> (Vec<f64>, f64) {
    let norm = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
    let tau = c * (d as f64).sqrt() * norm * ((p as f64).ln() / n as f64).sqrt();
    let out = theta
        .iter()
        .map(|&v| if v.abs() < tau { 0.0 } else { v })
        .collect();
    (out, tau)
}

/// Combines two directed values (`None` = absent). AND needs both and
/// averages them; OR needs one and averages the present ones.
pub fn combine_pair(a: Option<f64>, b: Option<f64>, rule: Rule) -> Option<f64> {
    match (a, b, rule) {
        (Some(x), Some(y), _) => Some((x + y) / 2.0),
        (Some(x), None, Rule::Or) | (None, Some(x), Rule::Or) => Some(x),
        _ => None,
    }
}

/// Weighted graph from a `p × p` table of directed values (row = regression
/// of that node).
pub fn combine_neighborhoods(directed: &[Vec<Option<f64>>], rule: Rule) -> Result<Graph> {
    let p = directed.len();
    let mut g = Graph::new(p);
    for s in 0..p {
        if directed[s].len() != p {
            return Err(Error::SizeMismatch(directed[s].len(), p));
        }
        for t in s + 1..p {
            if let Some(w) = combine_pair(directed[s][t], directed[t][s], rule) {
                g.add_weighted_edge(s, t, w)?;
            }
        }
    }
    Ok(g)
}

/// Fit of one node's regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeFit {
    pub node: usize,
    pub family: GlmFamily,
    pub labels: Vec<String>,
    pub dropped: Vec<String>,
    pub lambda: f64,
    pub lambda_index: usize,
    pub path_length: usize,
    pub tau: f64,
    pub intercept: Vec<f64>,
    /// Per response class, per column.
    pub raw: Vec<Vec<f64>>,
    pub thresholded: Vec<Vec<f64>>,
    /// Aggregated value linking each other node (`None` if absent or self).
    pub directed: Vec<Option<f64>>,
    /// Thresholded singleton block per other node, rows = response classes.
    #[serde(skip)]
    pub blocks: Vec<Vec<Vec<f64>>>,
}

fn aggregate(block: &[Vec<f64>], absolute: bool) -> Option<f64> {
    let nz: Vec<f64> = block
        .iter()
        .flatten()
        .copied()
        .filter(|v| *v != 0.0)
        .map(|v| if absolute { v.abs() } else { v })
        .collect();
    if nz.is_empty() {
        None
    } else {
        Some(nz.iter().sum::<f64>() / nz.len() as f64)
    }
}

/// Design, selection, fit and thresholding for node `s`. `data` must already
/// be coerced when all nodes are to be treated as Gaussian.
pub fn fit_node(data: &Dataset, s: usize, cfg: &EstimatorConfig) -> Result<NodeFit> {
    let design = build_node_design(data, s, cfg.d)?;
    let prob = &design.problem;
    log::info!("node {s}: {} design columns ({} dropped)", prob.q(), design.dropped.len());
    let node_seed = rng::derive(cfg.seed, s as u64);
    let tag = |e: Error| match e {
        Error::CvInfeasible { node: None, reason } => Error::CvInfeasible {
            node: Some(s),
            reason,
        },
        other => other,
    };
    let (path, index) = match cfg.selector {
        Selector::Cv { folds, one_se } => {
            let opts = CvOptions {
                folds,
                one_se,
                ..CvOptions::new(node_seed)
            };
            let cv = cv_select(prob, &opts).map_err(tag)?;
            (cv.path, cv.index)
        }
        Selector::Ebic { gamma } => {
            let lmax = glm::lambda_max(prob)?;
            let grid = glm::default_lambda_grid(lmax, prob.n(), prob.q());
            let path = glm::fit_lasso_path(
                prob,
                &grid,
                &SolverOptions {
                    early_stop: true,
                    ..SolverOptions::default()
                },
            )?;
            let sel = ebic_select(prob, &path, gamma)?;
            (path, sel.index)
        }
    };
    let point = &path.points[index];
    let raw = point.coefficients.beta.clone();
    let flat: Vec<f64> = raw.iter().flatten().copied().collect();
    let (thr, tau) = threshold_tau(&flat, cfg.d, data.p(), data.n(), cfg.tau_constant);
    let q = prob.q();
    let thresholded: Vec<Vec<f64>> = if q == 0 {
        vec![Vec::new(); raw.len()]
    } else {
        thr.chunks(q).map(<[f64]>::to_vec).collect()
    };

    let p = data.p();
    let mut blocks = vec![Vec::new(); p];
    let mut directed = vec![None; p];
    for t in (0..p).filter(|&t| t != s) {
        let cols: Vec<usize> = (0..q)
            .filter(|&j| design.coordinates[j].clique.as_slice() == [t])
            .collect();
        let block: Vec<Vec<f64>> = thresholded
            .iter()
            .map(|row| cols.iter().map(|&j| row[j]).collect())
            .collect();
        directed[t] = aggregate(&block, cfg.absolute_blocks);
        blocks[t] = block;
    }
    Ok(NodeFit {
        node: s,
        family: prob.family,
        labels: prob.labels.clone(),
        dropped: design.dropped,
        lambda: point.lambda,
        lambda_index: index,
        path_length: path.points.len(),
        tau,
        intercept: point.coefficients.intercept.clone(),
        raw,
        thresholded,
        directed,
        blocks,
    })
}

/// Both directed blocks of a pair involving a categorical node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockDetail {
    pub s: usize,
    pub t: usize,
    /// Block from the regression of `s` (rows: classes of `s`).
    pub from_s: Vec<Vec<f64>>,
    /// Block from the regression of `t`.
    pub from_t: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub p: usize,
    pub n: usize,
    pub names: Vec<String>,
    pub config: EstimatorConfig,
    pub adjacency: Vec<Vec<f64>>,
    pub edges: Vec<(usize, usize, f64)>,
    pub nodes: Vec<NodeFit>,
    pub categorical_blocks: Vec<BlockDetail>,
}

impl EstimationResult {
    fn directed(&self) -> Vec<Vec<Option<f64>>> {
        self.nodes.iter().map(|f| f.directed.clone()).collect()
    }

    /// Combined graph under the configured rule.
    pub fn graph(&self) -> Graph {
        let mut g = Graph::new(self.p);
        for &(s, t, w) in &self.edges {
            g.add_weighted_edge(s, t, w).expect("valid edge");
        }
        g
    }

    /// Combination of the same per-node fits under another rule.
    pub fn combine(&self, rule: Rule) -> Graph {
        combine_neighborhoods(&self.directed(), rule).expect("square table")
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `s,t,weight` rows with a header.
    pub fn edges_csv(&self) -> String {
        crate::io::graph_to_csv(&self.graph())
    }
}

/// Runs the estimator on every node and combines the neighborhoods.
pub fn estimate_graph(data: &Dataset, cfg: &EstimatorConfig) -> Result<EstimationResult> {
    cfg.validate()?;
    let coerced;
    let data = if cfg.treat_all_as_gaussian {
        coerced = data.as_all_gaussian();
        &coerced
    } else {
        data
    };
    let p = data.p();
    let fits: Vec<Result<NodeFit>> = par::map_indexed(p, cfg.jobs, |s| fit_node(data, s, cfg));
    let nodes: Vec<NodeFit> = fits.into_iter().collect::<Result<_>>()?;
    assemble(data, cfg, nodes)
}

/// Combines per-node fits (in node order) into a result.
pub fn assemble(data: &Dataset, cfg: &EstimatorConfig, nodes: Vec<NodeFit>) -> Result<EstimationResult> {
    let p = data.p();
    let directed: Vec<Vec<Option<f64>>> = nodes.iter().map(|f| f.directed.clone()).collect();
    let g = combine_neighborhoods(&directed, cfg.rule)?;
    let families: Vec<Family> = data.specs().iter().map(|sp| sp.family).collect();
    let mut categorical_blocks = Vec::new();
    for s in 0..p {
        for t in s + 1..p {
            let cat = |f: Family| matches!(f, Family::Categorical { .. });
            if g.has_edge(s, t) && (cat(families[s]) || cat(families[t])) {
                categorical_blocks.push(BlockDetail {
                    s,
                    t,
                    from_s: nodes[s].blocks[t].clone(),
                    from_t: nodes[t].blocks[s].clone(),
                });
            }
        }
    }
    Ok(EstimationResult {
        p,
        n: data.n(),
        names: data.specs().iter().map(|sp| sp.name.clone()).collect(),
        config: *cfg,
        adjacency: g.adjacency_matrix(),
        edges: g.edges().collect(),
        nodes,
        categorical_blocks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gencov::{candidate_neighborhood_plan, exact_covariance};
    use crate::model::{MixedModel, NodeSpec};
    use crate::sampler::gibbs_sample;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand_distr::{Distribution, Normal};

    fn gaussian_data(n: usize, p: usize, seed: u64) -> Dataset {
        let mut r = rng::from_seed(seed);
        let nd = Normal::new(0.0, 1.0).unwrap();
        let specs = (0..p)
            .map(|i| NodeSpec::new(format!("g{i}"), Family::Gaussian { sigma: 1.0 }))
            .collect();
        let cols = (0..p).map(|_| (0..n).map(|_| nd.sample(&mut r)).collect()).collect();
        Dataset::new(specs, cols).unwrap()
    }

    #[test]
    fn design_shapes() {
        let d = gaussian_data(30, 3, 1);
        assert_eq!(build_node_design(&d, 0, 1).unwrap().problem.q(), 2);
        let d2 = build_node_design(&d, 0, 2).unwrap();
        assert_eq!(d2.problem.labels, vec!["g1", "g2", "g1*g2"]);
        let specs = vec![
            NodeSpec::new("a", Family::Gaussian { sigma: 1.0 }),
            NodeSpec::new("b", Family::Categorical { levels: 3 }),
            NodeSpec::new("c", Family::Gaussian { sigma: 1.0 }),
        ];
        let cols = vec![
            vec![0.1, 0.5, -0.3, 1.0, 0.2, 0.0],
            vec![0.0, 1.0, 2.0, 0.0, 1.0, 2.0],
            vec![1.0, -1.0, 0.4, 0.3, 0.8, -0.2],
        ];
        let data = Dataset::new(specs, cols).unwrap();
        let nd = build_node_design(&data, 0, 1).unwrap();
        assert_eq!(nd.problem.q(), 3);
        assert_eq!(nd.problem.labels, vec!["b=0", "b=1", "c"]);
        let resp = build_node_design(&data, 1, 1).unwrap();
        assert_eq!(resp.problem.family, GlmFamily::Multinomial { classes: 3 });
    }

    #[test]
    fn design_drops_constant_and_duplicate_columns() {
        let specs = vec![
            NodeSpec::new("a", Family::Gaussian { sigma: 1.0 }),
            NodeSpec::new("b", Family::Gaussian { sigma: 1.0 }),
            NodeSpec::new("c", Family::Gaussian { sigma: 1.0 }),
            NodeSpec::new("k", Family::Gaussian { sigma: 1.0 }),
        ];
        let b = vec![0.3, -1.0, 2.0, 0.5];
        let data = Dataset::new(
            specs,
            vec![vec![1.0, 2.0, 3.0, 4.0], b.clone(), b, vec![7.0; 4]],
        )
        .unwrap();
        let nd = build_node_design(&data, 0, 1).unwrap();
        assert_eq!(nd.problem.labels, vec!["b"]);
        assert_eq!(nd.dropped, vec!["c", "k"]);
    }

    #[test]
    fn d_monotone_design() {
        let d = gaussian_data(40, 5, 2);
        let one = build_node_design(&d, 2, 1).unwrap().problem.labels;
        let two = build_node_design(&d, 2, 2).unwrap().problem.labels;
        assert!(one.iter().all(|l| two.contains(l)));
        assert!(one.iter().all(|l| !l.contains('*')));
    }

    #[test]
    fn tau_examples() {
        let (out, tau) = threshold_tau(&[0.0; 3], 2, 16, 1600, 1.0);
        assert_eq!(tau, 0.0);
        assert_eq!(out, vec![0.0; 3]);
        let (out, tau) = threshold_tau(&[1.0, 0.0, 0.0], 2, 16, 1600, 1.0);
        let expect = 2f64.sqrt() * (16f64.ln() / 1600.0).sqrt();
        assert!((tau - expect).abs() < 1e-15);
        assert!((tau - 0.0589).abs() < 1e-4);
        assert_eq!(out[0], 1.0);
        let (_, tau4) = threshold_tau(&[1.0, 0.0, 0.0], 2, 16, 6400, 1.0);
        assert!((tau4 - tau / 2.0).abs() < 1e-15);
    }

    #[test]
    fn rule_examples() {
        assert_eq!(combine_pair(Some(0.4), Some(0.6), Rule::And), Some(0.5));
        assert_eq!(combine_pair(Some(0.5), None, Rule::And), None);
        assert_eq!(combine_pair(Some(0.5), None, Rule::Or), Some(0.5));
        assert_eq!(combine_pair(None, None, Rule::Or), None);
        assert_eq!(combine_pair(None, None, Rule::And), None);
    }

    #[test]
    fn independent_columns_give_sparse_graph() {
        let d = gaussian_data(400, 5, 3);
        let cfg = EstimatorConfig {
            d: 1,
            ..EstimatorConfig::default()
        };
        let r = estimate_graph(&d, &cfg).unwrap();
        assert!(r.edges.len() <= 1, "{:?}", r.edges);
    }

    #[test]
    fn four_cycle_recovery_and_order_independence() {
        let m = MixedModel::four_cycle_example(0.1, 0.5);
        let data = gibbs_sample(&m, 3000, 100, 2, 17).unwrap();
        let cfg = EstimatorConfig {
            seed: 9,
            ..EstimatorConfig::default()
        };
        let r = estimate_graph(&data, &cfg).unwrap();
        let truth = m.graph().edge_set();
        assert_eq!(r.graph().edge_set(), truth, "{:?}", r.edges);
        // nodes fitted in reverse order and then assembled
        let mut fits: Vec<NodeFit> = (0..4).rev().map(|s| fit_node(&data, s, &cfg).unwrap()).collect();
        fits.reverse();
        assert_eq!(assemble(&data, &cfg, fits).unwrap(), r);
        let mut par = estimate_graph(&data, &EstimatorConfig { jobs: 3, ..cfg }).unwrap();
        par.config.jobs = 1;
        assert_eq!(par, r);
        let and = r.combine(Rule::And).edge_set();
        assert!(and.is_subset(&r.combine(Rule::Or).edge_set()));
    }

    #[test]
    fn ebic_and_all_gaussian_modes_run() {
        let m = MixedModel::four_cycle_example(0.1, 0.5);
        let data = gibbs_sample(&m, 800, 50, 2, 5).unwrap();
        let cfg = EstimatorConfig {
            selector: Selector::ebic_default(),
            treat_all_as_gaussian: true,
            ..EstimatorConfig::default()
        };
        let r = estimate_graph(&data, &cfg).unwrap();
        assert!(r.nodes.iter().all(|f| f.family == GlmFamily::Gaussian));
        let json = r.to_json().unwrap();
        assert!(json.contains("\"adjacency\""));
        assert!(r.edges_csv().starts_with("s,t,weight"));
    }

    #[test]
    fn cv_infeasibility_names_the_node() {
        let specs = vec![
            NodeSpec::new("a", Family::Bernoulli),
            NodeSpec::new("b", Family::Gaussian { sigma: 1.0 }),
        ];
        let mut a = vec![0.0; 30];
        a[3] = 1.0;
        let b: Vec<f64> = (0..30).map(|i| i as f64 * 0.1).collect();
        let data = Dataset::new(specs, vec![a, b]).unwrap();
        let err = estimate_graph(&data, &EstimatorConfig::default()).unwrap_err();
        assert!(matches!(err, Error::CvInfeasible { node: Some(0), .. }), "{err}");
        assert!(err.to_string().contains("EBIC"));
    }

    #[test]
    fn population_regression_support_matches_inverse_row() {
        // The population regression vector equals -Γ(s,·)/Γ(s,s).
        let m = crate::gencov::random_binary_gaussian_model(&Graph::path(4), 21).unwrap();
        for s in 0..4 {
            let deg = m.graph().degree(s).unwrap().max(1);
            let rep = exact_covariance(&m, &candidate_neighborhood_plan(s, 4, deg).unwrap()).unwrap();
            let k = rep.dim();
            let sigma = DMatrix::from_fn(k, k, |i, j| rep.matrix[i][j]);
            let gamma = rep.inverse_matrix().unwrap();
            let i_s = rep.coordinates.iter().position(|c| c.clique == [s]).unwrap();
            let rest: Vec<usize> = (0..k).filter(|&i| i != i_s).collect();
            let srr = DMatrix::from_fn(k - 1, k - 1, |a, b| sigma[(rest[a], rest[b])]);
            let srs = DMatrix::from_fn(k - 1, 1, |a, _| sigma[(rest[a], i_s)]);
            let beta = srr.lu().solve(&srs).unwrap();
            for (a, &j) in rest.iter().enumerate() {
                let zb = beta[a].abs() < 1e-8;
                let zg = gamma[(i_s, j)].abs() < 1e-8;
                assert_eq!(zb, zg, "node {s} coordinate {j}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(6))]

        #[test]
        fn larger_tau_never_adds_edges(seed in any::<u64>(), c in 0.5f64..3.0) {
            let m = MixedModel::four_cycle_example(0.1, 0.5);
            let data = gibbs_sample(&m, 300, 20, 1, seed).unwrap();
            let base = EstimatorConfig { seed, selector: Selector::ebic_default(), ..EstimatorConfig::default() };
            let lo = estimate_graph(&data, &base).unwrap();
            let hi = estimate_graph(&data, &EstimatorConfig { tau_constant: c * 2.0, ..base }).unwrap();
            prop_assert!(hi.graph().edge_set().is_subset(&lo.graph().edge_set()));
            prop_assert!(lo.combine(Rule::And).edge_set().is_subset(&lo.combine(Rule::Or).edge_set()));
        }
    }
}
