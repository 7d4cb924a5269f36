//! Generalized covariance matrices: covariances of clique-product sufficient
//! statistics, computed exactly for small binary/categorical/Gaussian models
//! or empirically from data, and checks of their inverse's zero pattern.

use std::collections::{BTreeSet, HashMap};
use std::fmt::{self, Write as _};

use nalgebra::DMatrix;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{self, Graph};
use crate::model::{Block, Family, MixedModel, NodeSpec};
use crate::rng;
use crate::sampler::{self, Dataset};

/// Largest number of discrete configurations the exact oracle enumerates.
pub const ENUMERATION_CAP: u128 = 4096;
/// Default magnitude below which an exact inverse entry counts as zero.
pub const EXACT_ZERO_TOL: f64 = 1e-8;
/// Default magnitude above which an exact inverse block counts as nonzero.
pub const EXACT_NONZERO_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanOrigin {
    AllCliques,
    SeparatorPowersets,
    CandidateNeighborhood,
}

/// Ordered node subsets, each standing for the product of its members'
/// sufficient statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationPlan {
    cliques: Vec<Vec<usize>>,
    origin: PlanOrigin,
}

fn size_lex(a: &Vec<usize>, b: &Vec<usize>) -> std::cmp::Ordering {
    a.len().cmp(&b.len()).then_with(|| a.cmp(b))
}

impl AugmentationPlan {
    /// Sorts members and subsets (size, then lexicographic); rejects empty or
    /// duplicate subsets.
    pub fn new(cliques: Vec<Vec<usize>>, origin: PlanOrigin) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::with_capacity(cliques.len());
        for mut c in cliques {
            c.sort_unstable();
            if c.is_empty() || c.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidArgument(format!("invalid plan subset {c:?}")));
            }
            if !seen.insert(c.clone()) {
                return Err(Error::InvalidArgument(format!("duplicate plan subset {c:?}")));
            }
            out.push(c);
        }
        out.sort_by(size_lex);
        Ok(AugmentationPlan {
            cliques: out,
            origin,
        })
    }

    pub fn cliques(&self) -> &[Vec<usize>] {
        &self.cliques
    }

    pub fn origin(&self) -> PlanOrigin {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.cliques.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cliques.is_empty()
    }

    /// Singleton plan `{0}, …, {p-1}`.
    pub fn singletons(p: usize) -> Self {
        AugmentationPlan {
            cliques: (0..p).map(|s| vec![s]).collect(),
            origin: PlanOrigin::SeparatorPowersets,
        }
    }

    /// Every nonempty clique of `g`.
    pub fn all_cliques(g: &Graph) -> Self {
        let mut set = BTreeSet::new();
        for c in graph::maximal_cliques(g) {
            for sub in nonempty_subsets(&c, c.len()) {
                set.insert(sub);
            }
        }
        let mut cliques: Vec<Vec<usize>> = set.into_iter().collect();
        cliques.sort_by(size_lex);
        AugmentationPlan {
            cliques,
            origin: PlanOrigin::AllCliques,
        }
    }

    /// All singletons plus every nonempty subset of every separator of the
    /// junction tree of `g` (which must be triangulated).
    pub fn separator_powersets(g: &Graph) -> Result<Self> {
        let jt = graph::junction_tree(g)?;
        let mut set: BTreeSet<Vec<usize>> = (0..g.p()).map(|s| vec![s]).collect();
        for sep in jt.separator_sets() {
            for sub in nonempty_subsets(&sep, sep.len()) {
                set.insert(sub);
            }
        }
        let mut cliques: Vec<Vec<usize>> = set.into_iter().collect();
        cliques.sort_by(size_lex);
        Ok(AugmentationPlan {
            cliques,
            origin: PlanOrigin::SeparatorPowersets,
        })
    }
}

/// Nonempty subsets of `items` with at most `max_size` elements, by size then
/// lexicographically.
pub fn nonempty_subsets(items: &[usize], max_size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for k in 1..=max_size.min(items.len()) {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            out.push(idx.iter().map(|&i| items[i]).collect());
            let mut i = k;
            while i > 0 && idx[i - 1] == items.len() - k + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            idx[i - 1] += 1;
            for j in i..k {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
    out
}

/// `{s}` together with every nonempty subset of `V \ {s}` of size at most `d`.
pub fn candidate_neighborhood_plan(s: usize, p: usize, d: usize) -> Result<AugmentationPlan> {
    if s >= p {
        return Err(Error::NodeOutOfRange { node: s, p });
    }
    if d == 0 || d >= p {
        return Err(Error::InvalidArgument(format!("d must lie in 1..={}, got {d}", p - 1)));
    }
    let rest: Vec<usize> = (0..p).filter(|&t| t != s).collect();
    let mut cliques = nonempty_subsets(&rest, d);
    cliques.push(vec![s]);
    cliques.sort_by(size_lex);
    Ok(AugmentationPlan {
        cliques,
        origin: PlanOrigin::CandidateNeighborhood,
    })
}

/// One scalar coordinate of an augmented statistic vector: a clique, with a
/// chosen non-reference level for each categorical member.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Coordinate {
    pub clique: Vec<usize>,
    /// Aligned with `clique`; `Some(level)` for categorical members.
    pub levels: Vec<Option<usize>>,
}

impl Coordinate {
    /// Value of this coordinate at a full assignment.
    pub fn value(&self, families: &[Family], x: &[f64]) -> f64 {
        let mut v = 1.0;
        for (&t, lvl) in self.clique.iter().zip(&self.levels) {
            v *= match lvl {
                Some(k) => (x[t] as usize == *k) as u8 as f64,
                None => families[t].scalar_stat(x[t]),
            };
        }
        v
    }

    /// Label built from node names, members joined by `*`.
    pub fn label(&self, names: &[String]) -> String {
        let parts: Vec<String> = self
            .clique
            .iter()
            .zip(&self.levels)
            .map(|(&t, l)| match l {
                Some(k) => format!("{}={k}", names[t]),
                None => names[t].clone(),
            })
            .collect();
        parts.join("*")
    }
}

/// Expands each clique into its coordinates (categorical members contribute
/// levels `0..m-1` in reference coding, the last level being the reference).
pub fn expand_coordinates(families: &[Family], cliques: &[Vec<usize>]) -> Vec<Coordinate> {
    let mut out = Vec::new();
    for c in cliques {
        let mut partial: Vec<Vec<Option<usize>>> = vec![Vec::new()];
        for &t in c {
            let choices: Vec<Option<usize>> = match families[t] {
                Family::Categorical { levels } => (0..levels - 1).map(Some).collect(),
                _ => vec![None],
            };
            partial = partial
                .into_iter()
                .flat_map(|p| {
                    choices.iter().map(move |&ch| {
                        let mut q = p.clone();
                        q.push(ch);
                        q
                    })
                })
                .collect();
        }
        out.extend(partial.into_iter().map(|levels| Coordinate {
            clique: c.clone(),
            levels,
        }));
    }
    out
}

/// Covariance of augmented statistics, with its inverse when it exists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceReport {
    pub labels: Vec<String>,
    pub coordinates: Vec<Coordinate>,
    pub matrix: Vec<Vec<f64>>,
    pub inverse: Option<Vec<Vec<f64>>>,
    pub zero_tol: f64,
    pub zero_pattern: Option<Vec<Vec<bool>>>,
    /// `max |Γ·Σ − I|` when the inverse is present.
    pub inverse_residual: Option<f64>,
    pub diagnostic: Option<String>,
}

impl CovarianceReport {
    fn build(names: &[String], coordinates: Vec<Coordinate>, cov: DMatrix<f64>, zero_tol: f64) -> Self {
        let k = cov.nrows();
        let labels = coordinates.iter().map(|c| c.label(names)).collect();
        let to_rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
            (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
        };
        let mut diagnostic = None;
        let mut inverse = None;
        let constant: Vec<usize> = (0..k).filter(|&i| cov[(i, i)] <= 1e-14).collect();
        if !constant.is_empty() {
            diagnostic = Some(format!("rank deficient: constant coordinates {constant:?}"));
        } else if k > 0 {
            let eig = cov.clone().symmetric_eigenvalues();
            let (lo, hi) = (eig.min(), eig.max());
            if lo <= 1e-12 * hi {
                diagnostic = Some(format!("rank deficient: eigenvalue range [{lo:e}, {hi:e}]"));
            } else {
                match cov.clone().cholesky() {
                    Some(ch) => inverse = Some(ch.inverse()),
                    None => diagnostic = Some("covariance is not positive definite".into()),
                }
            }
        }
        let inverse_residual = inverse.as_ref().map(|inv: &DMatrix<f64>| {
            (inv * &cov - DMatrix::<f64>::identity(k, k)).amax()
        });
        let zero_pattern = inverse.as_ref().map(|inv| {
            (0..k)
                .map(|i| (0..k).map(|j| inv[(i, j)].abs() < zero_tol).collect())
                .collect()
        });
        CovarianceReport {
            labels,
            coordinates,
            matrix: to_rows(&cov),
            inverse: inverse.as_ref().map(to_rows),
            zero_tol,
            zero_pattern,
            inverse_residual,
            diagnostic,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.len()
    }

    pub fn inverse_matrix(&self) -> Option<DMatrix<f64>> {
        self.inverse.as_ref().map(|rows| {
            let k = rows.len();
            DMatrix::from_fn(k, k, |i, j| rows[i][j])
        })
    }

    /// Index ranges of the coordinates belonging to each clique of `plan`.
    fn clique_ranges(&self) -> Vec<(Vec<usize>, std::ops::Range<usize>)> {
        let mut out: Vec<(Vec<usize>, std::ops::Range<usize>)> = Vec::new();
        for (i, c) in self.coordinates.iter().enumerate() {
            match out.last_mut() {
                Some((cl, r)) if *cl == c.clique => r.end = i + 1,
                _ => out.push((c.clique.clone(), i..i + 1)),
            }
        }
        out
    }

    /// Aligned text rendering of the inverse (or the covariance when no
    /// inverse exists) with two decimals.
    pub fn to_text(&self) -> String {
        let (title, m) = match &self.inverse {
            Some(inv) => ("inverse", inv),
            None => ("covariance", &self.matrix),
        };
        let width = self.labels.iter().map(String::len).max().unwrap_or(0).max(6) + 1;
        let mut s = String::new();
        let _ = writeln!(s, "{title} ({0}x{0})", self.dim());
        let _ = write!(s, "{:width$}", "");
        for l in &self.labels {
            let _ = write!(s, "{l:>width$}");
        }
        s.push('\n');
        for (l, row) in self.labels.iter().zip(m) {
            let _ = write!(s, "{l:<width$}");
            for v in row {
                let _ = write!(s, "{:>width$}", format_two_decimals(*v));
            }
            s.push('\n');
        }
        if let Some(d) = &self.diagnostic {
            let _ = writeln!(s, "note: {d}");
        }
        s
    }
}

/// Two-decimal rendering without a negative zero.
pub fn format_two_decimals(v: f64) -> String {
    let r = (v * 100.0).round() / 100.0;
    if r == 0.0 {
        "0.00".into()
    } else {
        format!("{r:.2}")
    }
}

fn names_of(specs: &[NodeSpec]) -> Vec<String> {
    specs.iter().map(|s| s.name.clone()).collect()
}

/// Exact covariance of the plan's coordinates under `model`, by enumerating
/// discrete configurations and integrating the Gaussian block in closed form.
pub fn exact_covariance(model: &MixedModel, plan: &AugmentationPlan) -> Result<CovarianceReport> {
    let p = model.p();
    check_plan(plan, p)?;
    let families: Vec<Family> = model.nodes().iter().map(|n| n.family).collect();
    let mut discrete = Vec::new();
    let mut gauss = Vec::new();
    for (s, f) in families.iter().enumerate() {
        match f {
            Family::Bernoulli | Family::Categorical { .. } => discrete.push(s),
            Family::Gaussian { .. } => gauss.push(s),
            other => {
                return Err(Error::Unsupported(format!(
                    "node {s} is {other}; only bernoulli, categorical and gaussian nodes are supported"
                )))
            }
        }
    }
    let radix: Vec<usize> = discrete
        .iter()
        .map(|&s| match families[s] {
            Family::Categorical { levels } => levels,
            _ => 2,
        })
        .collect();
    let configs: u128 = radix.iter().map(|&m| m as u128).product();
    if configs > ENUMERATION_CAP {
        return Err(Error::EnumerationCap(configs, ENUMERATION_CAP));
    }

    let coords = expand_coordinates(&families, plan.cliques());
    let k = coords.len();
    let mut gpos = vec![usize::MAX; p];
    for (i, &g) in gauss.iter().enumerate() {
        gpos[g] = i;
    }
    // Gaussian members of each coordinate (indices into `gauss`).
    let gmembers: Vec<Vec<usize>> = coords
        .iter()
        .map(|c| {
            c.clique
                .iter()
                .filter(|&&t| gpos[t] != usize::MAX)
                .map(|&t| gpos[t])
                .collect()
        })
        .collect();

    let ng = gauss.len();
    let precision = sampler::gaussian_precision(model, &gauss);
    let cond_cov = if ng > 0 {
        precision
            .clone()
            .cholesky()
            .ok_or_else(|| {
                Error::InvalidModel("gaussian block precision is not positive definite".into())
            })?
            .inverse()
    } else {
        DMatrix::zeros(0, 0)
    };

    let mut log_w = Vec::with_capacity(configs as usize);
    let mut means = Vec::with_capacity(configs as usize);
    let mut assignments = Vec::with_capacity(configs as usize);
    let mut x = vec![0.0; p];
    let mut digits = vec![0usize; discrete.len()];
    let mut eta = Vec::new();
    for _ in 0..configs {
        for (&s, &dg) in discrete.iter().zip(&digits) {
            x[s] = dg as f64;
        }
        for &g in &gauss {
            x[g] = 0.0;
        }
        let mut h = nalgebra::DVector::zeros(ng);
        for (i, &g) in gauss.iter().enumerate() {
            model.eta_into(g, &x, &mut eta);
            h[i] = eta[0];
        }
        let mu = &cond_cov * &h;
        log_w.push(model.log_unnormalized_density(&x)? + 0.5 * h.dot(&mu));
        means.push(mu);
        assignments.push(x.clone());
        for (dg, &m) in digits.iter_mut().zip(&radix) {
            *dg += 1;
            if *dg < m {
                break;
            }
            *dg = 0;
        }
    }
    let max_lw = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_w.iter().map(|l| (l - max_lw).exp()).collect();
    let z: f64 = weights.iter().sum();

    let mut first = vec![0.0; k];
    let mut second = DMatrix::<f64>::zeros(k, k);
    let mut dfac = vec![0.0; k];
    for c in 0..configs as usize {
        let w = weights[c] / z;
        for (a, coord) in coords.iter().enumerate() {
            dfac[a] = coord
                .clique
                .iter()
                .zip(&coord.levels)
                .filter(|(&t, _)| gpos[t] == usize::MAX)
                .map(|(&t, l)| match l {
                    Some(lv) => (assignments[c][t] as usize == *lv) as u8 as f64,
                    None => assignments[c][t],
                })
                .product();
        }
        let mut moments = GaussianMoments::new(&means[c], &cond_cov);
        for a in 0..k {
            if dfac[a] == 0.0 {
                continue;
            }
            first[a] += w * dfac[a] * moments.get(&gmembers[a]);
            for b in a..k {
                if dfac[b] == 0.0 {
                    continue;
                }
                let mut key = gmembers[a].clone();
                key.extend_from_slice(&gmembers[b]);
                second[(a, b)] += w * dfac[a] * dfac[b] * moments.get(&key);
            }
        }
    }
    let mut cov = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in a..k {
            let v = second[(a, b)] - first[a] * first[b];
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    Ok(CovarianceReport::build(
        &names_of(model.nodes()),
        coords,
        cov,
        EXACT_ZERO_TOL,
    ))
}

/// Raw moments `E[Π u_i]` of a Gaussian vector, memoized by sorted index
/// multiset.
struct GaussianMoments<'a> {
    mean: &'a nalgebra::DVector<f64>,
    cov: &'a DMatrix<f64>,
    memo: HashMap<Vec<usize>, f64>,
}

impl<'a> GaussianMoments<'a> {
    fn new(mean: &'a nalgebra::DVector<f64>, cov: &'a DMatrix<f64>) -> Self {
        GaussianMoments {
            mean,
            cov,
            memo: HashMap::new(),
        }
    }

    fn get(&mut self, idx: &[usize]) -> f64 {
        let mut key = idx.to_vec();
        key.sort_unstable();
        self.eval(key)
    }

    fn eval(&mut self, key: Vec<usize>) -> f64 {
        match key.len() {
            0 => return 1.0,
            1 => return self.mean[key[0]],
            _ => {}
        }
        if let Some(&v) = self.memo.get(&key) {
            return v;
        }
        let i = key[0];
        let rest = key[1..].to_vec();
        let mut v = self.mean[i] * self.eval(rest.clone());
        for j in 0..rest.len() {
            if j > 0 && rest[j] == rest[j - 1] {
                // Equal indices contribute identical terms.
                continue;
            }
            let mult = rest.iter().filter(|&&r| r == rest[j]).count() as f64;
            let c = self.cov[(i, rest[j])];
            if c != 0.0 {
                let mut r = rest.clone();
                r.remove(j);
                v += mult * c * self.eval(r);
            }
        }
        self.memo.insert(key, v);
        v
    }
}

fn check_plan(plan: &AugmentationPlan, p: usize) -> Result<()> {
    for c in plan.cliques() {
        if let Some(&t) = c.iter().find(|&&t| t >= p) {
            return Err(Error::NodeOutOfRange { node: t, p });
        }
    }
    Ok(())
}

/// Realized coordinate columns of `plan` on `data` (column-major).
pub fn realize_coordinates(data: &Dataset, coords: &[Coordinate]) -> Vec<Vec<f64>> {
    let n = data.n();
    let families: Vec<Family> = data.specs().iter().map(|s| s.family).collect();
    coords
        .iter()
        .map(|c| {
            let mut col = vec![1.0; n];
            for (&t, l) in c.clique.iter().zip(&c.levels) {
                let src = data.column(t);
                match l {
                    Some(k) => col
                        .iter_mut()
                        .zip(src)
                        .for_each(|(v, &x)| *v *= (x as usize == *k) as u8 as f64),
                    None => col
                        .iter_mut()
                        .zip(src)
                        .for_each(|(v, &x)| *v *= families[t].scalar_stat(x)),
                }
            }
            col
        })
        .collect()
}

/// Sample covariance (divisor `n − 1`) of the plan's realized coordinates.
pub fn empirical_covariance(data: &Dataset, plan: &AugmentationPlan) -> Result<CovarianceReport> {
    check_plan(plan, data.p())?;
    let n = data.n();
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two rows".into()));
    }
    let families: Vec<Family> = data.specs().iter().map(|s| s.family).collect();
    let coords = expand_coordinates(&families, plan.cliques());
    let cols = realize_coordinates(data, &coords);
    let k = cols.len();
    let means: Vec<f64> = cols.iter().map(|c| c.iter().sum::<f64>() / n as f64).collect();
    let centered: Vec<Vec<f64>> = cols
        .iter()
        .zip(&means)
        .map(|(c, m)| c.iter().map(|v| v - m).collect())
        .collect();
    let mut cov = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in a..k {
            let v = centered[a]
                .iter()
                .zip(&centered[b])
                .map(|(x, y)| x * y)
                .sum::<f64>()
                / (n - 1) as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    Ok(CovarianceReport::build(
        &names_of(data.specs()),
        coords,
        cov,
        EXACT_ZERO_TOL,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StructureMode {
    /// Full clique set of a triangulated graph.
    Theorem1,
    /// Singletons plus separator power sets of a triangulation.
    Cor2,
    /// Per-node candidate neighborhoods.
    Cor1,
}

impl StructureMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "theorem1" => Ok(StructureMode::Theorem1),
            "cor1" => Ok(StructureMode::Cor1),
            "cor2" => Ok(StructureMode::Cor2),
            other => Err(Error::InvalidArgument(format!("unknown mode {other:?}"))),
        }
    }
}

impl fmt::Display for StructureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StructureMode::Theorem1 => "theorem1",
            StructureMode::Cor2 => "cor2",
            StructureMode::Cor1 => "cor1",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureOptions {
    pub mode: StructureMode,
    pub zero_tol: f64,
    pub nonzero_tol: f64,
    /// Candidate-neighborhood size for `Cor1`; `None` uses each node's degree.
    pub d: Option<usize>,
}

impl StructureOptions {
    pub fn new(mode: StructureMode) -> Self {
        StructureOptions {
            mode,
            zero_tol: EXACT_ZERO_TOL,
            nonzero_tol: EXACT_NONZERO_TOL,
            d: None,
        }
    }
}

/// A block of the inverse claimed to be zero or nonzero, with the largest
/// absolute entry found in it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    pub row: Vec<usize>,
    pub col: Vec<usize>,
    pub magnitude: f64,
    /// For `Cor1`, the node whose plan was used.
    pub node: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub mode: StructureMode,
    pub zero_tol: f64,
    pub nonzero_tol: f64,
    pub zero_claims: usize,
    pub nonzero_claims: usize,
    pub zero_pass: bool,
    pub nonzero_pass: bool,
    /// Zero claim with the largest magnitude.
    pub worst_zero: Option<Claim>,
    /// Nonzero claim with the smallest magnitude.
    pub weakest_nonzero: Option<Claim>,
    pub zero_violations: usize,
    pub nonzero_violations: usize,
    pub max_inverse_residual: f64,
}

impl StructureReport {
    pub fn passed(&self) -> bool {
        self.zero_pass && self.nonzero_pass
    }
}

struct ClaimTally {
    zero_claims: usize,
    nonzero_claims: usize,
    worst_zero: Option<Claim>,
    weakest_nonzero: Option<Claim>,
    zero_violations: usize,
    nonzero_violations: usize,
    max_residual: f64,
}

impl ClaimTally {
    fn new() -> Self {
        ClaimTally {
            zero_claims: 0,
            nonzero_claims: 0,
            worst_zero: None,
            weakest_nonzero: None,
            zero_violations: 0,
            nonzero_violations: 0,
            max_residual: 0.0,
        }
    }

    fn zero(&mut self, claim: Claim, tol: f64) {
        self.zero_claims += 1;
        if claim.magnitude >= tol {
            self.zero_violations += 1;
        }
        if self.worst_zero.as_ref().is_none_or(|w| claim.magnitude > w.magnitude) {
            self.worst_zero = Some(claim);
        }
    }

    fn nonzero(&mut self, claim: Claim, tol: f64) {
        self.nonzero_claims += 1;
        if claim.magnitude <= tol {
            self.nonzero_violations += 1;
        }
        if self
            .weakest_nonzero
            .as_ref()
            .is_none_or(|w| claim.magnitude < w.magnitude)
        {
            self.weakest_nonzero = Some(claim);
        }
    }

    fn finish(self, opts: &StructureOptions) -> StructureReport {
        StructureReport {
            mode: opts.mode,
            zero_tol: opts.zero_tol,
            nonzero_tol: opts.nonzero_tol,
            zero_claims: self.zero_claims,
            nonzero_claims: self.nonzero_claims,
            zero_pass: self.zero_violations == 0,
            nonzero_pass: self.nonzero_violations == 0,
            worst_zero: self.worst_zero,
            weakest_nonzero: self.weakest_nonzero,
            zero_violations: self.zero_violations,
            nonzero_violations: self.nonzero_violations,
            max_inverse_residual: self.max_residual,
        }
    }
}

fn block_magnitude(
    inv: &DMatrix<f64>,
    r: &std::ops::Range<usize>,
    c: &std::ops::Range<usize>,
) -> f64 {
    let mut m: f64 = 0.0;
    for i in r.clone() {
        for j in c.clone() {
            m = m.max(inv[(i, j)].abs());
        }
    }
    m
}

fn inverse_or_error(rep: &CovarianceReport) -> Result<DMatrix<f64>> {
    rep.inverse_matrix().ok_or_else(|| {
        Error::Numerical(format!(
            "generalized covariance is singular: {}",
            rep.diagnostic.as_deref().unwrap_or("no inverse")
        ))
    })
}

/// Checks the zero/nonzero claims of the chosen mode on the exact inverse.
///
/// - `Theorem1`: full clique set of the (triangulated) graph; blocks `(A, B)`
///   with `A ∪ B` in no maximal clique must vanish, all others must not.
/// - `Cor2`: singletons plus separator power sets of a triangulation `G̃`;
///   singleton pairs outside `G̃` must vanish, pairs in `G̃` must not.
/// - `Cor1`: for each node `s`, the candidate-neighborhood plan; row `{s}`
///   must vanish on every `B ⊄ N(s)` and be nonzero on each `{t}`, `t ∈ N(s)`.
pub fn verify_block_structure(model: &MixedModel, opts: StructureOptions) -> Result<StructureReport> {
    let g = model.graph();
    let p = model.p();
    let mut tally = ClaimTally::new();
    match opts.mode {
        StructureMode::Theorem1 => {
            if !graph::is_triangulated(g) {
                return Err(Error::NotTriangulated);
            }
            let maxc: Vec<BTreeSet<usize>> = graph::maximal_cliques(g)
                .into_iter()
                .map(|c| c.into_iter().collect())
                .collect();
            let rep = exact_covariance(model, &AugmentationPlan::all_cliques(g))?;
            let inv = inverse_or_error(&rep)?;
            tally.max_residual = rep.inverse_residual.unwrap_or(0.0);
            let ranges = rep.clique_ranges();
            for (i, (a, ra)) in ranges.iter().enumerate() {
                for (b, rb) in ranges.iter().skip(i + 1) {
                    let union: BTreeSet<usize> = a.iter().chain(b).copied().collect();
                    let claim = Claim {
                        row: a.clone(),
                        col: b.clone(),
                        magnitude: block_magnitude(&inv, ra, rb),
                        node: None,
                    };
                    if maxc.iter().any(|c| union.is_subset(c)) {
                        tally.nonzero(claim, opts.nonzero_tol);
                    } else {
                        tally.zero(claim, opts.zero_tol);
                    }
                }
            }
        }
        StructureMode::Cor2 => {
            let tri = graph::triangulate(g);
            let rep = exact_covariance(model, &AugmentationPlan::separator_powersets(&tri)?)?;
            let inv = inverse_or_error(&rep)?;
            tally.max_residual = rep.inverse_residual.unwrap_or(0.0);
            let ranges = rep.clique_ranges();
            let single: Vec<_> = ranges.iter().filter(|(c, _)| c.len() == 1).collect();
            for (i, (a, ra)) in single.iter().enumerate() {
                for (b, rb) in single.iter().skip(i + 1) {
                    let claim = Claim {
                        row: a.clone(),
                        col: b.clone(),
                        magnitude: block_magnitude(&inv, ra, rb),
                        node: None,
                    };
                    if tri.has_edge(a[0], b[0]) {
                        tally.nonzero(claim, opts.nonzero_tol);
                    } else {
                        tally.zero(claim, opts.zero_tol);
                    }
                }
            }
        }
        StructureMode::Cor1 => {
            if p < 2 {
                return Err(Error::InvalidArgument("need at least two nodes".into()));
            }
            for s in 0..p {
                let nb = g.neighbors(s)?;
                let d = opts.d.unwrap_or(nb.len()).clamp(1, p - 1);
                let rep = exact_covariance(model, &candidate_neighborhood_plan(s, p, d)?)?;
                let inv = inverse_or_error(&rep)?;
                tally.max_residual = tally.max_residual.max(rep.inverse_residual.unwrap_or(0.0));
                let ranges = rep.clique_ranges();
                let rs = &ranges
                    .iter()
                    .find(|(c, _)| c.as_slice() == [s])
                    .expect("plan contains {s}")
                    .1;
                for (b, rb) in &ranges {
                    if b.as_slice() == [s] {
                        continue;
                    }
                    let claim = Claim {
                        row: vec![s],
                        col: b.clone(),
                        magnitude: block_magnitude(&inv, rs, rb),
                        node: Some(s),
                    };
                    if !b.iter().all(|t| nb.contains(t)) {
                        tally.zero(claim, opts.zero_tol);
                    } else if b.len() == 1 {
                        tally.nonzero(claim, opts.nonzero_tol);
                    }
                }
            }
        }
    }
    Ok(tally.finish(&opts))
}

/// The worked binary/Gaussian 4-cycle example with thresholds 0.1 and edge
/// weights 0.5: the singleton-plan inverse and the inverse augmented with the
/// product of the two Gaussian nodes.
pub fn four_cycle_inverses(
    theta_node: f64,
    theta_edge: f64,
) -> Result<(CovarianceReport, CovarianceReport)> {
    let model = MixedModel::four_cycle_example(theta_node, theta_edge);
    let plain = exact_covariance(&model, &AugmentationPlan::singletons(4))?;
    let tri = graph::triangulate(model.graph());
    let augmented = exact_covariance(&model, &AugmentationPlan::separator_powersets(&tri)?)?;
    Ok((plain, augmented))
}

/// Random binary/Gaussian model on `g`: each node Bernoulli with probability
/// one half (else unit-variance Gaussian), thresholds and edge weights drawn
/// from `U(-1, 1)`. Edge weights are redrawn until the Gaussian block is
/// positive definite.
pub fn random_binary_gaussian_model(g: &Graph, seed: u64) -> Result<MixedModel> {
    let mut rng = rng::from_seed(seed);
    let p = g.p();
    let nodes: Vec<NodeSpec> = (0..p)
        .map(|s| {
            let fam = if rng.random::<bool>() {
                Family::Bernoulli
            } else {
                Family::Gaussian { sigma: 1.0 }
            };
            NodeSpec::new(format!("X{}", s + 1), fam)
        })
        .collect();
    let thresholds: Vec<Vec<f64>> = (0..p).map(|_| vec![rng.random_range(-1.0..1.0)]).collect();
    for _ in 0..crate::model::DEFAULT_RETRY_CAP {
        let blocks = g
            .edges()
            .map(|(s, t, _)| ((s, t), Block::scalar(rng.random_range(-1.0..1.0))))
            .collect();
        let m = MixedModel::new(nodes.clone(), thresholds.clone(), blocks)?;
        if !m.nodes().iter().any(|n| matches!(n.family, Family::Gaussian { .. }))
            || sampler::check_gaussian_subgraph_pd(&m)?
        {
            return Ok(m);
        }
    }
    Err(Error::RetryCapExceeded(
        "no positive definite gaussian block found".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn cliques(plan: &AugmentationPlan) -> Vec<Vec<usize>> {
        plan.cliques().to_vec()
    }

    #[test]
    fn candidate_plans() {
        assert_eq!(
            cliques(&candidate_neighborhood_plan(0, 3, 1).unwrap()),
            vec![vec![0], vec![1], vec![2]]
        );
        assert_eq!(
            cliques(&candidate_neighborhood_plan(0, 4, 2).unwrap()),
            vec![
                vec![0],
                vec![1],
                vec![2],
                vec![3],
                vec![1, 2],
                vec![1, 3],
                vec![2, 3]
            ]
        );
        assert_eq!(candidate_neighborhood_plan(0, 16, 2).unwrap().len(), 121);
        assert!(candidate_neighborhood_plan(0, 4, 0).is_err());
        assert!(candidate_neighborhood_plan(0, 4, 4).is_err());
    }

    #[test]
    fn independent_gaussians_identity() {
        let nodes = (0..4)
            .map(|i| NodeSpec::new(format!("g{i}"), Family::Gaussian { sigma: 1.0 }))
            .collect();
        let m = MixedModel::new(nodes, vec![vec![0.0]; 4], BTreeMap::new()).unwrap();
        let rep = exact_covariance(&m, &AugmentationPlan::singletons(4)).unwrap();
        let inv = rep.inverse_matrix().unwrap();
        assert!((inv - DMatrix::<f64>::identity(4, 4)).amax() < 1e-12);
    }

    #[test]
    fn gaussian_product_moments() {
        // u ~ N(0, 1): Var(u^2)... via coordinate {0,1} with u0 = u1 impossible;
        // check E[u0 u1] for a correlated pair instead.
        let nodes = vec![
            NodeSpec::new("a", Family::Gaussian { sigma: 1.0 }),
            NodeSpec::new("b", Family::Gaussian { sigma: 1.0 }),
        ];
        let mut blocks = BTreeMap::new();
        blocks.insert((0, 1), Block::scalar(0.5));
        let m = MixedModel::new(nodes, vec![vec![0.0]; 2], blocks).unwrap();
        let plan = AugmentationPlan::new(vec![vec![0], vec![1], vec![0, 1]], PlanOrigin::AllCliques)
            .unwrap();
        let rep = exact_covariance(&m, &plan).unwrap();
        // Σ = (I - W)^{-1} = [[4/3, 2/3], [2/3, 4/3]]
        assert!((rep.matrix[0][0] - 4.0 / 3.0).abs() < 1e-12);
        assert!((rep.matrix[0][1] - 2.0 / 3.0).abs() < 1e-12);
        // Var(ab) = Σaa Σbb + Σab^2 for zero-mean gaussians
        assert!((rep.matrix[2][2] - (16.0 / 9.0 + 4.0 / 9.0)).abs() < 1e-12);
        assert!(rep.matrix[0][2].abs() < 1e-12);
    }

    #[test]
    fn four_cycle_structure() {
        let (plain, aug) = four_cycle_inverses(0.1, 0.5).unwrap();
        let a = plain.inverse_matrix().unwrap();
        assert!(a[(1, 3)].abs() < 1e-12);
        assert!((a[(0, 0)] - a[(2, 2)]).abs() < 1e-10);
        assert_eq!(aug.dim(), 5);
        assert_eq!(aug.labels[4], "X2*X4");
        let b = aug.inverse_matrix().unwrap();
        assert!(b[(2, 0)].abs() < 0.02);
        assert!(b[(1, 3)].abs() > 0.1);
        assert!(aug.inverse_residual.unwrap() < 1e-10);
    }

    #[test]
    fn text_rendering_has_no_negative_zero() {
        assert_eq!(format_two_decimals(-0.001), "0.00");
        assert_eq!(format_two_decimals(0.494), "0.49");
        let (plain, _) = four_cycle_inverses(0.1, 0.5).unwrap();
        let text = plain.to_text();
        assert!(text.contains("X1") && text.contains("0.00"));
        assert!(!text.contains("-0.00"));
    }

    #[test]
    fn empirical_constant_column_flagged() {
        let specs = vec![
            NodeSpec::new("a", Family::Gaussian { sigma: 1.0 }),
            NodeSpec::new("b", Family::Gaussian { sigma: 1.0 }),
        ];
        let d = Dataset::new(specs, vec![vec![1.0, 2.0, 3.0], vec![5.0; 3]]).unwrap();
        let rep = empirical_covariance(&d, &AugmentationPlan::singletons(2)).unwrap();
        assert!(rep.inverse.is_none());
        assert!(rep.diagnostic.unwrap().contains("constant"));
    }

    #[test]
    fn empty_graph_is_diagonal() {
        let g = Graph::new(4);
        let m = random_binary_gaussian_model(&g, 3).unwrap();
        for mode in [StructureMode::Cor2, StructureMode::Theorem1, StructureMode::Cor1] {
            let r = verify_block_structure(&m, StructureOptions::new(mode)).unwrap();
            assert!(r.zero_pass, "{mode}: {r:?}");
        }
    }

    #[test]
    fn theorem1_requires_triangulation() {
        let m = MixedModel::four_cycle_example(0.1, 0.5);
        assert!(matches!(
            verify_block_structure(&m, StructureOptions::new(StructureMode::Theorem1)),
            Err(Error::NotTriangulated)
        ));
    }

    #[test]
    fn discrete_chain_singleton_inverse_is_tree_structured() {
        let nodes = (0..3).map(|i| NodeSpec::new(format!("b{i}"), Family::Bernoulli)).collect();
        let blocks = [((0, 1), Block::scalar(0.7)), ((1, 2), Block::scalar(-0.4))]
            .into_iter()
            .collect();
        let m = MixedModel::new(nodes, vec![vec![0.1], vec![-0.2], vec![0.3]], blocks).unwrap();
        let r = verify_block_structure(&m, StructureOptions::new(StructureMode::Cor2)).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn subsets_enumeration() {
        assert_eq!(
            nonempty_subsets(&[1, 2, 3], 3),
            vec![
                vec![1],
                vec![2],
                vec![3],
                vec![1, 2],
                vec![1, 3],
                vec![2, 3],
                vec![1, 2, 3]
            ]
        );
        assert!(nonempty_subsets(&[], 2).is_empty());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn exact_inverse_is_accurate(seed in any::<u64>(), p in 2usize..5) {
            let g = graph::triangulate(&graph::erdos_renyi(p, 0.5, seed).unwrap());
            let m = random_binary_gaussian_model(&g, seed ^ 1).unwrap();
            let rep = exact_covariance(&m, &AugmentationPlan::all_cliques(&g)).unwrap();
            for i in 0..rep.dim() {
                for j in 0..rep.dim() {
                    prop_assert!((rep.matrix[i][j] - rep.matrix[j][i]).abs() < 1e-12);
                }
            }
            if let Some(r) = rep.inverse_residual {
                prop_assert!(r < 1e-8);
            }
        }

        #[test]
        fn all_discrete_models_satisfy_all_modes(seed in any::<u64>(), p in 2usize..6) {
            let g = graph::triangulate(&graph::erdos_renyi(p, 0.5, seed).unwrap());
            let mut r = rng::from_seed(seed);
            let nodes = (0..p).map(|i| NodeSpec::new(format!("b{i}"), Family::Bernoulli)).collect();
            let th = (0..p).map(|_| vec![r.random_range(-1.0..1.0)]).collect();
            let blocks = g.edges().map(|(s, t, _)| ((s, t), Block::scalar(r.random_range(-1.0..1.0)))).collect();
            let m = MixedModel::new(nodes, th, blocks).unwrap();
            for mode in [StructureMode::Theorem1, StructureMode::Cor2, StructureMode::Cor1] {
                let rep = verify_block_structure(&m, StructureOptions::new(mode)).unwrap();
                prop_assert!(rep.zero_pass, "{} {:?}", mode, rep.worst_zero);
            }
        }
    }
}
