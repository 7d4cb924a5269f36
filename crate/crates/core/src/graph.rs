//! Undirected simple graphs over nodes `0..p`.
//!
//! Besides the container itself this module hosts the graph algorithms the
//! rest of the crate needs: Erdős–Rényi generation, chordality testing via
//! maximum cardinality search, maximal clique enumeration, a minimum-fill
//! triangulation with its junction tree, weighted centralities and edge-set
//! recovery metrics.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Unordered node pair stored as `(min, max)`.
pub type Edge = (usize, usize);

fn key(s: usize, t: usize) -> Edge {
    if s < t {
        (s, t)
    } else {
        (t, s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    p: usize,
    /// Edge weights; unweighted edges carry weight 1.
    edges: BTreeMap<Edge, f64>,
    weighted: bool,
}

impl Graph {
    pub fn new(p: usize) -> Self {
        Graph {
            p,
            edges: BTreeMap::new(),
            weighted: false,
        }
    }

    pub fn complete(p: usize) -> Self {
        let mut g = Graph::new(p);
        for s in 0..p {
            for t in (s + 1)..p {
                g.edges.insert((s, t), 1.0);
            }
        }
        g
    }

    /// Path `0 - 1 - ... - (p-1)`.
    pub fn path(p: usize) -> Self {
        let mut g = Graph::new(p);
        for s in 1..p {
            g.edges.insert((s - 1, s), 1.0);
        }
        g
    }

    /// Cycle `0 - 1 - ... - (p-1) - 0`.
    pub fn cycle(p: usize) -> Self {
        let mut g = Graph::path(p);
        if p >= 3 {
            g.edges.insert((0, p - 1), 1.0);
        }
        g
    }

    /// Star with center 0.
    pub fn star(p: usize) -> Self {
        let mut g = Graph::new(p);
        for t in 1..p {
            g.edges.insert((0, t), 1.0);
        }
        g
    }

    pub fn from_edges(p: usize, edges: &[Edge]) -> Result<Self> {
        let mut g = Graph::new(p);
        for &(s, t) in edges {
            g.add_edge(s, t)?;
        }
        Ok(g)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn is_weighted(&self) -> bool {
        self.weighted
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    fn check(&self, s: usize) -> Result<()> {
        if s >= self.p {
            Err(Error::NodeOutOfRange { node: s, p: self.p })
        } else {
            Ok(())
        }
    }

    pub fn add_edge(&mut self, s: usize, t: usize) -> Result<()> {
        self.check(s)?;
        self.check(t)?;
        if s == t {
            return Err(Error::InvalidArgument(format!("self-loop at node {s}")));
        }
        self.edges.entry(key(s, t)).or_insert(1.0);
        Ok(())
    }

    pub fn add_weighted_edge(&mut self, s: usize, t: usize, w: f64) -> Result<()> {
        self.check(s)?;
        self.check(t)?;
        if s == t {
            return Err(Error::InvalidArgument(format!("self-loop at node {s}")));
        }
        if !w.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite weight on ({s},{t})")));
        }
        self.edges.insert(key(s, t), w);
        self.weighted = true;
        Ok(())
    }

    pub fn remove_edge(&mut self, s: usize, t: usize) -> bool {
        self.edges.remove(&key(s, t)).is_some()
    }

    pub fn has_edge(&self, s: usize, t: usize) -> bool {
        s != t && self.edges.contains_key(&key(s, t))
    }

    pub fn weight(&self, s: usize, t: usize) -> Option<f64> {
        self.edges.get(&key(s, t)).copied()
    }

    /// Edges in lexicographic order, each as `(s, t, weight)` with `s < t`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.edges.iter().map(|(&(s, t), &w)| (s, t, w))
    }

    pub fn edge_set(&self) -> BTreeSet<Edge> {
        self.edges.keys().copied().collect()
    }

    pub fn neighbors(&self, s: usize) -> Result<BTreeSet<usize>> {
        self.check(s)?;
        Ok(self.neighbors_unchecked(s))
    }

    pub(crate) fn neighbors_unchecked(&self, s: usize) -> BTreeSet<usize> {
        (0..self.p).filter(|&t| self.has_edge(s, t)).collect()
    }

    pub fn adjacency_lists(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.p];
        for &(s, t) in self.edges.keys() {
            adj[s].push(t);
            adj[t].push(s);
        }
        adj
    }

    pub fn degree(&self, s: usize) -> Result<usize> {
        Ok(self.neighbors(s)?.len())
    }

    pub fn is_clique(&self, nodes: &[usize]) -> bool {
        nodes
            .iter()
            .enumerate()
            .all(|(i, &a)| nodes[i + 1..].iter().all(|&b| self.has_edge(a, b)))
    }

    /// Relabel nodes: node `s` becomes `perm[s]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Graph> {
        if perm.len() != self.p {
            return Err(Error::SizeMismatch(perm.len(), self.p));
        }
        let mut g = Graph::new(self.p);
        g.weighted = self.weighted;
        for (s, t, w) in self.edges() {
            g.edges.insert(key(perm[s], perm[t]), w);
        }
        Ok(g)
    }

    /// Weighted adjacency as a dense row-major `p x p` matrix.
    pub fn adjacency_matrix(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.p]; self.p];
        for (s, t, w) in self.edges() {
            m[s][t] = w;
            m[t][s] = w;
        }
        m
    }
}

/// Each of the `p(p-1)/2` pairs is included independently with probability
/// `p_edge`.
pub fn erdos_renyi(p: usize, p_edge: f64, seed: u64) -> Result<Graph> {
    if p == 0 {
        return Err(Error::InvalidArgument("p must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&p_edge) {
        return Err(Error::InvalidArgument(format!(
            "edge probability {p_edge} not in [0,1]"
        )));
    }
    let mut rng = rng::from_seed(seed);
    let mut g = Graph::new(p);
    for s in 0..p {
        for t in (s + 1)..p {
            if rng.random::<f64>() < p_edge {
                g.edges.insert((s, t), 1.0);
            }
        }
    }
    Ok(g)
}

/// Maximum cardinality search visit order (ties broken by smallest index).
pub fn mcs_order(g: &Graph) -> Vec<usize> {
    let adj = g.adjacency_lists();
    let mut weight = vec![0usize; g.p];
    let mut visited = vec![false; g.p];
    let mut order = Vec::with_capacity(g.p);
    for _ in 0..g.p {
        let v = (0..g.p)
            .filter(|&v| !visited[v])
            .max_by(|&a, &b| weight[a].cmp(&weight[b]).then(b.cmp(&a)))
            .expect("unvisited node remains");
        visited[v] = true;
        order.push(v);
        for &u in &adj[v] {
            if !visited[u] {
                weight[u] += 1;
            }
        }
    }
    order
}

/// True iff the graph has no chordless cycle of length >= 4.
pub fn is_triangulated(g: &Graph) -> bool {
    let order = mcs_order(g);
    let mut pos = vec![0; g.p];
    for (i, &v) in order.iter().enumerate() {
        pos[v] = i;
    }
    // The reverse MCS order is a perfect elimination ordering iff g is chordal.
    order.iter().all(|&v| {
        let earlier: Vec<usize> = g
            .neighbors_unchecked(v)
            .into_iter()
            .filter(|&u| pos[u] < pos[v])
            .collect();
        g.is_clique(&earlier)
    })
}

/// All maximal cliques via Bron–Kerbosch with pivoting, each sorted, listed
/// in lexicographic order.
pub fn maximal_cliques(g: &Graph) -> Vec<Vec<usize>> {
    let adj: Vec<BTreeSet<usize>> = (0..g.p).map(|s| g.neighbors_unchecked(s)).collect();
    let mut out = Vec::new();
    bron_kerbosch(
        &adj,
        &mut Vec::new(),
        (0..g.p).collect(),
        BTreeSet::new(),
        &mut out,
    );
    for c in &mut out {
        c.sort_unstable();
    }
    out.sort();
    out
}

fn bron_kerbosch(
    adj: &[BTreeSet<usize>],
    r: &mut Vec<usize>,
    mut p: BTreeSet<usize>,
    mut x: BTreeSet<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if p.is_empty() && x.is_empty() {
        out.push(r.clone());
        return;
    }
    let pivot = p
        .iter()
        .chain(x.iter())
        .copied()
        .max_by_key(|&u| adj[u].intersection(&p).count())
        .expect("p or x nonempty");
    let candidates: Vec<usize> = p.difference(&adj[pivot]).copied().collect();
    for v in candidates {
        r.push(v);
        let np = p.intersection(&adj[v]).copied().collect();
        let nx = x.intersection(&adj[v]).copied().collect();
        bron_kerbosch(adj, r, np, nx, out);
        r.pop();
        p.remove(&v);
        x.insert(v);
    }
}

/// Junction tree of a triangulated graph: maximal cliques in MCS formation
/// order, with each clique's parent and separator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JunctionTree {
    pub cliques: Vec<Vec<usize>>,
    /// `parents[j]` is the index of an earlier clique containing
    /// `separators[j]`; `None` for roots of each connected component.
    pub parents: Vec<Option<usize>>,
    pub separators: Vec<Vec<usize>>,
}

impl JunctionTree {
    /// Distinct nonempty separators.
    pub fn separator_sets(&self) -> Vec<Vec<usize>> {
        let set: BTreeSet<Vec<usize>> = self
            .separators
            .iter()
            .filter(|s| !s.is_empty())
            .cloned()
            .collect();
        set.into_iter().collect()
    }

    /// Running intersection: for each clique, its intersection with the
    /// union of all earlier cliques is contained in its parent.
    pub fn has_running_intersection(&self) -> bool {
        let mut seen: BTreeSet<usize> = BTreeSet::new();
        for (j, c) in self.cliques.iter().enumerate() {
            let inter: Vec<usize> = c.iter().copied().filter(|v| seen.contains(v)).collect();
            let ok = match self.parents[j] {
                Some(pj) => inter.iter().all(|v| self.cliques[pj].contains(v)),
                None => inter.is_empty(),
            };
            if !ok {
                return false;
            }
            seen.extend(c.iter().copied());
        }
        true
    }
}

pub fn junction_tree(g: &Graph) -> Result<JunctionTree> {
    if !is_triangulated(g) {
        return Err(Error::NotTriangulated);
    }
    let order = mcs_order(g);
    let mut pos = vec![0; g.p];
    for (i, &v) in order.iter().enumerate() {
        pos[v] = i;
    }
    // Candidate clique for each vertex: itself plus its earlier neighbors.
    let candidates: Vec<BTreeSet<usize>> = order
        .iter()
        .map(|&v| {
            let mut c: BTreeSet<usize> = g
                .neighbors_unchecked(v)
                .into_iter()
                .filter(|&u| pos[u] < pos[v])
                .collect();
            c.insert(v);
            c
        })
        .collect();
    let mut cliques: Vec<BTreeSet<usize>> = Vec::new();
    for (i, c) in candidates.iter().enumerate() {
        let dominated = candidates
            .iter()
            .enumerate()
            .any(|(j, d)| j != i && d.len() > c.len() && c.is_subset(d));
        if !dominated {
            cliques.push(c.clone());
        }
    }
    let mut parents = Vec::with_capacity(cliques.len());
    let mut separators = Vec::with_capacity(cliques.len());
    let mut seen: BTreeSet<usize> = BTreeSet::new();
    for (j, c) in cliques.iter().enumerate() {
        let sep: BTreeSet<usize> = c.intersection(&seen).copied().collect();
        let parent = if sep.is_empty() {
            // Attach component roots to nothing.
            None
        } else {
            (0..j).find(|&k| sep.is_subset(&cliques[k]))
        };
        parents.push(parent);
        separators.push(sep.into_iter().collect());
        seen.extend(c.iter().copied());
    }
    Ok(JunctionTree {
        cliques: cliques.into_iter().map(|c| c.into_iter().collect()).collect(),
        parents,
        separators,
    })
}

/// Triangulate by greedy minimum-fill elimination (ties by smallest index).
/// Already-triangulated graphs are returned unchanged.
pub fn triangulate(g: &Graph) -> Graph {
    if is_triangulated(g) {
        return g.clone();
    }
    let mut adj: Vec<BTreeSet<usize>> = (0..g.p).map(|s| g.neighbors_unchecked(s)).collect();
    let mut out = g.clone();
    let mut eliminated = vec![false; g.p];
    for _ in 0..g.p {
        let fill = |v: usize, adj: &[BTreeSet<usize>]| {
            let nb: Vec<usize> = adj[v].iter().copied().collect();
            let mut f = 0;
            for (i, &a) in nb.iter().enumerate() {
                for &b in &nb[i + 1..] {
                    if !adj[a].contains(&b) {
                        f += 1;
                    }
                }
            }
            f
        };
        let v = (0..g.p)
            .filter(|&v| !eliminated[v])
            .min_by_key(|&v| (fill(v, &adj), v))
            .expect("node remains");
        let nb: Vec<usize> = adj[v].iter().copied().collect();
        for (i, &a) in nb.iter().enumerate() {
            for &b in &nb[i + 1..] {
                if adj[a].insert(b) {
                    adj[b].insert(a);
                    out.edges.entry(key(a, b)).or_insert(1.0);
                }
            }
        }
        for &a in &nb {
            adj[a].remove(&v);
        }
        adj[v].clear();
        eliminated[v] = true;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CentralityOptions {
    /// Use edge weights (distance `1/|w|`, weighted degree). Otherwise every
    /// edge has length 1 and degree counts edges.
    pub weighted: bool,
    /// Weighted degree sums `|w|` (default) instead of signed `w`.
    pub absolute: bool,
}

impl Default for CentralityOptions {
    fn default() -> Self {
        CentralityOptions {
            weighted: true,
            absolute: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeCentrality {
    pub degree: f64,
    pub closeness: f64,
    pub betweenness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Centrality {
    pub raw: Vec<NodeCentrality>,
    /// z-scores across nodes (sample standard deviation); all zero when a
    /// measure is constant.
    pub standardized: Vec<NodeCentrality>,
    /// Set when some node pair is unreachable; closeness then sums over the
    /// reachable set only.
    pub disconnected: bool,
}

#[derive(Clone, Copy, PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .total_cmp(&self.0)
            .then_with(|| other.1.cmp(&self.1))
    }
}

const TIE_EPS: f64 = 1e-12;

/// Degree, closeness and betweenness (Brandes accumulation over all shortest
/// paths). Betweenness is normalized by the number of pairs not involving the
/// node, `(p-1)(p-2)/2`.
pub fn centrality(g: &Graph, opts: CentralityOptions) -> Result<Centrality> {
    let p = g.p;
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); p];
    for (s, t, w) in g.edges() {
        let len = if opts.weighted {
            if w == 0.0 {
                continue;
            }
            1.0 / w.abs()
        } else {
            1.0
        };
        adj[s].push((t, len));
        adj[t].push((s, len));
    }

    let degree: Vec<f64> = (0..p)
        .map(|s| {
            if opts.weighted {
                g.neighbors_unchecked(s)
                    .into_iter()
                    .map(|t| {
                        let w = g.weight(s, t).unwrap_or(0.0);
                        if opts.absolute {
                            w.abs()
                        } else {
                            w
                        }
                    })
                    .sum()
            } else {
                g.neighbors_unchecked(s).len() as f64
            }
        })
        .collect();

    let mut closeness = vec![0.0; p];
    let mut between = vec![0.0; p];
    let mut disconnected = false;

    for src in 0..p {
        let mut dist = vec![f64::INFINITY; p];
        let mut sigma = vec![0.0f64; p];
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); p];
        let mut stack = Vec::with_capacity(p);
        let mut done = vec![false; p];
        dist[src] = 0.0;
        sigma[src] = 1.0;
        let mut heap = BinaryHeap::new();
        heap.push(HeapItem(0.0, src));
        while let Some(HeapItem(d, v)) = heap.pop() {
            if done[v] || d > dist[v] {
                continue;
            }
            done[v] = true;
            stack.push(v);
            for &(u, len) in &adj[v] {
                let nd = d + len;
                let tol = TIE_EPS * nd.max(1.0);
                if nd < dist[u] - tol {
                    dist[u] = nd;
                    sigma[u] = sigma[v];
                    preds[u].clear();
                    preds[u].push(v);
                    heap.push(HeapItem(nd, u));
                } else if (nd - dist[u]).abs() <= tol && !done[u] {
                    sigma[u] += sigma[v];
                    preds[u].push(v);
                }
            }
        }
        let reachable: Vec<f64> = (0..p)
            .filter(|&u| u != src && dist[u].is_finite())
            .map(|u| dist[u])
            .collect();
        if reachable.len() + 1 < p {
            disconnected = true;
        }
        let total: f64 = reachable.iter().sum();
        closeness[src] = if total > 0.0 { 1.0 / total } else { 0.0 };

        let mut delta = vec![0.0; p];
        while let Some(w) = stack.pop() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != src {
                between[w] += delta[w];
            }
        }
    }
    // Each unordered pair was counted from both endpoints.
    let pairs = if p >= 3 {
        ((p - 1) * (p - 2)) as f64 / 2.0
    } else {
        1.0
    };
    for b in &mut between {
        *b /= 2.0 * pairs;
    }

    let raw: Vec<NodeCentrality> = (0..p)
        .map(|s| NodeCentrality {
            degree: degree[s],
            closeness: closeness[s],
            betweenness: between[s],
        })
        .collect();
    let zd = zscores(&degree);
    let zc = zscores(&closeness);
    let zb = zscores(&between);
    let standardized = (0..p)
        .map(|s| NodeCentrality {
            degree: zd[s],
            closeness: zc[s],
            betweenness: zb[s],
        })
        .collect();
    Ok(Centrality {
        raw,
        standardized,
        disconnected,
    })
}

fn zscores(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    if sd <= 1e-12 * mean.abs().max(1.0) {
        return vec![0.0; n];
    }
    x.iter().map(|v| (v - mean) / sd).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryMetrics {
    /// `TP / (TP + FN)`; `None` when the true graph has no edges.
    pub sensitivity: Option<f64>,
    /// `TP / (TP + FP)`; `None` when no edges were estimated.
    pub precision: Option<f64>,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

pub fn compare_graphs(estimated: &Graph, truth: &Graph) -> Result<RecoveryMetrics> {
    if estimated.p != truth.p {
        return Err(Error::SizeMismatch(estimated.p, truth.p));
    }
    let est = estimated.edge_set();
    let tru = truth.edge_set();
    let tp = est.intersection(&tru).count();
    let fp = est.len() - tp;
    let fneg = tru.len() - tp;
    let ratio = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
    Ok(RecoveryMetrics {
        sensitivity: ratio(tp, tp + fneg),
        precision: ratio(tp, tp + fp),
        true_positives: tp,
        false_positives: fp,
        false_negatives: fneg,
    })
}
