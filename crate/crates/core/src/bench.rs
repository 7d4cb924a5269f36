//! Simulation grid: random graphs, simulated models, Gibbs samples, repair,
//! estimation and scoring against the true graph.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{estimate_graph, EstimatorConfig, Rule, Selector};
use crate::graph::{compare_graphs, erdos_renyi, Graph};
use crate::model::{build_simulation_model, MixedModel, SimulationKind, DEFAULT_RETRY_CAP};
use crate::sampler::{
    enforce_data_requirements, gibbs_sample, Dataset, RepairReport, DEFAULT_BURN_IN, DEFAULT_THINNING,
};
use crate::{par, rng};

pub const DESK_REPETITIONS: usize = 20;
pub const PAPER_REPETITIONS: usize = 100;

fn default_kinds() -> Vec<SimulationKind> {
    vec![
        SimulationKind::Categorical(2),
        SimulationKind::Categorical(3),
        SimulationKind::Categorical(4),
        SimulationKind::BinaryGaussian,
        SimulationKind::BinaryPoisson,
        SimulationKind::BinaryExponential,
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub kinds: Vec<SimulationKind>,
    pub p: usize,
    pub p_edge: Vec<f64>,
    pub n_over_p: Vec<f64>,
    pub d: Vec<usize>,
    pub repetitions: usize,
    pub seed: u64,
    pub burn_in: usize,
    pub thinning: usize,
    pub folds: usize,
    pub retry_cap: usize,
    /// Record wall time per cell. Off by default so reports are reproducible.
    pub timing: bool,
    #[serde(skip_serializing)]
    pub jobs: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            kinds: default_kinds(),
            p: 16,
            p_edge: vec![0.1, 0.2, 0.3],
            n_over_p: (0..6).map(|k| (k as f64).exp().round()).collect(),
            d: vec![1, 2, 3],
            repetitions: DESK_REPETITIONS,
            seed: 0,
            burn_in: DEFAULT_BURN_IN,
            thinning: DEFAULT_THINNING,
            folds: 10,
            retry_cap: DEFAULT_RETRY_CAP,
            timing: false,
            jobs: 1,
        }
    }
}

impl BenchConfig {
    pub fn paper_scale(mut self) -> Self {
        self.repetitions = PAPER_REPETITIONS;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.kinds.is_empty() || self.p_edge.is_empty() || self.n_over_p.is_empty() || self.d.is_empty() {
            return Err(Error::InvalidArgument("bench grids must be nonempty".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::InvalidArgument("repetitions must be >= 1".into()));
        }
        if self.p < 2 {
            return Err(Error::InvalidArgument("p must be >= 2".into()));
        }
        if self.p_edge.iter().any(|&q| !(0.0..=1.0).contains(&q)) {
            return Err(Error::InvalidArgument("edge probabilities must lie in [0, 1]".into()));
        }
        if self.n_over_p.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(Error::InvalidArgument("n/p ratios must be positive".into()));
        }
        if self.d.contains(&0) {
            return Err(Error::InvalidArgument("d must be >= 1".into()));
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.kinds.len() * self.p_edge.len() * self.n_over_p.len() * self.d.len()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: BenchConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Settings shared by every cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellSettings {
    pub burn_in: usize,
    pub thinning: usize,
    pub folds: usize,
    pub retry_cap: usize,
    pub jobs: usize,
}

impl Default for CellSettings {
    fn default() -> Self {
        let c = BenchConfig::default();
        CellSettings {
            burn_in: c.burn_in,
            thinning: c.thinning,
            folds: c.folds,
            retry_cap: c.retry_cap,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepOutcome {
    pub sensitivity: Option<f64>,
    pub precision: Option<f64>,
    pub noise: f64,
    pub true_edges: usize,
    pub and_edges: usize,
    pub or_edges: usize,
    pub and_within_or: bool,
    /// Graph draws needed before the Gaussian block was positive definite.
    pub graph_draws: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub kind: SimulationKind,
    pub p_edge: f64,
    pub n_over_p: f64,
    pub d: usize,
    pub n: usize,
    /// Completed repetitions.
    pub rep_count: usize,
    pub sens_mean: Option<f64>,
    pub sens_sd: Option<f64>,
    pub prec_mean: Option<f64>,
    pub prec_sd: Option<f64>,
    pub prec_undefined_count: usize,
    pub noise_mean: Option<f64>,
    pub seconds: Option<f64>,
    /// First failure message, if any repetition failed.
    pub flag: Option<String>,
    pub failed_reps: usize,
    pub reps: Vec<RepOutcome>,
}

impl CellSummary {
    pub fn rule_violations(&self) -> usize {
        self.reps.iter().filter(|r| !r.and_within_or).count()
    }
}

fn mean_sd(v: &[f64]) -> (Option<f64>, Option<f64>) {
    if v.is_empty() {
        return (None, None);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 {
        Some((v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
    } else {
        None
    };
    (Some(m), sd)
}

/// Draws graph and model together, redrawing both until construction
/// succeeds (positive definite Gaussian block).
pub fn draw_graph_and_model(
    kind: SimulationKind,
    p: usize,
    p_edge: f64,
    seed: u64,
    retry_cap: usize,
) -> Result<(Graph, MixedModel, usize)> {
    for attempt in 0..retry_cap.max(1) {
        let s = rng::derive(seed, attempt as u64);
        let g = erdos_renyi(p, p_edge, rng::derive(s, 0))?;
        match build_simulation_model(kind, &g, rng::derive(s, 1), 1) {
            Ok(m) => return Ok((g, m, attempt + 1)),
            Err(Error::RetryCapExceeded(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::RetryCapExceeded(format!(
        "{} model construction failed after {retry_cap} graph draws",
        kind.label()
    )))
}

/// Ground truth and repaired sample of one repetition.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulated {
    pub truth: Graph,
    pub model: MixedModel,
    pub data: Dataset,
    pub repair: RepairReport,
    pub graph_draws: usize,
}

/// Graph, model, Gibbs sample and repair for one repetition.
pub fn simulate_repetition(
    kind: SimulationKind,
    p: usize,
    p_edge: f64,
    n: usize,
    seed: u64,
    settings: &CellSettings,
) -> Result<Simulated> {
    let (truth, model, graph_draws) =
        draw_graph_and_model(kind, p, p_edge, rng::derive(seed, 0), settings.retry_cap)?;
    let raw = gibbs_sample(&model, n, settings.burn_in, settings.thinning, rng::derive(seed, 1))?;
    let (data, repair) = enforce_data_requirements(&raw, rng::derive(seed, 2))?;
    Ok(Simulated {
        truth,
        model,
        data,
        repair,
        graph_draws,
    })
}

/// One repetition. The data depend on `seed` only, not on `d`, so cells that
/// differ only in `d` see identical samples.
pub fn run_repetition(
    kind: SimulationKind,
    p: usize,
    p_edge: f64,
    n: usize,
    d: usize,
    seed: u64,
    settings: &CellSettings,
) -> Result<RepOutcome> {
    let Simulated {
        truth,
        data,
        repair,
        graph_draws,
        ..
    } = simulate_repetition(kind, p, p_edge, n, seed, settings)?;
    let cfg = EstimatorConfig {
        d,
        selector: Selector::Cv {
            folds: settings.folds,
            one_se: false,
        },
        rule: Rule::And,
        seed: rng::derive(seed, 3),
        ..EstimatorConfig::default()
    };
    let est = estimate_graph(&data, &cfg)?;
    let and = est.graph();
    let or = est.combine(Rule::Or);
    let and_set = and.edge_set();
    let or_set = or.edge_set();
    let metrics = compare_graphs(&and, &truth)?;
    Ok(RepOutcome {
        sensitivity: metrics.sensitivity,
        precision: metrics.precision,
        noise: repair.proportion,
        true_edges: truth.edge_count(),
        and_edges: and_set.len(),
        or_edges: or_set.len(),
        and_within_or: and_set.is_subset(&or_set),
        graph_draws,
    })
}

/// Runs `repetitions` independent repetitions and aggregates them. Failed
/// repetitions are excluded from the statistics and flag the cell.
#[allow(clippy::too_many_arguments)]
pub fn run_cell_with(
    kind: SimulationKind,
    p: usize,
    p_edge: f64,
    n_over_p: f64,
    d: usize,
    repetitions: usize,
    seed: u64,
    settings: &CellSettings,
) -> CellSummary {
    let n = (n_over_p * p as f64).round() as usize;
    let outcomes: Vec<Result<RepOutcome>> = par::map_indexed(repetitions, settings.jobs, |r| {
        run_repetition(kind, p, p_edge, n, d, rng::derive(seed, r as u64), settings)
    });
    let mut reps = Vec::new();
    let mut flag = None;
    let mut failed = 0;
    for (r, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(x) => reps.push(x),
            Err(e) => {
                failed += 1;
                log::warn!("{} cell rep {r} failed: {e}", kind.label());
                flag.get_or_insert_with(|| format!("rep {r}: {e}"));
            }
        }
    }
    let sens: Vec<f64> = reps.iter().filter_map(|r| r.sensitivity).collect();
    let prec: Vec<f64> = reps.iter().filter_map(|r| r.precision).collect();
    let noise: Vec<f64> = reps.iter().map(|r| r.noise).collect();
    let (sens_mean, sens_sd) = mean_sd(&sens);
    let (prec_mean, prec_sd) = mean_sd(&prec);
    CellSummary {
        kind,
        p_edge,
        n_over_p,
        d,
        n,
        rep_count: reps.len(),
        sens_mean,
        sens_sd,
        prec_mean,
        prec_sd,
        prec_undefined_count: reps.len() - prec.len(),
        noise_mean: mean_sd(&noise).0,
        seconds: None,
        flag,
        failed_reps: failed,
        reps,
    }
}

pub fn run_cell(
    kind: SimulationKind,
    p: usize,
    p_edge: f64,
    n_over_p: f64,
    d: usize,
    repetitions: usize,
    seed: u64,
) -> CellSummary {
    run_cell_with(kind, p, p_edge, n_over_p, d, repetitions, seed, &CellSettings::default())
}

fn kind_code(kind: SimulationKind) -> u64 {
    match kind {
        SimulationKind::Categorical(m) => m as u64,
        SimulationKind::BinaryGaussian => 1001,
        SimulationKind::BinaryPoisson => 1002,
        SimulationKind::BinaryExponential => 1003,
    }
}

/// Seed of a cell. It depends on the cell's coordinates (not its position in
/// the grid, and not on `d`), so restricting a grid keeps the remaining
/// cells unchanged and `d` comparisons are paired.
pub fn cell_seed(master: u64, kind: SimulationKind, p_edge: f64, n_over_p: f64) -> u64 {
    rng::derive_path(master, &[kind_code(kind), p_edge.to_bits(), n_over_p.to_bits()])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub cells: Vec<CellSummary>,
}

const CSV_HEADER: &str = "kind,p_edge,n_over_p,d,rep_count,sens_mean,sens_sd,prec_mean,prec_sd,prec_undefined_count,noise_mean,seconds";

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

impl BenchReport {
    /// One row per cell; undefined statistics are left empty.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{CSV_HEADER}\n");
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                c.kind.label(),
                c.p_edge,
                c.n_over_p,
                c.d,
                c.rep_count,
                opt(c.sens_mean),
                opt(c.sens_sd),
                opt(c.prec_mean),
                opt(c.prec_sd),
                c.prec_undefined_count,
                opt(c.noise_mean),
                opt(c.seconds),
            ));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn flagged(&self) -> impl Iterator<Item = &CellSummary> {
        self.cells.iter().filter(|c| c.flag.is_some())
    }

    pub fn cell(&self, kind: SimulationKind, p_edge: f64, n_over_p: f64, d: usize) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.kind == kind && c.p_edge == p_edge && c.n_over_p == n_over_p && c.d == d)
    }
}

/// Runs every cell in kind, p_edge, n/p, d order.
pub fn run_grid(cfg: &BenchConfig) -> Result<BenchReport> {
    cfg.validate()?;
    let settings = CellSettings {
        burn_in: cfg.burn_in,
        thinning: cfg.thinning,
        folds: cfg.folds,
        retry_cap: cfg.retry_cap,
        jobs: cfg.jobs,
    };
    let mut cells = Vec::with_capacity(cfg.cell_count());
    for &kind in &cfg.kinds {
        for &pe in &cfg.p_edge {
            for &r in &cfg.n_over_p {
                for &d in &cfg.d {
                    let start = Instant::now();
                    let seed = cell_seed(cfg.seed, kind, pe, r);
                    let mut cell = run_cell_with(kind, cfg.p, pe, r, d, cfg.repetitions, seed, &settings);
                    if cfg.timing {
                        cell.seconds = Some(start.elapsed().as_secs_f64());
                    }
                    log::info!(
                        "{} p_edge={pe} n/p={r} d={d}: sens {:?} prec {:?}",
                        kind.label(),
                        cell.sens_mean,
                        cell.prec_mean
                    );
                    cells.push(cell);
                }
            }
        }
    }
    Ok(BenchReport {
        config: cfg.clone(),
        cells,
    })
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with average ranks for ties. `None` when either
/// input is constant or shorter than two.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(kind: SimulationKind, r: f64, d: usize) -> BenchConfig {
        BenchConfig {
            kinds: vec![kind],
            p: 6,
            p_edge: vec![0.3],
            n_over_p: vec![r],
            d: vec![d],
            repetitions: 2,
            seed: 5,
            ..BenchConfig::default()
        }
    }

    #[test]
    fn default_grid_shape() {
        let c = BenchConfig::default();
        assert_eq!(c.n_over_p, vec![1.0, 3.0, 7.0, 20.0, 55.0, 148.0]);
        assert_eq!(c.cell_count(), 6 * 3 * 6 * 3);
        let restricted = BenchConfig {
            kinds: vec![SimulationKind::Categorical(2)],
            ..c
        };
        assert_eq!(restricted.cell_count(), 54);
        assert_eq!(BenchConfig::default().paper_scale().repetitions, 100);
    }

    #[test]
    fn config_validation() {
        let mut c = BenchConfig::default();
        c.repetitions = 0;
        assert!(c.validate().is_err());
        let mut c = BenchConfig::default();
        c.d.clear();
        assert!(c.validate().is_err());
        let c = BenchConfig::from_json(r#"{"kinds": ["binary-poisson"], "repetitions": 3}"#).unwrap();
        assert_eq!(c.kinds, vec![SimulationKind::BinaryPoisson]);
        assert_eq!(c.p, 16);
        assert!(BenchConfig::from_json(r#"{"kinds": ["categorical-m1"]}"#).is_err());
    }

    #[test]
    fn single_cell_is_one_row_and_reproducible() {
        let cfg = single(SimulationKind::Categorical(2), 20.0, 2);
        let a = run_grid(&cfg).unwrap();
        assert_eq!(a.cells.len(), 1);
        let csv = a.to_csv();
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.starts_with(CSV_HEADER));
        assert!(csv.lines().nth(1).unwrap().ends_with(','), "seconds blank by default");
        let b = run_grid(&BenchConfig { jobs: 2, ..cfg }).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.cells, b.cells);
        assert!(a.cells[0].rule_violations() == 0);
    }

    #[test]
    fn mixed_kinds_run() {
        for kind in [
            SimulationKind::BinaryGaussian,
            SimulationKind::BinaryPoisson,
            SimulationKind::BinaryExponential,
        ] {
            let r = run_grid(&single(kind, 7.0, 1)).unwrap();
            let c = &r.cells[0];
            assert!(c.flag.is_none(), "{:?}", c.flag);
            assert_eq!(c.rep_count, 2);
            assert!(c.noise_mean.unwrap() >= 0.0);
        }
    }

    #[test]
    fn cells_differing_in_d_share_data() {
        let seed = cell_seed(1, SimulationKind::Categorical(2), 0.2, 3.0);
        let a = run_cell(SimulationKind::Categorical(2), 6, 0.2, 3.0, 1, 2, seed);
        let b = run_cell(SimulationKind::Categorical(2), 6, 0.2, 3.0, 2, 2, seed);
        let noise = |c: &CellSummary| c.reps.iter().map(|r| (r.noise, r.true_edges)).collect::<Vec<_>>();
        assert_eq!(noise(&a), noise(&b));
    }

    #[test]
    fn construction_failure_flags_the_cell() {
        // A complete graph on 20 Gaussian nodes: the weight fluctuations
        // alone push the smallest eigenvalue of the precision below zero.
        let settings = CellSettings {
            retry_cap: 3,
            ..CellSettings::default()
        };
        let c = run_cell_with(SimulationKind::BinaryGaussian, 40, 1.0, 1.0, 1, 1, 0, &settings);
        assert_eq!(c.rep_count, 0);
        assert_eq!(c.failed_reps, 1);
        assert!(c.flag.as_deref().unwrap().contains("after 3 graph draws"));
        assert_eq!(c.sens_mean, None);
    }

    #[test]
    fn spearman_examples() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&[1.0, 2.0], &[5.0, 5.0]), None);
        // ranks (1, 2.5, 2.5, 4) against (1, 2, 3, 4): 4.5 / sqrt(4.5 * 5)
        let r = spearman(&[1.0, 2.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((r - 4.5 / (4.5f64 * 5.0).sqrt()).abs() < 1e-12);
    }
}
