//! Browser bindings for the demo page in `www/`. Every export takes plain
//! numbers or strings and returns a JSON string.

use mixgraph::estimator::{estimate_graph, EstimatorConfig, Rule, Selector};
use mixgraph::gencov::four_cycle_inverses;
use mixgraph::graph::{centrality, compare_graphs, CentralityOptions};
use mixgraph::model::SimulationKind;
use mixgraph::{bench, io, rng};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct Matrix {
    labels: Vec<String>,
    values: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct Inverses {
    plain: Matrix,
    augmented: Matrix,
}

pub fn inverses_json(theta_node: f64, theta_edge: f64) -> Result<String, String> {
    let (plain, aug) = four_cycle_inverses(theta_node, theta_edge).map_err(|e| e.to_string())?;
    let matrix = |r: mixgraph::gencov::CovarianceReport| -> Result<Matrix, String> {
        let values = r
            .inverse
            .ok_or_else(|| r.diagnostic.unwrap_or_else(|| "no inverse".into()))?;
        Ok(Matrix {
            labels: r.labels,
            values,
        })
    };
    let out = Inverses {
        plain: matrix(plain)?,
        augmented: matrix(aug)?,
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Recovery {
    p: usize,
    n: usize,
    true_edges: Vec<(usize, usize)>,
    estimated_edges: Vec<(usize, usize, f64)>,
    sensitivity: Option<f64>,
    precision: Option<f64>,
    noise: f64,
}

/// Simulates one dataset of the given kind and estimates its graph with
/// EBIC selection.
pub fn recovery_json(kind: &str, p: usize, p_edge: f64, n: usize, d: usize, seed: u64) -> Result<String, String> {
    let kind = SimulationKind::parse(kind).map_err(|e| e.to_string())?;
    let settings = bench::CellSettings::default();
    let sim = bench::simulate_repetition(kind, p, p_edge, n, seed, &settings).map_err(|e| e.to_string())?;
    let cfg = EstimatorConfig {
        d,
        selector: Selector::ebic_default(),
        rule: Rule::And,
        seed: rng::derive(seed, 3),
        ..EstimatorConfig::default()
    };
    let est = estimate_graph(&sim.data, &cfg).map_err(|e| e.to_string())?;
    let g = est.graph();
    let m = compare_graphs(&g, &sim.truth).map_err(|e| e.to_string())?;
    let out = Recovery {
        p,
        n,
        true_edges: sim.truth.edges().map(|(s, t, _)| (s, t)).collect(),
        estimated_edges: g.edges().collect(),
        sensitivity: m.sensitivity,
        precision: m.precision,
        noise: sim.repair.proportion,
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

/// Centrality of a graph given as `s,t,weight` CSV.
pub fn centrality_json(edges_csv: &str, p: Option<usize>, weighted: bool) -> Result<String, String> {
    let g = io::graph_from_csv(edges_csv, p).map_err(|e| e.to_string())?;
    let c = centrality(
        &g,
        CentralityOptions {
            weighted,
            ..CentralityOptions::default()
        },
    )
    .map_err(|e| e.to_string())?;
    serde_json::to_string(&c).map_err(|e| e.to_string())
}

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn inverses(theta_node: f64, theta_edge: f64) -> Result<String, JsError> {
    js(inverses_json(theta_node, theta_edge))
}

#[wasm_bindgen]
pub fn recovery(kind: &str, p: usize, p_edge: f64, n: usize, d: usize, seed: u32) -> Result<String, JsError> {
    js(recovery_json(kind, p, p_edge, n, d, seed as u64))
}

#[wasm_bindgen]
pub fn node_centrality(edges_csv: &str, p: usize, weighted: bool) -> Result<String, JsError> {
    js(centrality_json(edges_csv, (p > 0).then_some(p), weighted))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverses_are_symmetric() {
        let v: serde_json::Value = serde_json::from_str(&inverses_json(0.1, 0.5).unwrap()).unwrap();
        let m = &v["augmented"]["values"];
        assert_eq!(m.as_array().unwrap().len(), 5);
        for i in 0..5 {
            for j in 0..5 {
                assert!((m[i][j].as_f64().unwrap() - m[j][i].as_f64().unwrap()).abs() < 1e-10);
            }
        }
        assert!(v["plain"]["values"][1][3].as_f64().unwrap().abs() < 0.02);
    }

    #[test]
    fn recovery_reports_metrics() {
        let v: serde_json::Value =
            serde_json::from_str(&recovery_json("binary-gaussian", 6, 0.3, 300, 1, 5).unwrap()).unwrap();
        assert_eq!(v["p"], 6);
        assert!(v["noise"].as_f64().unwrap() >= 0.0);
        assert!(recovery_json("nonsense", 6, 0.3, 300, 1, 5).is_err());
    }

    #[test]
    fn star_centrality() {
        let v: serde_json::Value =
            serde_json::from_str(&centrality_json("s,t,weight\n0,1,1\n0,2,1\n0,3,1\n", None, true).unwrap()).unwrap();
        let raw = v["raw"].as_array().unwrap();
        assert_eq!(raw.len(), 4);
        assert!(raw[0]["degree"].as_f64() > raw[1]["degree"].as_f64());
    }
}
