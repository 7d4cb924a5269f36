//! File formats: graph JSON and edge-list CSV, dataset CSV with a JSON
//! schema sidecar. Node indices are 0-based on disk.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::model::{Family, NodeSpec};
use crate::sampler::Dataset;

#[derive(Serialize, Deserialize)]
struct GraphFile {
    p: usize,
    edges: Vec<(usize, usize, f64)>,
}

/// `{"p": .., "edges": [[s, t, w], ..]}`; unweighted edges carry weight 1.
pub fn graph_to_json(g: &Graph) -> Result<String> {
    Ok(serde_json::to_string_pretty(&GraphFile {
        p: g.p(),
        edges: g.edges().collect(),
    })?)
}

pub fn graph_from_json(text: &str) -> Result<Graph> {
    let f: GraphFile = serde_json::from_str(text)?;
    let mut g = Graph::new(f.p);
    for (s, t, w) in f.edges {
        g.add_weighted_edge(s, t, w)?;
    }
    Ok(g)
}

/// Edge list with header `s,t,weight`.
pub fn graph_to_csv(g: &Graph) -> String {
    let mut out = String::from("s,t,weight\n");
    for (s, t, w) in g.edges() {
        out.push_str(&format!("{s},{t},{w}\n"));
    }
    out
}

/// Reads `s,t[,weight]` rows; a header row is optional. Without `p` the node
/// count is one more than the largest index.
pub fn graph_from_csv(text: &str, p: Option<usize>) -> Result<Graph> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut edges = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Option<(usize, usize)> = match (rec.get(0), rec.get(1)) {
            (Some(a), Some(b)) => a.parse().ok().zip(b.parse().ok()),
            _ => None,
        };
        let Some((s, t)) = parsed else {
            if i == 0 {
                continue;
            }
            return Err(Error::Schema(format!("edge row {} is malformed", i + 1)));
        };
        let w = match rec.get(2) {
            Some(v) if !v.is_empty() => v
                .parse::<f64>()
                .map_err(|_| Error::Schema(format!("bad weight {v:?} on row {}", i + 1)))?,
            _ => 1.0,
        };
        edges.push((s, t, w, rec.len() > 2));
    }
    let p = p.unwrap_or_else(|| edges.iter().map(|e| e.0.max(e.1) + 1).max().unwrap_or(0));
    let mut g = Graph::new(p);
    for (s, t, w, weighted) in edges {
        if weighted {
            g.add_weighted_edge(s, t, w)?;
        } else {
            g.add_edge(s, t)?;
        }
    }
    Ok(g)
}

/// Schema sidecar: one `{name, family, ...params}` object per column.
pub fn schema_to_json(specs: &[NodeSpec]) -> Result<String> {
    Ok(serde_json::to_string_pretty(specs)?)
}

pub fn schema_from_json(text: &str) -> Result<Vec<NodeSpec>> {
    let specs: Vec<NodeSpec> = serde_json::from_str(text)?;
    for s in &specs {
        s.family.validate()?;
    }
    Ok(specs)
}

fn format_value(family: Family, v: f64) -> String {
    match family {
        Family::Gaussian { .. } | Family::Exponential => format!("{v}"),
        _ => format!("{}", v as u64),
    }
}

/// CSV with node names as header; discrete values written as integers and
/// reals in shortest round-trip form.
pub fn dataset_to_csv(data: &Dataset) -> String {
    let mut out = String::new();
    let names: Vec<&str> = data.specs().iter().map(|s| s.name.as_str()).collect();
    out.push_str(&names.join(","));
    out.push('\n');
    for i in 0..data.n() {
        let row: Vec<String> = data
            .specs()
            .iter()
            .zip(data.columns())
            .map(|(s, c)| format_value(s.family, c[i]))
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Parses a dataset CSV against its schema; header names must match.
pub fn dataset_from_csv(text: &str, specs: Vec<NodeSpec>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let names: Vec<String> = specs.iter().map(|s| s.name.clone()).collect();
    if header != names {
        return Err(Error::Schema(format!(
            "CSV header {header:?} does not match schema names {names:?}"
        )));
    }
    let mut columns = vec![Vec::new(); specs.len()];
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != specs.len() {
            return Err(Error::Schema(format!("row {} has {} fields", r + 2, rec.len())));
        }
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Schema(format!("row {} column {}: {field:?}", r + 2, names[j])))?;
            columns[j].push(v);
        }
    }
    Dataset::new(specs, columns)
}

pub fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_round_trips() {
        let mut g = Graph::new(4);
        g.add_weighted_edge(0, 1, -0.25).unwrap();
        g.add_weighted_edge(2, 3, 1.5).unwrap();
        assert_eq!(graph_from_json(&graph_to_json(&g).unwrap()).unwrap(), g);
        let back = graph_from_csv(&graph_to_csv(&g), Some(4)).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn headerless_unweighted_csv() {
        let g = graph_from_csv("0,1\n1,2\n", None).unwrap();
        assert_eq!(g.p(), 3);
        assert_eq!(g.edge_count(), 2);
        assert!(!g.is_weighted());
        assert!(graph_from_csv("0,1\nx,y\n", None).is_err());
    }

    #[test]
    fn dataset_round_trips() {
        let specs = vec![
            NodeSpec::new("a", Family::Gaussian { sigma: 2.0 }),
            NodeSpec::new("b", Family::Categorical { levels: 3 }),
            NodeSpec::new("c", Family::Poisson),
        ];
        let d = Dataset::new(
            specs.clone(),
            vec![vec![0.1, -1.0 / 3.0], vec![2.0, 0.0], vec![5.0, 0.0]],
        )
        .unwrap();
        let text = dataset_to_csv(&d);
        assert!(text.starts_with("a,b,c\n0.1,2,5\n"));
        let schema = schema_from_json(&schema_to_json(&specs).unwrap()).unwrap();
        assert_eq!(dataset_from_csv(&text, schema).unwrap(), d);
    }

    #[test]
    fn schema_mismatch_is_reported() {
        let specs = vec![NodeSpec::new("a", Family::Bernoulli)];
        assert!(matches!(dataset_from_csv("z\n1\n", specs.clone()), Err(Error::Schema(_))));
        assert!(dataset_from_csv("a\n3\n", specs).is_err());
    }
}
