use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mixgraph(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixgraph"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const BINARY_CHAIN: &str = r#"{"nodes":[{"name":"A","family":"bernoulli"},{"name":"B","family":"bernoulli"},{"name":"C","family":"bernoulli"}],
 "thresholds":[[0.1],[-0.2],[0.3]],
 "edges":[{"s":0,"t":1,"block":[[0.5]]},{"s":1,"t":2,"block":[[-0.7]]}]}"#;

const MIXED_CHAIN: &str = r#"{"nodes":[{"name":"A","family":"bernoulli"},{"name":"B","family":"gaussian","sigma":1.0},{"name":"C","family":"bernoulli"}],
 "thresholds":[[0.1],[0.1],[0.1]],
 "edges":[{"s":0,"t":1,"block":[[0.5]]},{"s":1,"t":2,"block":[[0.5]]}]}"#;

#[test]
fn version_names_format() {
    let out = mixgraph(&["--version"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("mixgraph "), "{text}");
    assert!(text.contains("format 1"));
}

#[test]
fn unknown_flag_is_rejected() {
    let out = mixgraph(&["demo-fig1", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn demo_prints_both_matrices() {
    let out = mixgraph(&["demo-fig1", "--quiet"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("inverse (4x4)") && text.contains("inverse (5x5)"));
    let rows: Vec<Vec<String>> = text
        .lines()
        .filter(|l| l.starts_with('X'))
        .map(|l| l.split_whitespace().skip(1).map(str::to_string).collect())
        .collect();
    assert_eq!(rows.len(), 9);
    let four = &rows[..4];
    let five = &rows[4..];
    // The two Gaussian nodes are not adjacent.
    assert_eq!(four[1][3], "0.00");
    for m in [four, five] {
        for i in 0..m.len() {
            for j in 0..m.len() {
                assert_eq!(m[i][j], m[j][i]);
            }
        }
    }
}

#[test]
fn gencov_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let chain = dir.path().join("chain.json");
    fs::write(&chain, BINARY_CHAIN).unwrap();
    let out = mixgraph(&["gencov-check", p(&chain), "--mode", "cor2", "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("report.json").exists());

    // With a Gaussian separator the exact inverse is not structured.
    let mixed = dir.path().join("mixed.json");
    fs::write(&mixed, MIXED_CHAIN).unwrap();
    let out = mixgraph(&["gencov-check", p(&mixed), "--mode", "cor2", "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(1));

    let out = mixgraph(&["demo-fig1", "--write", "--quiet", "--out", p(dir.path())]);
    assert!(out.status.success());
    let fig1 = dir.path().join("fig1-model.json");
    let out = mixgraph(&["gencov-check", p(&fig1), "--mode", "theorem1", "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not triangulated"));

    let missing = dir.path().join("nope.json");
    let out = mixgraph(&["gencov-check", p(&missing), "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

fn read_all(dir: &Path, names: &[&str]) -> Vec<Vec<u8>> {
    names.iter().map(|n| fs::read(dir.join(n)).unwrap()).collect()
}

#[test]
fn sample_and_estimate_are_reproducible_across_jobs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let out = mixgraph(&["demo-fig1", "--write", "--quiet", "--out", p(a.path())]);
    assert!(out.status.success());
    let model = a.path().join("fig1-model.json");
    for (dir, jobs) in [(&a, "1"), (&b, "3")] {
        let out = mixgraph(&[
            "sample", p(&model), "--n", "400", "--repair", "--seed", "11", "--jobs", jobs, "--out", p(dir.path()),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let data = dir.path().join("dataset.csv");
        let schema = dir.path().join("schema.json");
        let out = mixgraph(&[
            "estimate", p(&data), p(&schema), "--d", "2", "--rule", "and", "--seed", "11", "--jobs", jobs, "--out",
            p(dir.path()),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let files = ["dataset.csv", "schema.json", "repair.json", "result.json", "edges.csv"];
    assert_eq!(read_all(a.path(), &files), read_all(b.path(), &files));
    let csv = fs::read_to_string(a.path().join("dataset.csv")).unwrap();
    assert_eq!(csv.lines().count(), 401);
    assert_eq!(csv.lines().next().unwrap(), "X1,X2,X3,X4");
    let edges = fs::read_to_string(a.path().join("edges.csv")).unwrap();
    assert!(edges.lines().count() - 1 <= 6);
}

#[test]
fn simulate_and_ebic() {
    let dir = tempfile::tempdir().unwrap();
    let out = mixgraph(&[
        "sample", "--simulate", "binary-poisson", "--p", "6", "--p-edge", "0.4", "--n", "300", "--repair", "--out",
        p(dir.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["model.json", "graph.json", "repair.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let repair: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("repair.json")).unwrap()).unwrap();
    assert!(repair["proportion"].as_f64().unwrap() >= 0.0);
    let data = dir.path().join("dataset.csv");
    let schema = dir.path().join("schema.json");
    let out = mixgraph(&["estimate", p(&data), p(&schema), "--select", "ebic", "--d", "1", "--out", p(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = mixgraph(&["estimate", p(&data), p(&schema), "--all-gaussian", "--d", "1", "--out", p(dir.path())]);
    assert!(out.status.success());
}

#[test]
fn estimate_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let schema = dir.path().join("schema.json");
    fs::write(&schema, r#"[{"name":"a","family":"bernoulli"},{"name":"b","family":"gaussian","sigma":1.0}]"#).unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "a,c\n0,1.0\n").unwrap();
    let out = mixgraph(&["estimate", p(&bad), p(&schema), "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema"));

    // A binary level seen once cannot be present in every training split.
    let mut rows = String::from("a,b\n1,0.3\n");
    for i in 0..19 {
        rows.push_str(&format!("0,{}\n", (i as f64 * 0.37).sin()));
    }
    let rare = dir.path().join("rare.csv");
    fs::write(&rare, rows).unwrap();
    let out = mixgraph(&["estimate", p(&rare), p(&schema), "--d", "1", "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(4));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("node 0") && err.contains("EBIC"), "{err}");
    let out = mixgraph(&["estimate", p(&rare), p(&schema), "--d", "1", "--select", "ebic", "--out", p(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn single_cell_bench_is_one_row_and_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = a.path().join("bench.json.in");
    fs::write(
        &cfg,
        r#"{"kinds":["categorical-m2"],"p":6,"p_edge":[0.3],"n_over_p":[20],"d":[1],"repetitions":2}"#,
    )
    .unwrap();
    for (dir, jobs) in [(&a, "1"), (&b, "2")] {
        let out = mixgraph(&["bench", p(&cfg), "--seed", "4", "--jobs", jobs, "--out", p(dir.path())]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let files = ["bench.csv", "bench.json"];
    assert_eq!(read_all(a.path(), &files), read_all(b.path(), &files));
    let csv = fs::read_to_string(a.path().join("bench.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.starts_with("kind,p_edge,n_over_p,d,rep_count,"));
    assert!(csv.lines().nth(1).unwrap().starts_with("categorical-m2,0.3,20,1,2,"));
}

#[test]
fn star_center_tops_centrality() {
    let dir = tempfile::tempdir().unwrap();
    let edges = dir.path().join("edges.csv");
    fs::write(&edges, "s,t,weight\n0,1,1\n0,2,1\n0,3,1\n0,4,1\n").unwrap();
    let out = mixgraph(&["centrality", p(&edges), "--out", p(dir.path())]);
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("centrality.csv")).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').skip(1).map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 5);
    for m in 0..6 {
        assert!((1..5).all(|s| rows[0][m] > rows[s][m]), "measure {m}");
    }
    let again = tempfile::tempdir().unwrap();
    mixgraph(&["centrality", p(&edges), "--out", p(again.path())]);
    assert_eq!(text, fs::read_to_string(again.path().join("centrality.csv")).unwrap());
}
