use std::path::Path;
use std::process::{Command, Output};

use copygraph::io::{load_edge_list, load_interactions, write_edge_list, write_features_triplets, write_labels};
use copygraph::recsys::BprModel;
use copygraph::synthetic::{planted_classification, PlantedConfig};
use copygraph::copying::apply_copy_undirected;
use copygraph::ReplacementVector;
use serde_json::Value;

fn copygraph(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_copygraph"))
        .current_dir(dir)
        .args(args)
        .env_remove("COPYGRAPH_SEED")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) {
    let o = copygraph(dir, args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

fn read_json(p: impl AsRef<Path>) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn planted_fixture(dir: &Path) -> copygraph::synthetic::PlantedData {
    let d = planted_classification(&PlantedConfig::small(), 3).unwrap();
    std::fs::write(dir.join("graph.txt"), write_edge_list(&d.graph)).unwrap();
    std::fs::write(dir.join("labels.csv"), write_labels(&d.labels)).unwrap();
    std::fs::write(dir.join("features.csv"), write_features_triplets(&d.features)).unwrap();
    d
}

#[test]
fn triangle_has_average_degree_two() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("tri.txt"), "0 1\n1 2\n2 0\n").unwrap();
    ok(tmp.path(), &["stats", "tri.txt", "--out", "o"]);
    let r = read_json(tmp.path().join("o/result.json"));
    assert_eq!(r[0]["avg_degree"], 2.0);
    assert_eq!(r[0]["graph"], "tri.txt");
}

#[test]
fn er_verification_passes_from_flags() {
    let tmp = tempfile::tempdir().unwrap();
    ok(tmp.path(), &["verify", "--model", "er", "--theta", "0.3", "--n-nodes", "60", "--trials", "100", "--out", "o"]);
    assert_eq!(read_json(tmp.path().join("o/result.json"))["pass"], true);
}

#[test]
fn every_config_error_is_reported_as_json() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("c.json"), r#"{"bogus": 1, "theta": "high", "n_nodes": 0}"#).unwrap();
    let o = copygraph(tmp.path(), &["verify", "--config", "c.json", "--out", "o"]);
    assert_eq!(o.status.code(), Some(2));
    let err = serde_json::from_slice::<Value>(&o.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "config");
    let messages = err["error"]["messages"].to_string();
    for key in ["bogus", "theta", "n_nodes"] {
        assert!(messages.contains(key), "{key} missing from {messages}");
    }
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn missing_input_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = copygraph(tmp.path(), &["classify", "--graph", "nope.txt", "--labels", "nope.csv", "--features", "f.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.txt"));
}

#[test]
fn seed_comes_from_flag_then_config_then_environment_then_default() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("tri.txt"), "0 1\n1 2\n2 0\n").unwrap();
    let seed_of = |out: &str| read_json(dir.join(out).join("report.json"))["seed"].as_u64().unwrap();

    ok(dir, &["stats", "tri.txt", "--out", "a"]);
    assert_eq!(seed_of("a"), 42);

    let with_env = |args: &[&str]| {
        let o = Command::new(env!("CARGO_BIN_EXE_copygraph"))
            .current_dir(dir)
            .args(args)
            .env("COPYGRAPH_SEED", "9")
            .output()
            .unwrap();
        assert!(o.status.success());
    };
    with_env(&["stats", "tri.txt", "--out", "b"]);
    assert_eq!(seed_of("b"), 9);

    std::fs::write(dir.join("c.json"), r#"{"seed": 5}"#).unwrap();
    with_env(&["stats", "tri.txt", "--config", "c.json", "--out", "c"]);
    assert_eq!(seed_of("c"), 5);

    with_env(&["stats", "tri.txt", "--config", "c.json", "--seed", "3", "--out", "d"]);
    assert_eq!(seed_of("d"), 3);
}

#[test]
fn sampled_graphs_and_replacements_reload() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let d = planted_fixture(dir);
    std::fs::write(
        dir.join("s.json"),
        r#"{"graph": "graph.txt", "labels": "labels.csv", "n_samples": 2, "distribution": {"kind": "label-uniform"}}"#,
    )
    .unwrap();
    ok(dir, &["sample", "--config", "s.json", "--out", "o"]);
    let n = d.graph.n_nodes();
    for i in 0..2 {
        let sample = load_edge_list(dir.join(format!("o/sample_{i:03}.txt")), false).unwrap();
        let zeta = ReplacementVector::load_csv(&dir.join(format!("o/zeta_{i:03}.csv")), n).unwrap();
        let rebuilt = apply_copy_undirected(&d.graph, &zeta).unwrap();
        assert_eq!(sample.n_edges(), rebuilt.n_edges());
        for v in 0..n {
            let (mut a, mut b) = (sample.neighbors(v).to_vec(), rebuilt.neighbors(v).to_vec());
            a.sort_unstable();
            b.sort_unstable();
            assert_eq!(a, b);
        }
        assert!(zeta.as_slice().iter().enumerate().all(|(v, &z)| d.labels.get(v) == d.labels.get(z)));
    }
}

#[test]
fn probabilities_are_distributions() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    planted_fixture(dir);
    std::fs::write(
        dir.join("c.json"),
        r#"{"labels_per_class": 10, "n_test": null, "method": "gcn", "bgcn": {"gcn": {"epochs": 40}}}"#,
    )
    .unwrap();
    ok(dir, &["classify", "--config", "c.json", "--graph", "graph.txt", "--labels", "labels.csv", "--features", "features.csv", "--out", "o"]);
    let text = std::fs::read_to_string(dir.join("o/probabilities.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("node,p0"));
    for line in lines {
        let total: f64 = line.split(',').skip(1).map(|x| x.parse::<f64>().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-9, "{line}");
    }
    let acc = read_json(dir.join("o/result.json"))["accuracy"].as_f64().unwrap();
    assert!(acc > 0.5, "{acc}");
}

#[test]
fn recsys_artifacts_reload_and_eval_reproduces_training_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(
        dir.join("r.json"),
        r#"{"data": {"planted": {"n_users": 60, "n_items": 80, "p_in": 0.2}}, "bpr": {"epochs": 5, "dim": 8}}"#,
    )
    .unwrap();
    ok(dir, &["recsys", "train", "--config", "r.json", "--out", "t"]);
    ok(dir, &["recsys", "eval", "--config", "r.json", "--model", "t/model.json", "--out", "e"]);
    let train = load_interactions(dir.join("t/train.txt")).unwrap();
    let model: BprModel = serde_json::from_str(&std::fs::read_to_string(dir.join("t/model.json")).unwrap()).unwrap();
    assert_eq!(model.scores(&train).unwrap().dim(), (train.n_users(), train.n_items()));
    assert_eq!(
        std::fs::read(dir.join("t/metrics.json")).unwrap(),
        std::fs::read(dir.join("e/metrics.json")).unwrap()
    );
}
