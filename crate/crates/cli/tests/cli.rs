use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use kvgap::kv::{parse_basis, write_basis};
use kvgap::metric::{write_demand_graph, write_metric, DemandGraph, FiniteMetric};
use kvgap::unique_games::{
    parse_labeling, parse_ug, plant_instance, write_labeling, write_permutation, write_ug, Permutation,
};
use tempfile::TempDir;

fn kvgap(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kvgap"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn summary_value(dir: &Path, key: &str) -> String {
    let text = fs::read_to_string(dir.join("summary.tsv")).unwrap();
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}\t")).map(String::from))
        .unwrap_or_else(|| panic!("{key} missing from summary"))
}

#[test]
fn build_ug_golden_run_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let first = kvgap(&["build-ug", "--k", "2", "--eta", "0.3", "--seed", "7"], &a);
    assert!(first.status.success(), "{}", stderr(&first));
    let second = kvgap(&["build-ug", "--k", "2", "--eta", "0.3", "--seed", "7"], &b);
    assert!(second.status.success());
    for file in ["summary.tsv", "checks.tsv", "ug.txt", "basis.txt", "labeling.txt"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
    assert_eq!(summary_value(&a, "opt"), "3.6956521739130438e-1");
    assert_eq!(summary_value(&a, "sdp_objective"), "1.5217391304347824e-1");
    assert_eq!(summary_value(&a, "opt_method"), "exhaustive");
    let u = parse_ug(&fs::read_to_string(a.join("ug.txt")).unwrap()).unwrap();
    assert_eq!((u.labels(), u.num_vertices(), u.edges().len()), (4, 4, 26));
}

#[test]
fn invalid_parameters_are_usage_errors() {
    let tmp = TempDir::new().unwrap();
    for args in [
        vec!["build-ug", "--k", "9"],
        vec!["build-ug", "--t", "2"],
        vec!["build-bes", "--l-in", "3"],
        vec!["build-ug", "--eta", "0.7"],
    ] {
        let o = kvgap(&args, tmp.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(stderr(&o).starts_with(&format!("FAIL\t{}\terror\tusage:", args[0])), "{}", stderr(&o));
    }
}

#[test]
fn degenerate_window_is_an_advisory_error() {
    let tmp = TempDir::new().unwrap();
    let o = kvgap(&["build-ug", "--k", "2", "--eta", "0.05"], tmp.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("advisory: typical window is empty"), "{}", stderr(&o));
}

#[test]
fn config_file_with_flag_override() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "k = 2\neta = 0.25\nseed = 3\n[budgets]\nrestarts = 4\n").unwrap();
    let out = tmp.path().join("out");
    let o = kvgap(&["build-ug", "--config", cfg.to_str().unwrap(), "--eta", "0.35"], &out);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(summary_value(&out, "eta"), "3.4999999999999998e-1");
    assert_eq!(summary_value(&out, "opt"), "3.5106382978723405e-1");
    fs::write(&cfg, "k = 2\nunknown = 1\n").unwrap();
    let o = kvgap(&["build-ug", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("config:"));
}

#[test]
fn verify_detects_tampered_weight() {
    let tmp = TempDir::new().unwrap();
    let u = plant_instance(6, 3, 0.1, 1.0, 5).unwrap().instance;
    let text = write_ug(&u);
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut fields: Vec<&str> = lines[1].split(' ').collect();
    fields[2] = "0.5";
    lines[1] = fields.join(" ");
    let path = tmp.path().join("ug.txt");
    fs::write(&path, lines.join("\n")).unwrap();
    let o = kvgap(&["verify", "--ug", path.to_str().unwrap()], &tmp.path().join("out"));
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.starts_with("FAIL\tverify\terror\t") && err.contains("sum to"), "{err}");
}

#[test]
fn verify_confirms_value_under_permuted_labels() {
    let tmp = TempDir::new().unwrap();
    let planted = plant_instance(8, 4, 0.25, 1.0, 11).unwrap();
    let rho = Permutation::new(vec![2, 0, 3, 1]).unwrap();
    let files = [
        ("ug.txt", write_ug(&planted.instance)),
        ("perm_ug.txt", write_ug(&planted.instance.relabel(&rho).unwrap())),
        ("map.txt", write_permutation(&rho)),
        ("lab.txt", write_labeling(&planted.hidden)),
    ];
    for (name, text) in &files {
        fs::write(tmp.path().join(name), text).unwrap();
    }
    let p = |name: &str| tmp.path().join(name).to_str().unwrap().to_string();
    let out = tmp.path().join("out");
    let o = kvgap(
        &["verify", "--ug", &p("ug.txt"), "--labeling", &p("lab.txt"), "--permuted-ug", &p("perm_ug.txt"), "--label-map", &p("map.txt")],
        &out,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(summary_value(&out, "labeling_value"), summary_value(&out, "permuted_value"));
    let value: f64 = summary_value(&out, "labeling_value").parse().unwrap();
    assert!((value - planted.instance.value(&planted.hidden).unwrap()).abs() < 1e-15);
}

#[test]
fn verify_pinpoints_corrupted_basis_row() {
    let tmp = TempDir::new().unwrap();
    let build = tmp.path().join("build");
    assert!(kvgap(&["build-ug", "--k", "2"], &build).status.success());
    let mut sol = parse_basis(&fs::read_to_string(build.join("basis.txt")).unwrap()).unwrap();
    sol.row_mut(2, 1)[3] *= -1;
    let corrupted = tmp.path().join("basis_bad.txt");
    fs::write(&corrupted, write_basis(&sol)).unwrap();
    let o = kvgap(
        &["verify", "--ug", build.join("ug.txt").to_str().unwrap(), "--basis", corrupted.to_str().unwrap()],
        &tmp.path().join("out"),
    );
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    let first = err.lines().next().unwrap();
    assert_eq!(first, "FAIL\tverify\torthonormal_basis\tclass 2 row 1 in 3 defective inner products");
    assert!(err.contains("FAIL\tverify\tsdp.intra_orthogonality"), "{err}");
}

#[test]
fn build_bes_k2_sweep_end_to_end() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("bes");
    let start = Instant::now();
    let o = kvgap(&["build-bes", "--k", "2", "--eta", "0.3", "--epsilon-sweep", "0.3,0.2,0.1"], &out);
    assert!(start.elapsed() < Duration::from_secs(60));
    assert!(o.status.success(), "{}", stderr(&o));
    let gap = fs::read_to_string(out.join("gap.tsv")).unwrap();
    let rows: Vec<&str> = gap.lines().collect();
    assert_eq!(rows[0], "k\teta\tepsilon\tt\tsdp_objective\tbest_cut_weight\tratio\tbalance");
    assert_eq!(rows.len(), 4);
    let checks = fs::read_to_string(out.join("checks.tsv")).unwrap();
    assert!(checks.contains("eps=0.3.triangle_exhaustive_t3\t0.0000000000000000e0\t1.0000000000000001e-9\t41664\tpass"));
    assert!(!checks.contains("\tfail\t"));
    assert!(fs::read_to_string(out.join("bes_eps0.3.txt")).unwrap().starts_with("BES 4 4 "));
    let cut = fs::read_to_string(out.join("cut_eps0.2.txt")).unwrap();
    assert_eq!(cut.lines().filter(|l| *l == "1" || *l == "-1").count(), 64);
}

#[test]
fn build_bes_missing_input_is_a_clean_error() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("absent_ug.txt");
    let o = kvgap(&["build-bes", "--ug", missing.to_str().unwrap()], &tmp.path().join("out"));
    assert!(!o.status.success());
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("FAIL\tbuild-bes\terror\t") && err.contains("absent_ug.txt"), "{err}");
}

#[test]
fn pcp_long_code_meets_completeness() {
    let tmp = TempDir::new().unwrap();
    let (eta, eps) = (0.1, 0.1);
    let planted = plant_instance(10, 4, eta, 1.0, 2).unwrap();
    fs::write(tmp.path().join("ug.txt"), write_ug(&planted.instance)).unwrap();
    fs::write(tmp.path().join("lab.txt"), write_labeling(&planted.hidden)).unwrap();
    let out = tmp.path().join("out");
    let ug = tmp.path().join("ug.txt");
    let lab = tmp.path().join("lab.txt");
    let o = kvgap(
        &["pcp", "--ug", ug.to_str().unwrap(), "--labeling", lab.to_str().unwrap(), "--epsilon", "0.1"],
        &out,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let acc: f64 = summary_value(&out, "acceptance_exact").parse().unwrap();
    assert!(acc >= (1.0 - eta) * (1.0 - eps) - 1e-9);
    let decoded = parse_labeling(&fs::read_to_string(out.join("decoded_labeling.txt")).unwrap()).unwrap();
    assert_eq!(decoded, planted.hidden);
}

#[test]
fn distortion_of_metric_file() {
    let tmp = TempDir::new().unwrap();
    let c4 = FiniteMetric::from_fn(4, |i, j| {
        let d = (i as f64 - j as f64).abs();
        d.min(4.0 - d)
    })
    .unwrap();
    let path = tmp.path().join("c4.txt");
    fs::write(&path, write_metric(&c4)).unwrap();
    let out = tmp.path().join("out");
    let o = kvgap(&["distortion", "--metric", path.to_str().unwrap()], &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let gamma: f64 = summary_value(&out, "gamma").parse().unwrap();
    assert!((gamma - 1.0).abs() < 1e-7);
    assert_eq!(summary_value(&out, "negative_type"), "true");
    assert!(fs::read_to_string(out.join("distortion.lp")).unwrap().contains("gamma"));
}

#[test]
fn round_graph_file_reaches_a_third_of_the_balance() {
    let tmp = TempDir::new().unwrap();
    let graph = DemandGraph::new(
        6,
        vec![(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0), (3, 4, 1.0), (4, 5, 1.0), (5, 3, 1.0), (2, 3, 0.1)],
        (0..6).flat_map(|a| (a + 1..6).map(move |b| (a, b, 1.0))).collect(),
    )
    .unwrap();
    let path = tmp.path().join("graph.txt");
    fs::write(&path, write_demand_graph(&graph)).unwrap();
    let out = tmp.path().join("out");
    let o = kvgap(&["round", "--graph", path.to_str().unwrap(), "--seed", "4"], &out);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(summary_value(&out, "balanced_third"), "pass");
    let cut: Vec<String> = fs::read_to_string(out.join("cut.txt")).unwrap().lines().map(String::from).collect();
    assert_eq!(cut.len(), 6);
    assert_eq!(summary_value(&out, "edge_weight"), "1.0000000000000001e-1");
}
