use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nmmc_core::metrics::{read_distribution_csv, MetricsLog};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn nmmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nmmc")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn read_log(path: &Path) -> MetricsLog {
    MetricsLog::read_csv(fs::File::open(path).unwrap()).unwrap()
}

fn prepared_cycle(dir: &Path) -> PathBuf {
    let out = nmmc(&["prepare", fixture("three_cycle.txt").to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    let text = stdout(&out);
    assert_eq!(text, "Graph: 4 nodes, 4 edges\nLSCC: 3 nodes, 3 edges\n");
    dir.join("graph.txt")
}

#[test]
fn prepare_cuts_out_the_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let graph = prepared_cycle(dir.path());
    let edges = fs::read_to_string(graph).unwrap();
    assert_eq!(edges.lines().filter(|l| !l.starts_with('#')).count(), 3);
}

#[test]
fn oracle_on_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let graph = prepared_cycle(dir.path());
    let evc = stdout(&nmmc(&["oracle", graph.to_str().unwrap(), "--target", "evc"]));
    let d = read_distribution_csv(evc.as_bytes()).unwrap();
    assert_eq!(d.ids, [0, 1, 2]);
    assert!(d.values.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-12));
    assert!((d.eigenvalue.unwrap() - 1.0).abs() < 1e-12);

    let path = dir.path().join("indegree.csv");
    let out = nmmc(&["oracle", graph.to_str().unwrap(), "--target", "indegree", "--out", path.to_str().unwrap()]);
    stdout(&out);
    let d = read_distribution_csv(fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(d.values, [1.0 / 3.0; 3]);
    assert_eq!(d.eigenvalue, None);
}

#[test]
fn run_converges_and_repeats_exactly() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let config = fixture("three_cycle_run.toml");
    for dir in [&a, &b] {
        let text = stdout(&nmmc(&["run", config.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]));
        assert!(text.starts_with("run: "), "{text}");
    }
    let first = fs::read(a.path().join("run.csv")).unwrap();
    assert_eq!(first, fs::read(b.path().join("run.csv")).unwrap());
    let log = read_log(&a.path().join("run.csv"));
    assert_eq!(log.seed, 11);
    assert_eq!(log.rows.len(), 30);
    assert!(log.rows[0].tvd > log.last().unwrap().tvd);
    assert!(log.last().unwrap().tvd < 1e-3);

    let slope = stdout(&nmmc(&["slope", a.path().join("run.csv").to_str().unwrap()]));
    assert!(slope.starts_with("slope -"), "{slope}");
}

#[test]
fn mh_baseline_on_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixture("three_cycle_mh.toml");
    stdout(&nmmc(&["baseline", config.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]));
    let log = read_log(&dir.path().join("mh-max.csv"));
    assert!(log.last().unwrap().tvd < 0.02);
}

#[test]
fn durw_comparison_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixture("small_compare.toml");
    let text = stdout(&nmmc(&["baseline", config.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]));
    assert!(text.contains("NMMC lower TVD at equal query budget in "), "{text}");
    assert!(text.trim_end().ends_with("of 4 comparisons"), "{text}");
    let table = fs::read_to_string(dir.path().join("comparison.csv")).unwrap();
    assert_eq!(table.lines().count(), 2 + 4);
    for name in ["durw_w0.1_c10.csv", "durw_w10_c10.csv", "run_alpha3.csv", "run_alpha5.csv"] {
        assert!(dir.path().join(name).is_file(), "{name} missing");
    }
}

#[test]
fn errors_are_one_line_and_nonzero() {
    let missing = nmmc(&["run", "/nonexistent/config.toml"]);
    assert_eq!(missing.status.code(), Some(1));
    let err = String::from_utf8(missing.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error: "));

    let bad = nmmc(&["oracle", fixture("three_cycle.txt").to_str().unwrap(), "--target", "pagerank"]);
    assert_eq!(bad.status.code(), Some(2));
    assert_eq!(String::from_utf8(bad.stderr).unwrap().lines().count(), 1);

    // The raw fixture has a dangling node, so EVC is undefined on it.
    let dangling = nmmc(&["oracle", fixture("three_cycle.txt").to_str().unwrap(), "--target", "evc"]);
    assert_eq!(dangling.status.code(), Some(1));
    assert_eq!(String::from_utf8(dangling.stderr).unwrap().lines().count(), 1);
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        nmmc_cli::config::ExperimentConfig::from_toml_str(&text).unwrap_or_else(|e| panic!("{}: {e:#}", path.display()));
        seen += 1;
    }
    assert_eq!(seen, 4);
}
