use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use aqml::config::{ExperimentConfig, Subcommand};
use aqml_core::embedding::RawDataset;

fn aqml(args: &[&str], config: &str, dir: &Path) -> Output {
    let cfg = dir.join("run.toml");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_aqml"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap()
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

const SMALL_QPCA: &str = "seed = 3\n[qpca]\ntrials = 2\nalphas = [0.1, 0.2, 0.3]\n[qpca.dataset]\nsamples = 40\n";

#[test]
fn minimal_qpca_config_is_echoed_with_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let res = aqml(&["qpca", "--out", out.to_str().unwrap()], "[qpca]\ntrials = 1\n", dir.path());
    assert!(res.status.success(), "{}", text(&res.stderr));
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.starts_with("# aqml qpca\n"));
    for key in ["family = \"uniform\"", "samples = 200", "bits = 10", "epsilon = 0.05", "trials = 1"] {
        assert!(summary.contains(key), "missing {key} in\n{summary}");
    }
    let csv = fs::read_to_string(out.join("qpca.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("# schema: aqml/qpca/v1"));
    assert_eq!(lines.next(), Some("seed,alpha,L,d,norm,bound,lambda_measured,queries"));
}

#[test]
fn median_epsilon_above_quarter_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let res = aqml(&["qpca"], "[qpca.search]\nepsilon = 0.3\n", dir.path());
    assert_eq!(res.status.code(), Some(2));
    assert!(text(&res.stderr).contains("ε < 1/4 required"), "{}", text(&res.stderr));
}

#[test]
fn misspelled_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let res = aqml(&["boost"], "[boost]\nclasifiers = 4\n", dir.path());
    assert_eq!(res.status.code(), Some(2));
    assert!(text(&res.stderr).contains("clasifiers"), "{}", text(&res.stderr));
}

#[test]
fn kmeans_budget_over_population_is_rejected_before_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let res = aqml(
        &["kmeans", "--out", out.to_str().unwrap()],
        "[kmeans]\nparticipants = 5000\n",
        dir.path(),
    );
    assert_eq!(res.status.code(), Some(2));
    assert!(text(&res.stderr).contains("is not below N = 5000"), "{}", text(&res.stderr));
    assert!(!out.exists());
}

#[test]
fn poisoning_sweep_has_one_row_per_seed_and_alpha() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let res = aqml(&["qpca", "--out", out.to_str().unwrap()], SMALL_QPCA, dir.path());
    assert!(res.status.success(), "{}", text(&res.stderr));
    let csv = fs::read_to_string(out.join("qpca.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(2).collect();
    assert_eq!(rows.len(), 2 * 3);
    let seeds: Vec<&str> = rows.iter().map(|r| r.split(',').next().unwrap()).collect();
    assert_eq!(seeds, ["3", "3", "3", "4", "4", "4"]);
}

#[test]
fn same_config_and_seed_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let config = format!("{SMALL_QPCA}[boost]\ntrials = 2\n[kmeans]\nrounds = 2\n");
    for cmd in ["qpca", "boost", "kmeans"] {
        let a = dir.path().join(format!("{cmd}-a"));
        let b = dir.path().join(format!("{cmd}-b"));
        for o in [&a, &b] {
            let res = aqml(&[cmd, "--out", o.to_str().unwrap()], &config, dir.path());
            assert!(res.status.success(), "{cmd}: {}", text(&res.stderr));
        }
        let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert!(names.len() >= 2);
        for n in names {
            assert_eq!(fs::read(a.join(&n)).unwrap(), fs::read(b.join(&n)).unwrap(), "{cmd}/{n:?}");
        }
    }
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let res = aqml(&["qpca", "--seed", "11", "--out", out.to_str().unwrap()], SMALL_QPCA, dir.path());
    assert!(res.status.success());
    let csv = fs::read_to_string(out.join("qpca.csv")).unwrap();
    assert!(csv.lines().nth(2).unwrap().starts_with("11,"));
}

#[test]
fn violated_bound_gives_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let data: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64 / 20.0) - 1.0, ((i * 7 % 40) as f64 / 20.0) - 1.0]).collect();
    let path = dir.path().join("data.csv");
    RawDataset::new(data, 10.0).unwrap().write_csv(fs::File::create(&path).unwrap()).unwrap();
    let config = format!(
        "[qpca]\ntrials = 1\nalphas = [0.3]\nlipschitz = 0.001\n[qpca.dataset]\npath = \"{}\"\n",
        path.display()
    );
    let out = dir.path().join("o");
    let res = aqml(&["qpca", "--out", out.to_str().unwrap()], &config, dir.path());
    assert_eq!(res.status.code(), Some(1), "{}", text(&res.stdout));
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("bound violation"), "{summary}");
}

#[test]
fn verify_prints_a_pass_fail_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let res = aqml(&["verify", "--out", out.to_str().unwrap()], "[verify]\ncriteria = [12]\n", dir.path());
    assert!(res.status.success(), "{}", text(&res.stderr));
    assert!(text(&res.stdout).contains("[PASS] 12 privacy"));
    let csv = fs::read_to_string(out.join("verify.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(out.join("check12_small.csv").exists());
}

#[test]
fn dispatch_validates_before_running() {
    let mut cfg = ExperimentConfig::default();
    cfg.kmeans.participants = 10;
    let err = aqml::dispatch(Subcommand::Kmeans, &cfg).unwrap_err();
    assert!(format!("{err:#}").contains("not below N = 10"));
}
