use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mzi-bench"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn wrap(x: f64) -> f64 {
    let t = std::f64::consts::TAU;
    let r = x.rem_euclid(t);
    if r > t / 2.0 {
        r - t
    } else {
        r
    }
}

const ESTIMATE: &[&str] = &[
    "estimate", "--strategy", "go", "--n", "40", "--phases", "2.6819", "--seed", "7", "--grid-size", "4096",
];

#[test]
fn estimate_writes_a_consistent_record() {
    let tmp = TempDir::new().unwrap();
    let mut args = ESTIMATE.to_vec();
    args.extend(["--out", "run", "--snapshots"]);
    let out = run_in(tmp.path(), &args);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let dir = tmp.path().join("run");
    let record: Value = serde_json::from_str(&fs::read_to_string(dir.join("run_record.json")).unwrap()).unwrap();
    let steps = record["steps"].as_array().unwrap();
    assert_eq!(steps.len(), 40);
    let last = &steps[39];
    let est = record["final_estimate"].as_f64().unwrap();
    assert_eq!(last["estimate"].as_f64().unwrap(), est);
    let sigma = last["sigma"].as_f64().unwrap();
    assert!(wrap(est - 2.6819).abs() <= 3.0 * sigma, "estimate {est}, sigma {sigma}");

    assert!(dir.join("run_config.toml").is_file());
    for k in [0, 1, 40] {
        let snap = fs::read_to_string(dir.join(format!("posterior/step_{k:04}.csv"))).unwrap();
        assert!(snap.starts_with("phi,weight\n"));
        assert_eq!(snap.lines().count(), 4097);
    }
    assert!(!dir.join("posterior/step_0041.csv").exists());
}

#[test]
fn estimate_is_idempotent_and_config_round_trips() {
    let tmp = TempDir::new().unwrap();
    let mut a = ESTIMATE.to_vec();
    a.extend(["--out", "a"]);
    let mut b = ESTIMATE.to_vec();
    b.extend(["--out", "b"]);
    assert_eq!(code(&run_in(tmp.path(), &a)), 0);
    assert_eq!(code(&run_in(tmp.path(), &b)), 0);
    let read = |d: &str, f: &str| fs::read(tmp.path().join(d).join(f)).unwrap();
    assert_eq!(read("a", "run_record.json"), read("b", "run_record.json"));
    assert_eq!(read("a", "run_config.toml"), read("b", "run_config.toml"));

    let out = run_in(tmp.path(), &["estimate", "--config", "a/run_config.toml", "--out", "c"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(read("a", "run_record.json"), read("c", "run_record.json"));
    assert_eq!(read("a", "run_config.toml"), read("c", "run_config.toml"));
}

#[test]
fn missing_seed_is_drawn_and_recorded() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(
        tmp.path(),
        &["estimate", "--strategy", "pgh", "--n", "5", "--phases", "1.0", "--grid-size", "256", "--out", "o"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let cfg = fs::read_to_string(tmp.path().join("o/run_config.toml")).unwrap();
    assert!(cfg.lines().any(|l| l.starts_with("seed = ")), "{cfg}");
    let out = run_in(tmp.path(), &["estimate", "--config", "o/run_config.toml", "--out", "p"]);
    assert_eq!(code(&out), 0);
    assert_eq!(
        fs::read(tmp.path().join("o/run_record.json")).unwrap(),
        fs::read(tmp.path().join("p/run_record.json")).unwrap()
    );
}

#[test]
fn config_errors_exit_with_2() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(tmp.path(), &["estimate", "--n", "10", "--phases", "1.0", "--seed", "1"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("strategy"), "{}", stderr(&out));

    let out = run_in(tmp.path(), &["estimate", "--strategy", "go", "--n", "0", "--phases", "1.0"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("n:"), "{}", stderr(&out));

    fs::write(tmp.path().join("bad.toml"), "strategy = \"go\"\nn = 5\nphases = 1.0\ngird_size = 64\n").unwrap();
    let out = run_in(tmp.path(), &["estimate", "--config", "bad.toml"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("gird_size"), "{}", stderr(&out));

    let out = run_in(tmp.path(), &["estimate", "--strategy", "go", "--n", "5", "--phases", "1,2"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("phases"));

    let out = run_in(tmp.path(), &["estimate", "--strategy", "go", "--n", "5", "--phases", "1", "--channel", "depolarizing:1.5"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("channel"));
}

#[test]
fn nothing_written_outside_the_output_directory() {
    let tmp = TempDir::new().unwrap();
    let mut args = ESTIMATE.to_vec();
    args.extend(["--out", "only-here"]);
    assert_eq!(code(&run_in(tmp.path(), &args)), 0);
    let entries: Vec<_> = fs::read_dir(tmp.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(entries, vec![std::ffi::OsString::from("only-here")]);
}

const TRAIN: &[&str] = &[
    "train-policy", "--n", "10", "--seed", "3", "--swarm-size", "8", "--iterations", "10", "--fitness-samples", "50",
];

#[test]
fn training_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let mut a = TRAIN.to_vec();
    a.extend(["--out", "a"]);
    let mut b = TRAIN.to_vec();
    b.extend(["--out", "b"]);
    let out = run_in(tmp.path(), &a);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("holevo_variance"));
    assert_eq!(code(&run_in(tmp.path(), &b)), 0);
    let pa = fs::read(tmp.path().join("a/policy.json")).unwrap();
    assert_eq!(pa, fs::read(tmp.path().join("b/policy.json")).unwrap());
    let policy: Value = serde_json::from_slice(&pa).unwrap();
    for key in ["n", "deltas", "channel", "config", "sharpness", "seed"] {
        assert!(policy.get(key).is_some(), "missing {key}");
    }
    assert_eq!(policy["deltas"].as_array().unwrap().len(), 10);
}

#[test]
fn training_flags() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(tmp.path(), &["train-policy", "--n", "10", "--swarm-size", "1", "--out", "x"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("swarm_size"), "{}", stderr(&out));

    let out = run_in(
        tmp.path(),
        &["train-policy", "--n", "60", "--swarm-size", "2", "--iterations", "1", "--fitness-samples", "5", "--seed", "1", "--out", "y"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stderr(&out).contains("warning"), "{}", stderr(&out));
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    rdr.records().map(|r| r.unwrap()).collect()
}

#[test]
fn benchmark_strategy_rows_and_plot_data() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(
        tmp.path(),
        &["train-policy", "--n", "20", "--seed", "3", "--swarm-size", "8", "--iterations", "10", "--fitness-samples", "50", "--out", "pol"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = run_in(
        tmp.path(),
        &[
            "benchmark", "--strategy", "go,pgh,policy", "--policy", "pol/policy.json", "--n", "10,20", "--m", "5",
            "--phases", "0.5,2.0", "--grid-size", "512", "--seed", "4", "--out", "bench", "--records",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = csv_rows(&tmp.path().join("bench/benchmark.csv"));
    // 2 phases x 3 strategies x 2 probe counts
    assert_eq!(rows.len(), 12);
    for phi in ["0.5", "2.0"] {
        let at_20: Vec<_> = rows.iter().filter(|r| &r[2] == phi && &r[3] == "20").collect();
        let names: Vec<&str> = at_20.iter().map(|r| &r[0]).collect();
        assert_eq!(names, vec!["go", "pgh", "policy"]);
    }
    let header = fs::read_to_string(tmp.path().join("bench/benchmark.csv")).unwrap();
    assert!(header.starts_with("strategy,channel,phi_true,n,m,circ_mean,sigma_est,err_mean,err_sigma,quad_loss,sql,crb\n"));
    assert_eq!(csv_rows(&tmp.path().join("bench/summary.csv")).len(), 6);
    let records: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("bench/records.json")).unwrap()).unwrap();
    assert_eq!(records.as_array().unwrap().len(), 2 * 3 * 5);

    let out = run_in(tmp.path(), &["plot-data", "--figure", "sigma-vs-n", "bench/summary.csv", "--out", "plots"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let pts = csv_rows(&tmp.path().join("plots/plot_sigma-vs-n.csv"));
    let series: std::collections::BTreeSet<String> = pts.iter().map(|r| r[1].to_string()).collect();
    for s in ["go/ideal", "pgh/ideal", "policy/ideal", "sql", "crb/ideal"] {
        assert!(series.contains(s), "{series:?}");
    }

    let out = run_in(tmp.path(), &["plot-data", "--figure", "sigma-vs-phase", "bench/benchmark.csv", "--out", "plots"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = run_in(tmp.path(), &["plot-data", "--figure", "trajectory-estimate", "bench/records.json", "--out", "plots"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn benchmark_noise_groups() {
    let tmp = TempDir::new().unwrap();
    for (channels, dir) in [
        ("ideal,depolarizing:0.1,depolarizing:0.25,depolarizing:0.5", "dep"),
        ("ideal,phase:0.2,phase:0.4,phase:0.5", "pha"),
    ] {
        let out = run_in(
            tmp.path(),
            &[
                "benchmark", "--strategy", "go", "--n", "10", "--m", "4", "--phases", "1.0", "--grid-size", "256",
                "--seed", "2", "--channel", channels, "--out", dir,
            ],
        );
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let rows = csv_rows(&tmp.path().join(dir).join("summary.csv"));
        let groups: std::collections::BTreeSet<String> = rows.iter().map(|r| r[1].to_string()).collect();
        assert_eq!(groups.len(), 4, "{groups:?}");
    }
}

#[test]
fn plot_data_trajectory_sigma() {
    let tmp = TempDir::new().unwrap();
    let mut args = ESTIMATE.to_vec();
    args.extend(["--out", "run"]);
    assert_eq!(code(&run_in(tmp.path(), &args)), 0);
    let out = run_in(tmp.path(), &["plot-data", "--figure", "trajectory-sigma", "run/run_record.json", "--out", "run"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(tmp.path().join("run/plot_trajectory-sigma.csv")).unwrap();
    assert!(text.starts_with("figure,series,x,y,yerr\n"));
    let rows = csv_rows(&tmp.path().join("run/plot_trajectory-sigma.csv"));
    let sql: Vec<_> = rows.iter().filter(|r| &r[1] == "sql").collect();
    assert_eq!(sql.len(), 40);
    assert_eq!(sql[3][2].parse::<f64>().unwrap(), 4.0);
    assert_eq!(sql[3][3].parse::<f64>().unwrap(), 0.5);
    assert_eq!(rows.iter().filter(|r| &r[1] == "go").count(), 40);
}

#[test]
fn plot_data_errors() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(tmp.path(), &["plot-data", "--figure", "sigma-vs-n", "--out", "p"]);
    assert_eq!(code(&out), 2);
    fs::write(tmp.path().join("broken.json"), "{\"steps\": 3").unwrap();
    let out = run_in(tmp.path(), &["plot-data", "--figure", "trajectory-sigma", "broken.json", "--out", "p"]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    let out = run_in(tmp.path(), &["plot-data", "--figure", "no-such-figure", "broken.json", "--out", "p"]);
    assert_eq!(code(&out), 2);
}
