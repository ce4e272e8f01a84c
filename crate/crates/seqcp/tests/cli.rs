//! End-to-end tests of the `seqcp` binary: exit codes, file outputs and
//! determinism of the subcommands.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn seqcp(args: &[&str], cache_dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqcp"))
        .args(args)
        .env("SEQCP_CACHE_DIR", cache_dir)
        .output()
        .expect("binary runs")
}

fn fixture() -> String {
    format!(
        "{}/data/synthetic_temperature.csv",
        env!("CARGO_MANIFEST_DIR")
    )
}

#[test]
fn critvals_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a.txt");
    let out_b = dir.path().join("b.txt");
    for out in [&out_a, &out_b] {
        let res = seqcp(
            &[
                "critvals",
                "--scheme",
                "page",
                "--gamma",
                "0.25",
                "--grid",
                "300",
                "--reps",
                "400",
                "--seed",
                "9",
                "--out",
                out.to_str().unwrap(),
            ],
            dir.path(),
        );
        assert!(res.status.success(), "{res:?}");
    }
    let a = fs::read(&out_a).unwrap();
    let b = fs::read(&out_b).unwrap();
    assert_eq!(a, b);
    assert!(!a.is_empty());
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let res = seqcp(&["critvals", "--no-such-flag"], dir.path());
    assert_eq!(res.status.code(), Some(1));

    let res = seqcp(&["frobnicate"], dir.path());
    assert_eq!(res.status.code(), Some(1));

    // gamma outside [0, 0.5) is a usage problem, not a data problem
    let out = dir.path().join("x.txt");
    let res = seqcp(
        &[
            "critvals",
            "--scheme",
            "cusum",
            "--gamma",
            "0.7",
            "--grid",
            "300",
            "--reps",
            "300",
            "--out",
            out.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_eq!(res.status.code(), Some(1));

    let res = seqcp(&["--help"], dir.path());
    assert_eq!(res.status.code(), Some(0));
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let res = seqcp(
        &[
            "analyze",
            "--csv",
            "/does/not/exist.csv",
            "--column",
            "temperature",
            "--historic",
            "120",
            "--out-dir",
            dir.path().to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_eq!(res.status.code(), Some(2));

    let config = dir.path().join("bad.cfg");
    fs::write(&config, "this is not a config\n").unwrap();
    let res = seqcp(
        &[
            "simulate",
            "--config",
            config.to_str().unwrap(),
            "--out-dir",
            dir.path().to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn analyze_emits_traces_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let res = seqcp(
        &[
            "analyze",
            "--csv",
            &fixture(),
            "--column",
            "temperature",
            "--historic",
            "120",
            "--grid",
            "300",
            "--reps",
            "400",
            "--out-dir",
            out_dir.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(res.status.success(), "{res:?}");
    for kernel in ["dom", "wilcoxon"] {
        for scheme in ["cusum", "mmosum", "page"] {
            let path = out_dir.join(format!("trace_{kernel}_{scheme}.tsv"));
            assert!(path.exists(), "missing {path:?}");
            let text = fs::read_to_string(&path).unwrap();
            assert!(seqcp::pipeline::parse_trace(&text).is_ok());
        }
    }
    let summary = fs::read_to_string(out_dir.join("stopping_times.tsv")).unwrap();
    assert!(summary.starts_with("# seqcp stopping times v1"));
    // the fixture contains a large injected shift: every pair must stop
    for line in summary.lines().skip(2) {
        let stopped = line.split('\t').nth(2).unwrap();
        assert_ne!(stopped, "none", "line: {line}");
    }
}

#[test]
fn simulate_single_cell_matches_library_run() {
    let dir = tempfile::tempdir().unwrap();
    let config_text = "\
name = probe
m = 50
dist = normal
kernel = dom
scheme = cusum
replications = 400
seed = 3
horizon = 400
cv_grid = 300
cv_reps = 400
";
    let config = dir.path().join("grid.cfg");
    fs::write(&config, config_text).unwrap();
    let out_dir = dir.path().join("out");
    let res = seqcp(
        &[
            "simulate",
            "--config",
            config.to_str().unwrap(),
            "--out-dir",
            out_dir.to_str().unwrap(),
            "--cache-dir",
            dir.path().to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(res.status.success(), "{res:?}");

    let report = fs::read_to_string(out_dir.join("report.tsv")).unwrap();
    let mut lines = report.lines();
    assert_eq!(lines.next(), Some(sim_schema()));
    let header = lines.next().unwrap();
    let row = lines.next().unwrap();
    let cols: Vec<&str> = row.split('\t').collect();
    assert_eq!(cols.len(), header.split('\t').count());

    let cells = seqcp::sim::parse_scenario_grid(config_text).unwrap();
    let expected = seqcp::sim::run_cell(&cells[0], dir.path()).unwrap();
    let rejections: usize = cols[17].parse().unwrap();
    assert_eq!(rejections, expected.rejections);
    let c_alpha: f64 = cols[16].parse().unwrap();
    assert_eq!(c_alpha, expected.used_c_alpha);
    assert!(out_dir.join("delays_probe.tsv").exists());
}

fn sim_schema() -> &'static str {
    seqcp::sim::REPORT_SCHEMA
}

#[test]
fn cache_ls_and_rm() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.txt");
    // a critvals run does not populate the cache; analyze/simulate do
    let res = seqcp(
        &[
            "critvals",
            "--scheme",
            "cusum",
            "--grid",
            "300",
            "--reps",
            "300",
            "--out",
            out.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(res.status.success());

    let cache = dir.path().join("cache");
    let config = dir.path().join("grid.cfg");
    fs::write(
        &config,
        "m = 50\nkernel = dom\nscheme = cusum\nreplications = 200\nhorizon = 300\ncv_grid = 300\ncv_reps = 300\n",
    )
    .unwrap();
    let res = seqcp(
        &[
            "simulate",
            "--config",
            config.to_str().unwrap(),
            "--out-dir",
            dir.path().join("out").to_str().unwrap(),
            "--cache-dir",
            cache.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(res.status.success(), "{res:?}");

    let res = seqcp(
        &["cache", "ls", "--cache-dir", cache.to_str().unwrap()],
        dir.path(),
    );
    assert!(res.status.success());
    let listing = String::from_utf8_lossy(&res.stdout).into_owned();
    let name = listing
        .lines()
        .find(|l| l.ends_with(".txt"))
        .expect("one cached table")
        .to_string();

    let res = seqcp(
        &["cache", "rm", &name, "--cache-dir", cache.to_str().unwrap()],
        dir.path(),
    );
    assert!(res.status.success(), "{res:?}");
    let res = seqcp(
        &["cache", "rm", &name, "--cache-dir", cache.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(res.status.code(), Some(1), "removing twice should fail");
}
