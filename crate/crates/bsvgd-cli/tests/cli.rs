use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bsvgd::io;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bsvgd"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("spawn bsvgd");
    assert!(
        out.status.success(),
        "expected success for {args:?}, stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write_file(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, contents).unwrap();
    path
}

const TINY_BSVGD: &str = r#"
algorithm = "bsvgd"
seed = 11

[target]
preset = "paper-gauss25"

[svgd]
max_iterations = 40
threshold = 0.01

[svgd.schedule]
kind = "sigmoid"
e_start = 1.0
e_end = 0.01

[branching]
proposal_std = 2.0
q_E = [
  { value = 0, probability = 0.5 },
  { value = 1, probability = 0.2 },
  { value = 2, probability = 0.3 },
]
q_S = [
  { value = 1, probability = 0.3333333333333333 },
  { value = 2, probability = 0.3333333333333333 },
  { value = 3, probability = 0.3333333333333333 },
]

[bsvgd]
max_population = 25
precision = "one_over_ell"

[bsvgd.initial]
count = 1
std = 1.0

[metrics]
enabled = true
replicates = 3
"#;

const TINY_SVGD: &str = r#"
algorithm = "svgd"
seed = 7

[target]
preset = "paper-gauss25"

[svgd]
max_iterations = 30
threshold = 0.001

[svgd.schedule]
kind = "sigmoid"
e_start = 1.0
e_end = 0.01

[init]
count = 20
std = 1.0

[metrics]
enabled = true
replicates = 3
"#;

#[test]
fn run_writes_artifacts_and_reruns_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_file(dir.path(), "tiny.toml", TINY_BSVGD);
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        run_ok(&[
            "run",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--logical-time",
        ]);
    }

    let rows = io::read_trace_file(&out_a.join("trace.csv")).unwrap();
    assert!(rows.len() >= 2, "trace should record at least two phases");
    for row in &rows {
        let cloud = io::read_snapshot_file(&out_a.join(&row.snapshot_file)).unwrap();
        assert_eq!(cloud.len(), row.sample_size);
    }
    io::read_metrics_file(&out_a.join("metrics.csv")).unwrap();
    let record: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_a.join("run.json")).unwrap()).unwrap();
    assert_eq!(record["algorithm"], "bsvgd");
    assert_eq!(record["seed"], 11);
    assert_eq!(record["logical_time"], true);
    assert!(record["config_sha256"].as_str().unwrap().len() == 64);

    for name in ["trace.csv", "metrics.csv", "run.json"] {
        assert_eq!(
            fs::read(out_a.join(name)).unwrap(),
            fs::read(out_b.join(name)).unwrap(),
            "{name} should be byte-identical across same-seed runs"
        );
    }
}

#[test]
fn svgd_run_final_snapshot_keeps_the_initial_particle_count() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_file(
        dir.path(),
        "s.toml",
        &TINY_SVGD.replace("count = 20", "count = 500")
            .replace("max_iterations = 30", "max_iterations = 5"),
    );
    let out = dir.path().join("run");
    run_ok(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--logical-time",
    ]);
    let rows = io::read_trace_file(&out.join("trace.csv")).unwrap();
    let last = rows.last().unwrap();
    let cloud = io::read_snapshot_file(&out.join(&last.snapshot_file)).unwrap();
    assert_eq!(cloud.len(), 500);
    assert_eq!(last.sample_size, 500);
}

#[test]
fn snapshot_every_controls_trace_granularity() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_file(dir.path(), "s.toml", TINY_SVGD);
    let out = dir.path().join("run");
    run_ok(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--snapshot-every",
        "10",
        "--logical-time",
    ]);
    let rows = io::read_trace_file(&out.join("trace.csv")).unwrap();
    assert_eq!(rows.len(), 3, "30 iterations at stride 10");
    let times: Vec<f64> = rows.iter().map(|r| r.wall_time_s).collect();
    assert!(times.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn seed_override_changes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_file(dir.path(), "tiny.toml", TINY_BSVGD);
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    run_ok(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_a.to_str().unwrap(),
        "--logical-time",
    ]);
    run_ok(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--seed",
        "12",
        "--out",
        out_b.to_str().unwrap(),
        "--logical-time",
    ]);
    let record: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_b.join("run.json")).unwrap()).unwrap();
    assert_eq!(record["seed"], 12);
    assert_ne!(
        fs::read(out_a.join("metrics.csv")).unwrap(),
        fs::read(out_b.join("metrics.csv")).unwrap()
    );
}

#[test]
fn replicas_run_in_isolated_subdirectories() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_file(dir.path(), "tiny.toml", TINY_BSVGD);
    let out = dir.path().join("reps");
    run_ok(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--replicas",
        "2",
        "--logical-time",
    ]);
    let seeds: Vec<u64> = (0..2)
        .map(|i| {
            let path = out.join(format!("replica_{i:02}")).join("run.json");
            let record: serde_json::Value =
                serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
            record["seed"].as_u64().unwrap()
        })
        .collect();
    assert_eq!(seeds, vec![11, 12]);
}

#[test]
fn wasserstein_prints_twelve_significant_digits() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_file(dir.path(), "a.csv", "x0,x1,color\n0.0,0.0,E\n");
    let b = write_file(dir.path(), "b.csv", "x0,x1,color\n3.0,4.0,E\n");
    let c = write_file(dir.path(), "c.csv", "x0,color\n0.0,E\n1.0,E\n2.0,E\n");
    let d = write_file(dir.path(), "d.csv", "x0,color\n0.5,E\n1.5,E\n2.5,E\n");

    let same = run_ok(&["wasserstein", a.to_str().unwrap(), a.to_str().unwrap()]);
    assert_eq!(String::from_utf8_lossy(&same.stdout).trim(), "0.00000000000e0");

    let pair = run_ok(&["wasserstein", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(String::from_utf8_lossy(&pair.stdout).trim(), "5.00000000000e0");

    let shifted = run_ok(&["wasserstein", c.to_str().unwrap(), d.to_str().unwrap()]);
    assert_eq!(
        String::from_utf8_lossy(&shifted.stdout).trim(),
        "5.00000000000e-1"
    );
}

#[test]
fn wasserstein_size_mismatch_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_file(dir.path(), "a.csv", "x0,color\n0.0,E\n");
    let c = write_file(dir.path(), "c.csv", "x0,color\n0.0,E\n1.0,E\n");
    let out = bin()
        .args(["wasserstein", a.to_str().unwrap(), c.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("equal sample sizes"));
}

#[test]
fn invalid_config_exits_2_with_line_reference() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_file(dir.path(), "bad.toml", "algorithm = \"bsvgd\"\nseed = [\n");
    let out = bin()
        .args(["run", "--config", bad.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 2);
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("line 2"),
        "parse errors should cite the offending line"
    );
}

#[test]
fn semantic_config_errors_cite_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_file(
        dir.path(),
        "bad.toml",
        &TINY_BSVGD.replace("max_population = 25", "max_population = 0"),
    );
    let out = bin()
        .args(["run", "--config", bad.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("max_population"));
}

#[test]
fn divergence_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_file(
        dir.path(),
        "div.toml",
        r#"
algorithm = "svgd"
seed = 3

[target]
preset = "paper-gauss25"

[svgd]
max_iterations = 50
threshold = 0.001

[svgd.schedule]
kind = "constant"
step = 1e160

[init]
count = 4
std = 1.0
"#,
    );
    let out = bin()
        .args([
            "run",
            "--config",
            config.to_str().unwrap(),
            "--out",
            dir.path().join("d").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("divergent"));
}

#[test]
fn report_merges_runs_and_tags_rows_by_algorithm() {
    let dir = tempfile::tempdir().unwrap();
    let bsvgd_cfg = write_file(dir.path(), "b.toml", TINY_BSVGD);
    let svgd_cfg = write_file(dir.path(), "s.toml", TINY_SVGD);
    let run_b = dir.path().join("branched");
    let run_s = dir.path().join("plain");
    for (cfg, out) in [(&bsvgd_cfg, &run_b), (&svgd_cfg, &run_s)] {
        run_ok(&[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--logical-time",
        ]);
    }

    let single = run_ok(&["report", run_b.to_str().unwrap()]);
    let text = String::from_utf8(single.stdout).unwrap();
    let metrics = fs::read_to_string(run_b.join("metrics.csv")).unwrap();
    for line in metrics.lines().skip(1) {
        assert!(
            text.lines().any(|row| row.ends_with(line)),
            "report should echo metrics row {line}"
        );
    }

    let merged = run_ok(&[
        "report",
        run_b.to_str().unwrap(),
        run_s.to_str().unwrap(),
    ]);
    let text = String::from_utf8(merged.stdout).unwrap();
    assert!(text.lines().next().unwrap().starts_with(
        "run,algorithm,converged,convergence_time_s,phase_index,wall_time_s,sample_size,w_mean"
    ));
    assert!(text.lines().any(|l| l.starts_with("branched,bsvgd,")));
    assert!(text.lines().any(|l| l.starts_with("plain,svgd,")));

    let report_path = dir.path().join("merged.csv");
    run_ok(&[
        "report",
        run_b.to_str().unwrap(),
        run_s.to_str().unwrap(),
        "--out",
        report_path.to_str().unwrap(),
    ]);
    assert_eq!(fs::read_to_string(&report_path).unwrap(), text);
}

#[test]
fn report_covers_the_svgd_convergence_time() {
    let dir = tempfile::tempdir().unwrap();
    // Enough levels that the branched trajectory outlasts the plain run.
    let bsvgd_cfg = write_file(
        dir.path(),
        "b.toml",
        &TINY_BSVGD.replace("max_population = 25", "max_population = 60"),
    );
    // Loose threshold so the plain run actually converges inside the budget.
    let svgd_cfg = write_file(
        dir.path(),
        "s.toml",
        &TINY_SVGD
            .replace("threshold = 0.001", "threshold = 0.05")
            .replace("max_iterations = 30", "max_iterations = 400"),
    );
    let run_b = dir.path().join("branched");
    let run_s = dir.path().join("plain");
    for (cfg, out) in [(&bsvgd_cfg, &run_b), (&svgd_cfg, &run_s)] {
        run_ok(&[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--logical-time",
        ]);
    }
    let merged = run_ok(&["report", run_b.to_str().unwrap(), run_s.to_str().unwrap()]);
    let text = String::from_utf8(merged.stdout).unwrap();
    let svgd_row = text
        .lines()
        .find(|l| l.starts_with("plain,svgd,true,"))
        .expect("converged svgd row");
    let convergence: f64 = svgd_row.split(',').nth(3).unwrap().parse().unwrap();
    let spans = text
        .lines()
        .filter(|l| l.starts_with("branched,bsvgd,"))
        .map(|l| {
            let mut fields = l.split(',');
            let time: f64 = fields.nth(5).unwrap().parse().unwrap();
            let w: f64 = fields.nth(1).unwrap().parse().unwrap();
            (time, w)
        })
        .collect::<Vec<_>>();
    assert!(spans.iter().all(|(_, w)| w.is_finite()));
    assert!(
        spans.last().unwrap().0 >= convergence,
        "branched trajectory should span the svgd convergence marker"
    );
}

#[test]
fn report_requires_metrics_csv() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("not-a-run");
    fs::create_dir(&empty).unwrap();
    let out = bin().args(["report", empty.to_str().unwrap()]).output().unwrap();
    assert_eq!(exit_code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("metrics.csv"));
}

#[test]
fn presets_print_parseable_configs() {
    let all = run_ok(&["presets"]);
    let text = String::from_utf8(all.stdout).unwrap();
    for name in [
        "paper-gauss25-svgd",
        "paper-gauss25-bsvgd",
        "paper-banana3-svgd",
        "paper-banana3-bsvgd",
    ] {
        assert!(text.contains(name));
        let one = run_ok(&["presets", name]);
        let body = String::from_utf8(one.stdout).unwrap();
        let value: toml::Value = toml::from_str(&body).expect("preset parses as TOML");
        let table = value.as_table().unwrap();
        assert!(table.contains_key("algorithm"));
        assert!(table.contains_key("seed"));
        assert!(table.contains_key("target"));
    }
    let unknown = bin().args(["presets", "nope"]).output().unwrap();
    assert_eq!(exit_code(&unknown), 2);
}

#[test]
fn unknown_config_name_lists_presets() {
    let out = bin().args(["run", "--config", "nope"]).output().unwrap();
    assert_eq!(exit_code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("preset"));
    assert!(err.contains("paper-banana3-bsvgd"));
}
