use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_nsshift"));
    c.env_remove(nsshift_cli::OUT_ENV);
    c
}

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn stderr_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stderr).unwrap_or_else(|e| {
        panic!("stderr is not JSON ({e}): {}", String::from_utf8_lossy(&out.stderr))
    })
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn stationary_kakutani_series_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run"])
        .arg(config("smoke.toml"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_csv(&dir.path().join("coin.series.csv"));
    assert_eq!(rows[0], ["window", "partial_sum", "increment"]);
    assert_eq!(rows.len(), 8);
    for r in &rows[1..] {
        assert_eq!(r[1].parse::<f64>().unwrap(), 0.0);
    }
    let verdicts = std::fs::read_to_string(dir.path().join("verdicts.csv")).unwrap();
    assert!(verdicts.contains("coin,kakutani,converging"));
}

#[test]
fn lambda_outside_range_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
name = "bad"

[[experiment]]
id = "too-wide"
kind = "example33-verification"
lambda = 0.6
xi = 33.0
a1 = 10
rho = 9.0
"#,
    );
    let out = bin().arg("run").arg(&cfg).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "invalid-parameter");
    assert_eq!(err["experiment"], "too-wide");
    assert!(err["message"].as_str().unwrap().contains("(0, 1/2)"), "{err}");
    assert!(!dir.path().join("o").exists());

    let out = bin().arg("describe").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn unparseable_config_exits_with_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "name = \"x\"\n[[experiment]]\nid = 1\nkind = \"kakutani\"\n");
    let out = bin().arg("describe").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "parse");

    let cfg = write_config(dir.path(), "name = \"x\"\nbogus = true\n");
    let out = bin().arg("describe").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = bin().arg("describe").arg(dir.path().join("missing.toml")).output().unwrap();
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn describe_lists_the_plan_without_writing() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .current_dir(dir.path())
        .arg("describe")
        .arg(config("smoke.toml"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].contains("3 experiment(s)"));
    let order: Vec<usize> = ["1. coin ", "2. coin-average ", "3. golden-mean "]
        .iter()
        .map(|p| text.find(p).unwrap_or_else(|| panic!("missing {p}")))
        .collect();
    assert!(order.windows(2).all(|w| w[0] < w[1]));
    assert!(text.contains("Følner set sizes per step [3, 5, 9, 17, 33, 65, 129, 257, 513]"));
    assert!(text.contains("100 consistency checks"));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from-env");
    let out = bin()
        .current_dir(dir.path())
        .env(nsshift_cli::OUT_ENV, &target)
        .arg("run")
        .arg(config("smoke.toml"))
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(target.join("report.json").exists());
    assert!(!dir.path().join(nsshift_cli::DEFAULT_OUT).exists());
}

#[test]
fn seed_override_changes_samples_only() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str, seed: Option<&str>| {
        let mut c = bin();
        c.arg("--threads").arg("2").arg("run").arg(config("smoke.toml"));
        c.arg("--out").arg(dir.path().join(sub));
        if let Some(s) = seed {
            c.args(["--seed-override", s]);
        }
        assert!(c.output().unwrap().status.success());
        dir.path().join(sub)
    };
    let base = run("base", None);
    let moved = run("moved", Some("99"));
    let same = |f: &str| std::fs::read(base.join(f)).unwrap() == std::fs::read(moved.join(f)).unwrap();
    assert!(same("coin.series.csv"));
    assert!(!same("coin-average.quotients.csv"));
    assert!(!same("golden-mean.cylinders.csv"));

    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(moved.join("report.json")).unwrap()).unwrap();
    let seeds = report["config"]["experiment"][1]["seeds"].clone();
    assert_eq!(seeds, serde_json::json!([99, 100, 101]));
}

#[test]
fn block_family_identities_pass() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = nsshift_cli::ExperimentConfig::load(&config("example33.toml")).unwrap();
    let report = nsshift_cli::run(&cfg, dir.path()).unwrap();
    let by_name = |name: &str| {
        report
            .all_checks()
            .find(|(id, c)| *id == "identities" && c.check == name)
            .unwrap()
            .1
            .verdict
            .clone()
    };
    for name in [
        "(i) amplitudes",
        "(ii) growth",
        "(iii) partial-sum identity",
        "(I) margins",
        "(II) unit-shift energy",
    ] {
        assert_eq!(by_name(name), "pass", "{name}");
    }
    let table = read_csv(&dir.path().join("identities.block-shifts.csv"));
    assert_eq!(
        table[0],
        ["l", "shift", "energy", "closed_form", "stated_form", "log_l_over_xi", "ratio"]
    );
    assert_eq!(table.len(), 5);
}
