use std::path::Path;
use std::process::{Command, Output};

fn nlfk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlfk")).args(args).output().expect("binary runs")
}

const SMALL: &str = r#"
name = "small"
T = 0.5
seed = 9
generators = [{ a = [[0.25]] }, { a = [[1.0]] }]
driver = { kind = "discount_gradient", rate = 0.5, c = 0.1, cap = 1.0 }
terminal = { kind = "abs" }
probes = [{ x = [0.2] }]

[numerics]
paths = 2000
n_steps = 10
blocks = 2
"#;

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn missing_horizon_exits_2_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", &SMALL.replace("T = 0.5\n", ""));
    let out = nlfk(&["run", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`T`"));
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", &SMALL.replace("seed = 9", "seed = 9\nsed = 1"));
    let out = nlfk(&["run", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cfl_violation_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{SMALL}\n[numerics.fd]\nn_steps = 2\n");
    let cfg = write(dir.path(), "cfl.toml", &text);
    let out = nlfk(&["run", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("CFL"));
}

#[test]
fn artifacts_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let mut runs = Vec::new();
    for threads in ["1", "3"] {
        let out_dir = dir.path().join(format!("t{threads}"));
        let out = nlfk(&["run", "--config", &cfg, "--out", out_dir.to_str().unwrap(), "--threads", threads]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
        runs.push(out_dir);
    }
    for f in ["results.csv", "controls.csv", "summary.json", "report.txt"] {
        let a = std::fs::read(runs[0].join(f)).unwrap();
        let b = std::fs::read(runs[1].join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
    let results = std::fs::read_to_string(runs[0].join("results.csv")).unwrap();
    assert!(results.starts_with("probe,mc_value,mc_se,fd_value,abs_diff,pass\n"));
    let report = std::fs::read_to_string(runs[0].join("report.txt")).unwrap();
    assert!(report.lines().all(|l| l.starts_with("PROP ") && (l.contains(" PASS ") || l.contains(" FAIL "))));
}

#[test]
fn seed_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    nlfk(&["run", "--config", &cfg, "--out", a.to_str().unwrap(), "--seed", "9"]);
    nlfk(&["run", "--config", &cfg, "--out", b.to_str().unwrap(), "--seed", "10"]);
    let ra = std::fs::read(a.join("results.csv")).unwrap();
    let rb = std::fs::read(b.join("results.csv")).unwrap();
    assert_ne!(ra, rb);
}

#[test]
fn property_suite_passes_and_detects_the_tie_break_fault() {
    let clean = nlfk(&["prop", "--seed", "0"]);
    assert_eq!(clean.status.code(), Some(0), "{}", String::from_utf8_lossy(&clean.stdout));
    let again = nlfk(&["prop", "--seed", "0"]);
    assert_eq!(clean.stdout, again.stdout);

    let faulty = nlfk(&["prop", "--seed", "0", "--inject-fault", "tie-break"]);
    assert_eq!(faulty.status.code(), Some(1));
    let text = String::from_utf8_lossy(&faulty.stdout);
    let failing: Vec<&str> = text.lines().filter(|l| l.contains(" FAIL ")).collect();
    assert_eq!(failing.len(), 1);
    assert!(failing[0].starts_with("PROP sublinear_core.argmax_determinism FAIL"));
}
