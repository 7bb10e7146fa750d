//! One `ACCEPT <n> PASS|FAIL <detail>` line per acceptance criterion.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use nlfk::bsde::SE_MULTIPLIER;
use nlfk::fd::solve_fd;
use nlfk::harness::*;
use nlfk::stochastic::ControlSchedule;
use nlfk::value::value_fixed_control;

const SEED: u64 = 0;

fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn load(name: &str) -> Scenario {
    Scenario::load(&scenarios_dir().join(format!("{name}.toml"))).expect("shipped scenario parses")
}

struct Ran {
    report: ScenarioReport,
    secs: f64,
}

fn prop<'a>(r: &'a ScenarioReport, name: &str) -> Option<&'a PropLine> {
    r.props.iter().find(|p| p.name == name)
}

fn props_ok(r: &ScenarioReport, names: &[&str]) -> (bool, String) {
    let mut ok = true;
    let mut detail = Vec::new();
    for n in names {
        match prop(r, n) {
            Some(p) => {
                ok &= p.passed;
                detail.push(format!("{}:{}", n, if p.passed { "ok" } else { "FAIL" }));
            }
            None => {
                ok = false;
                detail.push(format!("{n}:missing"));
            }
        }
    }
    (ok, format!("{}[{}]", r.name, detail.join(",")))
}

fn from_lines(lines: &[PropLine]) -> (bool, String) {
    let ok = lines.iter().all(|l| l.passed);
    let detail = lines.iter().map(|l| format!("{} ({})", l.name, l.detail)).collect::<Vec<_>>().join("; ");
    (ok, detail)
}

fn criterion_1(runs: &BTreeMap<&str, Ran>) -> (bool, String) {
    let r = &runs["linear_heat"];
    let p = &r.report.results[0];
    let mc = (p.mc_value - 1.0).abs() <= SE_MULTIPLIER * p.mc_se;
    let fd = (p.fd_value - 1.0).abs() <= FD_TOL;
    let fast = r.secs < 30.0;
    (
        mc && fd && fast,
        format!(
            "mc={:.5} se={:.5} fd={:.6} exact=1 runtime={:.1}s",
            p.mc_value, p.mc_se, p.fd_value, r.secs
        ),
    )
}

fn criterion_2() -> (bool, String) {
    let s = load("discounted_heat");
    let prob = s.problem().expect("problem");
    let exact = (-1.0f64).exp();
    let grid = prob.grid_from(0.0).expect("grid");
    let est = value_fixed_control(&prob, &ControlSchedule::constant(grid, 0), 0.0, &[0.0], 100_000, SEED)
        .expect("solve");
    let (g, n) = fd_setup(&s, &prob).expect("fd grid");
    let fd = solve_fd(&prob, &g, n).expect("fd").probe(0.0, &[0.0]);
    let rel = (est.value - exact).abs() / exact;
    (
        rel <= 0.02 && (fd - exact).abs() <= FD_TOL,
        format!("M=100000 mc={:.5} rel_err={:.4} fd={fd:.6} exact={exact:.6}", est.value, rel),
    )
}

fn criterion_3(runs: &BTreeMap<&str, Ran>) -> (bool, String) {
    let names = ["closed_form", "argmax", "search_agreement[0]"];
    let (a, da) = props_ok(&runs["gheat_convex"].report, &names);
    let (b, db) = props_ok(&runs["gheat_concave"].report, &names);
    let fd = |r: &ScenarioReport| {
        r.props
            .iter()
            .any(|p| p.module == "fd_oracle" && p.name == "closed_form" && p.passed)
    };
    let fda = fd(&runs["gheat_convex"].report);
    let fdb = fd(&runs["gheat_concave"].report);
    (a && b && fda && fdb, format!("{da} fd:{fda} {db} fd:{fdb}"))
}

fn criterion_4(runs: &BTreeMap<&str, Ran>) -> (bool, String) {
    let mut ok = true;
    let mut detail = Vec::new();
    for name in ["linear_heat", "discounted_heat", "gheat_convex", "gheat_concave"] {
        match prop(&runs[name].report, "dpp") {
            Some(p) => {
                ok &= p.passed;
                detail.push(format!("{name}: {}", p.detail));
            }
            None => {
                ok = false;
                detail.push(format!("{name}: missing"));
            }
        }
    }
    (ok, detail.join("; "))
}

fn criterion_5(runs: &BTreeMap<&str, Ran>) -> (bool, String) {
    let mut ok = true;
    let mut checked = 0;
    let mut failed = Vec::new();
    for (name, r) in runs {
        for p in r.report.props.iter().filter(|p| p.name.starts_with("oracle_")) {
            checked += 1;
            if !p.passed {
                ok = false;
                failed.push(format!("{name}.{}", p.name));
            }
        }
    }
    (ok && checked > 0, format!("scenarios={} checks={checked} failed={:?}", runs.len(), failed))
}

fn criterion_10(runs: &BTreeMap<&str, Ran>) -> (bool, String) {
    let mut ok = true;
    let mut detail = Vec::new();
    for name in ["gheat_convex", "gheat_concave", "gheat_abs"] {
        match prop(&runs[name].report, "regularity") {
            Some(p) => {
                ok &= p.passed;
                detail.push(format!("{name}: {}", p.detail));
            }
            None => {
                ok = false;
                detail.push(format!("{name}: missing"));
            }
        }
    }
    (ok, detail.join("; "))
}

fn criterion_11() -> (bool, String) {
    let a = suite_text(&run_property_suite(SEED, None));
    let b = suite_text(&run_property_suite(SEED, None));
    let dir = tempfile::tempdir().expect("tempdir");
    let cfg = scenarios_dir().join("gheat_concave.toml");
    let files = ["results.csv", "controls.csv", "summary.json", "report.txt"];
    let mut artifacts_equal = true;
    let (c1, _) = run_scenario(&cfg, &dir.path().join("a"), None);
    let (c2, _) = run_scenario(&cfg, &dir.path().join("b"), None);
    for f in files {
        let x = std::fs::read(dir.path().join("a").join(f)).unwrap_or_default();
        let y = std::fs::read(dir.path().join("b").join(f)).unwrap_or_default();
        artifacts_equal &= !x.is_empty() && x == y;
    }
    (
        a == b && artifacts_equal && c1 == c2,
        format!(
            "suite_bytes={} identical={} scenario_artifacts_identical={artifacts_equal}",
            a.len(),
            a == b
        ),
    )
}

fn main() -> ExitCode {
    let mut runs = BTreeMap::new();
    for name in ["linear_heat", "discounted_heat", "gheat_convex", "gheat_concave", "gheat_abs", "gheat_2d"] {
        let s = load(name);
        let start = Instant::now();
        let report = evaluate_scenario(&s, s.seed).expect("scenario runs");
        runs.insert(name, Ran { report, secs: start.elapsed().as_secs_f64() });
    }

    let outcomes: Vec<(u32, (bool, String))> = vec![
        (1, criterion_1(&runs)),
        (2, criterion_2()),
        (3, criterion_3(&runs)),
        (4, criterion_4(&runs)),
        (5, criterion_5(&runs)),
        (6, from_lines(&[prop_bsde_comparison(SEED, 100)])),
        (
            7,
            from_lines(&[
                prop_sublinearity(SEED, 1_000),
                prop_ellipticity(SEED, 1_000),
                prop_psd_sqrt_lipschitz(SEED, 1_000),
                prop_hausdorff(SEED, 50),
            ]),
        ),
        (8, from_lines(&[prop_fd_monotonicity(SEED, 20), prop_fd_consistency(SEED)])),
        (9, from_lines(&[prop_growth_transform(SEED)])),
        (10, criterion_10(&runs)),
        (11, criterion_11()),
    ];

    let mut all = true;
    for (n, (ok, detail)) in &outcomes {
        all &= ok;
        println!("ACCEPT {n} {} {detail}", if *ok { "PASS" } else { "FAIL" });
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
