use std::ffi::{CStr, CString};
use std::ptr;

use nlfk_ffi::*;

const HEAT: &str = r#"
name = "heat"
T = 1.0
generators = [{ a = [[1.0]] }]
driver = { kind = "zero" }
terminal = { kind = "square" }
probes = [{ x = [0.0] }]
"#;

fn last_error() -> String {
    let p = nlfk_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn problem(text: &str) -> *mut NlfkProblem {
    let c = CString::new(text).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { nlfk_problem_from_config(c.as_ptr(), &mut h) }, NlfkStatus::Ok);
    h
}

#[test]
fn value_and_fd_probe_on_heat() {
    let h = problem(HEAT);
    let mut dim = 0;
    assert_eq!(unsafe { nlfk_problem_dim(h, &mut dim) }, NlfkStatus::Ok);
    assert_eq!(dim, 1);
    let x = [0.0];
    let (mut v, mut se) = (0.0, 0.0);
    let s = unsafe { nlfk_value(h, NlfkMethod::Markovian, 0.0, x.as_ptr(), 1, 10_000, 7, &mut v, &mut se) };
    assert_eq!(s, NlfkStatus::Ok);
    assert!((v - 1.0).abs() <= 3.0 * se, "{v} {se}");
    let mut fd = 0.0;
    assert_eq!(unsafe { nlfk_fd_probe(h, 0.0, x.as_ptr(), 1, &mut fd) }, NlfkStatus::Ok);
    assert!((fd - 1.0).abs() < 0.01);
    assert!(nlfk_last_error_message().is_null());
    unsafe { nlfk_problem_free(h) };
}

#[test]
fn missing_horizon_is_a_config_error() {
    let c = CString::new(HEAT.replace("T = 1.0\n", "")).unwrap();
    let mut h = ptr::null_mut();
    let s = unsafe { nlfk_problem_from_config(c.as_ptr(), &mut h) };
    assert_eq!(s, NlfkStatus::InvalidConfig);
    assert!(h.is_null());
    assert!(last_error().contains("`T`"));
}

#[test]
fn null_and_dimension_errors() {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { nlfk_problem_from_config(ptr::null(), &mut h) }, NlfkStatus::NullPointer);
    let h = problem(HEAT);
    let x = [0.0, 0.0];
    let mut v = 0.0;
    assert_eq!(unsafe { nlfk_fd_probe(h, 0.0, x.as_ptr(), 2, &mut v) }, NlfkStatus::InvalidArgument);
    assert!(last_error().contains("dimension"));
    assert_eq!(unsafe { nlfk_fd_probe(ptr::null(), 0.0, x.as_ptr(), 1, &mut v) }, NlfkStatus::NullPointer);
    unsafe { nlfk_problem_free(h) };
    unsafe { nlfk_problem_free(ptr::null_mut()) };
}

#[test]
fn psd_sqrt_round_trip_and_guard() {
    let a = [4.0, 2.0, 2.0, 3.0];
    let mut r = [0.0; 4];
    assert_eq!(unsafe { nlfk_psd_sqrt(a.as_ptr(), 2, r.as_mut_ptr()) }, NlfkStatus::Ok);
    let sq = [
        r[0] * r[0] + r[1] * r[2],
        r[0] * r[1] + r[1] * r[3],
        r[2] * r[0] + r[3] * r[2],
        r[2] * r[1] + r[3] * r[3],
    ];
    for (x, y) in sq.iter().zip(&a) {
        assert!((x - y).abs() < 1e-12);
    }
    let bad = [1.0, 0.0, 0.0, -1.0];
    assert_eq!(unsafe { nlfk_psd_sqrt(bad.as_ptr(), 2, r.as_mut_ptr()) }, NlfkStatus::Numerical);
}

#[test]
fn run_scenario_reports_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "name = \"x\"\n").unwrap();
    let c = CString::new(cfg.to_str().unwrap()).unwrap();
    let out = CString::new(dir.path().join("out").to_str().unwrap()).unwrap();
    let mut code = -1;
    let s = unsafe { nlfk_run_scenario(c.as_ptr(), out.as_ptr(), -1, &mut code) };
    assert_eq!(s, NlfkStatus::InvalidConfig);
    assert_eq!(code, 2);
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/nlfk.h")).unwrap();
    for f in [
        "nlfk_last_error_message",
        "nlfk_problem_from_config",
        "nlfk_problem_free",
        "nlfk_problem_dim",
        "nlfk_value",
        "nlfk_fd_probe",
        "nlfk_psd_sqrt",
        "nlfk_run_scenario",
        "typedef struct NlfkProblem NlfkProblem",
        "NLFK_STATUS_NUMERICAL = 3",
    ] {
        assert!(header.contains(f), "missing {f}");
    }
}
