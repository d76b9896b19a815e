use std::ffi::{CStr, CString};
use std::ptr;

use valuevac_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn take(s: *mut std::ffi::c_char) -> String {
    assert!(!s.is_null());
    let out = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_string();
    unsafe { vv_string_free(s) };
    out
}

fn last_error() -> String {
    take(vv_last_error_message())
}

#[test]
fn movie_night_waits_then_dock_override() {
    let mut sim = ptr::null_mut();
    assert_eq!(unsafe { vv_simulation_new(c("movie_night").as_ptr(), ptr::null(), &mut sim) }, VvStatus::Ok);
    let mut d = VvDecision::Clean;
    assert_eq!(unsafe { vv_simulation_run_until_decision(sim, 60.0, &mut d) }, VvStatus::Ok);
    assert_eq!(d, VvDecision::Wait);

    let mut id = 0u64;
    let st = unsafe { vv_simulation_override(sim, c("ana").as_ptr(), c("CONTINUE").as_ptr(), &mut id) };
    assert_eq!(st, VvStatus::Rejected);
    assert!(last_error().contains("CONTINUE"));
    let st = unsafe { vv_simulation_override(sim, c("ana").as_ptr(), c("DOCK").as_ptr(), &mut id) };
    assert_eq!(st, VvStatus::Ok);
    assert!(id > 0);
    assert_eq!(unsafe { vv_simulation_step(sim, 1) }, VvStatus::Ok);

    let mut json = ptr::null_mut();
    assert_eq!(unsafe { vv_simulation_state_json(sim, &mut json) }, VvStatus::Ok);
    let state: serde_json::Value = serde_json::from_str(&take(json)).unwrap();
    assert_eq!(state["mode"], "docking");

    let mut log = ptr::null_mut();
    assert_eq!(unsafe { vv_simulation_log_jsonl(sim, &mut log) }, VvStatus::Ok);
    let log = take(log);
    let kinds: Vec<String> = log
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["kind"].as_str().unwrap().to_string())
        .collect();
    let at = kinds.iter().position(|k| k == "override").expect("override logged");
    assert_eq!(kinds[at + 1], "mode_change", "{kinds:?}");
    unsafe { vv_simulation_free(sim) };
}

#[test]
fn bad_arguments_are_reported() {
    let mut sim = ptr::null_mut();
    assert_eq!(unsafe { vv_simulation_new(ptr::null(), ptr::null(), &mut sim) }, VvStatus::NullArgument);
    assert!(sim.is_null());
    assert_eq!(
        unsafe { vv_simulation_new(c("no_such_scenario").as_ptr(), ptr::null(), &mut sim) },
        VvStatus::Load
    );
    assert!(!last_error().is_empty());
    assert_eq!(unsafe { vv_simulation_step(ptr::null_mut(), 1) }, VvStatus::NullArgument);
    unsafe { vv_simulation_free(ptr::null_mut()) };
    unsafe { vv_string_free(ptr::null_mut()) };
}

#[test]
fn parse_decision_over_the_abi() {
    let mut d = VvDecision::Clean;
    let st = unsafe { vv_parse_decision(c("I will hold off.\nDECISION: WAIT").as_ptr(), c("observation").as_ptr(), &mut d) };
    assert_eq!((st, d), (VvStatus::Ok, VvDecision::Wait));
    let st = unsafe { vv_parse_decision(c("DECISION: CONTINUE").as_ptr(), c("observation").as_ptr(), &mut d) };
    assert_eq!(st, VvStatus::NoDecision);
    let st = unsafe { vv_parse_decision(c("x").as_ptr(), c("flying").as_ptr(), &mut d) };
    assert_eq!(st, VvStatus::InvalidArgument);
}

#[test]
fn trials_report_json() {
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { vv_run_trials_json(c("phone_user").as_ptr(), ptr::null(), 5, &mut out) }, VvStatus::Ok);
    let report: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
    assert_eq!(report["agreement_rate"], 1.0);
    assert_eq!(report["histogram"]["CLEAN"], 5);
    assert_eq!(unsafe { vv_run_trials_json(c("phone_user").as_ptr(), ptr::null(), 0, &mut out) }, VvStatus::InvalidArgument);
}

#[test]
fn header_is_valid_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/valuevac.h");
    let text = std::fs::read_to_string(header).unwrap();
    for f in ["vv_simulation_new", "vv_simulation_free", "vv_parse_decision", "vv_last_error_message", "vv_string_free"] {
        assert!(text.contains(f), "{f} missing from header");
    }
    let Ok(status) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-x", "c", "-std=c99", header])
        .status()
    else {
        eprintln!("no C compiler; syntax check skipped");
        return;
    };
    assert!(status.success());
}
