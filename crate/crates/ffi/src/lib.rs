//! C ABI over the simulator, the decision parser and consistency trials.
//!
//! Every function returns a [`VvStatus`]; on failure the message is
//! available from [`vv_last_error_message`] on the same thread. Strings
//! handed out by the library are freed with [`vv_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::{Arc, Mutex};

use valuevac_core::controller::{DecisionToken, Mode};
use valuevac_core::gateway::load_config;
use valuevac_core::harness::{
    run_trials, to_jsonl, LogDraft, LogRecord, MemorySink, OverrideCommand, RecordSink, RunOptions, Scenario, Simulation,
    SimulationConfig, SinkError,
};
use valuevac_core::pipeline::{parse_decision, Pipeline};
use valuevac_core::world::TICK_SECONDS;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VvStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    /// scenario, config or backend could not be loaded
    Load = 4,
    /// override refused in the current mode
    Rejected = 5,
    /// no decision found (parser) or made in time (simulation)
    NoDecision = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VvDecision {
    Clean = 0,
    Wait = 1,
    Dock = 2,
    Continue = 3,
    Interrupt = 4,
}

impl From<DecisionToken> for VvDecision {
    fn from(t: DecisionToken) -> Self {
        match t {
            DecisionToken::Clean => VvDecision::Clean,
            DecisionToken::Wait => VvDecision::Wait,
            DecisionToken::Dock => VvDecision::Dock,
            DecisionToken::Continue => VvDecision::Continue,
            DecisionToken::Interrupt => VvDecision::Interrupt,
        }
    }
}

/// Opaque simulation handle.
pub struct VvSimulation {
    sim: Simulation,
    log: Arc<Mutex<MemorySink>>,
    paced: bool,
}

struct SharedSink(Arc<Mutex<MemorySink>>);

impl RecordSink for SharedSink {
    fn append(&mut self, draft: LogDraft) -> Result<LogRecord, SinkError> {
        self.0.lock().expect("sink lock").append(draft)
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

type Outcome = Result<(), (VvStatus, String)>;

fn guard(f: impl FnOnce() -> Outcome) -> VvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => VvStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            VvStatus::Panic
        }
    }
}

fn fail<T>(status: VvStatus, msg: impl ToString) -> Result<T, (VvStatus, String)> {
    Err((status, msg.to_string()))
}

/// # Safety
/// `s` is NULL or a valid NUL-terminated string.
unsafe fn read_str<'a>(s: *const c_char, name: &str) -> Result<&'a str, (VvStatus, String)> {
    if s.is_null() {
        return fail(VvStatus::NullArgument, format!("{name} is NULL"));
    }
    CStr::from_ptr(s)
        .to_str()
        .or_else(|_| fail(VvStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

fn to_c(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map_or(ptr::null_mut(), CString::into_raw)
}

fn pipeline_from(config: Option<&str>) -> Result<(Pipeline, SimulationConfig), (VvStatus, String)> {
    match config {
        None => {
            let pipeline = Pipeline::mock();
            let config = SimulationConfig::for_pipeline(&pipeline);
            Ok((pipeline, config))
        }
        Some(path) => {
            let loaded = load_config(path.as_ref()).or_else(|e| fail(VvStatus::Load, e))?;
            let pipeline = loaded.config.pipeline().or_else(|e| fail(VvStatus::Load, e))?;
            let sim_config = SimulationConfig {
                cadence: loaded.config.cadence,
                speeds: loaded.config.speeds,
                ..SimulationConfig::for_pipeline(&pipeline)
            };
            Ok((pipeline, sim_config))
        }
    }
}

/// Creates a simulation of a bundled scenario name or scenario file.
/// `config_path` may be NULL for the offline mock backend.
///
/// # Safety
/// `scenario` and `config_path` are NULL or valid NUL-terminated strings;
/// `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vv_simulation_new(
    scenario: *const c_char,
    config_path: *const c_char,
    out: *mut *mut VvSimulation,
) -> VvStatus {
    guard(|| {
        if out.is_null() {
            return fail(VvStatus::NullArgument, "out is NULL");
        }
        *out = ptr::null_mut();
        let name = read_str(scenario, "scenario")?;
        let config = if config_path.is_null() {
            None
        } else {
            Some(read_str(config_path, "config_path")?)
        };
        let scenario = Scenario::resolve(name).or_else(|e| fail(VvStatus::Load, e))?;
        let (pipeline, sim_config) = pipeline_from(config)?;
        let paced = !pipeline.deterministic();
        let log = Arc::new(Mutex::new(MemorySink::new()));
        let sim = Simulation::new(&scenario, pipeline, sim_config, Box::new(SharedSink(log.clone())))
            .or_else(|e| fail(VvStatus::Load, e))?;
        *out = Box::into_raw(Box::new(VvSimulation { sim, log, paced }));
        Ok(())
    })
}

/// # Safety
/// `sim` is NULL or a handle from [`vv_simulation_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vv_simulation_free(sim: *mut VvSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

unsafe fn handle<'a>(sim: *mut VvSimulation) -> Result<&'a mut VvSimulation, (VvStatus, String)> {
    sim.as_mut().map_or_else(|| fail(VvStatus::NullArgument, "sim is NULL"), Ok)
}

fn pace(h: &VvSimulation) {
    // Real backends answer in wall time; give them the default 20x clock.
    if h.paced {
        std::thread::sleep(std::time::Duration::from_secs_f64(TICK_SECONDS / 20.0));
    }
}

/// Advances `ticks` control ticks of 50 ms.
///
/// # Safety
/// `sim` is a live handle.
#[no_mangle]
pub unsafe extern "C" fn vv_simulation_step(sim: *mut VvSimulation, ticks: u64) -> VvStatus {
    guard(|| {
        let h = handle(sim)?;
        for _ in 0..ticks {
            h.sim.tick();
            pace(h);
        }
        Ok(())
    })
}

/// Ticks until the next decision is logged or `max_sim_seconds` pass.
///
/// # Safety
/// `sim` is a live handle; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vv_simulation_run_until_decision(
    sim: *mut VvSimulation,
    max_sim_seconds: f64,
    out: *mut VvDecision,
) -> VvStatus {
    guard(|| {
        let h = handle(sim)?;
        if out.is_null() {
            return fail(VvStatus::NullArgument, "out is NULL");
        }
        if !(max_sim_seconds > 0.0 && max_sim_seconds.is_finite()) {
            return fail(VvStatus::InvalidArgument, "max_sim_seconds must be > 0");
        }
        let before = h.sim.decisions();
        let ticks = (max_sim_seconds / TICK_SECONDS).ceil() as u64;
        for _ in 0..ticks {
            h.sim.tick();
            if h.sim.decisions() > before {
                let d = h.sim.last_decision().expect("a decision was logged");
                *out = d.decision.token.into();
                return Ok(());
            }
            pace(h);
        }
        fail(VvStatus::NoDecision, format!("no decision within {max_sim_seconds} sim seconds"))
    })
}

/// Current state as JSON; free with [`vv_string_free`].
///
/// # Safety
/// `sim` is a live handle; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vv_simulation_state_json(sim: *mut VvSimulation, out: *mut *mut c_char) -> VvStatus {
    guard(|| {
        let h = handle(sim)?;
        if out.is_null() {
            return fail(VvStatus::NullArgument, "out is NULL");
        }
        *out = to_c(serde_json::to_string(&h.sim.snapshot()).expect("snapshot serializes"));
        Ok(())
    })
}

/// The run log so far as JSONL; free with [`vv_string_free`].
///
/// # Safety
/// `sim` is a live handle; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vv_simulation_log_jsonl(sim: *mut VvSimulation, out: *mut *mut c_char) -> VvStatus {
    guard(|| {
        let h = handle(sim)?;
        if out.is_null() {
            return fail(VvStatus::NullArgument, "out is NULL");
        }
        let text = to_jsonl(h.log.lock().expect("sink lock").records());
        *out = to_c(text);
        Ok(())
    })
}

/// Applies an operator override (`CLEAN`, `WAIT`, `DOCK`, ...). The log id
/// of the override record goes to `out_record_id` when it is not NULL.
///
/// # Safety
/// `sim` is a live handle; strings are valid; `out_record_id` is NULL or
/// valid.
#[no_mangle]
pub unsafe extern "C" fn vv_simulation_override(
    sim: *mut VvSimulation,
    operator_id: *const c_char,
    token: *const c_char,
    out_record_id: *mut u64,
) -> VvStatus {
    guard(|| {
        let h = handle(sim)?;
        let operator_id = read_str(operator_id, "operator_id")?.to_string();
        let token: DecisionToken = read_str(token, "token")?
            .parse()
            .or_else(|e| fail(VvStatus::InvalidArgument, e))?;
        let id = h
            .sim
            .apply_override(OverrideCommand {
                operator_id,
                token,
                issued_wall_clock: None,
            })
            .or_else(|e| fail(VvStatus::Rejected, e))?;
        if let Some(out) = out_record_id.as_mut() {
            *out = id;
        }
        Ok(())
    })
}

/// Extracts the decision from model output for `mode` (`observation`,
/// `cleaning` or `docking`).
///
/// # Safety
/// Strings are valid; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vv_parse_decision(text: *const c_char, mode: *const c_char, out: *mut VvDecision) -> VvStatus {
    guard(|| {
        if out.is_null() {
            return fail(VvStatus::NullArgument, "out is NULL");
        }
        let text = read_str(text, "text")?;
        let mode: Mode = read_str(mode, "mode")?
            .parse()
            .or_else(|e| fail(VvStatus::InvalidArgument, e))?;
        let decision = parse_decision(text, mode).or_else(|e| fail(VvStatus::NoDecision, e))?;
        *out = decision.token.into();
        Ok(())
    })
}

/// Runs `trials` first-decision trials and writes the consistency report
/// as JSON. `config_path` may be NULL for the mock backend.
///
/// # Safety
/// Strings are NULL or valid; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vv_run_trials_json(
    scenario: *const c_char,
    config_path: *const c_char,
    trials: u32,
    out: *mut *mut c_char,
) -> VvStatus {
    guard(|| {
        if out.is_null() {
            return fail(VvStatus::NullArgument, "out is NULL");
        }
        *out = ptr::null_mut();
        let scenario = Scenario::resolve(read_str(scenario, "scenario")?).or_else(|e| fail(VvStatus::Load, e))?;
        let config = if config_path.is_null() {
            None
        } else {
            Some(read_str(config_path, "config_path")?)
        };
        let (pipeline, sim_config) = pipeline_from(config)?;
        let options = RunOptions {
            acceleration: if pipeline.deterministic() { 0.0 } else { 20.0 },
            cadence: sim_config.cadence,
            speeds: sim_config.speeds,
            ..RunOptions::default()
        };
        let report = run_trials(&scenario, trials as usize, &pipeline, &options)
            .or_else(|e| fail(VvStatus::InvalidArgument, e))?;
        *out = to_c(serde_json::to_string(&report).expect("report serializes"));
        Ok(())
    })
}

/// Message of the last failure on this thread, or NULL. Free with
/// [`vv_string_free`].
#[no_mangle]
pub extern "C" fn vv_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null_mut(), |m| m.clone().into_raw()))
}

/// # Safety
/// `s` is NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vv_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
