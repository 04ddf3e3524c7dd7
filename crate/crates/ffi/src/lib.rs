//! C ABI over the simulator.
//!
//! Objects are opaque handles created and destroyed through this interface.
//! Every fallible call returns an [`SraStatus`]; on failure the message is
//! available from [`sra_last_error_message`] on the same thread until the
//! next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use star_ris_aoi::cli::{execute, load_config, parse_config, CliError, RunSpec};
use star_ris_aoi::optimizer::SlotStatus;
use star_ris_aoi::sim::{run_episode, EpisodeMetrics, EpisodeTrace, Scheme, SimError};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SraStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Io = 4,
    Solver = 5,
    OutOfRange = 6,
    Panic = 7,
}

/// Opaque configuration handle.
pub struct SraConfig {
    spec: RunSpec,
}

/// Opaque handle to one simulated episode.
pub struct SraEpisode {
    trace: EpisodeTrace,
    metrics: EpisodeMetrics,
}

/// Episode figures of merit. `min_harvested_energy` is NaN when no slot
/// had optimal status.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SraMetrics {
    pub avg_sum_aoi: f64,
    pub min_harvested_energy: f64,
    pub delivery_rate_t: f64,
    pub delivery_rate_r: f64,
    pub infeasible_fraction: f64,
    pub mean_ao_iterations: f64,
}

/// Slot status codes: 0 optimal, 1 infeasible, 2 iteration cap reached.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SraSlot {
    pub age_t: u64,
    pub age_r: u64,
    pub scheduled_t: bool,
    pub scheduled_r: bool,
    pub delivered_t: bool,
    pub delivered_r: bool,
    pub snr_t: f64,
    pub snr_r: f64,
    pub energy_t: f64,
    pub energy_r: f64,
    pub status: u32,
    pub ao_iterations: u32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: SraStatus, msg: impl Into<String>) -> SraStatus {
    set_error(msg);
    status
}

fn from_cli(e: CliError) -> SraStatus {
    let status = match &e {
        CliError::Io { .. } => SraStatus::Io,
        CliError::Sim(SimError::Config { .. }) => SraStatus::Config,
        CliError::Sim(_) => SraStatus::Solver,
        _ => SraStatus::Config,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> SraStatus) -> SraStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(SraStatus::Panic, format!("panic: {msg}"))
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, SraStatus> {
    if p.is_null() {
        return Err(fail(SraStatus::NullPointer, format!("{what} is null")));
    }
    // SAFETY: caller passes a NUL-terminated string.
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| fail(SraStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

/// Message for the last failing call on this thread, or null. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sra_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sra_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// New configuration with default settings. Free with [`sra_config_free`].
#[no_mangle]
pub extern "C" fn sra_config_default() -> *mut SraConfig {
    Box::into_raw(Box::new(SraConfig { spec: RunSpec::default() }))
}

/// Parses configuration text into a new handle.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sra_config_parse(text_ptr: *const c_char, out: *mut *mut SraConfig) -> SraStatus {
    guard(|| {
        if out.is_null() {
            return fail(SraStatus::NullPointer, "out is null");
        }
        let t = match unsafe { text(text_ptr, "text") } {
            Ok(t) => t,
            Err(s) => return s,
        };
        match parse_config(t) {
            Ok(spec) => {
                unsafe { *out = Box::into_raw(Box::new(SraConfig { spec })) };
                SraStatus::Ok
            }
            Err(e) => from_cli(e),
        }
    })
}

/// Loads a configuration file into a new handle.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sra_config_load(path: *const c_char, out: *mut *mut SraConfig) -> SraStatus {
    guard(|| {
        if out.is_null() {
            return fail(SraStatus::NullPointer, "out is null");
        }
        let p = match unsafe { text(path, "path") } {
            Ok(t) => t,
            Err(s) => return s,
        };
        match load_config(Path::new(p)) {
            Ok(spec) => {
                unsafe { *out = Box::into_raw(Box::new(SraConfig { spec })) };
                SraStatus::Ok
            }
            Err(e) => from_cli(e),
        }
    })
}

/// Sets one `key = value` setting. The handle is unchanged on failure.
///
/// # Safety
/// `config` must come from this library; `key` and `value` must be
/// NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn sra_config_set(config: *mut SraConfig, key: *const c_char, value: *const c_char) -> SraStatus {
    guard(|| {
        let Some(cfg) = (unsafe { config.as_mut() }) else {
            return fail(SraStatus::NullPointer, "config is null");
        };
        let (k, v) = match unsafe { (text(key, "key"), text(value, "value")) } {
            (Ok(k), Ok(v)) => (k, v),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        let mut next = cfg.spec.clone();
        if let Err(e) = next.set(k, v).and_then(|_| next.sim_config().map(|_| ())) {
            return from_cli(e);
        }
        cfg.spec = next;
        SraStatus::Ok
    })
}

/// # Safety
/// `config` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sra_config_free(config: *mut SraConfig) {
    if !config.is_null() {
        drop(unsafe { Box::from_raw(config) });
    }
}

/// Runs one episode for Monte Carlo index `run` under `mode` ("es", "ms",
/// "conv" or "random").
///
/// # Safety
/// `config` must come from this library, `mode` must be a NUL-terminated
/// string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sra_run_episode(
    config: *const SraConfig,
    mode: *const c_char,
    run: u64,
    out: *mut *mut SraEpisode,
) -> SraStatus {
    guard(|| {
        let Some(cfg) = (unsafe { config.as_ref() }) else {
            return fail(SraStatus::NullPointer, "config is null");
        };
        if out.is_null() {
            return fail(SraStatus::NullPointer, "out is null");
        }
        let m = match unsafe { text(mode, "mode") } {
            Ok(t) => t,
            Err(s) => return s,
        };
        let scheme: Scheme = match m.parse() {
            Ok(s) => s,
            Err(e) => return fail(SraStatus::Config, e),
        };
        let mut sim = match cfg.spec.sim_config() {
            Ok(s) => s,
            Err(e) => return from_cli(e),
        };
        sim.scheme = scheme;
        match run_episode(&sim, run) {
            Ok((trace, metrics)) => {
                unsafe { *out = Box::into_raw(Box::new(SraEpisode { trace, metrics })) };
                SraStatus::Ok
            }
            Err(e) => from_cli(CliError::Sim(e)),
        }
    })
}

/// Number of slots in the episode, or 0 for null.
///
/// # Safety
/// `episode` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn sra_episode_len(episode: *const SraEpisode) -> usize {
    unsafe { episode.as_ref() }.map_or(0, |e| e.trace.slots.len())
}

/// # Safety
/// `episode` must come from this library and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sra_episode_metrics(episode: *const SraEpisode, out: *mut SraMetrics) -> SraStatus {
    let (Some(e), Some(o)) = (unsafe { episode.as_ref() }, unsafe { out.as_mut() }) else {
        return fail(SraStatus::NullPointer, "episode or out is null");
    };
    let m = &e.metrics;
    *o = SraMetrics {
        avg_sum_aoi: m.avg_sum_aoi,
        min_harvested_energy: m.min_harvested_energy,
        delivery_rate_t: m.delivery_rate[0],
        delivery_rate_r: m.delivery_rate[1],
        infeasible_fraction: m.infeasible_slot_fraction,
        mean_ao_iterations: m.mean_ao_iterations,
    };
    SraStatus::Ok
}

/// Copies slot `index` (0-based) into `out`.
///
/// # Safety
/// `episode` must come from this library and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sra_episode_slot(episode: *const SraEpisode, index: usize, out: *mut SraSlot) -> SraStatus {
    let (Some(e), Some(o)) = (unsafe { episode.as_ref() }, unsafe { out.as_mut() }) else {
        return fail(SraStatus::NullPointer, "episode or out is null");
    };
    let Some(s) = e.trace.slots.get(index) else {
        return fail(SraStatus::OutOfRange, format!("slot {index} out of range (len {})", e.trace.slots.len()));
    };
    *o = SraSlot {
        age_t: s.states[0].age,
        age_r: s.states[1].age,
        scheduled_t: s.schedule[0],
        scheduled_r: s.schedule[1],
        delivered_t: s.delivered[0],
        delivered_r: s.delivered[1],
        snr_t: s.snr[0],
        snr_r: s.snr[1],
        energy_t: s.energy[0],
        energy_r: s.energy[1],
        status: match s.status {
            SlotStatus::Optimal => 0,
            SlotStatus::Infeasible => 1,
            SlotStatus::MaxIterations => 2,
        },
        ao_iterations: s.ao_iterations as u32,
    };
    SraStatus::Ok
}

/// # Safety
/// `episode` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sra_episode_free(episode: *mut SraEpisode) {
    if !episode.is_null() {
        drop(unsafe { Box::from_raw(episode) });
    }
}

/// Runs the configured modes and sweep and writes `results.csv`,
/// `summary.csv` and `manifest.txt` into `out_dir`. `rows` may be null.
///
/// # Safety
/// `config` must come from this library and `out_dir` be a NUL-terminated
/// string.
#[no_mangle]
pub unsafe extern "C" fn sra_execute(config: *const SraConfig, out_dir: *const c_char, rows: *mut usize) -> SraStatus {
    guard(|| {
        let Some(cfg) = (unsafe { config.as_ref() }) else {
            return fail(SraStatus::NullPointer, "config is null");
        };
        let dir = match unsafe { text(out_dir, "out_dir") } {
            Ok(t) => t,
            Err(s) => return s,
        };
        match execute(&cfg.spec, None, Path::new(dir)) {
            Ok(m) => {
                if let Some(r) = unsafe { rows.as_mut() } {
                    *r = m.rows;
                }
                SraStatus::Ok
            }
            Err(e) => from_cli(e),
        }
    })
}
