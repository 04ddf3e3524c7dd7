use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use star_ris_aoi_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = sra_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

const SMALL: &str = "m = 4\nn_t = 2\nhorizon = 6\nsigma2_info = 0.01\nenergy_min_db = -30\n";

fn small_config() -> *mut SraConfig {
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { sra_config_parse(c(SMALL).as_ptr(), &mut cfg) }, SraStatus::Ok);
    assert!(!cfg.is_null());
    cfg
}

#[test]
fn version_is_nul_terminated() {
    let v = unsafe { CStr::from_ptr(sra_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn parse_errors_report_code_and_message() {
    let mut cfg = ptr::null_mut();
    let s = unsafe { sra_config_parse(c("gama = 1").as_ptr(), &mut cfg) };
    assert_eq!(s, SraStatus::Config);
    assert!(cfg.is_null());
    assert!(last_error().contains("gamma_th_db"));

    let s = unsafe { sra_config_parse(ptr::null(), &mut cfg) };
    assert_eq!(s, SraStatus::NullPointer);

    let bad = [0xffu8, 0xfe, 0];
    let s = unsafe { sra_config_parse(bad.as_ptr().cast(), &mut cfg) };
    assert_eq!(s, SraStatus::InvalidUtf8);
}

#[test]
fn set_rejects_invalid_values_without_change() {
    let cfg = sra_config_default();
    unsafe {
        assert_eq!(sra_config_set(cfg, c("horizon").as_ptr(), c("12").as_ptr()), SraStatus::Ok);
        assert_eq!(sra_config_set(cfg, c("lambda_t").as_ptr(), c("2").as_ptr()), SraStatus::Config);
        assert!(last_error().contains("lambda_t"));
        assert_eq!(sra_config_set(ptr::null_mut(), c("m").as_ptr(), c("4").as_ptr()), SraStatus::NullPointer);
        sra_config_free(cfg);
        sra_config_free(ptr::null_mut());
    }
}

#[test]
fn load_missing_file_is_io_error() {
    let mut cfg = ptr::null_mut();
    let s = unsafe { sra_config_load(c("/nonexistent/x.cfg").as_ptr(), &mut cfg) };
    assert_eq!(s, SraStatus::Io);
}

#[test]
fn episode_roundtrip() {
    let cfg = small_config();
    let mut ep = ptr::null_mut();
    unsafe {
        assert_eq!(sra_run_episode(cfg, c("random").as_ptr(), 0, &mut ep), SraStatus::Ok);
        assert_eq!(sra_episode_len(ep), 6);
        let mut m = SraMetrics {
            avg_sum_aoi: 0.0,
            min_harvested_energy: 0.0,
            delivery_rate_t: 0.0,
            delivery_rate_r: 0.0,
            infeasible_fraction: 0.0,
            mean_ao_iterations: 0.0,
        };
        assert_eq!(sra_episode_metrics(ep, &mut m), SraStatus::Ok);
        assert!(m.avg_sum_aoi >= 1.0);
        let mut slot = SraSlot::default();
        assert_eq!(sra_episode_slot(ep, 0, &mut slot), SraStatus::Ok);
        assert_eq!(slot.age_t, 1);
        assert_eq!(sra_episode_slot(ep, 6, &mut slot), SraStatus::OutOfRange);
        assert!(last_error().contains("out of range"));
        sra_episode_free(ep);

        assert_eq!(sra_run_episode(cfg, c("nope").as_ptr(), 0, &mut ep), SraStatus::Config);
        assert_eq!(sra_episode_len(ptr::null()), 0);
        sra_config_free(cfg);
    }
}

#[test]
fn execute_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config();
    let mut rows = 0usize;
    unsafe {
        assert_eq!(sra_config_set(cfg, c("modes").as_ptr(), c("random,conv").as_ptr()), SraStatus::Ok);
        let out = c(dir.path().to_str().unwrap());
        assert_eq!(sra_execute(cfg, out.as_ptr(), &mut rows), SraStatus::Ok);
        sra_config_free(cfg);
    }
    assert_eq!(rows, 2);
    for f in ["results.csv", "summary.csv", "manifest.txt"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn header_declares_the_interface() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/star_ris_aoi.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "sra_config_default",
        "sra_config_parse",
        "sra_config_load",
        "sra_config_set",
        "sra_config_free",
        "sra_run_episode",
        "sra_episode_len",
        "sra_episode_metrics",
        "sra_episode_slot",
        "sra_episode_free",
        "sra_execute",
        "sra_last_error_message",
        "SRA_STATUS_PANIC",
        "typedef struct SraConfig SraConfig",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }
    // The header must also compile as C when a compiler is around.
    if let Ok(out) = Command::new("cc").args(["-fsyntax-only", "-x", "c"]).arg(&header).output() {
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}
