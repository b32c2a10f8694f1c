use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use cafda_ffi::*;

const CONFIG: &str = "dataset.path = synthetic:300:4\nsplit.init_fraction = 0.05\nestimator.n_trees = 30\n\
                      lal.budget = 16\nhorizon = 25\nseed = 3\n";

fn last_error() -> String {
    let p = cafda_last_error();
    assert!(!p.is_null(), "no error recorded");
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn weights_of(w: *const CafdaWeights) -> Vec<f64> {
    let n = unsafe { cafda_weights_len(w) };
    let mut buf = vec![0.0; n];
    assert_eq!(unsafe { cafda_weights_copy(w, buf.as_mut_ptr(), n) }, CafdaStatus::Ok);
    buf
}

#[test]
fn weight_update_matches_hand_computation() {
    let mut w = ptr::null_mut();
    assert_eq!(unsafe { cafda_weights_new(5, ptr::null(), &mut w) }, CafdaStatus::Ok);
    assert_eq!(weights_of(w), vec![0.2; 5]);

    assert_eq!(unsafe { cafda_weights_update(w, 0, 1.0) }, CafdaStatus::Ok);
    let got = weights_of(w);
    let expected = [0.24 / 1.04, 0.2 / 1.04, 0.2 / 1.04, 0.2 / 1.04, 0.2 / 1.04];
    for (g, e) in got.iter().zip(expected) {
        assert!((g - e).abs() < 1e-12, "{got:?}");
    }

    let mut w0 = ptr::null_mut();
    assert_eq!(unsafe { cafda_weights_new(5, ptr::null(), &mut w0) }, CafdaStatus::Ok);
    assert_eq!(unsafe { cafda_weights_update(w0, 2, 0.0) }, CafdaStatus::Ok);
    let got = weights_of(w0);
    assert!((got[2] - 0.16 / 0.96).abs() < 1e-12);
    assert!((got[0] - 0.2 / 0.96).abs() < 1e-12);

    let mut idx = usize::MAX;
    assert_eq!(unsafe { cafda_weights_pick(w0, 0.0, &mut idx) }, CafdaStatus::Ok);
    assert_eq!(idx, 0);
    assert_eq!(unsafe { cafda_weights_pick(w0, 0.999_999, &mut idx) }, CafdaStatus::Ok);
    assert_eq!(idx, 4);
    unsafe {
        cafda_weights_free(w);
        cafda_weights_free(w0);
    }
}

#[test]
fn invalid_arguments_set_the_last_error() {
    let mut w = ptr::null_mut();
    assert_eq!(unsafe { cafda_weights_new(0, ptr::null(), &mut w) }, CafdaStatus::InvalidArgument);
    assert!(w.is_null());
    assert!(!last_error().is_empty());

    let bad = CafdaParams {
        k0: 1.5,
        ..cafda_params_default()
    };
    assert_eq!(unsafe { cafda_weights_new(3, &bad, &mut w) }, CafdaStatus::InvalidConfig);
    assert_eq!(unsafe { cafda_weights_new(3, ptr::null(), ptr::null_mut()) }, CafdaStatus::NullPointer);
    assert!(last_error().contains("out"));

    assert_eq!(unsafe { cafda_weights_new(3, ptr::null(), &mut w) }, CafdaStatus::Ok);
    assert!(cafda_last_error().is_null(), "success clears the error");
    assert_eq!(unsafe { cafda_weights_update(w, 3, 1.0) }, CafdaStatus::InvalidArgument);
    let mut idx = 0;
    assert_eq!(unsafe { cafda_weights_pick(w, 1.0, &mut idx) }, CafdaStatus::InvalidArgument);
    let mut buf = [0.0; 2];
    assert_eq!(unsafe { cafda_weights_copy(w, buf.as_mut_ptr(), 2) }, CafdaStatus::InvalidArgument);
    unsafe { cafda_weights_free(w) };
    unsafe { cafda_weights_free(ptr::null_mut()) };
}

#[test]
fn sample_index_walks_the_cdf_in_order() {
    let probs = [0.1, 0.0, 0.6, 0.3];
    let mut out = 0;
    for (u, want) in [(0.05, 0), (0.1, 2), (0.69, 2), (0.7, 3), (0.99, 3)] {
        assert_eq!(unsafe { cafda_sample_index(probs.as_ptr(), 4, u, &mut out) }, CafdaStatus::Ok);
        assert_eq!(out, want, "u = {u}");
    }
    let neg = [0.5, -0.1];
    assert_eq!(unsafe { cafda_sample_index(neg.as_ptr(), 2, 0.1, &mut out) }, CafdaStatus::InvalidArgument);
}

#[test]
fn run_handle_reproduces_the_simulated_trace() {
    use std::sync::Arc;

    use cafda_core::config::RunConfig;
    use cafda_core::harness::{log_lines, run_simulated};

    let text = CString::new(CONFIG).unwrap();
    let policy = CString::new("cafda").unwrap();
    let mut run = ptr::null_mut();
    assert_eq!(unsafe { cafda_run_new(text.as_ptr(), policy.as_ptr(), &mut run) }, CafdaStatus::Ok);

    let (mut row, mut t, mut row_again, mut t_again) = (0, 0, 0, 0);
    let mut cum = 0.0;
    loop {
        match unsafe { cafda_run_next(run, &mut row, &mut t) } {
            CafdaStatus::Finished => break,
            CafdaStatus::Ok => {}
            other => panic!("{other:?}: {}", last_error()),
        }
        assert_eq!(unsafe { cafda_run_next(run, &mut row_again, &mut t_again) }, CafdaStatus::Ok);
        assert_eq!((row, t), (row_again, t_again), "next is idempotent");
        let mut label = 9;
        assert_eq!(unsafe { cafda_run_hidden_label(run, row, &mut label) }, CafdaStatus::Ok);
        assert_eq!(unsafe { cafda_run_answer(run, label, ptr::null_mut(), &mut cum) }, CafdaStatus::Ok);
    }
    assert_eq!(t, 25);
    assert_eq!(unsafe { cafda_run_cum_reward(run) }, cum);

    let mut n = 0;
    assert_eq!(unsafe { cafda_run_weights(run, ptr::null_mut(), 0, &mut n) }, CafdaStatus::InvalidArgument);
    assert_eq!(n, 5);
    let mut w = [0.0; 5];
    assert_eq!(unsafe { cafda_run_weights(run, w.as_mut_ptr(), 5, &mut n) }, CafdaStatus::Ok);
    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);

    let mut log = ptr::null_mut();
    assert_eq!(unsafe { cafda_run_log_json(run, &mut log) }, CafdaStatus::Ok);
    let got = unsafe { CStr::from_ptr(log) }.to_str().unwrap().to_string();
    unsafe { cafda_string_free(log) };

    let cfg = RunConfig::from_text(CONFIG).unwrap();
    let ds = Arc::new(cfg.load_dataset().unwrap());
    let expected = log_lines(&run_simulated(ds, &cfg, "cafda".parse().unwrap()).unwrap().records);
    assert_eq!(got, expected);

    let mut state = ptr::null_mut();
    assert_eq!(unsafe { cafda_run_state_json(run, &mut state) }, CafdaStatus::Ok);
    let json: serde_json::Value = serde_json::from_str(unsafe { CStr::from_ptr(state) }.to_str().unwrap()).unwrap();
    unsafe { cafda_string_free(state) };
    assert_eq!(json["t"], 25);
    assert_eq!(json["finished"], true);
    unsafe { cafda_run_free(run) };
}

#[test]
fn run_errors_map_to_status_codes() {
    let mut run = ptr::null_mut();
    let bad_key = CString::new("cafda.kk = 2\n").unwrap();
    assert_eq!(unsafe { cafda_run_new(bad_key.as_ptr(), ptr::null(), &mut run) }, CafdaStatus::InvalidConfig);
    assert!(last_error().contains("cafda.kk"));
    let missing = CString::new("dataset.path = /no/such/file.csv\n").unwrap();
    assert_eq!(unsafe { cafda_run_new(missing.as_ptr(), ptr::null(), &mut run) }, CafdaStatus::DataError);
    let text = CString::new(CONFIG).unwrap();
    let policy = CString::new("nonsense").unwrap();
    assert_eq!(unsafe { cafda_run_new(text.as_ptr(), policy.as_ptr(), &mut run) }, CafdaStatus::InvalidConfig);
    assert!(run.is_null());

    assert_eq!(unsafe { cafda_run_new(text.as_ptr(), ptr::null(), &mut run) }, CafdaStatus::Ok);
    assert_eq!(unsafe { cafda_run_answer(run, 1, ptr::null_mut(), ptr::null_mut()) }, CafdaStatus::InvalidArgument);
    let (mut row, mut t) = (0, 0);
    assert_eq!(unsafe { cafda_run_next(run, &mut row, &mut t) }, CafdaStatus::Ok);
    assert_eq!(unsafe { cafda_run_answer(run, 2, ptr::null_mut(), ptr::null_mut()) }, CafdaStatus::InvalidArgument);
    let mut n = 99;
    let mut w = [0.0; 5];
    assert_eq!(unsafe { cafda_run_weights(run, w.as_mut_ptr(), 5, &mut n) }, CafdaStatus::Ok);
    assert_eq!(n, 5, "default strategies list is the mixture");
    unsafe { cafda_run_free(run) };
}

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn header_declares_every_exported_function() {
    let header = std::fs::read_to_string(crate_dir().join("include/cafda.h")).unwrap();
    let source = std::fs::read_to_string(crate_dir().join("src/lib.rs")).unwrap();
    let exported: Vec<&str> = source
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exported.len() >= 15);
    for f in exported {
        assert!(header.contains(&format!("{f}(")), "{f} missing from header");
    }
    for item in ["typedef struct CafdaRun CafdaRun;", "CAFDA_STATUS_FINISHED = 6", "#ifndef CAFDA_H"] {
        assert!(header.contains(item), "{item}");
    }
}

/// Directory holding `libcafda_ffi.a`: the test binary lives in its `deps/`.
fn artifact_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_the_static_library() {
    let lib = artifact_dir().join("libcafda_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library at {}", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "cafda.h"
int main(void) {
    CafdaWeights *w = NULL;
    if (cafda_weights_new(5, NULL, &w) != CAFDA_STATUS_OK) return 1;
    if (cafda_weights_update(w, 0, 1.0) != CAFDA_STATUS_OK) return 2;
    double buf[5];
    if (cafda_weights_copy(w, buf, 5) != CAFDA_STATUS_OK) return 3;
    size_t idx = 0;
    if (cafda_weights_pick(w, 0.1, &idx) != CAFDA_STATUS_OK) return 4;
    if (cafda_weights_update(w, 9, 1.0) != CAFDA_STATUS_INVALID_ARGUMENT) return 5;
    if (cafda_last_error() == NULL) return 6;
    printf("%.6f %zu %s\n", buf[0], idx, cafda_version());
    cafda_weights_free(w);
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("main");
    let out = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(crate_dir().join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(stdout.starts_with("0.230769 0 "), "{stdout}");
}
