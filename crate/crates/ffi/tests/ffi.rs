use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use leafdx_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn path_c(p: &Path) -> CString {
    c(p.to_str().unwrap())
}

unsafe fn take_string(p: *mut c_char) -> String {
    assert!(!p.is_null());
    let s = CStr::from_ptr(p).to_str().unwrap().to_string();
    leafdx_string_free(p);
    s
}

fn last_error() -> String {
    let p = leafdx_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn iou_hand_values() {
    let a = LeafdxBox { x1: 0.0, y1: 0.0, x2: 2.0, y2: 2.0 };
    let b = LeafdxBox { x1: 1.0, y1: 1.0, x2: 3.0, y2: 3.0 };
    assert!((leafdx_iou(a, b) - 1.0 / 7.0).abs() < 1e-12);
    let degenerate = LeafdxBox { x1: 1.0, y1: 1.0, x2: 1.0, y2: 1.0 };
    assert_eq!(leafdx_iou(degenerate, degenerate), 0.0);
}

#[test]
fn average_precision_cases() {
    let preds = [LeafdxMatch { confidence: 0.9, is_tp: false }, LeafdxMatch { confidence: 0.8, is_tp: true }];
    let mut ap = f64::NAN;
    let st = unsafe { leafdx_average_precision(preds.as_ptr(), preds.len(), 1, &mut ap) };
    assert_eq!(st, LeafdxStatus::Ok);
    assert!((ap - 0.5).abs() < 1e-9);

    let st = unsafe { leafdx_average_precision(ptr::null(), 0, 0, &mut ap) };
    assert_eq!(st, LeafdxStatus::Undefined);
    let st = unsafe { leafdx_average_precision(ptr::null(), 0, 3, &mut ap) };
    assert_eq!(st, LeafdxStatus::Ok);
    assert_eq!(ap, 0.0);
    let st = unsafe { leafdx_average_precision(ptr::null(), 2, 3, &mut ap) };
    assert_eq!(st, LeafdxStatus::NullPointer);
    assert!(last_error().contains("NULL"));
}

#[test]
fn split_text_json() {
    let mut out = ptr::null_mut();
    let text = c("abcdefghij");
    let st = unsafe { leafdx_split_text(text.as_ptr(), 4, 2, &mut out) };
    assert_eq!(st, LeafdxStatus::Ok);
    let json: serde_json::Value = serde_json::from_str(&unsafe { take_string(out) }).unwrap();
    let texts: Vec<&str> = json.as_array().unwrap().iter().map(|s| s["text"].as_str().unwrap()).collect();
    assert_eq!(texts, vec!["abcd", "cdef", "efgh", "ghij"]);
    assert_eq!(json[3]["start"], 6);

    let st = unsafe { leafdx_split_text(text.as_ptr(), 4, 4, &mut out) };
    assert_eq!(st, LeafdxStatus::InvalidArgument);
    assert!(last_error().contains("overlap"));
}

#[test]
fn embedder_handle() {
    let e = leafdx_embedder_new(16);
    assert!(!e.is_null());
    unsafe {
        assert_eq!(leafdx_embedder_dim(e), 16);
        let mut buf = [0.0f64; 16];
        let t = c("Coffee leaf rust");
        assert_eq!(leafdx_embedder_embed(e, t.as_ptr(), buf.as_mut_ptr(), 16), LeafdxStatus::Ok);
        let norm: f64 = buf.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-6);
        let mut short = [0.0f64; 4];
        assert_eq!(leafdx_embedder_embed(e, t.as_ptr(), short.as_mut_ptr(), 4), LeafdxStatus::DimensionMismatch);
        leafdx_embedder_free(e);
    }
    assert!(leafdx_embedder_new(0).is_null());
}

#[test]
fn store_ingest_search_persist() {
    let kb = tempfile::tempdir().unwrap();
    std::fs::write(kb.path().join("rust.md"), "Rust shows orange powdery spores under the leaf.").unwrap();
    std::fs::write(kb.path().join("miner.md"), "Leaf miner larvae dig brown tunnels.").unwrap();
    let store_file = kb.path().join("store.jsonl");

    unsafe {
        let e = leafdx_embedder_new(64);
        let s = leafdx_store_new(64);
        let mut added = 0usize;
        let dir = path_c(kb.path());
        assert_eq!(leafdx_store_ingest_dir(s, e, dir.as_ptr(), 200, 20, &mut added), LeafdxStatus::Ok);
        assert_eq!(added, 2);
        assert_eq!(leafdx_store_len(s), 2);

        let q = c("orange spores");
        let mut out = ptr::null_mut();
        assert_eq!(leafdx_store_search(s, e, q.as_ptr(), 1, &mut out), LeafdxStatus::Ok);
        let hits: serde_json::Value = serde_json::from_str(&take_string(out)).unwrap();
        assert_eq!(hits[0]["chunk"]["chunk_id"], "rust.md#0");

        let sp = path_c(&store_file);
        assert_eq!(leafdx_store_persist(s, sp.as_ptr()), LeafdxStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(leafdx_store_load(sp.as_ptr(), &mut loaded), LeafdxStatus::Ok);
        assert_eq!(leafdx_store_len(loaded), 2);
        let mut out2 = ptr::null_mut();
        assert_eq!(leafdx_store_search(loaded, e, q.as_ptr(), 2, &mut out2), LeafdxStatus::Ok);
        let mut out1 = ptr::null_mut();
        assert_eq!(leafdx_store_search(s, e, q.as_ptr(), 2, &mut out1), LeafdxStatus::Ok);
        assert_eq!(take_string(out1), take_string(out2));

        let wrong = leafdx_embedder_new(8);
        let mut out3 = ptr::null_mut();
        assert_eq!(leafdx_store_search(s, wrong, q.as_ptr(), 1, &mut out3), LeafdxStatus::DimensionMismatch);

        let missing = c("/nonexistent/store.jsonl");
        let mut none = ptr::null_mut();
        assert_eq!(leafdx_store_load(missing.as_ptr(), &mut none), LeafdxStatus::Io);

        leafdx_embedder_free(wrong);
        leafdx_store_free(loaded);
        leafdx_store_free(s);
        leafdx_embedder_free(e);
    }
}

#[test]
fn evaluate_dataset_json() {
    let dir = tempfile::tempdir().unwrap();
    let (pred, gt) = (dir.path().join("pred"), dir.path().join("gt"));
    std::fs::create_dir_all(&pred).unwrap();
    std::fs::create_dir_all(&gt).unwrap();
    std::fs::write(gt.join("img1.txt"), "3 0.5 0.5 0.2 0.2\n").unwrap();
    std::fs::write(pred.join("img1.txt"), "3 0.5 0.5 0.2 0.2 0.9\n").unwrap();
    let classes = dir.path().join("classes.txt");
    std::fs::write(&classes, "cercospora\nminer\nphoma\nrust\n").unwrap();

    let (p, g, cl) = (path_c(&pred), path_c(&gt), path_c(&classes));
    let mut out = ptr::null_mut();
    let st = unsafe { leafdx_evaluate_dataset(p.as_ptr(), g.as_ptr(), cl.as_ptr(), ptr::null(), 0.0, 0.5, &mut out) };
    assert_eq!(st, LeafdxStatus::Ok);
    let report: serde_json::Value = serde_json::from_str(&unsafe { take_string(out) }).unwrap();
    assert_eq!(report["overall"]["ap50"], 1.0);
    assert_eq!(report["per_class"][0]["class_name"], "rust");

    let st = unsafe { leafdx_evaluate_dataset(p.as_ptr(), g.as_ptr(), ptr::null(), ptr::null(), 0.0, 0.5, &mut out) };
    assert_eq!(st, LeafdxStatus::NullPointer);
}

fn header_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/leafdx.h")
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(header_path()).unwrap();
    for sym in [
        "leafdx_last_error",
        "leafdx_string_free",
        "leafdx_iou",
        "leafdx_average_precision",
        "leafdx_evaluate_dataset",
        "leafdx_split_text",
        "leafdx_embedder_new",
        "leafdx_embedder_free",
        "leafdx_embedder_dim",
        "leafdx_embedder_embed",
        "leafdx_store_new",
        "leafdx_store_load",
        "leafdx_store_persist",
        "leafdx_store_len",
        "leafdx_store_ingest_dir",
        "leafdx_store_search",
        "leafdx_store_free",
        "typedef struct LeafdxStore LeafdxStore;",
        "LEAFDX_STATUS_DIMENSION_MISMATCH = 5",
    ] {
        assert!(header.contains(sym), "header lacks {sym}");
    }
}

const C_SMOKE: &str = r#"
#include <math.h>
#include <stdio.h>
#include "leafdx.h"

int main(void) {
    LeafdxBox a = {0, 0, 2, 2}, b = {1, 1, 3, 3};
    if (fabs(leafdx_iou(a, b) - 1.0 / 7.0) > 1e-12) return 1;
    char *json = NULL;
    if (leafdx_split_text("abcdefghij", 4, 2, &json) != LEAFDX_STATUS_OK) return 2;
    printf("%s\n", json);
    leafdx_string_free(json);
    LeafdxEmbedder *e = leafdx_embedder_new(8);
    double v[8];
    if (leafdx_embedder_embed(e, "rust", v, 8) != LEAFDX_STATUS_OK) return 3;
    leafdx_embedder_free(e);
    return 0;
}
"#;

/// Compiles a C program against the header and the shared library.
#[test]
fn c_program_links_and_runs() {
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler");
        return;
    }
    // target/<profile>/deps/<test-binary> -> target/<profile>
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(Path::parent).unwrap().to_path_buf();
    if !profile_dir.join("libleafdx_ffi.so").exists() {
        eprintln!("skipping: shared library not found in {}", profile_dir.display());
        return;
    }
    let work = tempfile::tempdir().unwrap();
    let src = work.path().join("smoke.c");
    std::fs::write(&src, C_SMOKE).unwrap();
    let bin = work.path().join("smoke");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(header_path().parent().unwrap())
        .arg("-L")
        .arg(&profile_dir)
        .arg(format!("-Wl,-rpath,{}", profile_dir.display()))
        .args(["-lleafdx_ffi", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "C program exited with {:?}", out.status);
    assert!(String::from_utf8_lossy(&out.stdout).contains("\"ghij\""));
}
