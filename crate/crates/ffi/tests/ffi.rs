use std::ffi::{CStr, CString};
use std::ptr;

use kmsforge_ffi::*;

const SIMPLE: &str =
    r#"{"kind": "stationary", "size": 2, "matrix": [[1, 1], [0, 2]], "potential": 0.5}"#;

const REAL_LINE: &str = r#"{
  "intervals": [{"lo": "-inf", "hi": "+inf"}],
  "seeds": [{"kind": "single_path"}],
  "depth": 12
}"#;

fn open(json: &str) -> *mut KfDiagram {
    let text = CString::new(json).unwrap();
    let mut d = ptr::null_mut();
    let code = unsafe { kf_diagram_from_json(text.as_ptr(), &mut d) };
    assert_eq!(code, KF_OK, "{}", last_error());
    assert!(!d.is_null());
    d
}

fn last_error() -> String {
    let p = kf_last_error();
    if p.is_null() {
        String::new()
    } else {
        unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
    }
}

#[test]
fn null_pointers_are_rejected() {
    unsafe {
        let mut d = ptr::null_mut();
        assert_eq!(kf_diagram_from_json(ptr::null(), &mut d), KF_NULL_POINTER);
        assert!(d.is_null());
        assert!(last_error().contains("json"));
        let text = CString::new(SIMPLE).unwrap();
        assert_eq!(
            kf_diagram_from_json(text.as_ptr(), ptr::null_mut()),
            KF_NULL_POINTER
        );
        let mut n = 0usize;
        assert_eq!(
            kf_diagram_level_size(ptr::null(), 0, &mut n),
            KF_NULL_POINTER
        );
        let mut x = 0.0;
        assert_eq!(kf_phi(ptr::null(), 2, 2, &mut x), KF_NULL_POINTER);
        assert_eq!(kf_kms_defect(ptr::null(), 1.0, 1, &mut x), KF_NULL_POINTER);
        kf_diagram_free(ptr::null_mut());
        kf_string_free(ptr::null_mut());
    }
}

#[test]
fn bad_specs_report_status() {
    unsafe {
        let mut d = ptr::null_mut();
        let text = CString::new("{ nope").unwrap();
        assert_eq!(kf_diagram_from_json(text.as_ptr(), &mut d), KF_SPEC);
        assert!(d.is_null());
        assert!(!last_error().is_empty());

        let bytes = [0xffu8, 0xfe, 0];
        assert_eq!(
            kf_diagram_from_json(bytes.as_ptr() as *const _, &mut d),
            KF_INVALID_UTF8
        );
    }
}

#[test]
fn level_sizes_and_validation() {
    let d = open(SIMPLE);
    unsafe {
        let mut n = 0usize;
        assert_eq!(kf_diagram_level_size(d, 0, &mut n), KF_OK);
        assert_eq!(n, 1);
        assert_eq!(kf_diagram_level_size(d, 5, &mut n), KF_OK);
        assert_eq!(n, 2);
        assert!(last_error().is_empty(), "success clears the error");
        let mut passed = -1;
        assert_eq!(kf_diagram_validate(d, 6, &mut passed), KF_OK);
        assert_eq!(passed, 1);
        kf_diagram_free(d);
    }
}

#[test]
fn transfer_and_phi() {
    let d = open(SIMPLE);
    let beta = 0.8f64;
    let w = (-beta * 0.5).exp();
    unsafe {
        let mut m = [0.0f64; 4];
        assert_eq!(kf_transfer_matrix(d, 2, beta, m.as_mut_ptr(), 2, 2), KF_OK);
        let want = [w, w, 0.0, 2.0 * w];
        for (a, b) in m.iter().zip(want) {
            assert!((a - b).abs() < 1e-14, "{m:?}");
        }
        let mut small = [0.0f64; 2];
        assert_eq!(
            kf_transfer_matrix(d, 2, beta, small.as_mut_ptr(), 1, 2),
            KF_SHAPE_MISMATCH
        );
        assert!(last_error().contains("2x2"));

        let mut phi = 0.0;
        let a = [2.0, 1.0, 1.0, 2.0];
        assert_eq!(kf_phi(a.as_ptr(), 2, 2, &mut phi), KF_OK);
        assert!((phi - 0.25).abs() < 1e-14);
        kf_diagram_free(d);
    }
}

#[test]
fn sweep_json_and_defect() {
    let d = open(REAL_LINE);
    unsafe {
        let betas = [-1.0, 0.5, 2.0];
        let mut out = ptr::null_mut();
        assert_eq!(kf_sweep_json(d, betas.as_ptr(), 3, 0, &mut out), KF_OK);
        let text = CStr::from_ptr(out).to_str().unwrap().to_owned();
        kf_string_free(out);
        let rows: Vec<serde_json::Value> = serde_json::from_str(&text).unwrap();
        assert_eq!(rows.len(), 3);
        for r in &rows {
            assert_eq!(r["extreme_rays"], 1);
            assert_eq!(r["failed"], false);
        }
        let mut defect = 1.0;
        assert_eq!(kf_kms_defect(d, 0.7, 3, &mut defect), KF_OK);
        assert!(defect <= 1e-10);
        kf_diagram_free(d);
    }

    let plain = open(SIMPLE);
    unsafe {
        let mut out = ptr::null_mut();
        let b = [1.0];
        assert_eq!(kf_sweep_json(plain, b.as_ptr(), 1, 0, &mut out), KF_SPEC);
        assert!(out.is_null());
        let mut defect = 1.0;
        assert_eq!(kf_kms_defect(plain, 1.3, 2, &mut defect), KF_OK);
        assert!(defect <= 1e-10);
        kf_diagram_free(plain);
    }
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(kf_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_lists_the_entry_points() {
    let header =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/kmsforge.h"))
            .unwrap();
    for name in [
        "kf_diagram_from_json",
        "kf_diagram_free",
        "kf_transfer_matrix",
        "kf_phi",
        "kf_sweep_json",
        "kf_kms_defect",
        "kf_last_error",
        "KF_PATH_CAP",
    ] {
        assert!(header.contains(name), "{name}");
    }
}
