//! C ABI for kmsforge.
//!
//! Diagrams live behind the opaque `KfDiagram` handle. Every fallible call
//! returns an `int32_t` status (`KF_OK` on success) and leaves a message for
//! `kf_last_error` on failure. Strings handed out by the library must be
//! released with `kf_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use kmsforge::cli::{cone_generators, sweep, SweepTarget};
use kmsforge::cone::{DEFAULT_DELTA, DEFAULT_THETA};
use kmsforge::diagram::LeveledDiagram;
use kmsforge::glue::GluedDiagram;
use kmsforge::spec::AnySpec;
use kmsforge::spectral::{
    kms_defect, local_basis, phi, state_from_cone, transfer_matrix, DEFAULT_PATH_CAP,
};
use kmsforge::uhf::{realize_on_uhf, DEFAULT_WINDOW_CAP};
use kmsforge::Error;

pub const KF_OK: i32 = 0;
pub const KF_NULL_POINTER: i32 = 1;
pub const KF_INVALID_UTF8: i32 = 2;
pub const KF_SPEC: i32 = 3;
pub const KF_INVALID_DIAGRAM: i32 = 4;
pub const KF_DEPTH_EXCEEDED: i32 = 5;
pub const KF_OVERFLOW: i32 = 6;
pub const KF_DOMAIN: i32 = 7;
pub const KF_PATH_CAP: i32 = 8;
pub const KF_SHAPE_MISMATCH: i32 = 9;
pub const KF_NUMERIC: i32 = 10;
pub const KF_PANIC: i32 = 11;

/// A parsed spec and the diagram it describes.
pub struct KfDiagram {
    spec: AnySpec,
    diagram: LeveledDiagram,
    glued: Option<GluedDiagram>,
    depth: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> i32 {
    match e {
        Error::Spec(_) | Error::Json(_) | Error::Io(_) => KF_SPEC,
        Error::InvalidDiagram(_) => KF_INVALID_DIAGRAM,
        Error::DepthExceeded { .. } => KF_DEPTH_EXCEEDED,
        Error::Overflow(_) => KF_OVERFLOW,
        Error::Domain(_) => KF_DOMAIN,
        Error::PathCap { .. } => KF_PATH_CAP,
        _ => KF_NUMERIC,
    }
}

/// Runs `f`, turning errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (i32, String)>) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            KF_OK
        }
        Ok(Err((code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            KF_PANIC
        }
    }
}

fn lib(e: Error) -> (i32, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (i32, String) {
    (KF_NULL_POINTER, format!("{what} is null"))
}

unsafe fn handle<'a>(d: *const KfDiagram) -> Result<&'a KfDiagram, (i32, String)> {
    d.as_ref().ok_or_else(|| null("diagram"))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (i32, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

fn build(spec: AnySpec) -> kmsforge::Result<KfDiagram> {
    let (diagram, glued, depth) = match &spec {
        AnySpec::Diagram(d) => {
            let d = d.build()?;
            let depth = d.depth_limit().unwrap_or(12);
            (d, None, depth)
        }
        AnySpec::Glue(g) => {
            let built = g.build()?;
            (built.diagram().clone(), Some(built), g.depth)
        }
        AnySpec::Pipeline(p) => {
            let built = p.glue.build()?;
            (built.diagram().clone(), Some(built), p.depth)
        }
    };
    Ok(KfDiagram {
        spec,
        diagram,
        glued,
        depth,
    })
}

/// Parses a JSON spec (diagram, glue or pipeline) into a new handle.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kf_diagram_from_json(
    json: *const c_char,
    out: *mut *mut KfDiagram,
) -> i32 {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|_| (KF_INVALID_UTF8, "spec is not UTF-8".to_string()))?;
        let spec = AnySpec::from_json(text).map_err(lib)?;
        *out = Box::into_raw(Box::new(build(spec).map_err(lib)?));
        Ok(())
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `d` must come from `kf_diagram_from_json` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn kf_diagram_free(d: *mut KfDiagram) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Sets `*passed` to 1 when levels `0..=depth` have no sources or sinks.
///
/// # Safety
/// `d` must be a live handle and `passed` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kf_diagram_validate(
    d: *const KfDiagram,
    depth: usize,
    passed: *mut i32,
) -> i32 {
    guard(|| {
        let d = handle(d)?;
        let passed = out_ref(passed, "passed")?;
        let report = d.diagram.validate(depth);
        *passed = report.passed() as i32;
        Ok(())
    })
}

/// Number of vertices on `level`.
///
/// # Safety
/// `d` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kf_diagram_level_size(
    d: *const KfDiagram,
    level: usize,
    out: *mut usize,
) -> i32 {
    guard(|| {
        let d = handle(d)?;
        *out_ref(out, "out")? = d.diagram.level_size(level).map_err(lib)?;
        Ok(())
    })
}

/// Writes `A^(level)(β)` row-major into `out`, which holds `rows * cols` doubles.
///
/// # Safety
/// `d` must be a live handle and `out` must point to `rows * cols` doubles.
#[no_mangle]
pub unsafe extern "C" fn kf_transfer_matrix(
    d: *const KfDiagram,
    level: usize,
    beta: f64,
    out: *mut f64,
    rows: usize,
    cols: usize,
) -> i32 {
    guard(|| {
        let d = handle(d)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let t = transfer_matrix(&d.diagram, level, beta).map_err(lib)?;
        let m = &t.matrix;
        if (m.nrows(), m.ncols()) != (rows, cols) {
            return Err((
                KF_SHAPE_MISMATCH,
                format!(
                    "matrix is {}x{}, buffer is {rows}x{cols}",
                    m.nrows(),
                    m.ncols()
                ),
            ));
        }
        let buf = std::slice::from_raw_parts_mut(out, rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                buf[r * cols + c] = m[(r, c)];
            }
        }
        Ok(())
    })
}

/// Birkhoff's `φ` of a row-major nonnegative matrix.
///
/// # Safety
/// `m` must point to `rows * cols` doubles and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kf_phi(m: *const f64, rows: usize, cols: usize, out: *mut f64) -> i32 {
    guard(|| {
        if m.is_null() {
            return Err(null("m"));
        }
        let out = out_ref(out, "out")?;
        let data = std::slice::from_raw_parts(m, rows * cols);
        let mat = nalgebra::DMatrix::from_row_slice(rows, cols, data);
        *out = phi(&mat).map_err(lib)?;
        Ok(())
    })
}

/// Sweep rows for a glue or pipeline spec as a JSON array; free with `kf_string_free`.
///
/// `depth = 0` uses the spec's depth.
///
/// # Safety
/// `d` must be a live handle, `betas` must point to `n` doubles and `out_json` be valid.
#[no_mangle]
pub unsafe extern "C" fn kf_sweep_json(
    d: *const KfDiagram,
    betas: *const f64,
    n: usize,
    depth: usize,
    out_json: *mut *mut c_char,
) -> i32 {
    guard(|| {
        let d = handle(d)?;
        let out = out_ref(out_json, "out_json")?;
        *out = ptr::null_mut();
        if betas.is_null() && n > 0 {
            return Err(null("betas"));
        }
        let betas = if n == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(betas, n)
        };
        let depth = if depth == 0 { d.depth } else { depth };
        let Some(g) = &d.glued else {
            return Err((KF_SPEC, "sweeps need a glue or pipeline spec".into()));
        };
        let rows = match &d.spec {
            AnySpec::Pipeline(p) => {
                let r = realize_on_uhf(g, &p.uhf, DEFAULT_WINDOW_CAP).map_err(lib)?;
                sweep(
                    &SweepTarget::Realized(&r),
                    betas,
                    depth,
                    DEFAULT_THETA,
                    DEFAULT_DELTA,
                )
            }
            _ => sweep(
                &SweepTarget::Glued(g),
                betas,
                depth,
                DEFAULT_THETA,
                DEFAULT_DELTA,
            ),
        };
        let text = serde_json::to_string(&rows).map_err(|e| lib(e.into()))?;
        *out = CString::new(text)
            .map_err(|_| (KF_NUMERIC, "NUL in output".to_string()))?
            .into_raw();
        Ok(())
    })
}

/// Largest KMS defect at `level` over the states of the cone's extreme rays.
///
/// # Safety
/// `d` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kf_kms_defect(
    d: *const KfDiagram,
    beta: f64,
    level: usize,
    out: *mut f64,
) -> i32 {
    guard(|| {
        let d = handle(d)?;
        let out = out_ref(out, "out")?;
        let depth = d.depth.max(level + 1).max(2);
        let (diagram, gens) =
            cone_generators(&d.spec, beta, depth, level, DEFAULT_THETA).map_err(lib)?;
        let basis = local_basis(&diagram, level, DEFAULT_PATH_CAP).map_err(lib)?;
        let mut worst = 0.0f64;
        for g in &gens {
            let mass = g.mass();
            let psi: Vec<f64> = g.natural(level).iter().map(|x| x / mass).collect();
            let table = state_from_cone(&basis, beta, &psi).map_err(lib)?;
            worst = worst.max(kms_defect(&basis, beta, &table));
        }
        *out = worst;
        Ok(())
    })
}

/// Frees a string returned by the library; null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn kf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message of the last failed call on this thread, or null. Valid until the next call.
#[no_mangle]
pub extern "C" fn kf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn kf_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}
