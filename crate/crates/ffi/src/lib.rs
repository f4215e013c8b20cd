//! C ABI over `qfi_imaging`.
//!
//! Every function returns a [`QfiStatus`]; outputs go through pointers. On a
//! non-zero status [`qfi_last_error_message`] describes the failure. Handles
//! are opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qfi_imaging::fisher::{self, QfiTarget as Target};
use qfi_imaging::geometry::{Collector, Parameter, Scenario};
use qfi_imaging::interferometer::{self, Interferometer};
use qfi_imaging::scenario_file::bundled;
use qfi_imaging::Error;

/// Result code of every call. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QfiStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Validation = 3,
    DegenerateGeometry = 4,
    ShapeMismatch = 5,
    NotUnitary = 6,
    Precondition = 7,
    Numerical = 8,
    NonIdentifiable = 9,
    Saturation = 10,
    Parse = 11,
    Io = 12,
    BufferTooSmall = 13,
    Panic = 14,
}

/// Which closed-form paraxial QFI matrix to evaluate.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QfiTarget {
    SingleSource = 0,
    TwoSourceSeparation = 1,
    TwoSourceCentroid = 2,
}

/// Opaque scenario handle.
pub struct QfiScenario(Scenario);

/// Opaque interferometer handle.
pub struct QfiInterferometer(Interferometer);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(QfiStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Validation(_) => QfiStatus::Validation,
            Error::DegenerateGeometry(_) => QfiStatus::DegenerateGeometry,
            Error::ShapeMismatch { .. } => QfiStatus::ShapeMismatch,
            Error::NotUnitary { .. } => QfiStatus::NotUnitary,
            Error::Precondition(_) => QfiStatus::Precondition,
            Error::Numerical(_) => QfiStatus::Numerical,
            Error::NonIdentifiable(_) => QfiStatus::NonIdentifiable,
            Error::Saturation(_) => QfiStatus::Saturation,
            Error::Parse(_) => QfiStatus::Parse,
            Error::Io(_) => QfiStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn guard(f: impl FnOnce() -> Outcome) -> QfiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QfiStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            QfiStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(QfiStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(QfiStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn opt_str_arg<'a>(p: *const c_char, what: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, what).map(Some)
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Outcome {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn parameter(scenario: &Scenario, direction: Option<&str>) -> Result<Parameter, Failure> {
    let default = if scenario.n_sources() == 2 {
        "separation-x"
    } else {
        "centroid-x"
    };
    Ok(Parameter::parse(
        direction.unwrap_or(default),
        scenario.n_sources(),
    )?)
}

unsafe fn emit_scenario(out: *mut *mut QfiScenario, s: Scenario) -> Outcome {
    write_out(out, Box::into_raw(Box::new(QfiScenario(s))), "out")
}

unsafe fn emit_interferometer(out: *mut *mut QfiInterferometer, r: Interferometer) -> Outcome {
    write_out(out, Box::into_raw(Box::new(QfiInterferometer(r))), "out")
}

/// Message of the last failed call on this thread, or null if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qfi_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qfi_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a TOML scenario.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qfi_scenario_from_toml(
    text: *const c_char,
    out: *mut *mut QfiScenario,
) -> QfiStatus {
    guard(|| emit_scenario(out, Scenario::from_toml_str(str_arg(text, "text")?)?))
}

/// Parses a JSON scenario.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qfi_scenario_from_json(
    text: *const c_char,
    out: *mut *mut QfiScenario,
) -> QfiStatus {
    guard(|| emit_scenario(out, Scenario::from_json_str(str_arg(text, "text")?)?))
}

/// Loads one of the scenarios shipped with the library, e.g. `two_collector`.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qfi_scenario_bundled(
    name: *const c_char,
    out: *mut *mut QfiScenario,
) -> QfiStatus {
    guard(|| {
        let name = str_arg(name, "name")?;
        let b = bundled(name).ok_or_else(|| {
            Failure(
                QfiStatus::Validation,
                format!("no bundled scenario named '{name}'"),
            )
        })?;
        emit_scenario(out, b.scenario()?)
    })
}

/// # Safety
/// `scenario` must come from a `qfi_scenario_*` constructor, or be null.
#[no_mangle]
pub unsafe extern "C" fn qfi_scenario_free(scenario: *mut QfiScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn qfi_scenario_shape(
    scenario: *const QfiScenario,
    n_sources: *mut usize,
    n_collectors: *mut usize,
) -> QfiStatus {
    guard(|| {
        let s = &deref(scenario, "scenario")?.0;
        write_out(n_sources, s.n_sources(), "n_sources")?;
        write_out(n_collectors, s.n_collectors(), "n_collectors")
    })
}

/// Quantum Fisher information along `direction` (a preset such as
/// `separation-x` or a comma separated vector; null picks the default).
///
/// # Safety
/// `scenario` must be a live handle, `direction` null or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn qfi_qfi(
    scenario: *const QfiScenario,
    direction: *const c_char,
    out: *mut f64,
) -> QfiStatus {
    guard(|| {
        let s = &deref(scenario, "scenario")?.0;
        let p = parameter(s, opt_str_arg(direction, "direction")?)?;
        let report = fisher::qfi(s, &p)?;
        match report.qfi {
            Some(v) if report.converged => write_out(out, v, "out"),
            _ => Err(Failure(
                QfiStatus::Numerical,
                "quantum Fisher information did not converge".into(),
            )),
        }
    })
}

/// Classical Fisher information of counting behind `interferometer`.
///
/// # Safety
/// Handles must be live, `direction` null or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn qfi_cfi(
    scenario: *const QfiScenario,
    interferometer: *const QfiInterferometer,
    direction: *const c_char,
    out: *mut f64,
) -> QfiStatus {
    guard(|| {
        let s = &deref(scenario, "scenario")?.0;
        let r = &deref(interferometer, "interferometer")?.0;
        let p = parameter(s, opt_str_arg(direction, "direction")?)?;
        let report = fisher::cfi(s, &p, r)?;
        match report.cfi {
            Some(v) if report.converged => write_out(out, v, "out"),
            _ => Err(Failure(
                QfiStatus::Numerical,
                "classical Fisher information did not converge".into(),
            )),
        }
    })
}

/// `identity`, `qft`, `bs` or `bs:<alpha>` on `n` ports.
///
/// # Safety
/// `name` must be NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn qfi_interferometer_builtin(
    name: *const c_char,
    n: usize,
    out: *mut *mut QfiInterferometer,
) -> QfiStatus {
    guard(|| emit_interferometer(out, Interferometer::builtin(str_arg(name, "name")?, n)?))
}

/// Reads the JSON form written by the command line tool.
///
/// # Safety
/// `text` must be NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn qfi_interferometer_from_json(
    text: *const c_char,
    out: *mut *mut QfiInterferometer,
) -> QfiStatus {
    guard(|| emit_interferometer(out, Interferometer::from_json_str(str_arg(text, "text")?)?))
}

/// Synthesizes the measurement for `direction` on `scenario`.
///
/// # Safety
/// `scenario` must be live, `direction` null or NUL-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn qfi_interferometer_design(
    scenario: *const QfiScenario,
    direction: *const c_char,
    out: *mut *mut QfiInterferometer,
) -> QfiStatus {
    guard(|| {
        let s = &deref(scenario, "scenario")?.0;
        let p = parameter(s, opt_str_arg(direction, "direction")?)?;
        emit_interferometer(out, interferometer::design(s, &p)?.interferometer)
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn qfi_interferometer_dim(
    interferometer: *const QfiInterferometer,
    out: *mut usize,
) -> QfiStatus {
    guard(|| write_out(out, deref(interferometer, "interferometer")?.0.dim(), "out"))
}

/// Copies the matrix row-major into `re` and `im`, each holding `len >= dim²` doubles.
///
/// # Safety
/// `re` and `im` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn qfi_interferometer_matrix(
    interferometer: *const QfiInterferometer,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> QfiStatus {
    guard(|| {
        let m = deref(interferometer, "interferometer")?.0.matrix();
        let n = m.nrows();
        if len < n * n {
            return Err(Failure(
                QfiStatus::BufferTooSmall,
                format!("need {} entries, got {len}", n * n),
            ));
        }
        if re.is_null() || im.is_null() {
            return Err(null("output buffer"));
        }
        let (re, im) = (
            std::slice::from_raw_parts_mut(re, len),
            std::slice::from_raw_parts_mut(im, len),
        );
        for i in 0..n {
            for j in 0..n {
                re[i * n + j] = m[(i, j)].re;
                im[i * n + j] = m[(i, j)].im;
            }
        }
        Ok(())
    })
}

/// # Safety
/// `interferometer` must come from a `qfi_interferometer_*` constructor, or be null.
#[no_mangle]
pub unsafe extern "C" fn qfi_interferometer_free(interferometer: *mut QfiInterferometer) {
    if !interferometer.is_null() {
        drop(Box::from_raw(interferometer));
    }
}

/// Closed-form paraxial QFI matrix over `(x, y, z)`, written row-major into `out[9]`.
/// `uv` holds `n` collector positions as `u0, v0, u1, v1, ...`.
///
/// # Safety
/// `uv` must hold `2n` doubles and `out` nine.
#[no_mangle]
pub unsafe extern "C" fn qfi_paraxial_qfi_matrix(
    uv: *const f64,
    n: usize,
    k: f64,
    z0: f64,
    target: QfiTarget,
    out: *mut f64,
) -> QfiStatus {
    guard(|| {
        if uv.is_null() && n > 0 {
            return Err(null("uv"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let coords = if n == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(uv, 2 * n)
        };
        let collectors: Vec<Collector> = coords
            .chunks_exact(2)
            .map(|c| Collector::new(c[0], c[1]))
            .collect();
        let target = match target {
            QfiTarget::SingleSource => Target::SingleSource,
            QfiTarget::TwoSourceSeparation => Target::TwoSourceSeparation,
            QfiTarget::TwoSourceCentroid => Target::TwoSourceCentroid,
        };
        let f = fisher::paraxial_qfi_matrix(&collectors, k, z0, target)?;
        let out = std::slice::from_raw_parts_mut(out, 9);
        for (i, row) in f.iter().enumerate() {
            out[3 * i..3 * i + 3].copy_from_slice(row);
        }
        Ok(())
    })
}
