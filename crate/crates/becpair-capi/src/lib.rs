//! C ABI for the becpair simulator: opaque handles, status codes, and a
//! thread-local last-error message. All strings returned through out
//! parameters are heap-allocated C strings the caller must release with
//! [`becpair_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, c_double, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use becpair::config::RunConfig;
use becpair::engine::{self, TwoParticlePattern};
use becpair::error::Error;
use becpair::geometry::Side;
use becpair::{analysis, feasibility, output, timing};

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BecpairStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    ParseError = 3,
    ValidationError = 4,
    ConvergenceError = 5,
    IoError = 6,
    InternalPanic = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> BecpairStatus {
    match err {
        Error::Config { .. } => BecpairStatus::ParseError,
        Error::Usage(_) => BecpairStatus::InvalidArgument,
        Error::Convergence { .. } => BecpairStatus::ConvergenceError,
        Error::Io { .. } => BecpairStatus::IoError,
        _ => BecpairStatus::ValidationError,
    }
}

fn fail(err: &Error) -> BecpairStatus {
    set_last_error(&err.to_string());
    status_of(err)
}

fn guarded<F: FnOnce() -> BecpairStatus>(f: F) -> BecpairStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_last_error("internal panic");
            BecpairStatus::InternalPanic
        }
    }
}

/// Opaque run configuration handle.
pub struct BecpairConfig {
    inner: RunConfig,
}

/// Opaque two-particle pattern handle.
pub struct BecpairPattern {
    inner: TwoParticlePattern,
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn becpair_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the last error on this thread, valid until the next failing
/// call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn becpair_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must be a pointer previously returned through an out parameter of
/// this library, not yet freed, or null.
#[no_mangle]
pub unsafe extern "C" fn becpair_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

unsafe fn str_arg<'a>(ptr: *const c_char) -> Option<&'a str> {
    if ptr.is_null() {
        return None;
    }
    CStr::from_ptr(ptr).to_str().ok()
}

fn string_out(out: *mut *mut c_char, text: String) -> BecpairStatus {
    match CString::new(text.replace('\0', " ")) {
        Ok(cs) => {
            unsafe { *out = cs.into_raw() };
            BecpairStatus::Ok
        }
        Err(_) => {
            set_last_error("string contains interior nul");
            BecpairStatus::InternalPanic
        }
    }
}

/// Parse a configuration in the `key = value unit` grammar.
///
/// # Safety
/// `text` must be a valid nul-terminated UTF-8 string and `out_config` a
/// valid writable pointer.
#[no_mangle]
pub unsafe extern "C" fn becpair_config_parse(
    text: *const c_char,
    out_config: *mut *mut BecpairConfig,
) -> BecpairStatus {
    guarded(|| {
        if out_config.is_null() {
            set_last_error("out_config is null");
            return BecpairStatus::NullArgument;
        }
        let Some(text) = str_arg(text) else {
            set_last_error("text is null or not UTF-8");
            return BecpairStatus::NullArgument;
        };
        match RunConfig::parse(text, "<memory>") {
            Ok(inner) => {
                *out_config = Box::into_raw(Box::new(BecpairConfig { inner }));
                BecpairStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Override one key on a parsed configuration, using the same textual
/// grammar as the file values.
///
/// # Safety
/// `config` must be a live handle from [`becpair_config_parse`]; `key` and
/// `value` must be valid nul-terminated UTF-8 strings.
#[no_mangle]
pub unsafe extern "C" fn becpair_config_set(
    config: *mut BecpairConfig,
    key: *const c_char,
    value: *const c_char,
) -> BecpairStatus {
    guarded(|| {
        let Some(cfg) = config.as_mut() else {
            set_last_error("config is null");
            return BecpairStatus::NullArgument;
        };
        let (Some(key), Some(value)) = (str_arg(key), str_arg(value)) else {
            set_last_error("key/value is null or not UTF-8");
            return BecpairStatus::NullArgument;
        };
        if let Err(e) = cfg.inner.set(key, value).and_then(|_| cfg.inner.revalidate()) {
            return fail(&e);
        }
        BecpairStatus::Ok
    })
}

/// # Safety
/// `config` must be a handle from [`becpair_config_parse`] or null.
#[no_mangle]
pub unsafe extern "C" fn becpair_config_free(config: *mut BecpairConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Run the engine to convergence and return the pattern handle.
///
/// # Safety
/// `config` must be a live handle and `out_pattern` writable.
#[no_mangle]
pub unsafe extern "C" fn becpair_simulate(
    config: *const BecpairConfig,
    out_pattern: *mut *mut BecpairPattern,
) -> BecpairStatus {
    guarded(|| {
        let Some(cfg) = config.as_ref() else {
            set_last_error("config is null");
            return BecpairStatus::NullArgument;
        };
        if out_pattern.is_null() {
            set_last_error("out_pattern is null");
            return BecpairStatus::NullArgument;
        }
        let result = (|| -> becpair::Result<TwoParticlePattern> {
            let cfg = &cfg.inner;
            let (pattern, _) = engine::converged_pattern(
                &cfg.geometry()?,
                &cfg.source()?,
                &cfg.grid()?,
                cfg.beam()?.de_broglie_wavelength,
                &cfg.engine_options(),
                cfg.sampling_override()?,
            )?;
            Ok(pattern)
        })();
        match result {
            Ok(inner) => {
                *out_pattern = Box::into_raw(Box::new(BecpairPattern { inner }));
                BecpairStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// # Safety
/// `pattern` must be a handle from [`becpair_simulate`] or null.
#[no_mangle]
pub unsafe extern "C" fn becpair_pattern_free(pattern: *mut BecpairPattern) {
    if !pattern.is_null() {
        drop(Box::from_raw(pattern));
    }
}

/// Grid dimensions of a pattern: `n_a` rows (x_A) by `n_b` columns (x_B).
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn becpair_pattern_dims(
    pattern: *const BecpairPattern,
    n_a: *mut usize,
    n_b: *mut usize,
) -> BecpairStatus {
    guarded(|| {
        let Some(p) = pattern.as_ref() else {
            set_last_error("pattern is null");
            return BecpairStatus::NullArgument;
        };
        if n_a.is_null() || n_b.is_null() {
            set_last_error("dimension out-pointer is null");
            return BecpairStatus::NullArgument;
        }
        *n_a = p.inner.axis_a.len();
        *n_b = p.inner.axis_b.len();
        BecpairStatus::Ok
    })
}

/// Copy the row-major |psi|^2 values into `buffer` (length n_a * n_b).
///
/// # Safety
/// `buffer` must point to at least `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn becpair_pattern_values(
    pattern: *const BecpairPattern,
    buffer: *mut c_double,
    len: usize,
) -> BecpairStatus {
    guarded(|| {
        let Some(p) = pattern.as_ref() else {
            set_last_error("pattern is null");
            return BecpairStatus::NullArgument;
        };
        if buffer.is_null() {
            set_last_error("buffer is null");
            return BecpairStatus::NullArgument;
        }
        if len != p.inner.values.len() {
            set_last_error("buffer length does not match pattern size");
            return BecpairStatus::InvalidArgument;
        }
        std::ptr::copy_nonoverlapping(p.inner.values.as_ptr(), buffer, len);
        BecpairStatus::Ok
    })
}

/// Copy one detector axis: side 0 = A, side 1 = B.
///
/// # Safety
/// `buffer` must point to at least `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn becpair_pattern_axis(
    pattern: *const BecpairPattern,
    side: c_int,
    buffer: *mut c_double,
    len: usize,
) -> BecpairStatus {
    guarded(|| {
        let Some(p) = pattern.as_ref() else {
            set_last_error("pattern is null");
            return BecpairStatus::NullArgument;
        };
        if buffer.is_null() {
            set_last_error("buffer is null");
            return BecpairStatus::NullArgument;
        }
        let axis = match side {
            0 => &p.inner.axis_a,
            1 => &p.inner.axis_b,
            _ => {
                set_last_error("side must be 0 (A) or 1 (B)");
                return BecpairStatus::InvalidArgument;
            }
        };
        if len != axis.len() {
            set_last_error("buffer length does not match axis size");
            return BecpairStatus::InvalidArgument;
        }
        std::ptr::copy_nonoverlapping(axis.as_ptr(), buffer, len);
        BecpairStatus::Ok
    })
}

/// Pattern serialized as CSV (same format the CLI writes).
///
/// # Safety
/// `out_text` must be writable; free the result with [`becpair_string_free`].
#[no_mangle]
pub unsafe extern "C" fn becpair_pattern_csv(
    pattern: *const BecpairPattern,
    out_text: *mut *mut c_char,
) -> BecpairStatus {
    guarded(|| {
        let Some(p) = pattern.as_ref() else {
            set_last_error("pattern is null");
            return BecpairStatus::NullArgument;
        };
        if out_text.is_null() {
            set_last_error("out_text is null");
            return BecpairStatus::NullArgument;
        }
        string_out(out_text, output::pattern_csv_text(&p.inner, ""))
    })
}

/// Structured-text analysis report for a pattern.
///
/// # Safety
/// `out_text` must be writable; free the result with [`becpair_string_free`].
#[no_mangle]
pub unsafe extern "C" fn becpair_pattern_report(
    pattern: *const BecpairPattern,
    out_text: *mut *mut c_char,
) -> BecpairStatus {
    guarded(|| {
        let Some(p) = pattern.as_ref() else {
            set_last_error("pattern is null");
            return BecpairStatus::NullArgument;
        };
        if out_text.is_null() {
            set_last_error("out_text is null");
            return BecpairStatus::NullArgument;
        }
        match analysis::summarize(&p.inner) {
            Ok(summary) => string_out(out_text, output::pattern_report_text(&summary, "")),
            Err(e) => fail(&e),
        }
    })
}

/// Conditional-slice fringe visibility on the given side (0 = A, 1 = B) at
/// detector position 0.
///
/// # Safety
/// `out_visibility` must be writable.
#[no_mangle]
pub unsafe extern "C" fn becpair_pattern_conditional_visibility(
    pattern: *const BecpairPattern,
    side: c_int,
    out_visibility: *mut c_double,
) -> BecpairStatus {
    guarded(|| {
        let Some(p) = pattern.as_ref() else {
            set_last_error("pattern is null");
            return BecpairStatus::NullArgument;
        };
        if out_visibility.is_null() {
            set_last_error("out_visibility is null");
            return BecpairStatus::NullArgument;
        }
        let (conditioning, hint_side) = match side {
            0 => (Side::B, Side::A),
            1 => (Side::A, Side::B),
            _ => {
                set_last_error("side must be 0 (A) or 1 (B)");
                return BecpairStatus::InvalidArgument;
            }
        };
        let result = (|| -> becpair::Result<f64> {
            let slice = analysis::conditional_slice(&p.inner, conditioning, 0.0)?;
            let (da, db) = analysis::side_fringe_distances(&p.inner);
            let hint = match hint_side {
                Side::A => da,
                Side::B => db,
            };
            Ok(analysis::fit_fringes(&slice, hint)?.visibility)
        })();
        match result {
            Ok(v) => {
                *out_visibility = v;
                BecpairStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Structured-text feasibility report for a configuration.
///
/// # Safety
/// `out_text` must be writable; free the result with [`becpair_string_free`].
#[no_mangle]
pub unsafe extern "C" fn becpair_feasibility_report(
    config: *const BecpairConfig,
    out_text: *mut *mut c_char,
) -> BecpairStatus {
    guarded(|| {
        let Some(cfg) = config.as_ref() else {
            set_last_error("config is null");
            return BecpairStatus::NullArgument;
        };
        if out_text.is_null() {
            set_last_error("out_text is null");
            return BecpairStatus::NullArgument;
        }
        let result = (|| -> becpair::Result<String> {
            let cfg = &cfg.inner;
            let report = feasibility::evaluate_chain(&cfg.geometry()?, &cfg.source()?, &cfg.beam()?)?;
            Ok(output::feasibility_report_text(&report, ""))
        })();
        match result {
            Ok(text) => string_out(out_text, text),
            Err(e) => fail(&e),
        }
    })
}

/// Run the timing Monte Carlo configured in `config` and return the
/// structured-text report.
///
/// # Safety
/// `out_text` must be writable; free the result with [`becpair_string_free`].
#[no_mangle]
pub unsafe extern "C" fn becpair_timing_report(
    config: *const BecpairConfig,
    out_text: *mut *mut c_char,
) -> BecpairStatus {
    guarded(|| {
        let Some(cfg) = config.as_ref() else {
            set_last_error("config is null");
            return BecpairStatus::NullArgument;
        };
        if out_text.is_null() {
            set_last_error("out_text is null");
            return BecpairStatus::NullArgument;
        }
        let result = (|| -> becpair::Result<String> {
            let cfg = &cfg.inner;
            let beam = cfg.beam()?;
            let (summary, _) =
                timing::run_shots(&cfg.shot_config(), &beam, cfg.shots, cfg.pairing_window, None)?;
            let spread = timing::pair_time_spread(&beam, cfg.drop_height, cfg.velocity_spread_yz)?;
            Ok(output::timing_report_text(&summary, spread, cfg.pairing_window, ""))
        })();
        match result {
            Ok(text) => string_out(out_text, text),
            Err(e) => fail(&e),
        }
    })
}
