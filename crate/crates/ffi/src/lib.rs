//! C ABI over the `switchcos` library.
//!
//! Models are opaque handles created from JSON text or a file and released
//! with `sc_model_free`. Every fallible call returns an `ScStatus`; on
//! failure `sc_last_error` returns a message for the calling thread. Output
//! pointers are written only on success. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use num_complex::Complex64;
use switchcos::mc::{price_european_mc, McConfig};
use switchcos::{
    data_io, estimation::ParamBounds, switching_cf, CharFn, ContractSpec, CosConfig, Error, OptionKind, SwitchingModel,
};

/// Result codes of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// An argument or model parameter was out of range.
    InvalidArgument = 3,
    /// Malformed JSON or CSV input.
    Parse = 4,
    /// A numerical routine failed, for example a negative COS price.
    Numerical = 5,
    /// A file could not be read or written.
    Io = 6,
    /// An internal panic was caught.
    Panic = 7,
}

/// Option type codes accepted by the pricing calls.
pub const SC_CALL: i32 = 0;
pub const SC_PUT: i32 = 1;

/// Opaque model handle.
pub struct ScModel {
    model: SwitchingModel,
}

/// Monte Carlo estimate with its 95% confidence interval.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct ScMcResult {
    pub price: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> ScStatus {
    match e {
        Error::InvalidParameter { .. } | Error::Invalid(_) | Error::DegenerateInterval { .. } => {
            ScStatus::InvalidArgument
        }
        Error::Parse { .. } | Error::Json(_) | Error::Csv(_) => ScStatus::Parse,
        Error::Io(_) => ScStatus::Io,
        _ => ScStatus::Numerical,
    }
}

struct Failure(ScStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

/// Runs `f`, recording the message of any error or panic.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ScStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            ScStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            ScStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(ScStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn model_ref<'a>(p: *const ScModel) -> Result<&'a SwitchingModel, Failure> {
    p.as_ref().map(|m| &m.model).ok_or_else(|| null("model"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(ScStatus::InvalidUtf8, format!("`{what}` is not UTF-8")))
}

fn kind_arg(kind: i32) -> Result<OptionKind, Failure> {
    match kind {
        SC_CALL => Ok(OptionKind::Call),
        SC_PUT => Ok(OptionKind::Put),
        k => Err(Failure(
            ScStatus::InvalidArgument,
            format!("option kind {k} is neither SC_CALL nor SC_PUT"),
        )),
    }
}

fn emit_model(model: SwitchingModel, out: *mut *mut ScModel) {
    // SAFETY: callers check `out` for null before building the model
    unsafe { *out = Box::into_raw(Box::new(ScModel { model })) };
}

/// Message describing the last failed call on this thread, or an empty
/// string. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn sc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses a model document (see the library's model file format).
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sc_model_from_json(json: *const c_char, out: *mut *mut ScModel) -> ScStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = str_arg(json, "json")?;
        emit_model(data_io::model_from_json(text, &ParamBounds::default())?, out);
        Ok(())
    })
}

/// Reads a model file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sc_model_load(path: *const c_char, out: *mut *mut ScModel) -> ScStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = str_arg(path, "path")?;
        emit_model(data_io::load_model(path)?, out);
        Ok(())
    })
}

/// Copy of `model` with both drifts set to their risk-neutral values.
///
/// # Safety
/// `model` must come from this library and `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sc_model_risk_neutral(model: *const ScModel, out: *mut *mut ScModel) -> ScStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        emit_model(model_ref(model)?.risk_neutral()?, out);
        Ok(())
    })
}

/// Serializes `model` as JSON. Release the string with `sc_string_free`.
///
/// # Safety
/// `model` must come from this library and `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sc_model_to_json(model: *const ScModel, out: *mut *mut c_char) -> ScStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = data_io::model_to_json(model_ref(model)?)?;
        *out = CString::new(text)
            .map_err(|_| Failure(ScStatus::Panic, "interior NUL".into()))?
            .into_raw();
        Ok(())
    })
}

/// Releases a model handle. Null is ignored.
///
/// # Safety
/// `model` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sc_model_free(model: *mut ScModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// COS price of a European option. `n_terms` of 0 selects the default.
///
/// # Safety
/// `model` must come from this library and `out_price` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sc_price_cos(
    model: *const ScModel,
    maturity: f64,
    strike: f64,
    kind: i32,
    n_terms: u32,
    out_price: *mut f64,
) -> ScStatus {
    guard(|| {
        if out_price.is_null() {
            return Err(null("out_price"));
        }
        let m = model_ref(model)?;
        let contract = ContractSpec::new(strike, maturity, kind_arg(kind)?)?;
        let config = if n_terms == 0 {
            CosConfig::default()
        } else {
            CosConfig::with_terms(n_terms as usize)
        };
        *out_price = switchcos::cos::price_contract(m, &contract, &config)?;
        Ok(())
    })
}

/// Monte Carlo price. A `dt` of zero or less steps once per regime segment.
///
/// # Safety
/// `model` must come from this library and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sc_price_mc(
    model: *const ScModel,
    maturity: f64,
    strike: f64,
    kind: i32,
    n_paths: u64,
    dt: f64,
    seed: u64,
    out: *mut ScMcResult,
) -> ScStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let m = model_ref(model)?;
        let contract = ContractSpec::new(strike, maturity, kind_arg(kind)?)?;
        let config = McConfig {
            n_paths: n_paths as usize,
            dt: if dt > 0.0 { dt } else { maturity },
            seed,
        };
        let r = price_european_mc(m, &contract, &config)?;
        *out = ScMcResult {
            price: r.price,
            std_error: r.std_error,
            ci_low: r.ci95.0,
            ci_high: r.ci95.1,
        };
        Ok(())
    })
}

/// Characteristic function of the log-return over `t` at real `u`.
///
/// # Safety
/// `model` must come from this library; `out_re` and `out_im` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sc_switching_cf(
    model: *const ScModel,
    t: f64,
    u: f64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> ScStatus {
    guard(|| {
        if out_re.is_null() || out_im.is_null() {
            return Err(null("out_re/out_im"));
        }
        let cf = CharFn::log_return(model_ref(model)?, t)?;
        let v = switching_cf(&cf, Complex64::new(u, 0.0))?;
        *out_re = v.re;
        *out_im = v.im;
        Ok(())
    })
}

/// Black-Scholes price, for checking the reduced model.
///
/// # Safety
/// `out_price` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sc_bs_price(
    s0: f64,
    strike: f64,
    r: f64,
    sigma: f64,
    t: f64,
    kind: i32,
    out_price: *mut f64,
) -> ScStatus {
    guard(|| {
        if out_price.is_null() {
            return Err(null("out_price"));
        }
        if !(s0 > 0.0 && strike > 0.0 && sigma > 0.0 && t > 0.0 && r.is_finite()) {
            return Err(Failure(
                ScStatus::InvalidArgument,
                "s0, strike, sigma and t must be positive".into(),
            ));
        }
        *out_price = switchcos::bs_closed_form(s0, strike, r, sigma, t, kind_arg(kind)?);
        Ok(())
    })
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn sc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
