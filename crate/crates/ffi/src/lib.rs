//! C interface to `quanvnet`.
//!
//! Objects are opaque heap handles created by `*_new`/`*_load` and released
//! by the matching `*_free`. Every fallible call returns a [`QnnStatus`];
//! on failure a description is available from [`qnn_last_error`] on the
//! same thread. Panics are caught at the boundary and reported as
//! [`QnnStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::slice;

use quanvnet::data::ImageTensor;
use quanvnet::nn::{load_model, predict, Model, Tensor};
use quanvnet::qsim::{GateKind, GateOp, StateVector};
use quanvnet::quanv::{quanv_image, QuanvFilterSpec};
use quanvnet::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QnnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Capacity = 3,
    Dimension = 4,
    Index = 5,
    Decode = 6,
    Config = 7,
    Validation = 8,
    Format = 9,
    Io = 10,
    Panic = 11,
}

/// Gate identifiers accepted by [`qnn_state_apply_gate`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QnnGateKind {
    X = 0,
    Y = 1,
    Z = 2,
    Rx = 3,
    Ry = 4,
    Rz = 5,
    H = 6,
    U1 = 7,
    U2 = 8,
    U3 = 9,
    Cnot = 10,
    Cz = 11,
    Cry = 12,
}

/// State vector handle.
pub struct QnnState {
    inner: StateVector,
}

/// Quanvolution filter handle.
pub struct QnnFilter {
    spec: QuanvFilterSpec,
}

/// Trained model handle.
pub struct QnnModel {
    inner: Model<f32>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> QnnStatus {
    match e {
        Error::Capacity(_) => QnnStatus::Capacity,
        Error::Parameter(_) => QnnStatus::InvalidArgument,
        Error::Index(_) => QnnStatus::Index,
        Error::Dimension(_) => QnnStatus::Dimension,
        Error::Decode(_) => QnnStatus::Decode,
        Error::Config(_) => QnnStatus::Config,
        Error::Validation(_) => QnnStatus::Validation,
        Error::Format { .. } | Error::Csv(_) | Error::Json(_) => QnnStatus::Format,
        Error::Io { .. } => QnnStatus::Io,
    }
}

enum Failure {
    Null(&'static str),
    Arg(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> QnnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QnnStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(&format!("{what} is null"));
            QnnStatus::NullPointer
        }
        Ok(Err(Failure::Arg(msg))) => {
            set_error(&msg);
            QnnStatus::InvalidArgument
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal panic: {msg}"));
            QnnStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn as_mut<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn in_slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn out_slice<'a, T>(p: *mut T, len: usize, what: &'static str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

/// Message of the last failed call on this thread (empty if none). The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qnn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

// ----------------------------------------------------------------- state

/// Creates `|0…0⟩` on `n_qubits` qubits.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn qnn_state_new(n_qubits: usize, out: *mut *mut QnnState) -> QnnStatus {
    guard(|| {
        let out = as_mut(out, "out")?;
        let inner = StateVector::zero(n_qubits)?;
        *out = Box::into_raw(Box::new(QnnState { inner }));
        Ok(())
    })
}

/// # Safety
/// `state` must be null or a handle from [`qnn_state_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qnn_state_free(state: *mut QnnState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Applies one gate. `kind` is a [`QnnGateKind`] value; controlled gates
/// take `targets = {control, target}`.
///
/// # Safety
/// `targets` and `params` must point to `n_targets` and `n_params` readable
/// values (either may be null when its count is 0).
#[no_mangle]
pub unsafe extern "C" fn qnn_state_apply_gate(
    state: *mut QnnState,
    kind: u32,
    targets: *const usize,
    n_targets: usize,
    params: *const f64,
    n_params: usize,
) -> QnnStatus {
    guard(|| {
        let state = as_mut(state, "state")?;
        let kind = *GateKind::ALL
            .get(kind as usize)
            .ok_or_else(|| Failure::Arg(format!("unknown gate kind {kind}")))?;
        let targets = in_slice(targets, n_targets, "targets")?.to_vec();
        let params = in_slice(params, n_params, "params")?.to_vec();
        let op = GateOp::new(kind, params, targets)?;
        state.inner.apply(&op)?;
        Ok(())
    })
}

/// Writes `⟨Z⟩` of `qubit` to `out`.
///
/// # Safety
/// `state` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qnn_state_expectation_z(state: *const QnnState, qubit: usize, out: *mut f64) -> QnnStatus {
    guard(|| {
        let state = as_ref(state, "state")?;
        let out = as_mut(out, "out")?;
        *out = state.inner.expectation_z(qubit)?;
        Ok(())
    })
}

/// Copies the `2^n` amplitudes into `re` and `im`, which must both hold
/// `len == 2^n` values.
///
/// # Safety
/// `re` and `im` must each point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn qnn_state_amplitudes(state: *const QnnState, re: *mut f64, im: *mut f64, len: usize) -> QnnStatus {
    guard(|| {
        let state = as_ref(state, "state")?;
        let amps = state.inner.amplitudes();
        if len != amps.len() {
            return Err(Failure::Arg(format!("buffer holds {len} values, state has {}", amps.len())));
        }
        let re = out_slice(re, len, "re")?;
        let im = out_slice(im, len, "im")?;
        for (i, a) in amps.iter().enumerate() {
            re[i] = a.re;
            im[i] = a.im;
        }
        Ok(())
    })
}

// ---------------------------------------------------------------- filter

/// Creates a 2×2, 4-qubit quanvolution filter.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qnn_filter_new(seed: u64, n_random_layers: usize, n_filters: usize, out: *mut *mut QnnFilter) -> QnnStatus {
    guard(|| {
        let out = as_mut(out, "out")?;
        let spec = QuanvFilterSpec { seed, n_random_layers, n_filters, ..Default::default() };
        spec.validate()?;
        *out = Box::into_raw(Box::new(QnnFilter { spec }));
        Ok(())
    })
}

/// # Safety
/// `filter` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qnn_filter_free(filter: *mut QnnFilter) {
    if !filter.is_null() {
        drop(Box::from_raw(filter));
    }
}

/// Output channels per pixel (`4 · n_filters`), or 0 for a null handle.
///
/// # Safety
/// `filter` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qnn_filter_channels(filter: *const QnnFilter) -> usize {
    filter.as_ref().map_or(0, |f| f.spec.channels())
}

/// Quanvolves a row-major `height × width` grayscale image with values in
/// `[0, 1]`. `out` receives `(height/2) · (width/2) · channels` floats,
/// row-major with channels last; `out_len` must equal that count.
///
/// # Safety
/// `pixels` must hold `height·width` floats and `out` `out_len` floats.
#[no_mangle]
pub unsafe extern "C" fn qnn_filter_apply(
    filter: *const QnnFilter,
    pixels: *const f32,
    height: usize,
    width: usize,
    out: *mut f32,
    out_len: usize,
) -> QnnStatus {
    guard(|| {
        let filter = as_ref(filter, "filter")?;
        let n = height.checked_mul(width).ok_or_else(|| Failure::Arg("image too large".into()))?;
        let pixels = in_slice(pixels, n, "pixels")?;
        let img = ImageTensor::gray(height, width, pixels.to_vec())?;
        let map = quanv_image(&img, &filter.spec)?;
        if out_len != map.values.len() {
            return Err(Failure::Arg(format!("output holds {out_len} values, features need {}", map.values.len())));
        }
        out_slice(out, out_len, "out")?.copy_from_slice(&map.values);
        Ok(())
    })
}

// ----------------------------------------------------------------- model

/// Loads a model file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qnn_model_load(path: *const c_char, out: *mut *mut QnnModel) -> QnnStatus {
    guard(|| {
        if path.is_null() {
            return Err(Failure::Null("path"));
        }
        let out = as_mut(out, "out")?;
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Failure::Arg("path is not UTF-8".into()))?;
        let file = load_model(Path::new(path))?;
        *out = Box::into_raw(Box::new(QnnModel { inner: file.model }));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qnn_model_free(model: *mut QnnModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Writes the per-sample input shape and the class count.
///
/// # Safety
/// All output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn qnn_model_shape(
    model: *const QnnModel,
    height: *mut usize,
    width: *mut usize,
    channels: *mut usize,
    n_classes: *mut usize,
) -> QnnStatus {
    guard(|| {
        let spec = &as_ref(model, "model")?.inner.spec;
        *as_mut(height, "height")? = spec.input[0];
        *as_mut(width, "width")? = spec.input[1];
        *as_mut(channels, "channels")? = spec.input[2];
        *as_mut(n_classes, "n_classes")? = spec.n_classes;
        Ok(())
    })
}

/// Predicts classes for `n` samples stored back to back in `inputs`
/// (`n · H · W · C` floats, channels last) into `classes`.
///
/// # Safety
/// `inputs` must hold `n·H·W·C` floats and `classes` `n` writable values.
#[no_mangle]
pub unsafe extern "C" fn qnn_model_predict(model: *const QnnModel, inputs: *const f32, n: usize, classes: *mut u32) -> QnnStatus {
    guard(|| {
        let model = &as_ref(model, "model")?.inner;
        let [h, w, c] = model.spec.input;
        let len = n
            .checked_mul(h * w * c)
            .ok_or_else(|| Failure::Arg("batch too large".into()))?;
        let x = Tensor::new(vec![n, h, w, c], in_slice(inputs, len, "inputs")?.to_vec())?;
        let out = out_slice(classes, n, "classes")?;
        if n == 0 {
            return Ok(());
        }
        for (o, p) in out.iter_mut().zip(predict(model, &x)?) {
            *o = p as u32;
        }
        Ok(())
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qnn_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}
