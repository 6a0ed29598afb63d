//! C ABI over the sparse simulator.
//!
//! States are opaque `SparqState` handles owned by the caller and released
//! with [`sparq_state_free`]. Every fallible call returns a [`SparqStatus`];
//! on failure the message is kept per thread and read back with
//! [`sparq_last_error`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_complex::Complex64;
use sparq::gates::{apply_flip, apply_unitary2, measure_register_seeded};
use sparq::qasm::{lower_and_run, parse_qasm, RunOptions};
use sparq::qram::qram_load;
use sparq::{ControlSpec, Error, ExecConfig, QramMemory, RegisterId, RegisterType, SparseState, Unitary2};

/// Opaque simulator state.
pub struct SparqState {
    inner: SparseState,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SparqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    RegisterError = 3,
    GateError = 4,
    QramError = 5,
    ParseError = 6,
    RuntimeError = 7,
    Panic = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn classify(e: &Error) -> SparqStatus {
    use Error::*;
    match e {
        DuplicateName(_) | WidthOutOfRange(_) | CapacityExceeded(_) | NotActive(_) | UnknownRegister(_)
        | NonZeroContent(_) => SparqStatus::RegisterError,
        InvalidTarget { .. } | InvalidControl(_) | NonUnitPhase(_) | NotUnitary(_) | AliasedRegisters(_) => {
            SparqStatus::GateError
        }
        InvalidMemory(_) | EntryOutOfRange { .. } | WidthMismatch(..) => SparqStatus::QramError,
        Qasm(_) | ParseError { .. } => SparqStatus::ParseError,
        _ => SparqStatus::RuntimeError,
    }
}

/// Runs `f`, recording any error or panic.
fn guard(f: impl FnOnce() -> Result<(), (SparqStatus, String)>) -> SparqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SparqStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SparqStatus::Panic
        }
    }
}

fn lib(e: Error) -> (SparqStatus, String) {
    (classify(&e), e.to_string())
}

fn null(what: &str) -> (SparqStatus, String) {
    (SparqStatus::NullPointer, format!("{what} is null"))
}

unsafe fn state_mut<'a>(p: *mut SparqState) -> Result<&'a mut SparseState, (SparqStatus, String)> {
    p.as_mut().map(|s| &mut s.inner).ok_or_else(|| null("state"))
}

unsafe fn state_ref<'a>(p: *const SparqState) -> Result<&'a SparseState, (SparqStatus, String)> {
    p.as_ref().map(|s| &s.inner).ok_or_else(|| null("state"))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (SparqStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (SparqStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sparq_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// New state with no registers and a single branch of amplitude 1.
#[no_mangle]
pub extern "C" fn sparq_state_new() -> *mut SparqState {
    Box::into_raw(Box::new(SparqState {
        inner: SparseState::new(),
    }))
}

/// Releases a state. Null is ignored.
///
/// # Safety
/// `state` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sparq_state_free(state: *mut SparqState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Adds a zero-initialized register and writes its id to `out_id`.
///
/// # Safety
/// Pointers must be valid; `name` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn sparq_state_add_register(
    state: *mut SparqState,
    name: *const c_char,
    width: u32,
    out_id: *mut u32,
) -> SparqStatus {
    guard(|| {
        let s = state_mut(state)?;
        let name = c_str(name, "name")?;
        let out = out_id.as_mut().ok_or_else(|| null("out_id"))?;
        let dtype = if width == 1 { RegisterType::Boolean } else { RegisterType::UnsignedInt };
        *out = s.add_register(name, width, dtype).map_err(lib)?.0;
        Ok(())
    })
}

/// Looks a register up by name.
///
/// # Safety
/// Pointers must be valid; `name` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn sparq_state_register_id(
    state: *const SparqState,
    name: *const c_char,
    out_id: *mut u32,
) -> SparqStatus {
    guard(|| {
        let s = state_ref(state)?;
        let name = c_str(name, "name")?;
        let out = out_id.as_mut().ok_or_else(|| null("out_id"))?;
        *out = s.register(name).map_err(lib)?.0;
        Ok(())
    })
}

/// Number of branches; 0 for a null handle.
///
/// # Safety
/// `state` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn sparq_state_branch_count(state: *const SparqState) -> usize {
    state.as_ref().map_or(0, |s| s.inner.len())
}

/// Total width of the active registers; 0 for a null handle.
///
/// # Safety
/// `state` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn sparq_state_qubit_count(state: *const SparqState) -> u32 {
    state.as_ref().map_or(0, |s| s.inner.qubit_count())
}

/// Sum of squared amplitude moduli.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sparq_state_norm(state: *const SparqState, out: *mut f64) -> SparqStatus {
    guard(|| {
        let s = state_ref(state)?;
        *out.as_mut().ok_or_else(|| null("out"))? = s.norm_sqr();
        Ok(())
    })
}

unsafe fn controls(
    regs: *const u32,
    bits: *const u32,
    values: *const u8,
    n: usize,
) -> Result<ControlSpec, (SparqStatus, String)> {
    let mut spec = ControlSpec::none();
    if n == 0 {
        return Ok(spec);
    }
    if regs.is_null() || bits.is_null() {
        return Err(null("control arrays"));
    }
    let regs = std::slice::from_raw_parts(regs, n);
    let bits = std::slice::from_raw_parts(bits, n);
    for k in 0..n {
        let v = values.is_null() || *values.add(k) != 0;
        spec = spec.and(RegisterId(regs[k]), bits[k], v);
    }
    Ok(spec)
}

/// Applies the 2x2 unitary `m` (row-major, interleaved re/im, 8 doubles) to
/// bit `bit` of register `reg`. Control `k` requires bit `ctrl_bits[k]` of
/// register `ctrl_regs[k]` to equal `ctrl_values[k]`; a null `ctrl_values`
/// means all ones.
///
/// # Safety
/// `m` must point to 8 doubles; control arrays must hold `n_ctrl` entries.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn sparq_apply_unitary(
    state: *mut SparqState,
    reg: u32,
    bit: u32,
    m: *const f64,
    ctrl_regs: *const u32,
    ctrl_bits: *const u32,
    ctrl_values: *const u8,
    n_ctrl: usize,
) -> SparqStatus {
    guard(|| {
        let s = state_mut(state)?;
        if m.is_null() {
            return Err(null("matrix"));
        }
        let m = std::slice::from_raw_parts(m, 8);
        let c = |k: usize| Complex64::new(m[2 * k], m[2 * k + 1]);
        let u = Unitary2::new(c(0), c(1), c(2), c(3)).map_err(lib)?;
        let ctl = controls(ctrl_regs, ctrl_bits, ctrl_values, n_ctrl)?;
        apply_unitary2(s, RegisterId(reg), bit, &u, &ctl).map_err(lib)
    })
}

/// Hadamard on one bit.
///
/// # Safety
/// `state` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sparq_apply_h(state: *mut SparqState, reg: u32, bit: u32) -> SparqStatus {
    guard(|| {
        let s = state_mut(state)?;
        apply_unitary2(s, RegisterId(reg), bit, &Unitary2::h(), &ControlSpec::none()).map_err(lib)
    })
}

/// X on one bit, optionally controlled (see [`sparq_apply_unitary`]).
///
/// # Safety
/// `state` must be valid; control arrays must hold `n_ctrl` entries.
#[no_mangle]
pub unsafe extern "C" fn sparq_apply_x(
    state: *mut SparqState,
    reg: u32,
    bit: u32,
    ctrl_regs: *const u32,
    ctrl_bits: *const u32,
    ctrl_values: *const u8,
    n_ctrl: usize,
) -> SparqStatus {
    guard(|| {
        let s = state_mut(state)?;
        let ctl = controls(ctrl_regs, ctrl_bits, ctrl_values, n_ctrl)?;
        apply_flip(s, RegisterId(reg), bit, &ctl).map_err(lib)
    })
}

/// `|a⟩|x⟩ → |a⟩|x ⊕ entries[a]⟩` with `len == 2^addr_width` entries.
///
/// # Safety
/// `entries` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn sparq_qram_load(
    state: *mut SparqState,
    addr: u32,
    data: u32,
    addr_width: u32,
    word_width: u32,
    entries: *const u64,
    len: usize,
) -> SparqStatus {
    guard(|| {
        let s = state_mut(state)?;
        if entries.is_null() && len > 0 {
            return Err(null("entries"));
        }
        let words = if len == 0 { Vec::new() } else { std::slice::from_raw_parts(entries, len).to_vec() };
        let mem = QramMemory::new(addr_width, word_width, words).map_err(lib)?;
        qram_load(s, RegisterId(addr), RegisterId(data), &mem).map_err(lib)
    })
}

/// Measures a whole register with a seeded generator and collapses the state.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sparq_measure_register(
    state: *mut SparqState,
    reg: u32,
    seed: u64,
    out_value: *mut u64,
) -> SparqStatus {
    guard(|| {
        let s = state_mut(state)?;
        let out = out_value.as_mut().ok_or_else(|| null("out_value"))?;
        *out = measure_register_seeded(s, RegisterId(reg), seed).map_err(lib)?;
        Ok(())
    })
}

/// Writes the dense statevector as interleaved re/im pairs. `len` is the
/// number of doubles available and must be at least `2 * 2^qubits`. Register
/// 0 occupies the least significant index bits.
///
/// # Safety
/// `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sparq_state_dense(state: *const SparqState, out: *mut f64, len: usize) -> SparqStatus {
    guard(|| {
        let s = state_ref(state)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let v = s.dense_vector().map_err(lib)?;
        if len < 2 * v.len() {
            return Err((SparqStatus::InvalidArgument, format!("buffer holds {len} doubles, need {}", 2 * v.len())));
        }
        let out = std::slice::from_raw_parts_mut(out, 2 * v.len());
        for (k, a) in v.iter().enumerate() {
            out[2 * k] = a.re;
            out[2 * k + 1] = a.im;
        }
        Ok(())
    })
}

/// Parses and runs OpenQASM 2.0 source on `threads` workers. On success
/// `*out_state` receives the final state, which the caller frees.
///
/// # Safety
/// `source` must be NUL-terminated; `out_state` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sparq_run_qasm(
    source: *const c_char,
    threads: u32,
    seed: u64,
    out_state: *mut *mut SparqState,
) -> SparqStatus {
    guard(|| {
        let src = c_str(source, "source")?;
        let out = out_state.as_mut().ok_or_else(|| null("out_state"))?;
        let ir = parse_qasm(src).map_err(|e| (SparqStatus::ParseError, e.to_string()))?;
        let opts = RunOptions {
            exec: ExecConfig::with_threads(threads.max(1) as usize),
            seed,
            ..RunOptions::default()
        };
        let (_, state) = lower_and_run(&ir, &opts).map_err(lib)?;
        *out = Box::into_raw(Box::new(SparqState { inner: state }));
        Ok(())
    })
}
