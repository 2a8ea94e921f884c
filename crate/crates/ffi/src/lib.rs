//! C ABI over `osclab`. Every function returns an [`OsclabStatus`]; results
//! come back through out-pointers. Handles are opaque and owned by the
//! caller, who releases them with the matching `_free` function. The message
//! for the last failure on the calling thread is available from
//! [`osclab_last_error_message`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use osclab::decay::FamilySpec;
use osclab::instance::ProblemInstance;
use osclab::kernel::{eval_i, kernel_eval, QuadPolicy};
use osclab::nondegeneracy::{certify, Grid};
use osclab::tiling::{build_tiling, Location, Tiling};
use osclab::window::Window;
use osclab::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OsclabStatus {
    Ok = 0,
    InvalidInput = 1,
    ConstraintViolation = 2,
    GradientFloor = 3,
    NoRoot = 4,
    NonConvergence = 5,
    BandLimit = 6,
    OutOfCap = 7,
    BoundaryFrequency = 8,
    CellMismatch = 9,
    OutOfBox = 10,
    DegenerateGradient = 11,
    Parse = 12,
    Io = 13,
    NullPointer = 14,
    Panic = 15,
}

impl From<&Error> for OsclabStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidInput(_) => OsclabStatus::InvalidInput,
            Error::ConstraintViolation(_) => OsclabStatus::ConstraintViolation,
            Error::GradientFloor { .. } => OsclabStatus::GradientFloor,
            Error::NoRoot { .. } => OsclabStatus::NoRoot,
            Error::NonConvergence(_) => OsclabStatus::NonConvergence,
            Error::BandLimit { .. } => OsclabStatus::BandLimit,
            Error::OutOfCap { .. } => OsclabStatus::OutOfCap,
            Error::BoundaryFrequency(_) => OsclabStatus::BoundaryFrequency,
            Error::CellMismatch => OsclabStatus::CellMismatch,
            Error::OutOfBox(_) => OsclabStatus::OutOfBox,
            Error::DegenerateGradient(_) => OsclabStatus::DegenerateGradient,
            Error::Parse { .. } => OsclabStatus::Parse,
            Error::Io(_) => OsclabStatus::Io,
        }
    }
}

/// A problem instance `(d, b0, b1, ρ, Φ, a)`.
pub struct OsclabInstance(ProblemInstance);

/// The frequency tiling at one λ.
pub struct OsclabTiling(Tiling);

/// A tabulated window.
pub struct OsclabWindow(Window);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn fail(status: OsclabStatus, msg: impl Into<String>) -> OsclabStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, mapping errors and panics to status codes.
fn guard(f: impl FnOnce() -> Result<(), OsclabStatus>) -> OsclabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            OsclabStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => fail(OsclabStatus::Panic, "internal panic"),
    }
}

fn lift<T>(r: osclab::Result<T>) -> Result<T, OsclabStatus> {
    r.map_err(|e| fail((&e).into(), e.to_string()))
}

unsafe fn nonnull<'a, T>(p: *const T, what: &str) -> Result<&'a T, OsclabStatus> {
    p.as_ref().ok_or_else(|| fail(OsclabStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, OsclabStatus> {
    p.as_mut().ok_or_else(|| fail(OsclabStatus::NullPointer, format!("{what} is null")))
}

/// Copies the last error message, NUL-terminated and truncated to `len`
/// bytes. Returns the full message length excluding the terminator.
#[no_mangle]
pub unsafe extern "C" fn osclab_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Looks up a built-in instance by name (`paper-even-d2`, `paper-odd-d3`,
/// `flat`, `tilted`, `sum`).
#[no_mangle]
pub unsafe extern "C" fn osclab_instance_builtin(name: *const c_char, result: *mut *mut OsclabInstance) -> OsclabStatus {
    guard(|| {
        let slot = out(result, "result")?;
        *slot = ptr::null_mut();
        let name = nonnull(name, "name")?;
        let name = CStr::from_ptr(name).to_str().map_err(|_| fail(OsclabStatus::InvalidInput, "name is not UTF-8"))?;
        let inst = lift(ProblemInstance::builtin(name))?;
        *slot = Box::into_raw(Box::new(OsclabInstance(inst)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn osclab_instance_free(inst: *mut OsclabInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// `2d`, the ambient dimension.
#[no_mangle]
pub unsafe extern "C" fn osclab_instance_dim(inst: *const OsclabInstance, dim: *mut usize) -> OsclabStatus {
    guard(|| {
        *out(dim, "dim")? = nonnull(inst, "instance")?.0.dim();
        Ok(())
    })
}

/// `C_ρ`, `C'_ρ`, `C_Φ` and `C_a`.
#[no_mangle]
pub unsafe extern "C" fn osclab_instance_constants(
    inst: *const OsclabInstance,
    c_rho: *mut f64,
    c_rho_inv: *mut f64,
    c_phi: *mut f64,
    c_amp: *mut f64,
) -> OsclabStatus {
    guard(|| {
        let i = &nonnull(inst, "instance")?.0;
        *out(c_rho, "c_rho")? = i.c_rho;
        *out(c_rho_inv, "c_rho_inv")? = i.c_rho_inv;
        *out(c_phi, "c_phi")? = i.c_phi;
        *out(c_amp, "c_amp")? = i.c_amp;
        Ok(())
    })
}

/// `OSCLAB_STATUS_OK` when `|λ|^(-1/2) <= min(b1 - b0, 1)`.
#[no_mangle]
pub unsafe extern "C" fn osclab_check_lambda(inst: *const OsclabInstance, lambda: f64) -> OsclabStatus {
    guard(|| lift(nonnull(inst, "instance")?.0.check_lambda(lambda)))
}

#[no_mangle]
pub unsafe extern "C" fn osclab_tiling_new(lambda: f64, xi_max: f64, result: *mut *mut OsclabTiling) -> OsclabStatus {
    guard(|| {
        let slot = out(result, "result")?;
        *slot = ptr::null_mut();
        let t = lift(build_tiling(lambda, xi_max))?;
        *slot = Box::into_raw(Box::new(OsclabTiling(t)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn osclab_tiling_free(t: *mut OsclabTiling) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

#[no_mangle]
pub unsafe extern "C" fn osclab_tiling_len(t: *const OsclabTiling, len: *mut usize) -> OsclabStatus {
    guard(|| {
        *out(len, "len")? = nonnull(t, "tiling")?.0.cells.len();
        Ok(())
    })
}

/// Endpoints of cell `index`, in increasing order of `lo`.
#[no_mangle]
pub unsafe extern "C" fn osclab_tiling_cell(t: *const OsclabTiling, index: usize, lo: *mut i64, hi: *mut i64) -> OsclabStatus {
    guard(|| {
        let cells = &nonnull(t, "tiling")?.0.cells;
        let c = cells
            .get(index)
            .ok_or_else(|| fail(OsclabStatus::InvalidInput, format!("cell index {index} out of range ({} cells)", cells.len())))?;
        *out(lo, "lo")? = c.lo;
        *out(hi, "hi")? = c.hi;
        Ok(())
    })
}

/// The cell whose interior holds `xi`; `OSCLAB_STATUS_BOUNDARY_FREQUENCY`
/// on a shared endpoint.
#[no_mangle]
pub unsafe extern "C" fn osclab_tiling_locate(t: *const OsclabTiling, xi: f64, lo: *mut i64, hi: *mut i64) -> OsclabStatus {
    guard(|| {
        let t = &nonnull(t, "tiling")?.0;
        match lift(t.locate(xi))? {
            Location::Cell { cell, .. } => {
                *out(lo, "lo")? = cell.lo;
                *out(hi, "hi")? = cell.hi;
                Ok(())
            }
            Location::Boundary => Err(fail(OsclabStatus::BoundaryFrequency, format!("frequency {xi} is a cell boundary"))),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn osclab_window_default(result: *mut *mut OsclabWindow) -> OsclabStatus {
    guard(|| {
        let slot = out(result, "result")?;
        *slot = ptr::null_mut();
        let w = lift(Window::default_window())?;
        *slot = Box::into_raw(Box::new(OsclabWindow(w)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn osclab_window_free(w: *mut OsclabWindow) {
    if !w.is_null() {
        drop(Box::from_raw(w));
    }
}

/// `φ(x)` and `min φ̂` on `[-1/2, 1/2]`.
#[no_mangle]
pub unsafe extern "C" fn osclab_window_eval(w: *const OsclabWindow, x: f64, value: *mut f64, fourier_floor: *mut f64) -> OsclabStatus {
    guard(|| {
        let w = &nonnull(w, "window")?.0;
        *out(value, "value")? = w.eval(x);
        if !fourier_floor.is_null() {
            *fourier_floor = w.fourier_floor;
        }
        Ok(())
    })
}

unsafe fn vec_arg(p: *const f64, n: usize, what: &str) -> Result<Vec<f64>, OsclabStatus> {
    if p.is_null() {
        return Err(fail(OsclabStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, n).to_vec())
}

/// The kernel `𝓘(y, ξ)` at `λ`; `y` and `xi` hold `dim` values each.
#[no_mangle]
pub unsafe extern "C" fn osclab_kernel_eval(
    inst: *const OsclabInstance,
    w: *const OsclabWindow,
    t: *const OsclabTiling,
    y: *const f64,
    xi: *const f64,
    dim: usize,
    lambda: f64,
    re: *mut f64,
    im: *mut f64,
) -> OsclabStatus {
    guard(|| {
        let inst = &nonnull(inst, "instance")?.0;
        let w = &nonnull(w, "window")?.0;
        let t = &nonnull(t, "tiling")?.0;
        let y = vec_arg(y, dim, "y")?;
        let xi = vec_arg(xi, dim, "xi")?;
        let v = lift(kernel_eval(inst, w, t, &y, &xi, lambda, &QuadPolicy::default()))?.value;
        *out(re, "re")? = v.re;
        *out(im, "im")? = v.im;
        Ok(())
    })
}

/// `I_λ` for the default extremizer family.
#[no_mangle]
pub unsafe extern "C" fn osclab_extremizer_value(inst: *const OsclabInstance, lambda: f64, re: *mut f64, im: *mut f64) -> OsclabStatus {
    guard(|| {
        let inst = &nonnull(inst, "instance")?.0;
        let fam = lift(FamilySpec::extremizer().at(inst, lambda))?;
        let v = lift(eval_i(inst, &fam, lambda, &QuadPolicy::default()))?.value;
        *out(re, "re")? = v.re;
        *out(im, "im")? = v.im;
        Ok(())
    })
}

/// Samples the nondegeneracy determinant on a tensor grid of `B1` with
/// `density` points per axis and `circle_points` directions.
#[no_mangle]
pub unsafe extern "C" fn osclab_certify(
    inst: *const OsclabInstance,
    density: usize,
    circle_points: usize,
    c_lower: *mut f64,
    failures: *mut usize,
) -> OsclabStatus {
    guard(|| {
        let inst = &nonnull(inst, "instance")?.0;
        if density == 0 || circle_points == 0 {
            return Err(fail(OsclabStatus::InvalidInput, "density and circle_points must be positive"));
        }
        let rep = certify(inst, &Grid::tensor(inst.dim(), inst.b1, density), circle_points);
        *out(c_lower, "c_lower")? = rep.c_lower;
        *out(failures, "failures")? = rep.failures.len();
        Ok(())
    })
}
