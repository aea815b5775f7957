//! C ABI for `amlab`.
//!
//! Every fallible function returns an [`AmlabStatus`]; on failure a
//! thread-local message is available through [`amlab_last_error`]. Handles
//! are opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use amlab::barriers::control_distance;
use amlab::grid::{Grid, GridField};
use amlab::hamiltonian::{cone, ConeSpec, Hamiltonian, HamiltonianModel};
use amlab::pde_solver::{solve_regularized, SolverConfig, SolverProblem};
use amlab::Error;
use nalgebra::{DMatrix, DVector};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmlabStatus {
    Ok = 0,
    NullPointer = 1,
    Input = 2,
    Domain = 3,
    Config = 4,
    Numerical = 5,
    Io = 6,
    Panic = 7,
}

/// Opaque Hamiltonian model.
pub struct AmlabModel {
    inner: HamiltonianModel,
}

/// Opaque field of nodal values on a cube grid.
pub struct AmlabField {
    inner: GridField,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
}

fn status_of(error: &Error) -> AmlabStatus {
    match error {
        Error::Input(_) => AmlabStatus::Input,
        Error::Domain(_) => AmlabStatus::Domain,
        Error::Config(_) => AmlabStatus::Config,
        Error::Numerical { .. } => AmlabStatus::Numerical,
        Error::Io(_) => AmlabStatus::Io,
    }
}

enum Failure {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> AmlabStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => AmlabStatus::Ok,
        Ok(Err(Failure::Null(name))) => {
            set_error(format!("null pointer: {name}"));
            AmlabStatus::NullPointer
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("panic inside amlab".into());
            AmlabStatus::Panic
        }
    }
}

unsafe fn read<'a, T>(p: *const T, len: usize, name: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn handle<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(name))
}

fn out<T>(p: *mut T, name: &'static str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure::Null(name))
    } else {
        Ok(())
    }
}

fn vector(values: &[f64], dim: usize) -> Result<DVector<f64>, Failure> {
    if values.len() != dim {
        return Err(Error::Input(format!("expected {dim} coordinates, got {}", values.len())).into());
    }
    Ok(DVector::from_column_slice(values))
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn amlab_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// `H(p) = |p|²/2` in `dim` dimensions.
///
/// # Safety
/// `out_model` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn amlab_model_quadratic(dim: usize, out_model: *mut *mut AmlabModel) -> AmlabStatus {
    guard(|| {
        out(out_model, "out_model")?;
        let inner = HamiltonianModel::quadratic(dim)?;
        *out_model = Box::into_raw(Box::new(AmlabModel { inner }));
        Ok(())
    })
}

/// `H(p) = ⟨Ap, p⟩/2` with a symmetric positive definite `A` given row-major.
///
/// # Safety
/// `matrix` must point to `dim * dim` readable doubles; `out_model` as above.
#[no_mangle]
pub unsafe extern "C" fn amlab_model_anisotropic(
    dim: usize,
    matrix: *const f64,
    out_model: *mut *mut AmlabModel,
) -> AmlabStatus {
    guard(|| {
        out(out_model, "out_model")?;
        let entries = read(matrix, dim * dim, "matrix")?;
        let inner = HamiltonianModel::anisotropic(DMatrix::from_row_slice(dim, dim, entries))?;
        *out_model = Box::into_raw(Box::new(AmlabModel { inner }));
        Ok(())
    })
}

/// `H(p) = Σ ((1 + p_a²)^{α/2} − 1)/α` with convexity bounds certified on `[−w, w]ⁿ`.
///
/// # Safety
/// `out_model` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn amlab_model_separable_power(
    dim: usize,
    alpha: f64,
    half_width: f64,
    out_model: *mut *mut AmlabModel,
) -> AmlabStatus {
    guard(|| {
        out(out_model, "out_model")?;
        let inner = HamiltonianModel::separable_power_on_box(dim, alpha, half_width)?;
        *out_model = Box::into_raw(Box::new(AmlabModel { inner }));
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn amlab_model_free(model: *mut AmlabModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn amlab_model_dim(model: *const AmlabModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.dim())
}

/// Writes `H(p)`.
///
/// # Safety
/// `p` must point to `len` readable doubles and `out_value` to one writable double.
#[no_mangle]
pub unsafe extern "C" fn amlab_model_value(
    model: *const AmlabModel,
    p: *const f64,
    len: usize,
    out_value: *mut f64,
) -> AmlabStatus {
    guard(|| {
        let model = handle(model, "model")?;
        out(out_value, "out_value")?;
        let p = vector(read(p, len, "p")?, model.inner.dim())?;
        *out_value = model.inner.value(&p)?;
        Ok(())
    })
}

/// Writes the cone `C_σ(x) = max_{H(p) = σ} p·x`.
///
/// # Safety
/// `x` must point to `len` readable doubles and `out_value` to one writable double.
#[no_mangle]
pub unsafe extern "C" fn amlab_model_cone(
    model: *const AmlabModel,
    sigma: f64,
    x: *const f64,
    len: usize,
    out_value: *mut f64,
) -> AmlabStatus {
    guard(|| {
        let model = handle(model, "model")?;
        out(out_value, "out_value")?;
        let x = vector(read(x, len, "x")?, model.inner.dim())?;
        *out_value = cone(&ConeSpec::new(sigma, &model.inner)?, &x)?;
        Ok(())
    })
}

/// A field on the cube `[−w, w]^dim` with `count` nodes per axis. `values`
/// holds `count^dim` entries, last axis fastest.
///
/// # Safety
/// `values` must point to `len` readable doubles; `out_field` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn amlab_field_new(
    dim: usize,
    half_width: f64,
    count: usize,
    values: *const f64,
    len: usize,
    out_field: *mut *mut AmlabField,
) -> AmlabStatus {
    guard(|| {
        out(out_field, "out_field")?;
        let grid = Grid::cube(dim, half_width, count)?;
        let values = read(values, len, "values")?;
        let inner = GridField::new(grid, values.to_vec())?;
        *out_field = Box::into_raw(Box::new(AmlabField { inner }));
        Ok(())
    })
}

/// # Safety
/// `field` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn amlab_field_free(field: *mut AmlabField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Number of nodes, or 0 for NULL.
///
/// # Safety
/// `field` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn amlab_field_len(field: *const AmlabField) -> usize {
    field.as_ref().map_or(0, |f| f.inner.values().len())
}

/// Copies the nodal values into `buffer`, which must hold exactly
/// [`amlab_field_len`] entries.
///
/// # Safety
/// `buffer` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn amlab_field_values(field: *const AmlabField, buffer: *mut f64, len: usize) -> AmlabStatus {
    guard(|| {
        let field = handle(field, "field")?;
        out(buffer, "buffer")?;
        let values = field.inner.values();
        if len != values.len() {
            return Err(Error::Input(format!("buffer holds {len} values, field has {}", values.len())).into());
        }
        ptr::copy_nonoverlapping(values.as_ptr(), buffer, len);
        Ok(())
    })
}

/// Multilinear interpolation at `x`.
///
/// # Safety
/// `x` must point to `len` readable doubles and `out_value` to one writable double.
#[no_mangle]
pub unsafe extern "C" fn amlab_field_interpolate(
    field: *const AmlabField,
    x: *const f64,
    len: usize,
    out_value: *mut f64,
) -> AmlabStatus {
    guard(|| {
        let field = handle(field, "field")?;
        out(out_value, "out_value")?;
        *out_value = field.inner.interpolate(read(x, len, "x")?)?;
        Ok(())
    })
}

/// Solves `H_{p_i}H_{p_j}u_{ij} + εΔu = 0` with the boundary values of
/// `boundary` and default solver settings. `out_iterations` may be NULL.
///
/// # Safety
/// Handles must be live; `out_field` must point to writable storage.
#[no_mangle]
pub unsafe extern "C" fn amlab_solve(
    model: *const AmlabModel,
    boundary: *const AmlabField,
    epsilon: f64,
    out_field: *mut *mut AmlabField,
    out_iterations: *mut usize,
) -> AmlabStatus {
    guard(|| {
        let model = handle(model, "model")?;
        let boundary = handle(boundary, "boundary")?;
        out(out_field, "out_field")?;
        let problem = SolverProblem::new(&model.inner, boundary.inner.clone(), epsilon, SolverConfig::default())?;
        let solution = solve_regularized(&problem)?;
        if !out_iterations.is_null() {
            *out_iterations = solution.iterations;
        }
        *out_field = Box::into_raw(Box::new(AmlabField { inner: solution.field }));
        Ok(())
    })
}

/// Discounted control distance `ℒ^δ_σ(x₀, ·)` on the grid of `layout`, with
/// `x₀` at `source`, which must be a grid node.
///
/// # Safety
/// Handles must be live; `source` must point to `len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn amlab_control_distance(
    model: *const AmlabModel,
    layout: *const AmlabField,
    sigma: f64,
    delta: f64,
    source: *const f64,
    len: usize,
    out_field: *mut *mut AmlabField,
) -> AmlabStatus {
    guard(|| {
        let model = handle(model, "model")?;
        let layout = handle(layout, "layout")?;
        out(out_field, "out_field")?;
        let source = read(source, len, "source")?;
        let barrier = control_distance(&model.inner, sigma, delta, layout.inner.grid(), source)?;
        *out_field = Box::into_raw(Box::new(AmlabField {
            inner: barrier.value().clone(),
        }));
        Ok(())
    })
}
