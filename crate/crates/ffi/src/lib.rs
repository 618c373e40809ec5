//! C interface to the mixpinn solvers.
//!
//! Configurations and field grids are opaque handles created by this
//! library and released with their `*_free` function. Every fallible call
//! returns an [`MpStatus`]; the message of the most recent failure on the
//! calling thread is available from [`mp_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use mixpinn::config::RunConfig;
use mixpinn::field::{compare, FieldGrid};
use mixpinn::pipeline;
use mixpinn::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Io = 4,
    Parse = 5,
    Structural = 6,
    Domain = 7,
    Training = 8,
    Solver = 9,
    Panic = 10,
}

/// Opaque run configuration.
pub struct MpConfig(RunConfig);

/// Opaque field grid.
pub struct MpField(FieldGrid);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(e: &Error) -> MpStatus {
    match e {
        Error::Structural(_) => MpStatus::Structural,
        Error::Domain(_) => MpStatus::Domain,
        Error::Config(_) => MpStatus::Config,
        Error::Training { .. } => MpStatus::Training,
        Error::Solver(_) => MpStatus::Solver,
        Error::Parse { .. } => MpStatus::Parse,
        Error::Io { .. } => MpStatus::Io,
    }
}

enum Failure {
    Status(MpStatus, String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MpStatus::Ok,
        Ok(Err(Failure::Status(s, m))) => {
            set_error(m);
            s
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            MpStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure::Status(MpStatus::NullPointer, format!("{what} is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Status(MpStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message of the last failed call on this thread. The pointer stays valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mp_config_load(path: *const c_char, out: *mut *mut MpConfig) -> MpStatus {
    guard(|| {
        let cfg = RunConfig::load(Path::new(text(path, "path")?))?;
        emit(out, MpConfig(cfg))
    })
}

/// # Safety
/// `toml` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mp_config_parse(toml: *const c_char, out: *mut *mut MpConfig) -> MpStatus {
    guard(|| {
        let cfg: RunConfig = text(toml, "config text")?.parse()?;
        emit(out, MpConfig(cfg))
    })
}

/// # Safety
/// `cfg` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn mp_config_set_epochs(cfg: *mut MpConfig, epochs: usize) -> MpStatus {
    guard(|| {
        let c = cfg.as_mut().ok_or_else(|| null("config"))?;
        c.0.training.epochs = epochs;
        c.0.ode.epochs = epochs;
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mp_config_free(cfg: *mut MpConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Reference solution on the configured evaluation grid.
///
/// # Safety
/// `cfg` must come from this library and `out` be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mp_solve_fem(cfg: *const MpConfig, out: *mut *mut MpField) -> MpStatus {
    guard(|| {
        let c = handle(cfg, "config")?;
        emit(out, MpField(pipeline::run_fem_on_eval_grid(&c.0)?))
    })
}

/// Trains with `seed` and returns the evaluated field. Divergence is
/// reported as `MP_STATUS_TRAINING`.
///
/// # Safety
/// `cfg` must come from this library and `out` be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mp_solve_pinn(cfg: *const MpConfig, seed: u64, out: *mut *mut MpField) -> MpStatus {
    guard(|| {
        let c = handle(cfg, "config")?;
        let run = pipeline::run_pinn(&c.0, seed)?;
        if let mixpinn::optimizer::TrainStatus::Diverged { epoch, reason } = run.status {
            return Err(Error::Training { epoch, reason }.into());
        }
        emit(out, MpField(run.field))
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mp_field_read_csv(path: *const c_char, out: *mut *mut MpField) -> MpStatus {
    guard(|| {
        let g = FieldGrid::read(Path::new(text(path, "path")?))?;
        emit(out, MpField(g))
    })
}

/// # Safety
/// `field` must come from this library and `path` be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mp_field_write_csv(field: *const MpField, path: *const c_char) -> MpStatus {
    guard(|| {
        let f = handle(field, "field")?;
        f.0.write(Path::new(text(path, "path")?))?;
        Ok(())
    })
}

/// Lattice size; the number of rows is `nx * ny`.
///
/// # Safety
/// `field` must come from this library; `nx` and `ny` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mp_field_dims(field: *const MpField, nx: *mut usize, ny: *mut usize) -> MpStatus {
    guard(|| {
        let f = handle(field, "field")?;
        if nx.is_null() || ny.is_null() {
            return Err(null("output pointer"));
        }
        *nx = f.0.nx();
        *ny = f.0.ny();
        Ok(())
    })
}

/// Copies column `name` (`"x"` and `"y"` give coordinates) into `buf`,
/// which must hold exactly `nx * ny` values.
///
/// # Safety
/// `field` must come from this library, `name` be NUL-terminated and `buf`
/// point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn mp_field_column(
    field: *const MpField,
    name: *const c_char,
    buf: *mut f64,
    len: usize,
) -> MpStatus {
    guard(|| {
        let f = handle(field, "field")?;
        let name = text(name, "column name")?;
        if buf.is_null() {
            return Err(null("buffer"));
        }
        if len != f.0.len() {
            return Err(Failure::Status(
                MpStatus::InvalidArgument,
                format!("buffer holds {len} values, field has {}", f.0.len()),
            ));
        }
        let out = std::slice::from_raw_parts_mut(buf, len);
        match name {
            "x" | "y" => {
                let k = usize::from(name == "y");
                out.iter_mut().zip(f.0.points()).for_each(|(o, p)| *o = p[k]);
            }
            _ => {
                let col = f.0.column(name).ok_or_else(|| {
                    Failure::Status(MpStatus::InvalidArgument, format!("no column named {name:?}"))
                })?;
                out.copy_from_slice(col);
            }
        }
        Ok(())
    })
}

/// # Safety
/// `field` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mp_field_free(field: *mut MpField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Max and mean relative difference of `a` against the reference `b` for a
/// field column or a group (`displacement`, `stress`, `temperature`,
/// `flux`).
///
/// # Safety
/// `a` and `b` must come from this library, `name` be NUL-terminated and
/// `max`, `mean` writable.
#[no_mangle]
pub unsafe extern "C" fn mp_compare(
    a: *const MpField,
    b: *const MpField,
    name: *const c_char,
    max: *mut f64,
    mean: *mut f64,
) -> MpStatus {
    guard(|| {
        let (a, b) = (handle(a, "field a")?, handle(b, "field b")?);
        let name = text(name, "name")?;
        if max.is_null() || mean.is_null() {
            return Err(null("output pointer"));
        }
        let report = compare(&a.0, &b.0)?;
        let d = report.field(name).or_else(|| report.group(name)).ok_or_else(|| {
            Failure::Status(MpStatus::InvalidArgument, format!("no field or group named {name:?}"))
        })?;
        *max = d.max;
        *mean = d.mean;
        Ok(())
    })
}
