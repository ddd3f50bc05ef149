//! C ABI over the recsample toolkit.
//!
//! Datasets travel as opaque handles; every fallible call returns an
//! [`RsStatus`] and writes results through out-pointers. The last error
//! message is kept per thread and readable via
//! [`recsample_last_error_message`]. All handles must be released with
//! their matching `_free` function exactly once.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::path::PathBuf;

use libc::{c_char, c_double};

use recsample::data::{export_csv, filter_min_interactions, ingest_csv, CsvSchema, Dataset};
use recsample::error::Error;
use recsample::eval::{generate_synthetic, kendall_tau, SamplingStrategy, SyntheticConfig};
use recsample::rng::child_seed;
use recsample::sampling::{sample_with_strategy, SampleSpec};
use recsample::svp::{
    importance_explicit, importance_implicit, importance_prop, svp_sample, train_proxy,
    PropensityParams,
};
use recsample::models::TrainConfig;

/// Opaque interaction-log handle.
pub struct RsDataset {
    inner: Dataset,
}

/// Call outcome; anything but `Ok` leaves a message for
/// `recsample_last_error_message`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RsStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    EmptyDataset = 5,
    Precondition = 6,
    Parameter = 7,
    BudgetExceedsTrain = 8,
    Diverged = 9,
    UnknownIndex = 10,
    Other = 99,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = sanitized);
}

fn status_of(err: &Error) -> RsStatus {
    match err {
        Error::Io(_) => RsStatus::Io,
        Error::Parse { .. } => RsStatus::Parse,
        Error::EmptyDataset(_) => RsStatus::EmptyDataset,
        Error::Precondition(_) => RsStatus::Precondition,
        Error::Parameter(_) | Error::Config(_) => RsStatus::Parameter,
        Error::BudgetExceedsTrain { .. } => RsStatus::BudgetExceedsTrain,
        Error::Diverged { .. } => RsStatus::Diverged,
        Error::UnknownIndex { .. } => RsStatus::UnknownIndex,
        _ => RsStatus::Other,
    }
}

fn fail(err: Error) -> RsStatus {
    let status = status_of(&err);
    set_error(&err.to_string());
    status
}

/// # Safety
/// `ptr` must be null or a valid NUL-terminated string.
unsafe fn required_str<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, RsStatus> {
    if ptr.is_null() {
        set_error(&format!("{name} must not be null"));
        return Err(RsStatus::NullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error(&format!("{name} is not valid UTF-8"));
        RsStatus::InvalidUtf8
    })
}

fn emit(out: *mut *mut RsDataset, dataset: Dataset) -> RsStatus {
    if out.is_null() {
        set_error("out pointer must not be null");
        return RsStatus::NullArgument;
    }
    let boxed = Box::new(RsDataset { inner: dataset });
    unsafe { *out = Box::into_raw(boxed) };
    RsStatus::Ok
}

/// # Safety
/// `handle` must be a live pointer produced by this library.
unsafe fn dataset_ref<'a>(handle: *const RsDataset, name: &str) -> Result<&'a Dataset, RsStatus> {
    if handle.is_null() {
        set_error(&format!("{name} must not be null"));
        return Err(RsStatus::NullArgument);
    }
    Ok(&(*handle).inner)
}

/// Crate version as a static string.
#[no_mangle]
pub extern "C" fn recsample_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the last error on this thread; valid until the next failing
/// call on the same thread.
#[no_mangle]
pub extern "C" fn recsample_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Load a canonical `user,item,rating,timestamp` CSV with a header row.
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `out` must be valid for a
/// pointer write.
#[no_mangle]
pub unsafe extern "C" fn recsample_dataset_from_csv(
    path: *const c_char,
    out: *mut *mut RsDataset,
) -> RsStatus {
    let path = match required_str(path, "path") {
        Ok(p) => PathBuf::from(p),
        Err(status) => return status,
    };
    match ingest_csv(&path, &CsvSchema::default()) {
        Ok(dataset) => emit(out, dataset),
        Err(e) => fail(e),
    }
}

/// Generate a synthetic dataset (latent factors, Zipf popularity).
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn recsample_dataset_synthetic(
    users: usize,
    items: usize,
    interactions: usize,
    latent_dim: usize,
    popularity_exponent: c_double,
    noise: c_double,
    seed: u64,
    out: *mut *mut RsDataset,
) -> RsStatus {
    let cfg = SyntheticConfig {
        users,
        items,
        interactions,
        latent_dim,
        popularity_exponent,
        noise,
        seed,
        ..SyntheticConfig::default()
    };
    match generate_synthetic(&cfg) {
        Ok(dataset) => emit(out, dataset),
        Err(e) => fail(e),
    }
}

/// Release a dataset handle.
///
/// # Safety
/// `handle` must have been produced by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn recsample_dataset_free(handle: *mut RsDataset) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Number of interactions; zero for a null handle.
///
/// # Safety
/// `handle` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn recsample_dataset_len(handle: *const RsDataset) -> usize {
    dataset_ref(handle, "dataset").map(|d| d.len()).unwrap_or(0)
}

/// # Safety
/// `handle` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn recsample_dataset_num_users(handle: *const RsDataset) -> u32 {
    dataset_ref(handle, "dataset").map(|d| d.num_users()).unwrap_or(0)
}

/// # Safety
/// `handle` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn recsample_dataset_num_items(handle: *const RsDataset) -> u32 {
    dataset_ref(handle, "dataset").map(|d| d.num_items()).unwrap_or(0)
}

/// Drop users with fewer than `min_interactions` events into a new handle.
///
/// # Safety
/// `handle` must be a live dataset handle; `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn recsample_dataset_filter_min_interactions(
    handle: *const RsDataset,
    min_interactions: u32,
    out: *mut *mut RsDataset,
) -> RsStatus {
    let dataset = match dataset_ref(handle, "dataset") {
        Ok(d) => d,
        Err(status) => return status,
    };
    match filter_min_interactions(dataset, min_interactions) {
        Ok(filtered) => emit(out, filtered),
        Err(e) => fail(e),
    }
}

/// Write the dataset back out as a canonical CSV.
///
/// # Safety
/// `handle` must be a live dataset handle; `path` a valid string.
#[no_mangle]
pub unsafe extern "C" fn recsample_dataset_export_csv(
    handle: *const RsDataset,
    path: *const c_char,
) -> RsStatus {
    let dataset = match dataset_ref(handle, "dataset") {
        Ok(d) => d,
        Err(status) => return status,
    };
    let path = match required_str(path, "path") {
        Ok(p) => PathBuf::from(p),
        Err(status) => return status,
    };
    match export_csv(dataset, &path) {
        Ok(()) => RsStatus::Ok,
        Err(e) => fail(e),
    }
}

/// Subsample the dataset (treated as a train set) under any of the sixteen
/// strategy ids, e.g. `random-interaction`, `forest-fire`,
/// `svp-cf:mf:interaction`, `svp-cf-prop:bias-only:user`.
///
/// Proxy-based strategies train a small MF or bias-only proxy internally
/// with default settings; `scenario` selects the difficulty signal
/// (`explicit` squared error, otherwise sampled inverse-AUC).
///
/// # Safety
/// `handle` must be a live dataset handle; `strategy` and `scenario` valid
/// strings; `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn recsample_sample(
    handle: *const RsDataset,
    strategy: *const c_char,
    scenario: *const c_char,
    percent: c_double,
    seed: u64,
    out: *mut *mut RsDataset,
) -> RsStatus {
    let train = match dataset_ref(handle, "dataset") {
        Ok(d) => d,
        Err(status) => return status,
    };
    let strategy = match required_str(strategy, "strategy") {
        Ok(s) => s,
        Err(status) => return status,
    };
    let scenario = match required_str(scenario, "scenario") {
        Ok(s) => s,
        Err(status) => return status,
    };
    match run_sample(train, strategy, scenario, percent, seed) {
        Ok(retained) => emit(out, retained),
        Err(e) => fail(e),
    }
}

fn run_sample(
    train: &Dataset,
    strategy: &str,
    scenario: &str,
    percent: f64,
    seed: u64,
) -> Result<Dataset, Error> {
    let strategy: SamplingStrategy = strategy.parse()?;
    let scenario = scenario.parse()?;
    let spec = SampleSpec::new(percent, seed);
    let result = match strategy {
        SamplingStrategy::Base(base) => sample_with_strategy(train, base, &spec)?,
        SamplingStrategy::Svp { proxy, granularity, propensity } => {
            let cfg = TrainConfig { seed: child_seed(seed, "proxy"), ..TrainConfig::default() };
            let trace = train_proxy(train, proxy, scenario, &cfg)?;
            let mut table = match scenario {
                recsample::data::Scenario::Explicit => importance_explicit(&trace, granularity)?,
                _ => importance_implicit(&trace, granularity, 1.0)?,
            };
            if propensity {
                let params = PropensityParams::from_train(train, 0.55, 1.5)?;
                table = importance_prop(&table, &params)?.with_granularity(granularity);
            }
            svp_sample(train, &table, &spec)?
        }
    };
    Ok(result.retained)
}

/// Observation propensity `p_u * p_i` of the activity-count sigmoids with
/// scalars `a`, `b` over populations of `num_users` / `num_items` entities
/// with `n_u` / `n_i` interactions.
///
/// # Safety
/// `out` must be valid for a double write.
#[no_mangle]
pub unsafe extern "C" fn recsample_propensity(
    a: c_double,
    b: c_double,
    num_users: usize,
    num_items: usize,
    n_u: u32,
    n_i: u32,
    out: *mut c_double,
) -> RsStatus {
    if out.is_null() {
        set_error("out pointer must not be null");
        return RsStatus::NullArgument;
    }
    if num_users == 0 || num_items == 0 {
        set_error("entity populations must be positive");
        return RsStatus::Parameter;
    }
    let mut user_counts = vec![0u32; num_users];
    let mut item_counts = vec![0u32; num_items];
    user_counts[0] = n_u;
    item_counts[0] = n_i;
    let result = PropensityParams::new(a, b, &user_counts, &item_counts)
        .and_then(|params| params.propensity(0, 0));
    match result {
        Ok(p) => {
            *out = p;
            RsStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Tie-corrected Kendall rank correlation between two aligned vectors.
///
/// # Safety
/// `xs` and `ys` must point to `len` doubles each; `out` must be valid for
/// a double write.
#[no_mangle]
pub unsafe extern "C" fn recsample_kendall_tau(
    xs: *const c_double,
    ys: *const c_double,
    len: usize,
    out: *mut c_double,
) -> RsStatus {
    if xs.is_null() || ys.is_null() || out.is_null() {
        set_error("xs, ys, and out must not be null");
        return RsStatus::NullArgument;
    }
    let xs = std::slice::from_raw_parts(xs, len);
    let ys = std::slice::from_raw_parts(ys, len);
    match kendall_tau(xs, ys) {
        Ok(tau) => {
            *out = tau;
            RsStatus::Ok
        }
        Err(e) => fail(e),
    }
}
