//! C ABI for the acidp pricing engine.
//!
//! Markets, policies and traces cross the boundary as opaque handles that
//! the caller owns and releases with the matching `*_free`. Every fallible
//! call returns an [`AcidpStatus`]; on failure a message is kept per thread
//! and can be read with [`acidp_last_error_message`]. Panics are caught at
//! the boundary and reported as [`AcidpStatus::Panic`].
//!
//! Arms are 0-based and rounds are 1-based, as in the Rust API.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::Arc;

use acidp::audit::{binomial_pvalue, confidence_radius};
use acidp::environments::{oracle_profit, Environment};
use acidp::harness::{
    build_harness_policy, derive_seed, run_trial, seeded_rng, EnvironmentSpec, PolicySpec,
};
use acidp::policies::Policy;
use acidp::{Alert, Observation, PriceGrid, TrialTrace};
use rand_chacha::ChaCha8Rng;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AcidpStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullPointer = 1,
    /// An argument was out of range or not valid UTF-8.
    InvalidArgument = 2,
    /// Unknown key, bad parameter or inconsistent configuration.
    Config = 3,
    /// Malformed input file.
    Parse = 4,
    /// File system failure.
    Io = 5,
    /// Failure while simulating.
    Runtime = 6,
    /// A Rust panic was caught at the boundary.
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AcidpAlert {
    None = 0,
    Yellow = 1,
    Red = 2,
}

impl From<Alert> for AcidpAlert {
    fn from(a: Alert) -> Self {
        match a {
            Alert::None => AcidpAlert::None,
            Alert::Yellow => AcidpAlert::Yellow,
            Alert::Red => AcidpAlert::Red,
        }
    }
}

/// One round of a trace.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcidpTraceRow {
    pub t: usize,
    pub arm: usize,
    pub price: f64,
    pub demand: u32,
    pub profit: f64,
    pub oracle_profit: f64,
    pub cum_regret: f64,
    pub alert: AcidpAlert,
}

/// A simulated market together with its price grid.
pub struct AcidpMarket {
    env: Arc<dyn Environment>,
    grid: PriceGrid,
}

/// A policy with its own random stream, driven round by round.
pub struct AcidpPolicy {
    inner: Box<dyn Policy>,
    rng: ChaCha8Rng,
    arms: usize,
}

/// Per-round record of a finished trial.
pub struct AcidpTrace {
    trace: TrialTrace,
}

struct Failure(AcidpStatus, String);

impl From<acidp::Error> for Failure {
    fn from(e: acidp::Error) -> Self {
        let status = match &e {
            acidp::Error::Config(_) | acidp::Error::Lookup(_) | acidp::Error::Construction(_) => {
                AcidpStatus::Config
            }
            acidp::Error::Parse { .. } | acidp::Error::Csv(_) => AcidpStatus::Parse,
            acidp::Error::Io(_) => AcidpStatus::Io,
            acidp::Error::Runtime(_) => AcidpStatus::Runtime,
        };
        Failure(status, e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(AcidpStatus::InvalidArgument, msg.into())
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> AcidpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AcidpStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {msg}"));
            AcidpStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure(AcidpStatus::NullPointer, format!("{what} is NULL")))
}

unsafe fn borrow_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| Failure(AcidpStatus::NullPointer, format!("{what} is NULL")))
}

unsafe fn string_arg(p: *const c_char, what: &str) -> Result<String, Failure> {
    if p.is_null() {
        return Err(Failure(AcidpStatus::NullPointer, format!("{what} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn optional_string_arg(p: *const c_char, what: &str) -> Result<Option<String>, Failure> {
    if p.is_null() {
        Ok(None)
    } else {
        string_arg(p, what).map(Some)
    }
}

fn parse_params(text: Option<String>) -> Result<toml::Table, Failure> {
    match text {
        None => Ok(toml::Table::new()),
        Some(t) => toml::from_str(&t)
            .map_err(|e| Failure(AcidpStatus::Config, format!("policy parameters: {e}"))),
    }
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure(AcidpStatus::NullPointer, "output pointer is NULL".into()));
    }
    out.write(value);
    Ok(())
}

/// Boxes `value` into `*out`; nothing is allocated when `out` is NULL.
unsafe fn write_handle<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure(AcidpStatus::NullPointer, "output pointer is NULL".into()));
    }
    out.write(Box::into_raw(Box::new(value)));
    Ok(())
}

fn build_market(spec: EnvironmentSpec, seed: u64) -> Result<AcidpMarket, Failure> {
    let env = spec.build(derive_seed(seed, "population"))?;
    let grid = spec.default_grid()?;
    Ok(AcidpMarket { env, grid })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn acidp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the most recent failure on this thread, or NULL if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn acidp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| {
        e.borrow()
            .as_ref()
            .map_or(std::ptr::null(), |c| c.as_ptr())
    })
}

/// Builds canned segment market `case_id` (1 to 6) on the 20-price case
/// grid. `seed` draws the customer population the same way a harness trial
/// with that seed does.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn acidp_market_case(
    case_id: u32,
    seed: u64,
    out: *mut *mut AcidpMarket,
) -> AcidpStatus {
    guard(|| {
        let market = build_market(EnvironmentSpec::case(case_id), seed)?;
        write_handle(out, market)
    })
}

/// Builds a demand-table market. `path` names a CSV table whose first
/// product is sold in every round, or is NULL for the built-in table with
/// its three-product schedule.
///
/// # Safety
/// `path` must be NULL or a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn acidp_market_table(
    path: *const c_char,
    out: *mut *mut AcidpMarket,
) -> AcidpStatus {
    guard(|| {
        let path = optional_string_arg(path, "path")?.map(PathBuf::from);
        let market = build_market(EnvironmentSpec::table(path), 0)?;
        write_handle(out, market)
    })
}

/// Releases a market. NULL is ignored.
///
/// # Safety
/// `market` must be NULL or a handle from `acidp_market_*` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn acidp_market_free(market: *mut AcidpMarket) {
    if !market.is_null() {
        drop(Box::from_raw(market));
    }
}

/// Number of prices on the market's grid, or 0 for NULL.
///
/// # Safety
/// `market` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn acidp_market_arms(market: *const AcidpMarket) -> usize {
    market.as_ref().map_or(0, |m| m.grid.len())
}

/// Customers per round, or 0 for NULL.
///
/// # Safety
/// `market` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn acidp_market_batch_size(market: *const AcidpMarket) -> u32 {
    market.as_ref().map_or(0, |m| m.grid.batch_size())
}

/// Price of `arm`.
///
/// # Safety
/// `market` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn acidp_market_price(
    market: *const AcidpMarket,
    arm: usize,
    out: *mut f64,
) -> AcidpStatus {
    guard(|| {
        let m = borrow(market, "market")?;
        if arm >= m.grid.len() {
            return Err(invalid(format!("arm {arm} outside 0..{}", m.grid.len())));
        }
        write_out(out, m.grid.price(arm))
    })
}

/// Purchase probability of one customer at `price` in round `t`.
///
/// # Safety
/// `market` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn acidp_market_true_demand(
    market: *const AcidpMarket,
    t: usize,
    price: f64,
    out: *mut f64,
) -> AcidpStatus {
    guard(|| {
        let m = borrow(market, "market")?;
        if t == 0 {
            return Err(invalid("rounds start at 1"));
        }
        write_out(out, m.env.true_demand(t, price)?)
    })
}

/// Best arm in round `t` and its expected profit. Either output may be
/// NULL.
///
/// # Safety
/// `market` must be a live handle; outputs must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn acidp_market_oracle(
    market: *const AcidpMarket,
    t: usize,
    out_arm: *mut usize,
    out_profit: *mut f64,
) -> AcidpStatus {
    guard(|| {
        let m = borrow(market, "market")?;
        if t == 0 {
            return Err(invalid("rounds start at 1"));
        }
        let (arm, profit) = oracle_profit(m.env.as_ref(), t, &m.grid)?;
        if !out_arm.is_null() {
            out_arm.write(arm);
        }
        if !out_profit.is_null() {
            out_profit.write(profit);
        }
        Ok(())
    })
}

/// Creates policy `key` for the market's grid. `params` is an optional
/// TOML table of hyperparameters, for example `"epsilon = 0.1"`.
///
/// # Safety
/// `market` must be a live handle, `key` a NUL-terminated string, `params`
/// NULL or NUL-terminated, and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn acidp_policy_new(
    market: *const AcidpMarket,
    key: *const c_char,
    params: *const c_char,
    seed: u64,
    out: *mut *mut AcidpPolicy,
) -> AcidpStatus {
    guard(|| {
        let m = borrow(market, "market")?;
        let key = string_arg(key, "key")?;
        let mut spec = PolicySpec::new(key.as_str());
        spec.params = parse_params(optional_string_arg(params, "params")?)?;
        let inner = build_harness_policy(&spec, &m.grid, &m.env)?;
        let policy = AcidpPolicy {
            inner,
            rng: seeded_rng(seed, &format!("policy/{key}")),
            arms: m.grid.len(),
        };
        write_handle(out, policy)
    })
}

/// Releases a policy. NULL is ignored.
///
/// # Safety
/// `policy` must be NULL or a handle from `acidp_policy_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn acidp_policy_free(policy: *mut AcidpPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Arm to offer in round `t`.
///
/// # Safety
/// `policy` must be a live handle and `out_arm` writable.
#[no_mangle]
pub unsafe extern "C" fn acidp_policy_choose(
    policy: *mut AcidpPolicy,
    t: usize,
    out_arm: *mut usize,
) -> AcidpStatus {
    guard(|| {
        let p = borrow_mut(policy, "policy")?;
        if t == 0 {
            return Err(invalid("rounds start at 1"));
        }
        let arm = p.inner.choose(t, &mut p.rng)?;
        write_out(out_arm, arm)
    })
}

/// Reports that `demand` of the batch bought at `arm` in round `t`. The
/// alert raised by this observation is written to `out_alert` unless it is
/// NULL.
///
/// # Safety
/// `policy` must be a live handle; `out_alert` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn acidp_policy_observe(
    policy: *mut AcidpPolicy,
    t: usize,
    arm: usize,
    demand: u32,
    out_alert: *mut AcidpAlert,
) -> AcidpStatus {
    guard(|| {
        let p = borrow_mut(policy, "policy")?;
        if t == 0 {
            return Err(invalid("rounds start at 1"));
        }
        if arm >= p.arms {
            return Err(invalid(format!("arm {arm} outside 0..{}", p.arms)));
        }
        p.inner.observe(&Observation::new(t, arm, demand))?;
        if !out_alert.is_null() {
            out_alert.write(p.inner.last_alert().into());
        }
        Ok(())
    })
}

/// Plays policy `key` against the market for `horizon` rounds. Random
/// streams follow the harness convention, so a market built with the same
/// seed reproduces harness trial traces exactly.
///
/// # Safety
/// `market` must be a live handle, `key` NUL-terminated, `params` NULL or
/// NUL-terminated, and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn acidp_run_trial(
    market: *const AcidpMarket,
    key: *const c_char,
    params: *const c_char,
    horizon: usize,
    seed: u64,
    out: *mut *mut AcidpTrace,
) -> AcidpStatus {
    guard(|| {
        let m = borrow(market, "market")?;
        let key = string_arg(key, "key")?;
        if out.is_null() {
            return Err(Failure(AcidpStatus::NullPointer, "output pointer is NULL".into()));
        }
        let mut spec = PolicySpec::new(key.as_str());
        spec.params = parse_params(optional_string_arg(params, "params")?)?;
        let mut policy = build_harness_policy(&spec, &m.grid, &m.env)?;
        let mut prng = seeded_rng(seed, &format!("policy/{key}"));
        let mut erng = seeded_rng(seed, "environment");
        let output = run_trial(
            policy.as_mut(),
            m.env.as_ref(),
            &m.grid,
            horizon,
            &mut prng,
            &mut erng,
            None,
        )?;
        write_handle(out, AcidpTrace { trace: output.trace })
    })
}

/// Releases a trace. NULL is ignored.
///
/// # Safety
/// `trace` must be NULL or a handle from `acidp_run_trial` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn acidp_trace_free(trace: *mut AcidpTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Number of rounds, or 0 for NULL.
///
/// # Safety
/// `trace` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn acidp_trace_len(trace: *const AcidpTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.trace.len())
}

/// Cumulative regret after the last round, or 0 for NULL.
///
/// # Safety
/// `trace` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn acidp_trace_final_regret(trace: *const AcidpTrace) -> f64 {
    trace.as_ref().map_or(0.0, |t| t.trace.final_regret())
}

/// Copies row `index` (0-based) into `out`.
///
/// # Safety
/// `trace` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn acidp_trace_row(
    trace: *const AcidpTrace,
    index: usize,
    out: *mut AcidpTraceRow,
) -> AcidpStatus {
    guard(|| {
        let tr = borrow(trace, "trace")?;
        let r = tr
            .trace
            .rows()
            .get(index)
            .ok_or_else(|| invalid(format!("row {index} outside 0..{}", tr.trace.len())))?;
        write_out(
            out,
            AcidpTraceRow {
                t: r.t,
                arm: r.arm,
                price: r.price,
                demand: r.demand,
                profit: r.profit,
                oracle_profit: r.oracle_profit,
                cum_regret: r.cum_regret,
                alert: r.alert.into(),
            },
        )
    })
}

/// Writes the trace as CSV to `path`.
///
/// # Safety
/// `trace` must be a live handle and `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn acidp_trace_write_csv(
    trace: *const AcidpTrace,
    path: *const c_char,
) -> AcidpStatus {
    guard(|| {
        let tr = borrow(trace, "trace")?;
        let path = string_arg(path, "path")?;
        tr.trace.save(&PathBuf::from(path))?;
        Ok(())
    })
}

/// Exact two-sided binomial p-value of `d` buyers out of `n` under purchase
/// probability `p0`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn acidp_binomial_pvalue(
    d: u32,
    n: u32,
    p0: f64,
    out: *mut f64,
) -> AcidpStatus {
    guard(|| {
        if d > n {
            return Err(invalid(format!("d = {d} exceeds n = {n}")));
        }
        if !(0.0..=1.0).contains(&p0) {
            return Err(invalid(format!("p0 = {p0} outside [0, 1]")));
        }
        write_out(out, binomial_pvalue(d, n, p0))
    })
}

/// Half-width of the time-uniform confidence band at time `tau` and level
/// `alpha1`. Fails with `InvalidArgument` for `tau < 2`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn acidp_confidence_radius(
    tau: f64,
    alpha1: f64,
    out: *mut f64,
) -> AcidpStatus {
    guard(|| {
        if !(alpha1 > 0.0 && alpha1 < 1.0) {
            return Err(invalid(format!("alpha1 = {alpha1} outside (0, 1)")));
        }
        let r = confidence_radius(tau, alpha1)
            .ok_or_else(|| invalid(format!("tau = {tau} is below 2")))?;
        write_out(out, r)
    })
}
