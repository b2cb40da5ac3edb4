//! C ABI over the proxops environments, dynamics, policies and metrics.
//!
//! Every fallible function returns a [`PxStatus`]; on failure the message is
//! kept per thread and can be read with [`px_last_error`]. Handles are
//! opaque and must be released with their `_free` function. Panics never
//! cross the boundary: they are reported as [`PxStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use proxops::action::{ActionSpaceSpec, ActionChoice};
use proxops::docking::{self, DockingConfig};
use proxops::dynamics::{DynamicsParams, HillState, Propagator, ThrustCommand};
use proxops::env::{Task, TaskEnv};
use proxops::metrics;
use proxops::net::PolicyValueNet;
use proxops::rollout::Policy;
use proxops::seed::{self, Stream};
use proxops::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PxStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// The episode has terminated; call `px_env_reset`.
    EpisodeDone = 3,
    Io = 4,
    /// A file did not have the expected layout (e.g. bad checkpoint magic).
    Format = 5,
    Panic = 6,
    BufferTooSmall = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PxTask {
    Inspection = 0,
    Docking = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PxSpaceKind {
    Continuous = 0,
    /// `choices` evenly spaced values over `[-u_max, u_max]`.
    Uniform = 1,
    /// An explicit symmetric value table (`values`, `num_values`).
    Explicit = 2,
}

/// A running task environment.
pub struct PxEnv {
    env: TaskEnv,
}

/// A trained policy loaded from a checkpoint.
pub struct PxPolicy {
    net: PolicyValueNet,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

struct Failure(PxStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::EpisodeDone => PxStatus::EpisodeDone,
            Error::Io { .. } => PxStatus::Io,
            Error::Format { .. } | Error::Json { .. } | Error::Csv { .. } => PxStatus::Format,
            _ => PxStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn fail<T>(status: PxStatus, msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure(status, msg.into()))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PxStatus {
    let (status, msg) = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => (PxStatus::Ok, String::new()),
        Ok(Err(Failure(s, m))) => (s, m),
        Err(p) => {
            let m = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            (PxStatus::Panic, format!("panic: {m}"))
        }
    };
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
    status
}

unsafe fn slice<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return fail(PxStatus::NullPointer, format!("{what} is null"));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn slice_mut<'a, T>(ptr: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if ptr.is_null() {
        return fail(PxStatus::NullPointer, format!("{what} is null"));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

unsafe fn out<'a, T>(ptr: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    ptr.as_mut()
        .map_or_else(|| fail(PxStatus::NullPointer, format!("{what} is null")), Ok)
}

/// Copies the calling thread's last error message, NUL-terminated and
/// truncated to `capacity`, into `buffer`. Returns the length the full
/// message needs including its terminator (1 when there is no error).
///
/// # Safety
/// `buffer` must be null or valid for `capacity` bytes.
#[no_mangle]
pub unsafe extern "C" fn px_last_error(buffer: *mut c_char, capacity: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buffer.is_null() && capacity > 0 {
            let n = bytes.len().min(capacity - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buffer.cast::<u8>(), n);
            *buffer.add(n) = 0;
        }
        bytes.len() + 1
    })
}

unsafe fn build_space(
    kind: PxSpaceKind,
    u_max: f64,
    choices: usize,
    values: *const f64,
    num_values: usize,
) -> Result<ActionSpaceSpec, Failure> {
    Ok(match kind {
        PxSpaceKind::Continuous => ActionSpaceSpec::continuous(u_max)?,
        PxSpaceKind::Uniform => ActionSpaceSpec::uniform(choices, u_max)?,
        PxSpaceKind::Explicit => ActionSpaceSpec::explicit(slice(values, num_values, "values")?.to_vec())?,
    })
}

/// Creates an environment. `evaluation` scores inspection with the constant
/// evaluation fuel weight. `values`/`num_values` are read only for explicit
/// spaces and `choices` only for uniform ones.
///
/// # Safety
/// `values` must be valid for `num_values` reads; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn px_env_new(
    task: PxTask,
    kind: PxSpaceKind,
    u_max: f64,
    choices: usize,
    values: *const f64,
    num_values: usize,
    evaluation: bool,
    out_env: *mut *mut PxEnv,
) -> PxStatus {
    guard(|| {
        let slot = out(out_env, "out_env")?;
        let space = build_space(kind, u_max, choices, values, num_values)?;
        let task = match task {
            PxTask::Inspection => Task::Inspection,
            PxTask::Docking => Task::Docking,
        };
        let env = TaskEnv::new(task, space, evaluation)?;
        *slot = Box::into_raw(Box::new(PxEnv { env }));
        Ok(())
    })
}

/// # Safety
/// `env` must come from `px_env_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn px_env_free(env: *mut PxEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Observation length of the environment's task, 0 for a null handle.
///
/// # Safety
/// `env` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn px_env_obs_dim(env: *const PxEnv) -> usize {
    env.as_ref().map_or(0, |e| e.env.task().obs_dim())
}

/// Starts an episode and writes the first observation.
///
/// # Safety
/// `env` must be live; `obs` must be valid for `obs_len` writes.
#[no_mangle]
pub unsafe extern "C" fn px_env_reset(env: *mut PxEnv, seed: u64, obs: *mut f64, obs_len: usize) -> PxStatus {
    guard(|| {
        let e = out(env, "env")?;
        let dst = slice_mut(obs, obs_len, "obs")?;
        let need = e.env.task().obs_dim();
        if obs_len < need {
            return fail(PxStatus::BufferTooSmall, format!("observation needs {need} values"));
        }
        let o = e.env.reset(seed);
        dst[..need].copy_from_slice(&o);
        Ok(())
    })
}

/// Applies a thrust `[fx, fy, fz]` in newtons as given (no projection onto
/// the action space) and writes the next observation, the reward and the
/// termination flag.
///
/// # Safety
/// `env` must be live; `thrust` valid for 3 reads; `obs` valid for
/// `obs_len` writes; `reward` and `done` writable.
#[no_mangle]
pub unsafe extern "C" fn px_env_step(
    env: *mut PxEnv,
    thrust: *const f64,
    obs: *mut f64,
    obs_len: usize,
    reward: *mut f64,
    done: *mut bool,
) -> PxStatus {
    guard(|| {
        let e = out(env, "env")?;
        let f = slice(thrust, 3, "thrust")?;
        let dst = slice_mut(obs, obs_len, "obs")?;
        let reward = out(reward, "reward")?;
        let done = out(done, "done")?;
        let need = e.env.task().obs_dim();
        if obs_len < need {
            return fail(PxStatus::BufferTooSmall, format!("observation needs {need} values"));
        }
        let (t, _) = e.env.step_thrust(&ThrustCommand::new(f[0], f[1], f[2]))?;
        dst[..need].copy_from_slice(&t.observation);
        *reward = t.reward;
        *done = t.done;
        Ok(())
    })
}

/// Writes `[x, y, z, vx, vy, vz]` of the current episode.
///
/// # Safety
/// `env` must be live; `state` valid for 6 writes.
#[no_mangle]
pub unsafe extern "C" fn px_env_state(env: *const PxEnv, state: *mut f64) -> PxStatus {
    guard(|| {
        let e = env
            .as_ref()
            .map_or_else(|| fail(PxStatus::NullPointer, "env is null"), Ok)?;
        let dst = slice_mut(state, 6, "state")?;
        let s = e
            .env
            .state()
            .map_or_else(|| fail(PxStatus::InvalidArgument, "no episode has been started"), Ok)?;
        dst.copy_from_slice(&s.to_array());
        Ok(())
    })
}

/// Loads a policy checkpoint.
///
/// # Safety
/// `path` must be a NUL-terminated UTF-8 string; `out_policy` writable.
#[no_mangle]
pub unsafe extern "C" fn px_policy_load(path: *const c_char, out_policy: *mut *mut PxPolicy) -> PxStatus {
    guard(|| {
        let slot = out(out_policy, "out_policy")?;
        if path.is_null() {
            return fail(PxStatus::NullPointer, "path is null");
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Failure(PxStatus::InvalidArgument, "path is not UTF-8".into()))?;
        let net = proxops::checkpoint::load(Path::new(path))?;
        *slot = Box::into_raw(Box::new(PxPolicy { net }));
        Ok(())
    })
}

/// # Safety
/// `policy` must come from `px_policy_load` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn px_policy_free(policy: *mut PxPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Chooses an action for `obs` and writes it as thrust in newtons, decoded
/// through `env`'s action space. `seed` drives stochastic sampling and is
/// ignored when `deterministic` is set.
///
/// # Safety
/// Handles must be live; `obs` valid for `obs_len` reads; `thrust` for 3
/// writes.
#[no_mangle]
pub unsafe extern "C" fn px_policy_act(
    policy: *const PxPolicy,
    env: *const PxEnv,
    obs: *const f64,
    obs_len: usize,
    deterministic: bool,
    seed: u64,
    thrust: *mut f64,
) -> PxStatus {
    guard(|| {
        let p = policy
            .as_ref()
            .map_or_else(|| fail(PxStatus::NullPointer, "policy is null"), Ok)?;
        let e = env
            .as_ref()
            .map_or_else(|| fail(PxStatus::NullPointer, "env is null"), Ok)?;
        let o = slice(obs, obs_len, "obs")?;
        let dst = slice_mut(thrust, 3, "thrust")?;
        let mut rng = seed::stream_rng(seed, Stream::ActionSampling);
        let step = p.net.act(o, &mut rng, deterministic)?;
        let space = e.env.space();
        if let (ActionChoice::Discrete(_), false) | (ActionChoice::Continuous(_), true) =
            (step.choice, space.is_discrete())
        {
            return fail(PxStatus::InvalidArgument, "policy head does not match the action space");
        }
        dst.copy_from_slice(&space.decode(&step.choice)?.components());
        Ok(())
    })
}

/// Propagates `[x, y, z, vx, vy, vz]` by `dt` seconds under constant
/// `thrust` with the default mean motion and deputy mass.
///
/// # Safety
/// `state_in` valid for 6 reads, `thrust` for 3, `state_out` for 6 writes.
#[no_mangle]
pub unsafe extern "C" fn px_propagate(
    state_in: *const f64,
    thrust: *const f64,
    dt: f64,
    state_out: *mut f64,
) -> PxStatus {
    guard(|| {
        let s: [f64; 6] = slice(state_in, 6, "state_in")?.try_into().unwrap();
        let f = slice(thrust, 3, "thrust")?;
        let dst = slice_mut(state_out, 6, "state_out")?;
        let base = DynamicsParams::docking();
        let prop = Propagator::new(DynamicsParams::new(base.mean_motion, base.mass, dt)?)?;
        let next = prop.propagate(&HillState::from_array(s), &ThrustCommand::new(f[0], f[1], f[2]))?;
        dst.copy_from_slice(&next.to_array());
        Ok(())
    })
}

/// Docking speed limit (m/s) at distance `r` (m) under the default limits.
#[no_mangle]
pub extern "C" fn px_docking_max_speed(r: f64) -> f64 {
    docking::max_speed(r, &DockingConfig::default())
}

/// Interquartile mean of `n` values.
///
/// # Safety
/// `values` valid for `n` reads; `result` writable.
#[no_mangle]
pub unsafe extern "C" fn px_iqm(values: *const f64, n: usize, result: *mut f64) -> PxStatus {
    guard(|| {
        let v = slice(values, n, "values")?;
        *out(result, "result")? = metrics::iqm(v)?;
        Ok(())
    })
}

/// Percentile-bootstrap confidence interval of the IQM.
///
/// # Safety
/// `values` valid for `n` reads; `low` and `high` writable.
#[no_mangle]
pub unsafe extern "C" fn px_bootstrap_ci(
    values: *const f64,
    n: usize,
    level: f64,
    resamples: usize,
    seed: u64,
    low: *mut f64,
    high: *mut f64,
) -> PxStatus {
    guard(|| {
        let v = slice(values, n, "values")?;
        let lo = out(low, "low")?;
        let hi = out(high, "high")?;
        let (a, b) = metrics::bootstrap_ci(v, level, resamples, seed)?;
        *lo = a;
        *hi = b;
        Ok(())
    })
}
