//! Task-agnostic environment interface used by the trainer and evaluator.

use nalgebra::Vector3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::action::ActionSpaceSpec;
use crate::docking::{DockingConfig, DockingEnv, DockingState};
use crate::dynamics::{HillState, ThrustCommand};
use crate::error::{Error, Result};
use crate::inspection::{InspectionConfig, InspectionEnv, InspectionState};
use crate::metrics::EpisodeMetrics;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Inspection,
    Docking,
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Inspection => "inspection",
            Task::Docking => "docking",
        }
    }

    pub fn obs_dim(&self) -> usize {
        match self {
            Task::Inspection => crate::inspection::OBS_DIM,
            Task::Docking => crate::docking::OBS_DIM,
        }
    }
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inspection" => Ok(Task::Inspection),
            "docking" => Ok(Task::Docking),
            other => Err(Error::config(format!("unknown task `{other}`"))),
        }
    }
}

/// `[r cos(az) cos(el), r sin(az) cos(el), r sin(el)]`
pub fn from_spherical(r: f64, azimuth: f64, elevation: f64) -> Vector3<f64> {
    Vector3::new(
        r * azimuth.cos() * elevation.cos(),
        r * azimuth.sin() * elevation.cos(),
        r * elevation.sin(),
    )
}

/// Vector of magnitude `r` with azimuth in [0, 2pi] and elevation in
/// [-pi/2, pi/2], both drawn uniformly.
pub fn random_direction_scaled<R: Rng + ?Sized>(rng: &mut R, r: f64) -> Vector3<f64> {
    use std::f64::consts::{FRAC_PI_2, TAU};
    let az = rng.random_range(0.0..=TAU);
    let el = rng.random_range(-FRAC_PI_2..=FRAC_PI_2);
    from_spherical(r, az, el)
}

/// Outcome of one environment transition, task-independent view.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

/// One logged step, for trajectory files and action histograms.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub state: HillState,
    pub thrust: ThrustCommand,
    pub reward: f64,
    /// Named reward components in a fixed per-task order.
    pub components: Vec<(&'static str, f64)>,
    /// Task-specific extras in a fixed per-task order.
    pub extras: Vec<(&'static str, f64)>,
}

#[derive(Debug, Clone)]
enum Inner {
    Inspection {
        env: InspectionEnv,
        state: Option<InspectionState>,
    },
    Docking {
        env: DockingEnv,
        state: Option<DockingState>,
    },
}

/// A stateful episode runner wrapping either task.
///
/// Tracks the running episode return and initial distance so that a
/// finished episode can be summarized.
#[derive(Debug, Clone)]
pub struct TaskEnv {
    inner: Inner,
    space: ActionSpaceSpec,
    evaluation: bool,
    fuel_weight: Option<f64>,
    fixed_start: Option<HillState>,
    episode_seed: u64,
    episode_return: f64,
    initial_distance: f64,
}

impl TaskEnv {
    pub fn new(task: Task, space: ActionSpaceSpec, evaluation: bool) -> Result<Self> {
        let inner = match task {
            Task::Inspection => Inner::Inspection {
                env: InspectionEnv::new(InspectionConfig::default())?,
                state: None,
            },
            Task::Docking => Inner::Docking {
                env: DockingEnv::new(DockingConfig::default())?,
                state: None,
            },
        };
        Self::from_parts(inner, space, evaluation)
    }

    pub fn inspection(env: InspectionEnv, space: ActionSpaceSpec, evaluation: bool) -> Result<Self> {
        Self::from_parts(Inner::Inspection { env, state: None }, space, evaluation)
    }

    pub fn docking(env: DockingEnv, space: ActionSpaceSpec) -> Result<Self> {
        Self::from_parts(Inner::Docking { env, state: None }, space, false)
    }

    fn from_parts(inner: Inner, space: ActionSpaceSpec, evaluation: bool) -> Result<Self> {
        space.validate()?;
        Ok(Self {
            inner,
            space,
            evaluation,
            fuel_weight: None,
            fixed_start: None,
            episode_seed: 0,
            episode_return: 0.0,
            initial_distance: 0.0,
        })
    }

    pub fn task(&self) -> Task {
        match self.inner {
            Inner::Inspection { .. } => Task::Inspection,
            Inner::Docking { .. } => Task::Docking,
        }
    }

    pub fn space(&self) -> &ActionSpaceSpec {
        &self.space
    }

    /// Overrides the inspection fuel weight for subsequent steps (training schedule).
    pub fn set_fuel_weight(&mut self, w: f64) {
        self.fuel_weight = Some(w);
        if let Inner::Inspection { state: Some(s), .. } = &mut self.inner {
            s.w = w;
        }
    }

    /// Makes every subsequent reset start from `start` (the Sun angle and
    /// other randomness still follow the reset seed).
    pub fn with_fixed_start(mut self, start: HillState) -> Self {
        self.fixed_start = Some(start);
        self
    }

    pub fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.episode_return = 0.0;
        self.episode_seed = seed;
        match &mut self.inner {
            Inner::Inspection { env, state } => {
                let mut s = env.reset(seed, self.evaluation);
                if let Some(start) = self.fixed_start {
                    s = env.start_from(start, s.sun, seed, self.evaluation);
                }
                if let (Some(w), false) = (self.fuel_weight, self.evaluation) {
                    s.w = w;
                }
                self.initial_distance = s.phys.distance();
                let obs = env.observe(&s).to_vec();
                *state = Some(s);
                obs
            }
            Inner::Docking { env, state } => {
                let s = match self.fixed_start {
                    Some(start) => env.start_from(start),
                    None => env.reset(seed),
                };
                self.initial_distance = s.phys.distance();
                let obs = env.observe(&s).to_vec();
                *state = Some(s);
                obs
            }
        }
    }

    pub fn state(&self) -> Option<HillState> {
        match &self.inner {
            Inner::Inspection { state, .. } => state.as_ref().map(|s| s.phys),
            Inner::Docking { state, .. } => state.as_ref().map(|s| s.phys),
        }
    }

    /// Fraction of chief points inspected so far (inspection only).
    pub fn inspected_fraction(&self) -> Option<f64> {
        match &self.inner {
            Inner::Inspection { env, state } => state
                .as_ref()
                .map(|s| s.inspected.count() as f64 / env.model().len() as f64),
            Inner::Docking { .. } => None,
        }
    }

    /// Applies a decoded thrust. Errors if no episode is running.
    pub fn step_thrust(&mut self, thrust: &ThrustCommand) -> Result<(Transition, StepRecord)> {
        let (transition, record) = match &mut self.inner {
            Inner::Inspection { env, state } => {
                let s = state.as_ref().ok_or(Error::EpisodeDone)?;
                let (next, out) = env.step(s, thrust)?;
                let record = StepRecord {
                    step: next.step_count,
                    state: next.phys,
                    thrust: *thrust,
                    reward: out.reward,
                    components: out.components.named(),
                    extras: vec![
                        ("inspected", next.inspected.count() as f64),
                        ("sun_angle", next.sun.theta),
                        ("w", next.w),
                    ],
                };
                let t = Transition {
                    observation: out.observation.to_vec(),
                    reward: out.reward,
                    done: out.done.is_terminal(),
                };
                *state = Some(next);
                (t, record)
            }
            Inner::Docking { env, state } => {
                let s = state.as_ref().ok_or(Error::EpisodeDone)?;
                let (next, out) = env.step(s, thrust)?;
                let record = StepRecord {
                    step: next.step_count,
                    state: next.phys,
                    thrust: *thrust,
                    reward: out.reward,
                    components: out.components.named(),
                    extras: vec![
                        ("speed", next.phys.speed()),
                        ("max_speed", env.max_speed(next.phys.distance())),
                    ],
                };
                let t = Transition {
                    observation: out.observation.to_vec(),
                    reward: out.reward,
                    done: out.done.is_terminal(),
                };
                *state = Some(next);
                (t, record)
            }
        };
        self.episode_return += transition.reward;
        Ok((transition, record))
    }

    /// Summary of the finished episode; `None` while it is still running.
    pub fn summary(&self) -> Option<EpisodeMetrics> {
        match &self.inner {
            Inner::Inspection { state, .. } => {
                let s = state.as_ref()?;
                let done = s.termination.filter(|t| t.is_terminal())?;
                Some(EpisodeMetrics {
                    case: s.episode_seed,
                    total_reward: self.episode_return,
                    success: u8::from(done == crate::inspection::InspectionTermination::AllInspected),
                    delta_v: s.cumulative_delta_v,
                    episode_length: s.step_count,
                    termination: format!("{done:?}"),
                    inspected_points: Some(s.inspected.count()),
                    violation_percent: None,
                    final_speed: None,
                    initial_distance: self.initial_distance,
                    final_distance: s.phys.distance(),
                })
            }
            Inner::Docking { state, .. } => {
                let s = state.as_ref()?;
                let done = s.termination.filter(|t| t.is_terminal())?;
                Some(EpisodeMetrics {
                    case: self.episode_seed,
                    total_reward: self.episode_return,
                    success: u8::from(done == crate::docking::DockingTermination::Docked),
                    delta_v: s.cumulative_delta_v,
                    episode_length: s.step_count,
                    termination: format!("{done:?}"),
                    inspected_points: None,
                    violation_percent: Some(100.0 * s.violation_fraction().ok()?),
                    final_speed: Some(s.phys.speed()),
                    initial_distance: self.initial_distance,
                    final_distance: s.phys.distance(),
                })
            }
        }
    }
}
