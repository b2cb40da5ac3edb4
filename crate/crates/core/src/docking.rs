//! Docking under a distance-dependent speed limit.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{DynamicsParams, HillState, Propagator, ThrustCommand, MEAN_MOTION};
use crate::env::random_direction_scaled;
use crate::error::{Error, Result};
use crate::seed;

pub const OBS_DIM: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DockingConfig {
    pub dynamics: DynamicsParams,
    /// m
    pub dock_radius: f64,
    /// Maximum speed at the docking radius, m/s.
    pub max_dock_speed: f64,
    /// Speed-limit slope, 1/s.
    pub limit_slope: f64,
    pub max_steps: usize,
    pub max_distance: f64,
    pub init_radius: (f64, f64),
    /// Initial speed is drawn from `[0, fraction * max_speed(r0)]`.
    pub init_speed_fraction: f64,
}

impl Default for DockingConfig {
    fn default() -> Self {
        Self {
            dynamics: DynamicsParams::docking(),
            dock_radius: 10.0,
            max_dock_speed: 0.2,
            limit_slope: 2.0 * MEAN_MOTION,
            max_steps: 2000,
            max_distance: 800.0,
            init_radius: (100.0, 150.0),
            init_speed_fraction: 0.8,
        }
    }
}

impl DockingConfig {
    pub fn validate(&self) -> Result<()> {
        self.dynamics.validate()?;
        let all_positive = [
            self.dock_radius,
            self.max_dock_speed,
            self.limit_slope,
            self.max_distance,
            self.init_radius.0,
        ]
        .iter()
        .all(|v| *v > 0.0)
            && self.max_steps > 0;
        if !all_positive || self.init_radius.1 < self.init_radius.0 {
            return Err(Error::config(format!("invalid docking config {self:?}")));
        }
        Ok(())
    }
}

/// `nu_0 + nu_1 (r - r_d)`
pub fn max_speed(r: f64, cfg: &DockingConfig) -> f64 {
    cfg.max_dock_speed + cfg.limit_slope * (r - cfg.dock_radius)
}

/// Decay rate of the distance-change reward, `ln 2 / 100` per metre.
pub fn distance_decay() -> f64 {
    std::f64::consts::LN_2 / 100.0
}

/// `2 (exp(-a r_now) - exp(-a r_prev))`
pub fn distance_change_reward(r_now: f64, r_prev: f64) -> f64 {
    let a = distance_decay();
    2.0 * ((-a * r_now).exp() - (-a * r_prev).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DockingTermination {
    Running,
    Docked,
    Crashed,
    OutOfBounds,
    Timeout,
}

impl DockingTermination {
    pub fn is_terminal(&self) -> bool {
        !matches!(self, DockingTermination::Running)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DockingState {
    pub phys: HillState,
    pub step_count: usize,
    pub cumulative_delta_v: f64,
    pub violation_steps: usize,
    pub prev_distance: f64,
    pub termination: Option<DockingTermination>,
}

impl DockingState {
    /// Fraction of steps that broke the speed limit; only defined once the
    /// episode is over.
    pub fn violation_fraction(&self) -> Result<f64> {
        match self.termination {
            Some(t) if t.is_terminal() => {
                Ok(self.violation_steps as f64 / self.step_count.max(1) as f64)
            }
            _ => Err(Error::domain("violation fraction requested before the episode finished")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DockingRewards {
    pub dist_change: f64,
    pub fuel: f64,
    pub violation: f64,
    pub time: f64,
    pub success: f64,
    pub crash: f64,
}

impl DockingRewards {
    pub fn total(&self) -> f64 {
        self.dist_change + self.fuel + self.violation + self.time + self.success + self.crash
    }

    pub fn named(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("dist_change", self.dist_change),
            ("fuel", self.fuel),
            ("violation", self.violation),
            ("time", self.time),
            ("success", self.success),
            ("crash", self.crash),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DockingOutcome {
    pub observation: [f64; OBS_DIM],
    pub reward: f64,
    pub components: DockingRewards,
    pub done: DockingTermination,
    /// Speed at the terminal step.
    pub final_speed: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct DockingEnv {
    cfg: DockingConfig,
    propagator: Propagator,
}

impl DockingEnv {
    pub fn new(cfg: DockingConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            propagator: Propagator::new(cfg.dynamics)?,
            cfg,
        })
    }

    pub fn config(&self) -> &DockingConfig {
        &self.cfg
    }

    pub fn propagator(&self) -> &Propagator {
        &self.propagator
    }

    pub fn max_speed(&self, r: f64) -> f64 {
        max_speed(r, &self.cfg)
    }

    pub fn reset(&self, seed: u64) -> DockingState {
        let mut rng = seed::episode_rng(seed);
        let r = rng.random_range(self.cfg.init_radius.0..=self.cfg.init_radius.1);
        let position = random_direction_scaled(&mut rng, r);
        let limit = self.cfg.init_speed_fraction * self.max_speed(position.norm());
        let speed = rng.random_range(0.0..=limit);
        let velocity = random_direction_scaled(&mut rng, speed);
        self.start_from(HillState::new(position, velocity))
    }

    pub fn start_from(&self, phys: HillState) -> DockingState {
        DockingState {
            prev_distance: phys.distance(),
            phys,
            step_count: 0,
            cumulative_delta_v: 0.0,
            violation_steps: 0,
            termination: None,
        }
    }

    /// `[x/100, y/100, z/100, vx/0.5, vy/0.5, vz/0.5, speed, max_speed]`
    pub fn observe(&self, state: &DockingState) -> [f64; OBS_DIM] {
        let p = state.phys.position;
        let v = state.phys.velocity;
        [
            p.x / 100.0,
            p.y / 100.0,
            p.z / 100.0,
            v.x / 0.5,
            v.y / 0.5,
            v.z / 0.5,
            state.phys.speed(),
            self.max_speed(state.phys.distance()),
        ]
    }

    pub fn step(
        &self,
        state: &DockingState,
        thrust: &ThrustCommand,
    ) -> Result<(DockingState, DockingOutcome)> {
        if state.termination.is_some_and(|t| t.is_terminal()) {
            return Err(Error::EpisodeDone);
        }
        let phys = self.propagator.propagate(&state.phys, thrust)?;
        let r = phys.distance();
        let speed = phys.speed();
        let limit = self.max_speed(r);
        let dv = self.propagator.step_delta_v(thrust);
        let violated = speed > limit;
        let in_dock = r <= self.cfg.dock_radius;
        let docked = in_dock && speed <= self.cfg.max_dock_speed;
        let crashed = in_dock && !docked;

        let components = DockingRewards {
            dist_change: distance_change_reward(r, state.prev_distance),
            fuel: -0.01 * dv,
            violation: if violated { -0.01 * (speed - limit) } else { 0.0 },
            time: -0.01,
            success: if docked { 1.0 } else { 0.0 },
            crash: if crashed { -1.0 } else { 0.0 },
        };
        let step_count = state.step_count + 1;
        let done = if docked {
            DockingTermination::Docked
        } else if crashed {
            DockingTermination::Crashed
        } else if r > self.cfg.max_distance {
            DockingTermination::OutOfBounds
        } else if step_count >= self.cfg.max_steps {
            DockingTermination::Timeout
        } else {
            DockingTermination::Running
        };
        let next = DockingState {
            phys,
            step_count,
            cumulative_delta_v: state.cumulative_delta_v + dv,
            violation_steps: state.violation_steps + usize::from(violated),
            prev_distance: r,
            termination: Some(done),
        };
        let outcome = DockingOutcome {
            observation: self.observe(&next),
            reward: components.total(),
            components,
            done,
            final_speed: done.is_terminal().then_some(speed),
        };
        Ok((next, outcome))
    }
}
