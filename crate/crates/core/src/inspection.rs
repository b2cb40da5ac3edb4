//! Illuminated inspection of a spherical chief.
//!
//! The chief carries 99 inspectable points on a 10 m sphere. A point counts
//! as inspected once it is both lit by the Sun and on the hemisphere facing
//! the deputy. The Sun turns in the x-y plane of Hill's frame at the orbital
//! rate. Rewards: +0.1 per newly inspected point, `-w * dv` for fuel, and -1
//! for entering the 15 m keep-out sphere.

use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{DynamicsParams, HillState, Propagator, ThrustCommand};
use crate::env::random_direction_scaled;
use crate::error::{Error, Result};
use crate::guidance::{guidance_vector, GuidanceConfig};
use crate::seed;

pub const OBS_DIM: usize = 11;
pub const NUM_POINTS: usize = 99;
pub const W_MIN: f64 = 0.001;
pub const W_MAX: f64 = 0.1;
pub const W_STEP: f64 = 0.00005;
pub const W_EVAL: f64 = 0.1;

/// Set of inspected point indices (at most 128 points).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash, Serialize, Deserialize)]
pub struct PointMask(pub u128);

impl PointMask {
    pub fn empty() -> Self {
        Self(0)
    }

    pub fn full(n: usize) -> Self {
        if n >= 128 {
            Self(u128::MAX)
        } else {
            Self((1u128 << n) - 1)
        }
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    pub fn set(&mut self, i: usize) {
        self.0 |= 1 << i;
    }

    pub fn clear(&mut self, i: usize) {
        self.0 &= !(1 << i);
    }

    pub fn count(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn union(self, other: Self) -> Self {
        Self(self.0 | other.0)
    }

    /// Bits set in `self` but not in `before`.
    pub fn newly_set(self, before: Self) -> Self {
        Self(self.0 & !before.0)
    }
}

/// Spherical chief with its inspectable points.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiefModel {
    pub radius: f64,
    pub deputy_radius: f64,
    directions: Vec<Vector3<f64>>,
}

impl ChiefModel {
    /// Places `count` points on a sphere of `radius` along a golden-angle
    /// (Fibonacci) spiral.
    pub fn generate(count: usize, radius: f64, deputy_radius: f64) -> Result<Self> {
        if count == 0 || count > 128 {
            return Err(Error::domain(format!("point count must lie in 1..=128, got {count}")));
        }
        if !(radius > 0.0 && deputy_radius >= 0.0) {
            return Err(Error::domain("chief radius must be positive"));
        }
        let golden_angle = PI * (3.0 - 5f64.sqrt());
        let directions = (0..count)
            .map(|i| {
                let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
                let rho = (1.0 - z * z).max(0.0).sqrt();
                let phi = golden_angle * i as f64;
                Vector3::new(rho * phi.cos(), rho * phi.sin(), z).normalize()
            })
            .collect();
        Ok(Self {
            radius,
            deputy_radius,
            directions,
        })
    }

    /// 99 points on a 10 m chief, 5 m deputy.
    pub fn standard() -> Self {
        Self::generate(NUM_POINTS, 10.0, 5.0).expect("valid model")
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// Unit outward normal of point `i`.
    pub fn direction(&self, i: usize) -> Vector3<f64> {
        self.directions[i]
    }

    pub fn surface_point(&self, i: usize) -> Vector3<f64> {
        self.directions[i] * self.radius
    }

    /// Centre-to-centre distance below which the craft collide.
    pub fn crash_distance(&self) -> f64 {
        self.radius + self.deputy_radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SunDirection {
    /// theta(t) = theta0 - n t
    Retrograde,
    /// theta(t) = theta0 + n t
    Prograde,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SunState {
    /// Angle from +x in the x-y plane, rad in [0, 2pi).
    pub theta: f64,
}

impl SunState {
    pub fn new(theta: f64) -> Self {
        Self {
            theta: theta.rem_euclid(TAU),
        }
    }

    pub fn unit_vector(&self) -> Vector3<f64> {
        Vector3::new(self.theta.cos(), self.theta.sin(), 0.0)
    }

    pub fn advanced(&self, rate: f64, seconds: f64, direction: SunDirection) -> Self {
        let delta = rate * seconds;
        match direction {
            SunDirection::Retrograde => Self::new(self.theta - delta),
            SunDirection::Prograde => Self::new(self.theta + delta),
        }
    }
}

/// Points that are both lit and on the hemisphere facing the deputy.
///
/// For a sphere, ray tracing from the deputy to point `p` reduces to the
/// half-space test `p_hat . (d - p) > 0`; illumination is `p_hat . s_hat > 0`.
pub fn visible_and_illuminated(
    model: &ChiefModel,
    deputy_pos: &Vector3<f64>,
    sun: &SunState,
) -> Result<PointMask> {
    if !(deputy_pos.norm() > model.radius) {
        return Err(Error::domain(format!(
            "deputy at {:.3} m is inside the chief ({} m)",
            deputy_pos.norm(),
            model.radius
        )));
    }
    let s = sun.unit_vector();
    let mut mask = PointMask::empty();
    for i in 0..model.len() {
        let n = model.direction(i);
        let p = model.surface_point(i);
        if n.dot(&s) > 0.0 && n.dot(&(deputy_pos - p)) > 0.0 {
            mask.set(i);
        }
    }
    Ok(mask)
}

/// Negates `position` when the deputy, pointing at the chief, would look
/// within `keepout_rad` of the Sun.
pub fn apply_sun_keepout(position: Vector3<f64>, sun: &SunState, keepout_rad: f64) -> Vector3<f64> {
    let pointing = -position / position.norm();
    if pointing.dot(&sun.unit_vector()) > keepout_rad.cos() {
        -position
    } else {
        position
    }
}

/// One step of the fuel-weight schedule, driven by the mean fraction of
/// points inspected over the previous training iteration.
pub fn adaptive_w_update(w: f64, mean_inspected_fraction: f64) -> f64 {
    let next = if mean_inspected_fraction > 0.90 {
        w + W_STEP
    } else if mean_inspected_fraction < 0.80 {
        w - W_STEP
    } else {
        w
    };
    next.clamp(W_MIN, W_MAX)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InspectionConfig {
    pub dynamics: DynamicsParams,
    pub num_points: usize,
    pub chief_radius: f64,
    pub deputy_radius: f64,
    pub max_distance: f64,
    pub max_steps: usize,
    pub init_radius: (f64, f64),
    pub init_speed_max: f64,
    pub sun_keepout_deg: f64,
    pub sun_direction: SunDirection,
    pub guidance: GuidanceConfig,
}

impl Default for InspectionConfig {
    fn default() -> Self {
        Self {
            dynamics: DynamicsParams::inspection(),
            num_points: NUM_POINTS,
            chief_radius: 10.0,
            deputy_radius: 5.0,
            max_distance: 800.0,
            max_steps: 1223,
            init_radius: (50.0, 100.0),
            init_speed_max: 0.3,
            sun_keepout_deg: 30.0,
            sun_direction: SunDirection::Retrograde,
            guidance: GuidanceConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InspectionTermination {
    Running,
    AllInspected,
    Crash,
    OutOfBounds,
    Timeout,
}

impl InspectionTermination {
    pub fn is_terminal(&self) -> bool {
        !matches!(self, InspectionTermination::Running)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InspectionState {
    pub phys: HillState,
    pub inspected: PointMask,
    pub sun: SunState,
    pub step_count: usize,
    /// Fuel-penalty weight.
    pub w: f64,
    pub cumulative_delta_v: f64,
    pub episode_seed: u64,
    /// `None` right after reset.
    pub termination: Option<InspectionTermination>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct InspectionRewards {
    pub points: f64,
    pub fuel: f64,
    pub crash: f64,
}

impl InspectionRewards {
    pub fn total(&self) -> f64 {
        self.points + self.fuel + self.crash
    }

    pub fn named(&self) -> Vec<(&'static str, f64)> {
        vec![("points", self.points), ("fuel", self.fuel), ("crash", self.crash)]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: [f64; OBS_DIM],
    pub reward: f64,
    pub components: InspectionRewards,
    pub done: InspectionTermination,
    pub new_points: usize,
}

#[derive(Debug, Clone)]
pub struct InspectionEnv {
    cfg: InspectionConfig,
    model: ChiefModel,
    propagator: Propagator,
}

impl InspectionEnv {
    pub fn new(cfg: InspectionConfig) -> Result<Self> {
        let model = ChiefModel::generate(cfg.num_points, cfg.chief_radius, cfg.deputy_radius)?;
        let propagator = Propagator::new(cfg.dynamics)?;
        if cfg.init_radius.0 <= model.crash_distance() || cfg.init_radius.1 < cfg.init_radius.0 {
            return Err(Error::config("initial radius range must lie outside the keep-out zone"));
        }
        Ok(Self {
            cfg,
            model,
            propagator,
        })
    }

    pub fn config(&self) -> &InspectionConfig {
        &self.cfg
    }

    pub fn model(&self) -> &ChiefModel {
        &self.model
    }

    pub fn propagator(&self) -> &Propagator {
        &self.propagator
    }

    /// Starts an episode. `evaluation` selects the constant evaluation fuel
    /// weight instead of the initial training weight.
    pub fn reset(&self, seed: u64, evaluation: bool) -> InspectionState {
        let mut rng = seed::episode_rng(seed);
        let sun = SunState::new(rng.random_range(0.0..=TAU));
        let r = rng.random_range(self.cfg.init_radius.0..=self.cfg.init_radius.1);
        let position = random_direction_scaled(&mut rng, r);
        let position = apply_sun_keepout(position, &sun, self.cfg.sun_keepout_deg.to_radians());
        let speed = rng.random_range(0.0..=self.cfg.init_speed_max);
        let velocity = random_direction_scaled(&mut rng, speed);
        self.start_from(HillState::new(position, velocity), sun, seed, evaluation)
    }

    /// Starts an episode from an explicit geometry; points visible at the
    /// start are marked inspected without reward.
    pub fn start_from(&self, phys: HillState, sun: SunState, seed: u64, evaluation: bool) -> InspectionState {
        let inspected = visible_and_illuminated(&self.model, &phys.position, &sun)
            .unwrap_or_default();
        InspectionState {
            phys,
            inspected,
            sun,
            step_count: 0,
            w: if evaluation { W_EVAL } else { W_MIN },
            cumulative_delta_v: 0.0,
            episode_seed: seed,
            termination: None,
        }
    }

    pub fn guidance(&self, state: &InspectionState) -> Vector3<f64> {
        let seed = seed::combine(
            seed::combine(state.episode_seed, seed::Stream::Guidance as u64),
            state.step_count as u64,
        );
        guidance_vector(
            &self.model,
            state.inspected,
            &state.phys.position,
            seed,
            &self.cfg.guidance,
        )
    }

    pub fn observe(&self, state: &InspectionState) -> [f64; OBS_DIM] {
        observe(state, &self.guidance(state))
    }

    pub fn step(
        &self,
        state: &InspectionState,
        thrust: &ThrustCommand,
    ) -> Result<(InspectionState, StepOutcome)> {
        if state.termination.is_some_and(|t| t.is_terminal()) {
            return Err(Error::EpisodeDone);
        }
        let phys = self.propagator.propagate(&state.phys, thrust)?;
        let sun = state.sun.advanced(
            self.cfg.dynamics.mean_motion,
            self.cfg.dynamics.dt,
            self.cfg.sun_direction,
        );
        let distance = phys.distance();
        // inside the chief the visibility test is undefined; this step is a crash anyway
        let seen = if distance > self.model.radius {
            visible_and_illuminated(&self.model, &phys.position, &sun)?
        } else {
            PointMask::empty()
        };
        let inspected = state.inspected.union(seen);
        let new_points = inspected.newly_set(state.inspected).count();

        let dv = self.propagator.step_delta_v(thrust);
        let crashed = distance < self.model.crash_distance();
        let components = InspectionRewards {
            points: 0.1 * new_points as f64,
            fuel: -state.w * dv,
            crash: if crashed { -1.0 } else { 0.0 },
        };
        let step_count = state.step_count + 1;
        let done = if crashed {
            InspectionTermination::Crash
        } else if inspected.count() == self.model.len() {
            InspectionTermination::AllInspected
        } else if distance > self.cfg.max_distance {
            InspectionTermination::OutOfBounds
        } else if step_count >= self.cfg.max_steps {
            InspectionTermination::Timeout
        } else {
            InspectionTermination::Running
        };
        let next = InspectionState {
            phys,
            inspected,
            sun,
            step_count,
            w: state.w,
            cumulative_delta_v: state.cumulative_delta_v + dv,
            episode_seed: state.episode_seed,
            termination: Some(done),
        };
        let outcome = StepOutcome {
            observation: self.observe(&next),
            reward: components.total(),
            components,
            done,
            new_points,
        };
        Ok((next, outcome))
    }
}

/// `[x/100, y/100, z/100, 2vx, 2vy, 2vz, points/100, theta_sun, gx, gy, gz]`
pub fn observe(state: &InspectionState, guidance: &Vector3<f64>) -> [f64; OBS_DIM] {
    let p = state.phys.position;
    let v = state.phys.velocity;
    [
        p.x / 100.0,
        p.y / 100.0,
        p.z / 100.0,
        v.x * 2.0,
        v.y * 2.0,
        v.z * 2.0,
        state.inspected.count() as f64 / 100.0,
        state.sun.theta,
        guidance.x,
        guidance.y,
        guidance.z,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::MEAN_MOTION;
    use proptest::prelude::*;

    fn env() -> InspectionEnv {
        InspectionEnv::new(InspectionConfig::default()).unwrap()
    }

    fn nearest_point(model: &ChiefModel, dir: Vector3<f64>) -> usize {
        (0..model.len())
            .max_by(|a, b| {
                model
                    .direction(*a)
                    .dot(&dir)
                    .partial_cmp(&model.direction(*b).dot(&dir))
                    .unwrap()
            })
            .unwrap()
    }

    #[test]
    fn point_generation() {
        let m = ChiefModel::standard();
        assert_eq!(m.len(), 99);
        for i in 0..m.len() {
            assert!((m.direction(i).norm() - 1.0).abs() < 1e-12);
            assert!((m.surface_point(i).norm() - 10.0).abs() < 1e-9);
        }
        assert_eq!(m, ChiefModel::standard());
        assert_eq!(m.crash_distance(), 15.0);
    }

    #[test]
    fn point_spacing_is_near_uniform() {
        // brute-force nearest-neighbour angular separation
        let m = ChiefModel::standard();
        let mean_sep = (4.0 * PI / 99.0).sqrt();
        let mut min_nn = f64::INFINITY;
        for i in 0..m.len() {
            let nn = (0..m.len())
                .filter(|j| *j != i)
                .map(|j| m.direction(i).dot(&m.direction(j)).clamp(-1.0, 1.0).acos())
                .fold(f64::INFINITY, f64::min);
            min_nn = min_nn.min(nn);
        }
        assert!(min_nn >= 0.5 * mean_sep, "min nn {min_nn} vs mean {mean_sep}");
    }

    #[test]
    fn aligned_and_opposed_sun() {
        let m = ChiefModel::standard();
        let d = Vector3::new(50.0, 0.0, 0.0);
        let mask = visible_and_illuminated(&m, &d, &SunState::new(0.0)).unwrap();
        assert!(mask.contains(nearest_point(&m, Vector3::x())));
        assert!(!mask.contains(nearest_point(&m, -Vector3::x())));

        let mask = visible_and_illuminated(&m, &d, &SunState::new(PI)).unwrap();
        // lit hemisphere faces away; only points straddling the terminator could survive
        let brute = (0..m.len())
            .filter(|&i| {
                let n = m.direction(i);
                n.dot(&SunState::new(PI).unit_vector()) > 0.0 && n.dot(&(d - m.surface_point(i))) > 0.0
            })
            .count();
        assert_eq!(mask.count(), brute);
        assert!(mask.count() <= 2);
    }

    #[test]
    fn deputy_inside_chief_is_rejected() {
        let m = ChiefModel::standard();
        assert!(visible_and_illuminated(&m, &Vector3::new(5.0, 0.0, 0.0), &SunState::new(0.0)).is_err());
    }

    #[test]
    fn observation_scaling() {
        let e = env();
        let state = InspectionState {
            phys: HillState::from_array([100.0, 0.0, 0.0, 0.5, 0.0, 0.0]),
            inspected: PointMask::empty(),
            sun: SunState::new(1.0),
            step_count: 0,
            w: W_MIN,
            cumulative_delta_v: 0.0,
            episode_seed: 0,
            termination: None,
        };
        let obs = observe(&state, &Vector3::new(0.0, 0.0, 1.0));
        assert_eq!(obs, [1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
        let full = InspectionState {
            inspected: PointMask::full(99),
            ..state.clone()
        };
        let obs = e.observe(&full);
        assert_eq!(obs.len(), OBS_DIM);
        assert!((obs[6] - 0.99).abs() < 1e-15);
        assert_eq!(&obs[8..], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn reset_ranges() {
        let e = env();
        for seed in 0..1000 {
            let s = e.reset(seed, false);
            let r = s.phys.distance();
            assert!((50.0 - 1e-9..=100.0 + 1e-9).contains(&r), "r = {r}");
            assert!(s.phys.speed() <= 0.3 + 1e-12);
            assert!((0.0..TAU).contains(&s.sun.theta));
            assert_eq!(s.w, W_MIN);
            // never pointing within 30 degrees of the sun
            let pointing = -s.phys.position.normalize();
            assert!(pointing.dot(&s.sun.unit_vector()) <= 30f64.to_radians().cos() + 1e-12);
        }
        assert_eq!(e.reset(17, true).w, W_EVAL);
        assert_eq!(e.reset(17, false), e.reset(17, false));
    }

    #[test]
    fn keepout_negates_constructed_position() {
        let sun = SunState::new(0.0);
        // pointing direction 10 degrees from +x means position at 180+10 degrees
        let a = PI + 10f64.to_radians();
        let pos = Vector3::new(80.0 * a.cos(), 80.0 * a.sin(), 0.0);
        assert_eq!(apply_sun_keepout(pos, &sun, 30f64.to_radians()), -pos);
        let a = PI + 45f64.to_radians();
        let pos = Vector3::new(80.0 * a.cos(), 80.0 * a.sin(), 0.0);
        assert_eq!(apply_sun_keepout(pos, &sun, 30f64.to_radians()), pos);
    }

    fn state_at(e: &InspectionEnv, pos: [f64; 6], sun: f64) -> InspectionState {
        e.start_from(HillState::from_array(pos), SunState::new(sun), 0, false)
    }

    #[test]
    fn zero_thrust_reward_is_zero() {
        let e = env();
        // sun behind the chief: nothing new can be seen
        let s = state_at(&e, [0.0, 200.0, 0.0, 0.0, 0.0, 0.0], -PI / 2.0);
        let (_, out) = e.step(&s, &ThrustCommand::zero()).unwrap();
        assert_eq!(out.new_points, 0);
        assert_eq!(out.reward, 0.0);
        assert_eq!(out.done, InspectionTermination::Running);
    }

    #[test]
    fn reward_with_points_and_fuel() {
        let c = InspectionRewards {
            points: 0.1 * 3.0,
            fuel: -0.001 * crate::dynamics::step_delta_v(
                &ThrustCommand::new(1.0, 1.0, 1.0),
                &DynamicsParams::inspection(),
            ),
            crash: 0.0,
        };
        assert!((c.total() - 0.2975).abs() < 1e-15);
    }

    #[test]
    fn timeout_step_count() {
        let period = TAU / MEAN_MOTION;
        assert_eq!((2.0 * period / 10.0).floor() as usize, 1223);
        let e = env();
        let mut s = state_at(&e, [0.0, 200.0, 0.0, 0.0, 0.0, 0.0], PI / 2.0);
        s.step_count = 1222;
        let (next, out) = e.step(&s, &ThrustCommand::zero()).unwrap();
        assert_eq!(next.step_count, 1223);
        assert_eq!(out.done, InspectionTermination::Timeout);
        assert!(matches!(e.step(&next, &ThrustCommand::zero()), Err(Error::EpisodeDone)));
    }

    #[test]
    fn crash_dominates() {
        let e = env();
        let mut s = state_at(&e, [16.0, 0.0, 0.0, -0.5, 0.0, 0.0], 0.0);
        s.step_count = 1222;
        let (_, out) = e.step(&s, &ThrustCommand::zero()).unwrap();
        assert_eq!(out.done, InspectionTermination::Crash);
        assert_eq!(out.components.crash, -1.0);
    }

    #[test]
    fn adaptive_w_examples() {
        assert!((adaptive_w_update(0.001, 0.95) - 0.00105).abs() < 1e-15);
        assert_eq!(adaptive_w_update(0.001, 0.70), 0.001);
        assert_eq!(adaptive_w_update(0.05, 0.85), 0.05);
        assert_eq!(adaptive_w_update(0.1, 1.0), 0.1);
    }

    #[test]
    fn sun_period() {
        let sun0 = SunState::new(1.3);
        let mut sun = sun0;
        for _ in 0..6118 {
            sun = sun.advanced(MEAN_MOTION, 1.0, SunDirection::Retrograde);
        }
        let diff = (sun.theta - sun0.theta).rem_euclid(TAU);
        let diff = diff.min(TAU - diff);
        assert!(diff <= MEAN_MOTION * 1.0);
    }

    proptest! {
        #[test]
        fn episode_invariants(seed in 0u64..10_000, actions in proptest::collection::vec(proptest::array::uniform3(-1.0f64..1.0), 1..80)) {
            let e = env();
            let mut s = e.reset(seed, false);
            let mut dv_sum = 0.0;
            for a in actions {
                let t = ThrustCommand::new(a[0], a[1], a[2]);
                let (next, out) = e.step(&s, &t).unwrap();
                prop_assert_eq!(out.reward, out.components.points + out.components.fuel + out.components.crash);
                prop_assert_eq!(next.inspected.0 & s.inspected.0, s.inspected.0);
                dv_sum += e.propagator().step_delta_v(&t);
                prop_assert_eq!(next.cumulative_delta_v, dv_sum);
                if out.done == InspectionTermination::AllInspected {
                    prop_assert_eq!(next.inspected.count(), 99);
                }
                s = next;
                if out.done.is_terminal() {
                    break;
                }
            }
        }
    }
}
