//! Clohessy-Wiltshire relative motion in Hill's frame.
//!
//! The deputy state is `[x, y, z, vx, vy, vz]` relative to the chief, with
//! `x` radially outward, `y` along the chief's velocity and `z` completing the
//! triad. The continuous system `s' = A s + B u` is linear time-invariant, so
//! it is discretized once per `(n, mass, dt)` with an exact zero-order hold:
//!
//! ```text
//! exp([A B; 0 0] dt) = [Ad Bd; 0 I]
//! ```
//!
//! which yields `Bd = A^-1 (Ad - I) B` without inverting `A` (which is
//! singular here).

use nalgebra::{Matrix6, Matrix6x3, SMatrix, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean motion of the chief's circular orbit, rad/s.
pub const MEAN_MOTION: f64 = 0.001027;
/// Deputy mass, kg.
pub const DEPUTY_MASS: f64 = 12.0;

/// Relative position (m) and velocity (m/s) of the deputy in Hill's frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HillState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
}

impl HillState {
    pub fn new(position: Vector3<f64>, velocity: Vector3<f64>) -> Self {
        Self { position, velocity }
    }

    pub fn from_array(s: [f64; 6]) -> Self {
        Self {
            position: Vector3::new(s[0], s[1], s[2]),
            velocity: Vector3::new(s[3], s[4], s[5]),
        }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.position.x,
            self.position.y,
            self.position.z,
            self.velocity.x,
            self.velocity.y,
            self.velocity.z,
        ]
    }

    pub fn as_vector(&self) -> Vector6<f64> {
        Vector6::from_row_slice(&self.to_array())
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self {
            position: Vector3::new(v[0], v[1], v[2]),
            velocity: Vector3::new(v[3], v[4], v[5]),
        }
    }

    /// Distance from the chief, m.
    pub fn distance(&self) -> f64 {
        self.position.norm()
    }

    /// Relative speed, m/s.
    pub fn speed(&self) -> f64 {
        self.velocity.norm()
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Thruster force along each Hill-frame axis, N.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ThrustCommand(pub Vector3<f64>);

impl ThrustCommand {
    pub fn new(fx: f64, fy: f64, fz: f64) -> Self {
        Self(Vector3::new(fx, fy, fz))
    }

    pub fn zero() -> Self {
        Self(Vector3::zeros())
    }

    pub fn components(&self) -> [f64; 3] {
        [self.0.x, self.0.y, self.0.z]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsParams {
    /// rad/s
    pub mean_motion: f64,
    /// kg
    pub mass: f64,
    /// s
    pub dt: f64,
}

impl DynamicsParams {
    pub fn new(mean_motion: f64, mass: f64, dt: f64) -> Result<Self> {
        let p = Self {
            mean_motion,
            mass,
            dt,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn inspection() -> Self {
        Self {
            mean_motion: MEAN_MOTION,
            mass: DEPUTY_MASS,
            dt: 10.0,
        }
    }

    pub fn docking() -> Self {
        Self {
            mean_motion: MEAN_MOTION,
            mass: DEPUTY_MASS,
            dt: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.mean_motion) || !ok(self.mass) || !ok(self.dt) {
            return Err(Error::domain(format!(
                "dynamics parameters must be finite and positive: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Continuous-time `(A, B)` of the CW equations.
pub fn system_matrices(params: &DynamicsParams) -> (Matrix6<f64>, Matrix6x3<f64>) {
    let n = params.mean_motion;
    let mut a = Matrix6::zeros();
    a[(0, 3)] = 1.0;
    a[(1, 4)] = 1.0;
    a[(2, 5)] = 1.0;
    a[(3, 0)] = 3.0 * n * n;
    a[(3, 4)] = 2.0 * n;
    a[(4, 3)] = -2.0 * n;
    a[(5, 2)] = -n * n;

    let mut b = Matrix6x3::zeros();
    let inv_m = 1.0 / params.mass;
    b[(3, 0)] = inv_m;
    b[(4, 1)] = inv_m;
    b[(5, 2)] = inv_m;
    (a, b)
}

/// Exact zero-order-hold discretization over one interval `dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discretization {
    pub ad: Matrix6<f64>,
    pub bd: Matrix6x3<f64>,
}

pub fn discretize(params: &DynamicsParams) -> Discretization {
    let (a, b) = system_matrices(params);
    let mut aug = SMatrix::<f64, 9, 9>::zeros();
    aug.fixed_view_mut::<6, 6>(0, 0).copy_from(&(a * params.dt));
    aug.fixed_view_mut::<6, 3>(0, 6).copy_from(&(b * params.dt));
    // Padé scaling-and-squaring
    let e = aug.exp();
    Discretization {
        ad: e.fixed_view::<6, 6>(0, 0).into_owned(),
        bd: e.fixed_view::<6, 3>(0, 6).into_owned(),
    }
}

/// Precomputed propagator for one `(n, mass, dt)`.
#[derive(Debug, Clone)]
pub struct Propagator {
    params: DynamicsParams,
    disc: Discretization,
}

impl Propagator {
    pub fn new(params: DynamicsParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            disc: discretize(&params),
            params,
        })
    }

    pub fn params(&self) -> &DynamicsParams {
        &self.params
    }

    pub fn discretization(&self) -> &Discretization {
        &self.disc
    }

    /// Advances `state` by one interval with `thrust` held constant.
    pub fn propagate(&self, state: &HillState, thrust: &ThrustCommand) -> Result<HillState> {
        if !state.is_finite() || !thrust.is_finite() {
            return Err(Error::domain("non-finite state or thrust"));
        }
        let next = self.disc.ad * state.as_vector() + self.disc.bd * thrust.0;
        Ok(HillState::from_vector(&next))
    }

    pub fn step_delta_v(&self, thrust: &ThrustCommand) -> f64 {
        step_delta_v(thrust, &self.params)
    }
}

/// One-shot propagation; prefer [`Propagator`] in loops.
pub fn propagate(
    state: &HillState,
    thrust: &ThrustCommand,
    params: &DynamicsParams,
) -> Result<HillState> {
    Propagator::new(*params)?.propagate(state, thrust)
}

/// Velocity change spent by holding `thrust` for one interval, m/s.
pub fn step_delta_v(thrust: &ThrustCommand, params: &DynamicsParams) -> f64 {
    (thrust.0.x.abs() + thrust.0.y.abs() + thrust.0.z.abs()) / params.mass * params.dt
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rk4_reference(s0: [f64; 6], u: [f64; 3], params: &DynamicsParams, h: f64) -> [f64; 6] {
        let (a, b) = system_matrices(params);
        let u = Vector3::from_row_slice(&u);
        let f = |s: &Vector6<f64>| a * s + b * u;
        let mut s = Vector6::from_row_slice(&s0);
        let steps = (params.dt / h).round() as usize;
        for _ in 0..steps {
            let k1 = f(&s);
            let k2 = f(&(s + k1 * (h / 2.0)));
            let k3 = f(&(s + k2 * (h / 2.0)));
            let k4 = f(&(s + k3 * h));
            s += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
        let mut out = [0.0; 6];
        out.copy_from_slice(s.as_slice());
        out
    }

    #[test]
    fn system_matrix_entries() {
        let p = DynamicsParams::inspection();
        let (a, b) = system_matrices(&p);
        assert_relative_eq!(a[(3, 0)], 3.164187e-6, max_relative = 1e-6);
        assert_eq!(a[(0, 3)], 1.0);
        assert_eq!(a[(1, 4)], 1.0);
        assert_eq!(a[(2, 5)], 1.0);
        assert_eq!(a[(3, 4)], 2.0 * MEAN_MOTION);
        assert_eq!(a[(4, 3)], -2.0 * MEAN_MOTION);
        assert_eq!(a[(5, 2)], -MEAN_MOTION * MEAN_MOTION);
        assert_eq!(a.iter().filter(|v| **v != 0.0).count(), 7);
        assert_eq!(b[(3, 0)], 1.0 / 12.0);
        assert_eq!(b[(4, 1)], 1.0 / 12.0);
        assert_eq!(b[(5, 2)], 1.0 / 12.0);
        assert_eq!(b.iter().filter(|v| **v != 0.0).count(), 3);
    }

    #[test]
    fn tiny_dt_is_identity() {
        let p = DynamicsParams::new(MEAN_MOTION, 12.0, 1e-9).unwrap();
        let d = discretize(&p);
        let diff = d.ad - Matrix6::identity();
        assert!(diff.amax() < 1e-6);
        assert!(d.bd.amax() < 1e-6);
    }

    #[test]
    fn out_of_plane_block_is_decoupled() {
        let d = discretize(&DynamicsParams::inspection());
        for r in 0..6 {
            for c in 0..6 {
                let r_out = r == 2 || r == 5;
                let c_out = c == 2 || c == 5;
                if r_out != c_out {
                    assert_eq!(d.ad[(r, c)], 0.0, "Ad[{r}][{c}]");
                }
            }
        }
        assert_eq!(d.bd[(2, 0)], 0.0);
        assert_eq!(d.bd[(5, 1)], 0.0);
        assert_eq!(d.bd[(0, 2)], 0.0);
        assert_eq!(d.bd[(3, 2)], 0.0);
    }

    #[test]
    fn harmonic_out_of_plane_motion() {
        let p = DynamicsParams::inspection();
        let prop = Propagator::new(p).unwrap();
        let mut s = HillState::from_array([0.0, 0.0, 10.0, 0.0, 0.0, 0.0]);
        for k in 1..=1223 {
            s = prop.propagate(&s, &ThrustCommand::zero()).unwrap();
            let t = k as f64 * p.dt;
            let expected = 10.0 * (p.mean_motion * t).cos();
            assert!((s.position.z - expected).abs() < 1e-9, "step {k}");
        }
    }

    #[test]
    fn matches_fine_step_rk4() {
        let p = DynamicsParams::inspection();
        let s0 = [100.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let exact = propagate(&HillState::from_array(s0), &ThrustCommand::zero(), &p).unwrap();
        let reference = rk4_reference(s0, [0.0; 3], &p, 1e-3);
        for i in 0..6 {
            assert!((exact.to_array()[i] - reference[i]).abs() < 1e-6);
        }
        // with thrust
        let s0 = [-40.0, 25.0, 3.0, 0.1, -0.05, 0.02];
        let u = [0.7, -0.3, 0.1];
        let exact = propagate(
            &HillState::from_array(s0),
            &ThrustCommand::new(u[0], u[1], u[2]),
            &p,
        )
        .unwrap();
        let reference = rk4_reference(s0, u, &p, 1e-3);
        for i in 0..6 {
            assert!((exact.to_array()[i] - reference[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn origin_is_equilibrium() {
        let s = propagate(
            &HillState::default(),
            &ThrustCommand::zero(),
            &DynamicsParams::docking(),
        )
        .unwrap();
        assert_eq!(s, HillState::default());
    }

    #[test]
    fn delta_v_examples() {
        let insp = DynamicsParams::inspection();
        assert_eq!(step_delta_v(&ThrustCommand::zero(), &insp), 0.0);
        assert_eq!(step_delta_v(&ThrustCommand::new(1.0, 1.0, 1.0), &insp), 2.5);
        let dock = DynamicsParams::docking();
        let dv = step_delta_v(&ThrustCommand::new(-0.1, 0.05, 0.0), &dock);
        assert!((dv - 0.0125).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_finite_input() {
        let prop = Propagator::new(DynamicsParams::docking()).unwrap();
        let bad = HillState::from_array([f64::NAN, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            prop.propagate(&bad, &ThrustCommand::zero()),
            Err(Error::Domain(_))
        ));
        let inf = ThrustCommand::new(f64::INFINITY, 0.0, 0.0);
        assert!(prop.propagate(&HillState::default(), &inf).is_err());
        assert!(DynamicsParams::new(0.0, 12.0, 1.0).is_err());
        assert!(DynamicsParams::new(MEAN_MOTION, -1.0, 1.0).is_err());
    }
}
