//! Action-space definitions and decoding of policy outputs into thrust.
//!
//! Discrete spaces are factored per axis: the policy picks one value from the
//! same per-axis table for each of x, y and z independently.

use serde::{Deserialize, Serialize};

use crate::dynamics::ThrustCommand;
use crate::error::{Error, Result};

pub const UNIFORM_CHOICE_COUNTS: [usize; 10] = [3, 5, 7, 9, 11, 21, 31, 41, 51, 101];
pub const THRUST_MAGNITUDES: [f64; 2] = [1.0, 0.1];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ActionKind {
    Continuous,
    /// `choices` values evenly spaced over `[-u_max, u_max]`.
    DiscreteUniform { choices: usize },
    /// An explicit ascending, zero-symmetric per-axis value table.
    DiscreteExplicit { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSpaceSpec {
    pub kind: ActionKind,
    /// Maximum force magnitude per axis, N.
    pub u_max: f64,
}

/// Raw per-axis selection produced by a policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActionChoice {
    Continuous([f64; 3]),
    Discrete([usize; 3]),
}

impl ActionSpaceSpec {
    pub fn continuous(u_max: f64) -> Result<Self> {
        Self::validated(ActionKind::Continuous, u_max)
    }

    pub fn uniform(choices: usize, u_max: f64) -> Result<Self> {
        Self::validated(ActionKind::DiscreteUniform { choices }, u_max)
    }

    /// `u_max` is taken as the largest magnitude in `values`.
    pub fn explicit(values: Vec<f64>) -> Result<Self> {
        let u_max = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        Self::validated(ActionKind::DiscreteExplicit { values }, u_max)
    }

    /// The coarse/fine docking table `[-1, -0.1, 0, 0.1, 1]`.
    pub fn coarse_fine() -> Self {
        Self::explicit(vec![-1.0, -0.1, 0.0, 0.1, 1.0]).expect("valid table")
    }

    /// The four-decade docking table `[-1, -0.1, -0.01, -0.001, 0, ...]`.
    pub fn four_decade() -> Self {
        Self::explicit(vec![
            -1.0, -0.1, -0.01, -0.001, 0.0, 0.001, 0.01, 0.1, 1.0,
        ])
        .expect("valid table")
    }

    fn validated(kind: ActionKind, u_max: f64) -> Result<Self> {
        let spec = Self { kind, u_max };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.u_max.is_finite() && self.u_max > 0.0) {
            return Err(Error::domain(format!("u_max must be positive, got {}", self.u_max)));
        }
        match &self.kind {
            ActionKind::Continuous => Ok(()),
            ActionKind::DiscreteUniform { choices } => {
                if *choices < 3 || choices % 2 == 0 {
                    return Err(Error::domain(format!(
                        "uniform choice count must be odd and >= 3, got {choices}"
                    )));
                }
                Ok(())
            }
            ActionKind::DiscreteExplicit { values } => {
                if values.len() < 3 || values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::domain("explicit table needs >= 3 finite values"));
                }
                if values.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::domain("explicit table must be strictly ascending"));
                }
                if values.iter().filter(|v| **v == 0.0).count() != 1 {
                    return Err(Error::domain("explicit table must contain 0 exactly once"));
                }
                let n = values.len();
                if (0..n).any(|i| values[i] != -values[n - 1 - i]) {
                    return Err(Error::domain("explicit table must be symmetric about 0"));
                }
                if values.iter().any(|v| v.abs() > self.u_max) {
                    return Err(Error::domain("explicit value exceeds u_max"));
                }
                Ok(())
            }
        }
    }

    pub fn is_discrete(&self) -> bool {
        !matches!(self.kind, ActionKind::Continuous)
    }

    /// Number of per-axis values, or `None` for a continuous space.
    pub fn num_choices(&self) -> Option<usize> {
        match &self.kind {
            ActionKind::Continuous => None,
            ActionKind::DiscreteUniform { choices } => Some(*choices),
            ActionKind::DiscreteExplicit { values } => Some(values.len()),
        }
    }

    /// The ordered per-axis value table.
    pub fn choice_set(&self) -> Result<Vec<f64>> {
        match &self.kind {
            ActionKind::Continuous => Err(Error::domain(
                "a continuous action space has no finite choice set",
            )),
            ActionKind::DiscreteUniform { choices } => {
                let k = *choices as i64;
                let half = (k - 1) as f64;
                // (2i - (K-1)) / (K-1) keeps the table exactly symmetric with an exact 0
                Ok((0..k)
                    .map(|i| self.u_max * ((2 * i - (k - 1)) as f64 / half))
                    .collect())
            }
            ActionKind::DiscreteExplicit { values } => Ok(values.clone()),
        }
    }

    pub fn decode(&self, choice: &ActionChoice) -> Result<ThrustCommand> {
        match (&self.kind, choice) {
            (ActionKind::Continuous, ActionChoice::Continuous(raw)) => {
                if raw.iter().any(|v| v.is_nan()) {
                    return Err(Error::domain("NaN continuous action"));
                }
                let c = |v: f64| v.clamp(-self.u_max, self.u_max);
                Ok(ThrustCommand::new(c(raw[0]), c(raw[1]), c(raw[2])))
            }
            (ActionKind::Continuous, ActionChoice::Discrete(_)) => Err(Error::domain(
                "discrete choice given for a continuous action space",
            )),
            (_, ActionChoice::Continuous(_)) => Err(Error::domain(
                "continuous choice given for a discrete action space",
            )),
            (_, ActionChoice::Discrete(idx)) => {
                let table = self.choice_set()?;
                let mut out = [0.0; 3];
                for (o, &i) in out.iter_mut().zip(idx) {
                    *o = *table.get(i).ok_or_else(|| {
                        Error::domain(format!("action index {i} out of range 0..{}", table.len()))
                    })?;
                }
                Ok(ThrustCommand::new(out[0], out[1], out[2]))
            }
        }
    }

    /// Short human-readable label used in reports and file names.
    pub fn label(&self) -> String {
        match &self.kind {
            ActionKind::Continuous => "continuous".to_string(),
            ActionKind::DiscreteUniform { choices } => format!("discrete-{choices}"),
            ActionKind::DiscreteExplicit { values } => {
                let positive: Vec<f64> = values.iter().copied().filter(|v| *v > 0.0).rev().collect();
                match positive.len() {
                    0 => "explicit".to_string(),
                    1 | 2 => positive
                        .iter()
                        .map(|v| format_value(*v))
                        .collect::<Vec<_>>()
                        .join("/"),
                    _ => format!(
                        "{}/../{}",
                        format_value(positive[0]),
                        format_value(*positive.last().unwrap())
                    ),
                }
            }
        }
    }

    /// Label safe for use as a path component.
    pub fn slug(&self) -> String {
        let umax = format_value(self.u_max);
        match &self.kind {
            ActionKind::DiscreteExplicit { .. } => {
                format!("explicit-{}", self.label().replace("/../", "-to-").replace('/', "-"))
            }
            _ => format!("{}-umax{}", self.label(), umax),
        }
    }
}

fn format_value(v: f64) -> String {
    let s = format!("{v}");
    if s.contains('.') || s.contains('e') {
        s
    } else {
        format!("{s}.0")
    }
}

/// The action spaces used for each task.
///
/// Inspection: continuous plus ten uniform sizes, each at both thrust
/// magnitudes (22). Docking: the same 22 plus the two explicit tables (24).
pub fn experiment_grid(include_explicit: bool) -> Vec<ActionSpaceSpec> {
    let mut grid = Vec::new();
    for &u_max in &THRUST_MAGNITUDES {
        grid.push(ActionSpaceSpec::continuous(u_max).expect("valid"));
        for &k in &UNIFORM_CHOICE_COUNTS {
            grid.push(ActionSpaceSpec::uniform(k, u_max).expect("valid"));
        }
    }
    if include_explicit {
        grid.push(ActionSpaceSpec::coarse_fine());
        grid.push(ActionSpaceSpec::four_decade());
    }
    grid
}

pub fn inspection_grid() -> Vec<ActionSpaceSpec> {
    experiment_grid(false)
}

pub fn docking_grid() -> Vec<ActionSpaceSpec> {
    experiment_grid(true)
}
