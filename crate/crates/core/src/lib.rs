//! Reinforcement-learning workbench for spacecraft proximity operations.
//!
//! Two tasks share Clohessy-Wiltshire relative dynamics in Hill's frame:
//! illuminated inspection of a spherical chief and docking under a
//! distance-dependent speed limit. Agents are trained with PPO over a grid of
//! continuous and discrete action spaces and evaluated with interquartile
//! means and bootstrap confidence intervals.

pub mod action;
pub mod checkpoint;
pub mod docking;
pub mod dynamics;
pub mod env;
pub mod error;
pub mod experiment;
pub mod guidance;
pub mod inspection;
pub mod metrics;
pub mod net;
pub mod plot;
pub mod ppo;
pub mod report;
pub mod rollout;
pub mod seed;
pub mod trajectory;

pub use error::{Error, Result};
