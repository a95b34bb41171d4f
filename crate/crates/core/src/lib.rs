//! Label-free fencing of a moving target by second-order multi-agent systems.
//!
//! Each agent runs the same dynamic regulator: a state-feedback term, a
//! two-state internal model of the target exosystem, and a repulsive potential
//! that vanishes beyond the sensing radius. No agent is assigned a slot in the
//! formation; the convex hull of the swarm ends up containing the target.
//!
//! Modules:
//! - [`model`]: planar vectors, agent/target state, exosystem propagation, the
//!   repulsive potential and neighbour sets.
//! - [`controller`]: the label-free control law, the label-fixed baseline and
//!   the gain conditions.
//! - [`analysis`]: closed-loop matrices, Routh–Hurwitz, the regulator
//!   (Sylvester) equation and the Lyapunov certificate.
//! - [`geometry`]: convex hull and target-to-hull distance.
//! - [`simulator`]: fixed-step RK4 integration, scenarios, dropout and metrics.

pub mod analysis;
pub mod controller;
mod error;
pub mod geometry;
pub mod model;
pub mod simulator;

pub use error::{Error, Result};
pub use model::{AgentState, Gains, PotentialParams, TargetState, Vec2};
