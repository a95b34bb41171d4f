//! The label-free dynamic regulator, the label-fixed baseline, and the gain
//! conditions that certify fencing, collision avoidance and rigid formation.

use crate::model::{AgentState, Gains, Vec2};
use crate::{Error, Result};

/// Tolerance on the C2 equality `k2 = k4 (k1 + s1 - 1) / k3`, relative to `k2`.
pub const C2_EQUALITY_TOL: f64 = 1e-9;

/// Acceleration command for one agent.
///
/// `u = -k1 x - k2 v - k3 eps - k4 zeta + k5 eta`
pub fn control_input(agent: &AgentState, eta: Vec2, g: &Gains) -> Vec2 {
    -(agent.x * g.k1) - agent.v * g.k2 - agent.eps * g.k3 - agent.zeta * g.k4 + eta * g.k5
}

/// Internal-model derivative `(eps', zeta')`.
///
/// The model is driven by the tracking error minus the scaled repulsion, so
/// that the repulsion does not bias the steady state.
pub fn internal_model_derivative(agent: &AgentState, x_d: Vec2, eta: Vec2, s1: f64, k5: f64) -> (Vec2, Vec2) {
    let e = agent.x - x_d;
    (agent.zeta, agent.eps * s1 + e - eta * k5)
}

/// Baseline controller that tracks a preassigned offset `d_des` from the
/// target, with no inter-agent repulsion.
///
/// Returns `(u, (eps', zeta'))`. The regulator is the label-free one applied
/// to the shifted position `x - d_des`.
pub fn label_fixed_control(agent: &AgentState, x_d: Vec2, d_des: Vec2, s1: f64, g: &Gains) -> (Vec2, (Vec2, Vec2)) {
    let shifted = AgentState { x: agent.x - d_des, ..*agent };
    let u = control_input(&shifted, Vec2::ZERO, g);
    let im = internal_model_derivative(&shifted, x_d, Vec2::ZERO, s1, g.k5);
    (u, im)
}

/// C1: every pair of initial positions is strictly farther apart than `r`.
pub fn check_c1(positions: &[Vec2], r: f64) -> bool {
    positions
        .iter()
        .enumerate()
        .all(|(i, a)| positions[i + 1..].iter().all(|b| (*a - *b).norm() > r))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainReport {
    /// `k2 - k4 (k1 + s1 - 1) / k3`
    pub c2_equality_residual: f64,
    /// `k1 - k3 + s1 - 1`
    pub c2_inequality: f64,
    /// `k4 - s1 k2 - k2² (k3 - s1 k1) / (k1 k2 - k4)`
    pub fencing_lhs1: f64,
    /// `(k1 k2 - k4) / k2`
    pub fencing_lhs2: f64,
    pub c2_holds: bool,
    pub fencing_holds: bool,
}

/// Evaluates condition C2 and the Hurwitz (fencing) condition on the gains.
pub fn check_gains(g: &Gains, s1: f64) -> Result<GainReport> {
    g.validate()?;
    let Gains { k1, k2, k3, k4, .. } = *g;
    let denom = k1 * k2 - k4;
    if denom == 0.0 {
        return Err(Error::DegenerateGains);
    }
    let fencing_lhs1 = k4 - s1 * k2 - k2 * k2 * (k3 - s1 * k1) / denom;
    let fencing_lhs2 = denom / k2;
    let c2_equality_residual = k2 - k4 * (k1 + s1 - 1.0) / k3;
    let c2_inequality = k1 - k3 + s1 - 1.0;
    let c2_holds = c2_equality_residual.abs() <= C2_EQUALITY_TOL * k2.abs().max(1.0) && c2_inequality > 0.0;
    Ok(GainReport {
        c2_equality_residual,
        c2_inequality,
        fencing_lhs1,
        fencing_lhs2,
        c2_holds,
        fencing_holds: fencing_lhs1 > 0.0 && fencing_lhs2 > 0.0,
    })
}

/// Picks `k2` from the C2 equality for the given remaining gains.
pub fn c2_consistent_k2(k1: f64, k3: f64, k4: f64, s1: f64) -> f64 {
    k4 * (k1 + s1 - 1.0) / k3
}
