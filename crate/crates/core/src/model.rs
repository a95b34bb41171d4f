//! Domain types, target exosystem and the repulsive potential.

use std::cmp::Ordering;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use nalgebra::Matrix2;

use crate::{Error, Result};

/// A point or vector in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Lexicographic total order on (x, y).
    pub fn total_cmp(&self, other: &Vec2) -> Ordering {
        self.x.total_cmp(&other.x).then(self.y.total_cmp(&other.y))
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, rhs: Vec2) -> Vec2 {
        rhs * self
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl SubAssign for Vec2 {
    fn sub_assign(&mut self, rhs: Vec2) {
        self.x -= rhs.x;
        self.y -= rhs.y;
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(v: [f64; 2]) -> Self {
        Vec2::new(v[0], v[1])
    }
}

/// Sums vectors in an order that depends only on their values, so that the
/// result is bit-identical under any permutation of the input.
pub fn canonical_sum(mut terms: Vec<Vec2>) -> Vec2 {
    terms.sort_by(Vec2::total_cmp);
    terms.into_iter().fold(Vec2::ZERO, |acc, v| acc + v)
}

/// Scalar counterpart of [`canonical_sum`].
pub fn canonical_sum_scalar(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.into_iter().sum()
}

/// Position, velocity and internal-model states of one agent.
///
/// Stacked as `[x; v; eps; zeta]` whenever a flat 8-vector is needed.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AgentState {
    pub x: Vec2,
    pub v: Vec2,
    pub eps: Vec2,
    pub zeta: Vec2,
}

impl AgentState {
    pub const DIM: usize = 8;

    /// Agent at rest with a zero internal model.
    pub fn at_rest(x: Vec2) -> Self {
        Self {
            x,
            ..Self::default()
        }
    }

    pub fn to_array(&self) -> [f64; 8] {
        [
            self.x.x, self.x.y, self.v.x, self.v.y, self.eps.x, self.eps.y, self.zeta.x, self.zeta.y,
        ]
    }

    pub fn from_slice(s: &[f64]) -> Self {
        Self {
            x: Vec2::new(s[0], s[1]),
            v: Vec2::new(s[2], s[3]),
            eps: Vec2::new(s[4], s[5]),
            zeta: Vec2::new(s[6], s[7]),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.v.is_finite() && self.eps.is_finite() && self.zeta.is_finite()
    }
}

/// Target position and velocity together with the exosystem parameter `s1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetState {
    pub x_d: Vec2,
    pub v_d: Vec2,
    s1: f64,
}

impl TargetState {
    pub fn new(x_d: Vec2, v_d: Vec2, s1: f64) -> Result<Self> {
        if !(s1 <= 0.0) || !s1.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "exosystem parameter s1 must be finite and <= 0, got {s1}"
            )));
        }
        Ok(Self { x_d, v_d, s1 })
    }

    pub fn s1(&self) -> f64 {
        self.s1
    }

    /// Exosystem derivative: `(x_d', v_d') = (v_d, s1 x_d)`.
    pub fn derivative(&self) -> (Vec2, Vec2) {
        (self.v_d, self.x_d * self.s1)
    }

    /// The target state `t` time units later, in closed form.
    pub fn advanced(&self, t: f64) -> Self {
        let (x_d, v_d) = target_state_at(self.x_d, self.v_d, self.s1, t);
        Self { x_d, v_d, s1: self.s1 }
    }
}

/// Repulsive potential parameters: safe distance `r` and sensing radius `big_r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialParams {
    r: f64,
    big_r: f64,
}

impl PotentialParams {
    pub fn new(r: f64, big_r: f64) -> Result<Self> {
        if !(r > 0.0 && r < big_r && big_r.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "potential radii must satisfy 0 < r < R, got r = {r}, R = {big_r}"
            )));
        }
        Ok(Self { r, big_r })
    }

    /// Safe distance.
    pub fn r(&self) -> f64 {
        self.r
    }

    /// Sensing radius.
    pub fn big_r(&self) -> f64 {
        self.big_r
    }
}

/// Controller gains `k1..k5`, all strictly positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gains {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub k5: f64,
}

impl Gains {
    pub fn new(k1: f64, k2: f64, k3: f64, k4: f64, k5: f64) -> Result<Self> {
        let g = Self { k1, k2, k3, k4, k5 };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, k) in [("k1", self.k1), ("k2", self.k2), ("k3", self.k3), ("k4", self.k4), ("k5", self.k5)] {
            if !(k > 0.0 && k.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {k}")));
            }
        }
        Ok(())
    }
}

/// Base (pre-Kronecker) transition matrix of the target exosystem.
///
/// The full planar transition is this matrix ⊗ I₂.
pub fn exosystem_transition(s1: f64, t: f64) -> Matrix2<f64> {
    if s1 == 0.0 {
        return Matrix2::new(1.0, t, 0.0, 1.0);
    }
    let w = (-s1).sqrt();
    let (sin, cos) = (w * t).sin_cos();
    Matrix2::new(cos, sin / w, -w * sin, cos)
}

/// Closed-form target position and velocity at time `t`.
pub fn target_state_at(x_d0: Vec2, v_d0: Vec2, s1: f64, t: f64) -> (Vec2, Vec2) {
    let phi = exosystem_transition(s1, t);
    let x = x_d0 * phi[(0, 0)] + v_d0 * phi[(0, 1)];
    let v = x_d0 * phi[(1, 0)] + v_d0 * phi[(1, 1)];
    (x, v)
}

/// Recovers the target's initial velocity from two position observations,
/// by inverting the position row of the transition matrix.
pub fn recover_initial_velocity(x_d0: Vec2, x_d_t: Vec2, t: f64, s1: f64) -> Result<Vec2> {
    if !(t > 0.0) {
        return Err(Error::SingularObservation { t });
    }
    if s1 == 0.0 {
        return Ok((x_d_t - x_d0) * (1.0 / t));
    }
    let w = (-s1).sqrt();
    let (sin, cos) = (w * t).sin_cos();
    if sin.abs() < 1e-9 {
        return Err(Error::SingularObservation { t });
    }
    Ok((x_d_t - x_d0 * cos) * (w / sin))
}

/// Repulsive gain: `1/(s - r) - 1/(R - r)` inside the sensing radius, zero beyond.
pub fn alpha(s: f64, pp: &PotentialParams) -> Result<f64> {
    if !(s > pp.r) {
        return Err(Error::BelowSafeDistance { distance: s, safe_distance: pp.r });
    }
    if s > pp.big_r {
        return Ok(0.0);
    }
    Ok(1.0 / (s - pp.r) - 1.0 / (pp.big_r - pp.r))
}

/// `∫_d^R alpha(τ) dτ`, the pairwise repulsion potential.
pub fn alpha_integral(d: f64, pp: &PotentialParams) -> Result<f64> {
    if !(d > pp.r) {
        return Err(Error::BelowSafeDistance { distance: d, safe_distance: pp.r });
    }
    if d >= pp.big_r {
        return Ok(0.0);
    }
    let span = pp.big_r - pp.r;
    Ok((span / (d - pp.r)).ln() - (pp.big_r - d) / span)
}

/// Indices of agents within the sensing radius of agent `i` (boundary included).
pub fn neighbors(i: usize, positions: &[Vec2], big_r: f64) -> Vec<usize> {
    let xi = positions[i];
    positions
        .iter()
        .enumerate()
        .filter(|&(k, xk)| k != i && (xi - *xk).norm() <= big_r)
        .map(|(k, _)| k)
        .collect()
}

/// Repulsion `eta_i`: sum over neighbours of `alpha(|x_i - x_k|)` along the
/// unit vector from `x_k` to `x_i`.
pub fn repulsion(i: usize, positions: &[Vec2], pp: &PotentialParams) -> Result<Vec2> {
    let xi = positions[i];
    let mut terms = Vec::new();
    for k in neighbors(i, positions, pp.big_r) {
        let rel = xi - positions[k];
        let d = rel.norm();
        let a = alpha(d, pp)?;
        if a != 0.0 {
            terms.push(rel * (a / d));
        }
    }
    Ok(canonical_sum(terms))
}

/// Repulsion for every agent at once.
pub fn repulsion_all(positions: &[Vec2], pp: &PotentialParams) -> Result<Vec<Vec2>> {
    (0..positions.len()).map(|i| repulsion(i, positions, pp)).collect()
}
