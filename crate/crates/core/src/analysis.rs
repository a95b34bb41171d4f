//! Closed-loop stability analysis of the fencing controller.
//!
//! All matrices are kept in their base (pre-Kronecker) form; the planar system
//! is the base matrix ⊗ I₂, so each base eigenvalue appears twice and the two
//! Cartesian coordinates decouple. Only [`lyapunov_value`] works per coordinate
//! on the expanded state.

use nalgebra::{DMatrix, DVector, Dim, Matrix, Matrix2, Matrix4, Matrix4x2, RawStorage, RowVector2, RowVector4};

use crate::controller::{check_gains, GainReport};
use crate::model::{alpha_integral, canonical_sum_scalar, neighbors, AgentState, Gains, PotentialParams, TargetState, Vec2};
use crate::{Error, Result};

/// Residual bound below which a regulator solution is accepted.
pub const REGULATOR_TOL: f64 = 1e-9;

/// Symmetry tolerance for [`is_positive_definite`].
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Mean-state closed loop `Φ' = A_c Φ + B_c σ`, `ē = C_c Φ + D σ`, `σ' = S σ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopMatrices {
    pub a_c: Matrix4<f64>,
    pub b_c: Matrix4x2<f64>,
    pub c_c: RowVector4<f64>,
    pub d: RowVector2<f64>,
    pub s: Matrix2<f64>,
}

pub fn build_closed_loop(g: &Gains, s1: f64) -> ClosedLoopMatrices {
    #[rustfmt::skip]
    let a_c = Matrix4::new(
        0.0,   1.0,   0.0,   0.0,
        -g.k1, -g.k2, -g.k3, -g.k4,
        0.0,   0.0,   0.0,   1.0,
        1.0,   0.0,   s1,    0.0,
    );
    let mut b_c = Matrix4x2::zeros();
    b_c[(3, 0)] = -1.0;
    ClosedLoopMatrices {
        a_c,
        b_c,
        c_c: RowVector4::new(1.0, 0.0, 0.0, 0.0),
        d: RowVector2::new(-1.0, 0.0),
        s: Matrix2::new(0.0, 1.0, s1, 0.0),
    }
}

/// Monic characteristic polynomial of `A_c`, highest degree first:
/// `[1, k2, k1 - s1, k4 - s1 k2, k3 - s1 k1]`.
pub fn characteristic_polynomial(m: &ClosedLoopMatrices) -> [f64; 5] {
    let a = &m.a_c;
    let (k1, k2, k3, k4) = (-a[(1, 0)], -a[(1, 1)], -a[(1, 2)], -a[(1, 3)]);
    let s1 = a[(3, 2)];
    [1.0, k2, k1 - s1, k4 - s1 * k2, k3 - s1 * k1]
}

/// First column of the Routh table of a polynomial given highest degree first.
///
/// A zero pivot stops the construction with [`Error::DegenerateRouthTable`].
pub fn routh_table(coeffs: &[f64]) -> Result<Vec<f64>> {
    if coeffs.is_empty() || coeffs[0] == 0.0 {
        return Err(Error::InvalidParameter("leading coefficient must be nonzero".into()));
    }
    let degree = coeffs.len() - 1;
    let width = degree / 2 + 1;
    let mut prev: Vec<f64> = coeffs.iter().step_by(2).copied().collect();
    let mut cur: Vec<f64> = coeffs.iter().skip(1).step_by(2).copied().collect();
    prev.resize(width, 0.0);
    cur.resize(width, 0.0);

    let mut first_column = vec![prev[0]];
    for row in 1..=degree {
        let pivot = cur[0];
        if pivot == 0.0 {
            return Err(Error::DegenerateRouthTable { row });
        }
        first_column.push(pivot);
        let mut next = vec![0.0; width];
        for j in 0..width - 1 {
            next[j] = (pivot * prev[j + 1] - prev[0] * cur[j + 1]) / pivot;
        }
        prev = std::mem::replace(&mut cur, next);
    }
    Ok(first_column)
}

/// Routh–Hurwitz test: `true` iff every first-column entry of the Routh table
/// has the sign of the leading coefficient.
///
/// A zero pivot means some root lies on or right of the imaginary axis, so a
/// degenerate table is reported as not Hurwitz.
pub fn routh_hurwitz(coeffs: &[f64]) -> Result<bool> {
    match routh_table(coeffs) {
        Ok(col) => {
            let sign = coeffs[0].signum();
            Ok(col.iter().all(|&c| c * sign > 0.0))
        }
        Err(Error::DegenerateRouthTable { .. }) => Ok(false),
        Err(e) => Err(e),
    }
}

/// Largest real part among the eigenvalues of a square matrix.
pub fn spectral_abscissa<R: Dim, C: Dim, S: RawStorage<f64, R, C>>(m: &Matrix<f64, R, C, S>) -> f64 {
    let dm = to_dmatrix(m);
    dm.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Companion matrix of a monic polynomial given highest degree first.
pub fn companion_matrix(coeffs: &[f64]) -> DMatrix<f64> {
    let n = coeffs.len() - 1;
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        m[(0, j)] = -coeffs[j + 1] / coeffs[0];
    }
    for i in 1..n {
        m[(i, i - 1)] = 1.0;
    }
    m
}

/// Hurwitz verdict for `A_c` from the Routh table of its characteristic
/// polynomial.
pub fn is_hurwitz(m: &ClosedLoopMatrices) -> bool {
    routh_hurwitz(&characteristic_polynomial(m)).unwrap_or(false)
}

/// Solution `X_c` of `X_c S = A_c X_c + B_c`, `0 = C_c X_c + D`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegulatorSolution {
    pub x_c: Matrix4x2<f64>,
    /// Frobenius norm of `X_c S - A_c X_c - B_c`.
    pub sylvester_residual: f64,
    /// Frobenius norm of `C_c X_c + D`.
    pub output_residual: f64,
}

impl RegulatorSolution {
    /// Steady-state agent state `X_c σ` for the current target, per coordinate.
    pub fn reference_state(&self, target: &TargetState) -> AgentState {
        let coord = |xd: f64, vd: f64| self.x_c * nalgebra::Vector2::new(xd, vd);
        let cx = coord(target.x_d.x, target.v_d.x);
        let cy = coord(target.x_d.y, target.v_d.y);
        AgentState {
            x: Vec2::new(cx[0], cy[0]),
            v: Vec2::new(cx[1], cy[1]),
            eps: Vec2::new(cx[2], cy[2]),
            zeta: Vec2::new(cx[3], cy[3]),
        }
    }

    /// Deviation `Φ_i - X_c σ` of one agent from the steady state.
    pub fn error_state(&self, agent: &AgentState, target: &TargetState) -> AgentState {
        let r = self.reference_state(target);
        AgentState {
            x: agent.x - r.x,
            v: agent.v - r.v,
            eps: agent.eps - r.eps,
            zeta: agent.zeta - r.zeta,
        }
    }
}

/// Solves the regulator equation by vectorisation:
/// `(I₂ ⊗ A_c - Sᵀ ⊗ I₄) vec(X_c) = -vec(B_c)`.
pub fn solve_regulator_equation(m: &ClosedLoopMatrices) -> Result<RegulatorSolution> {
    if !is_hurwitz(m) {
        return Err(Error::NotHurwitz);
    }
    let a = to_dmatrix(&m.a_c);
    let st = to_dmatrix(&m.s.transpose());
    let lhs = DMatrix::<f64>::identity(2, 2).kronecker(&a) - st.kronecker(&DMatrix::identity(4, 4));
    let rhs = -DVector::from_column_slice(m.b_c.as_slice());
    let sol = lhs.lu().solve(&rhs).ok_or(Error::SingularSystem)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem);
    }
    let x_c = Matrix4x2::from_column_slice(sol.as_slice());
    let sylvester_residual = (x_c * m.s - m.a_c * x_c - m.b_c).norm();
    let output_residual = (m.c_c * x_c + m.d).norm();
    if !(sylvester_residual < REGULATOR_TOL && output_residual < REGULATOR_TOL) {
        return Err(Error::SingularSystem);
    }
    Ok(RegulatorSolution { x_c, sylvester_residual, output_residual })
}

/// Base-form Lyapunov matrix and the potential weight `gamma = p2 - p4`.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovData {
    pub p: Matrix4<f64>,
    pub gamma: f64,
    /// `p1..p7` (index 0 holds `p1`).
    pub params: [f64; 7],
}

impl LyapunovData {
    pub fn p4(&self) -> f64 {
        self.params[3]
    }
}

/// Builds the structured Lyapunov matrix whose cross terms with the
/// repulsion input cancel against the potential's derivative.
pub fn build_p(g: &Gains, s1: f64, p4: f64) -> Result<LyapunovData> {
    if !(p4 > 0.0) {
        return Err(Error::InvalidParameter(format!("p4 must be positive, got {p4}")));
    }
    let Gains { k1, k3, .. } = *g;
    let margin = k1 - k3 + s1 - 1.0;
    if !(margin > 0.0) {
        return Err(Error::C2Violated(format!("k1 - k3 + s1 - 1 = {margin} is not positive")));
    }
    let p1 = (k1 * k1 + (s1 - 1.0) * k1 - k3) / k3 * p4;
    let p2 = (k1 + s1 - 1.0) / k3 * p4;
    let p3 = (k3 - s1) * p4;
    let p5 = 0.0;
    let p6 = 0.0;
    let p7 = (k1 - 1.0) * p4;
    #[rustfmt::skip]
    let p = Matrix4::new(
        p1, p6, p7, p6,
        p6, p2, p5, p4,
        p7, p5, p3, p5,
        p6, p4, p5, p4,
    );
    Ok(LyapunovData { p, gamma: p2 - p4, params: [p1, p2, p3, p4, p5, p6, p7] })
}

/// `P A_c + A_cᵀ P`, the quadratic form of the Lyapunov derivative.
pub fn lyapunov_derivative_matrix(lyap: &LyapunovData, m: &ClosedLoopMatrices) -> Matrix4<f64> {
    lyap.p * m.a_c + m.a_c.transpose() * lyap.p
}

/// Sylvester's criterion: every leading principal minor is positive.
pub fn is_positive_definite<R: Dim, C: Dim, S: RawStorage<f64, R, C>>(m: &Matrix<f64, R, C, S>) -> Result<bool> {
    let m = to_dmatrix(m);
    if !m.is_square() {
        return Err(Error::InvalidParameter("matrix must be square".into()));
    }
    let asym = (&m - m.transpose()).amax();
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(asym));
    }
    let n = m.nrows();
    Ok((1..=n).all(|k| m.view((0, 0), (k, k)).clone_owned().determinant() > 0.0))
}

/// `V1 = Σ Φ̃ᵢᵀ (P ⊗ I₂) Φ̃ᵢ + gamma k5 V_p`, with `V_p` summed over ordered
/// neighbour pairs.
pub fn lyapunov_value(
    agents: &[AgentState],
    target: &TargetState,
    reg: &RegulatorSolution,
    lyap: &LyapunovData,
    k5: f64,
    pp: &PotentialParams,
) -> Result<f64> {
    let quad: Vec<f64> = agents
        .iter()
        .map(|a| {
            let e = reg.error_state(a, target);
            let px = nalgebra::Vector4::new(e.x.x, e.v.x, e.eps.x, e.zeta.x);
            let py = nalgebra::Vector4::new(e.x.y, e.v.y, e.eps.y, e.zeta.y);
            px.dot(&(lyap.p * px)) + py.dot(&(lyap.p * py))
        })
        .collect();
    let potential = repulsion_potential(agents, pp)?;
    Ok(canonical_sum_scalar(quad) + lyap.gamma * k5 * potential)
}

/// `V_p = Σᵢ Σ_{k ∈ Nᵢ} ∫_{|x_i - x_k|}^R alpha`.
pub fn repulsion_potential(agents: &[AgentState], pp: &PotentialParams) -> Result<f64> {
    let positions: Vec<Vec2> = agents.iter().map(|a| a.x).collect();
    let mut terms = Vec::new();
    for i in 0..positions.len() {
        for k in neighbors(i, &positions, pp.big_r()) {
            terms.push(alpha_integral((positions[i] - positions[k]).norm(), pp)?);
        }
    }
    Ok(canonical_sum_scalar(terms))
}

/// Closed-form `dV1/dt = -Σ (2 p4 / k4) |k2 ṽᵢ + k4 ζ̃ᵢ|²`, valid only under C2.
pub fn lyapunov_rate(
    agents: &[AgentState],
    target: &TargetState,
    g: &Gains,
    reg: &RegulatorSolution,
    p4: f64,
) -> Result<f64> {
    let report = check_gains(g, target.s1())?;
    if !report.c2_holds {
        return Err(Error::C2Violated(format!(
            "equality residual {:e}, inequality margin {}",
            report.c2_equality_residual, report.c2_inequality
        )));
    }
    let terms: Vec<f64> = agents
        .iter()
        .map(|a| {
            let e = reg.error_state(a, target);
            let w = e.v * g.k2 + e.zeta * g.k4;
            2.0 * p4 / g.k4 * w.norm_squared()
        })
        .collect();
    Ok(-canonical_sum_scalar(terms))
}

/// Everything the `verify` report prints.
#[derive(Debug, Clone)]
pub struct VerificationReport {
    pub gains: Result<GainReport>,
    pub matrices: ClosedLoopMatrices,
    pub char_poly: [f64; 5],
    pub routh_first_column: Result<Vec<f64>>,
    pub routh: Result<bool>,
    pub spectral_abscissa: f64,
    pub regulator: Result<RegulatorSolution>,
    pub lyapunov: Result<LyapunovData>,
    pub p_positive_definite: Option<bool>,
}

pub fn verify(g: &Gains, s1: f64, p4: f64) -> VerificationReport {
    let matrices = build_closed_loop(g, s1);
    let char_poly = characteristic_polynomial(&matrices);
    let lyapunov = build_p(g, s1, p4);
    let p_positive_definite = lyapunov.as_ref().ok().and_then(|l| is_positive_definite(&l.p).ok());
    VerificationReport {
        gains: check_gains(g, s1),
        routh_first_column: routh_table(&char_poly),
        routh: routh_hurwitz(&char_poly),
        spectral_abscissa: spectral_abscissa(&matrices.a_c),
        regulator: solve_regulator_equation(&matrices),
        char_poly,
        matrices,
        lyapunov,
        p_positive_definite,
    }
}

fn to_dmatrix<R: Dim, C: Dim, S: RawStorage<f64, R, C>>(m: &Matrix<f64, R, C, S>) -> DMatrix<f64> {
    let (r, c) = m.shape();
    DMatrix::from_iterator(r, c, m.iter().copied())
}
