//! Fixed-step simulation of the swarm, the target and the internal models.
//!
//! The world state is a flat `Vec<f64>`: eight entries per surviving agent in
//! `[x; v; eps; zeta]` order, followed by `[x_d; v_d]`. Every sum over agents
//! goes through the canonical (value-ordered) summation in [`crate::model`], so
//! relabelling the agents permutes the log without changing a single bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::analysis::{build_closed_loop, build_p, lyapunov_value, solve_regulator_equation, LyapunovData, RegulatorSolution};
use crate::controller::{check_c1, check_gains, control_input, internal_model_derivative, label_fixed_control};
use crate::geometry::{convex_hull, distance_to_hull};
use crate::model::{canonical_sum, repulsion_all, AgentState, Gains, PotentialParams, TargetState, Vec2};
use crate::Error;

/// Seed used whenever a caller asks for random starts without naming one.
pub const DEFAULT_SEED: u64 = 0;

/// Any state component beyond this magnitude aborts the run.
pub const DIVERGENCE_LIMIT: f64 = 1e9;

/// Half-width of the square in which random initial positions are drawn.
pub const SPAWN_HALF_WIDTH: f64 = 20.0;

#[derive(Debug, Clone, PartialEq)]
pub enum ControllerKind {
    LabelFree,
    /// Each agent tracks its own preassigned offset from the target.
    LabelFixed { offsets: Vec<Vec2> },
}

impl ControllerKind {
    pub fn name(&self) -> &'static str {
        match self {
            ControllerKind::LabelFree => "label_free",
            ControllerKind::LabelFixed { .. } => "label_fixed",
        }
    }
}

/// Agent `agent` (0-based) disappears at `time`, snapped to the nearest step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dropout {
    pub agent: usize,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub initial_agents: Vec<AgentState>,
    pub target0: TargetState,
    pub gains: Gains,
    pub potential: PotentialParams,
    pub dt: f64,
    pub t_end: f64,
    pub dropout: Option<Dropout>,
    pub controller: ControllerKind,
    pub log_stride: usize,
    /// Scale of the Lyapunov matrix used for the logged `V1`.
    pub p4: f64,
}

/// Offsets of the label-fixed baseline for four agents.
pub const PAPER_OFFSETS: [Vec2; 4] = [Vec2::new(-7.0, -7.0), Vec2::new(7.0, -7.0), Vec2::new(7.0, 7.0), Vec2::new(-7.0, 7.0)];

/// Default label-fixed offsets: the square above for four agents, otherwise a
/// regular polygon of the same circumradius.
pub fn default_offsets(n: usize) -> Vec<Vec2> {
    if n == 4 {
        return PAPER_OFFSETS.to_vec();
    }
    let radius = PAPER_OFFSETS[0].norm();
    (0..n)
        .map(|i| {
            let th = -0.75 * std::f64::consts::PI + 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            Vec2::new(radius * th.cos(), radius * th.sin())
        })
        .collect()
}

/// Uniform positions in `[-20, 20]²`, rejection-sampled so that every pair is
/// farther apart than `2 r`.
pub fn random_positions(n: usize, seed: u64, pp: &PotentialParams) -> Vec<Vec2> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let min_sep = 2.0 * pp.r();
    let mut out: Vec<Vec2> = Vec::with_capacity(n);
    while out.len() < n {
        let p = Vec2::new(
            rng.random_range(-SPAWN_HALF_WIDTH..SPAWN_HALF_WIDTH),
            rng.random_range(-SPAWN_HALF_WIDTH..SPAWN_HALF_WIDTH),
        );
        if out.iter().all(|q| (p - *q).norm() > min_sep) {
            out.push(p);
        }
    }
    out
}

impl Scenario {
    /// Four agents at seeded random positions chasing the periodic target
    /// `x_d(0) = (2, 8)`, `v_d(0) = (0.5, 0.5)`, `s1 = -0.1`.
    pub fn paper(seed: u64) -> Self {
        Self::random(4, seed, Gains { k1: 2.2, k2: 6.0, k3: 0.1, k4: 3.0, k5: 20.0 }, -0.1)
    }

    pub fn random(n: usize, seed: u64, gains: Gains, s1: f64) -> Self {
        let potential = PotentialParams::new(2.0, 10.0).expect("valid radii");
        let initial_agents = random_positions(n, seed, &potential).into_iter().map(AgentState::at_rest).collect();
        Self {
            initial_agents,
            target0: TargetState::new(Vec2::new(2.0, 8.0), Vec2::new(0.5, 0.5), s1).expect("s1 <= 0"),
            gains,
            potential,
            dt: 0.01,
            t_end: 200.0,
            dropout: None,
            controller: ControllerKind::LabelFree,
            log_stride: 10,
            p4: 1.0,
        }
    }

    pub fn n(&self) -> usize {
        self.initial_agents.len()
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let invalid = |m: String| Err(SimError::Invalid(m));
        if self.initial_agents.is_empty() {
            return invalid("at least one agent is required".into());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return invalid(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return invalid(format!("t_end must be positive, got {}", self.t_end));
        }
        if self.log_stride == 0 {
            return invalid("log_stride must be at least 1".into());
        }
        self.gains.validate()?;
        if self.initial_agents.iter().any(|a| !a.is_finite()) {
            return invalid("initial agent states must be finite".into());
        }
        let positions: Vec<Vec2> = self.initial_agents.iter().map(|a| a.x).collect();
        if !check_c1(&positions, self.potential.r()) {
            return invalid(format!(
                "condition C1 violated: some initial pair is not farther apart than r = {}",
                self.potential.r()
            ));
        }
        if let Some(d) = self.dropout {
            if d.agent >= self.n() {
                return invalid(format!("dropout agent {} out of range for {} agents", d.agent, self.n()));
            }
            if !(d.time > 0.0 && d.time < self.t_end) {
                return invalid(format!("dropout time {} must lie in (0, t_end)", d.time));
            }
        }
        if let ControllerKind::LabelFixed { offsets } = &self.controller {
            if offsets.len() != self.n() {
                return invalid(format!("{} offsets given for {} agents", offsets.len(), self.n()));
            }
        }
        let report = check_gains(&self.gains, self.target0.s1())?;
        if !report.fencing_holds {
            return invalid("gains fail the Hurwitz fencing condition".into());
        }
        Ok(())
    }

    /// Relabels the agents: agent `j` of the result is agent `perm[j]` here.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut s = self.clone();
        s.initial_agents = perm.iter().map(|&i| self.initial_agents[i]).collect();
        if let ControllerKind::LabelFixed { offsets } = &self.controller {
            s.controller = ControllerKind::LabelFixed { offsets: perm.iter().map(|&i| offsets[i]).collect() };
        }
        if let Some(d) = self.dropout {
            let agent = perm.iter().position(|&i| i == d.agent).expect("perm is a permutation");
            s.dropout = Some(Dropout { agent, ..d });
        }
        s
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] Error),
    #[error("collision at t = {time}: distance {distance} is not above the safe distance")]
    Collision { time: f64, distance: f64, log: Box<TrajectoryLog> },
    #[error("state diverged at t = {time}")]
    Diverged { time: f64, log: Box<TrajectoryLog> },
}

impl SimError {
    /// The log recorded before the run was aborted, if any.
    pub fn partial_log(&self) -> Option<&TrajectoryLog> {
        match self {
            SimError::Collision { log, .. } | SimError::Diverged { log, .. } => Some(log),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    /// Indexed by original agent label; `None` once the agent has dropped out.
    pub agents: Vec<Option<AgentState>>,
    pub target: TargetState,
    /// Mean position minus target position.
    pub fencing_error: Vec2,
    pub hull_distance: f64,
    /// Infinite with fewer than two agents.
    pub min_pairwise_distance: f64,
    pub velocity_errors: Vec<Option<f64>>,
    pub lyapunov_v1: Option<f64>,
}

impl Snapshot {
    pub fn max_velocity_error(&self) -> f64 {
        self.velocity_errors.iter().flatten().copied().fold(0.0, f64::max)
    }

    pub fn alive_count(&self) -> usize {
        self.agents.iter().flatten().count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub times: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    /// Minimum pairwise distance over every integration step, not only the
    /// logged ones.
    pub min_distance_all_steps: f64,
    pub safe_distance: f64,
}

impl TrajectoryLog {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Snapshot logged closest to `t`.
    pub fn at_time(&self, t: f64) -> Option<&Snapshot> {
        let idx = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))?
            .0;
        self.snapshots.get(idx)
    }

    pub fn last(&self) -> Option<&Snapshot> {
        self.snapshots.last()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &Snapshot)> {
        self.times.iter().copied().zip(self.snapshots.iter())
    }

    /// Relabels per-agent data with the same convention as [`Scenario::permuted`].
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut out = self.clone();
        for s in &mut out.snapshots {
            s.agents = perm.iter().map(|&i| s.agents[i]).collect();
            s.velocity_errors = perm.iter().map(|&i| s.velocity_errors[i]).collect();
        }
        out
    }
}

/// Classical four-stage Runge–Kutta step on a flat state.
pub fn rk4_step<E>(y: &[f64], dt: f64, mut f: impl FnMut(&[f64]) -> Result<Vec<f64>, E>) -> Result<Vec<f64>, E> {
    let axpy = |a: f64, x: &[f64]| -> Vec<f64> { y.iter().zip(x).map(|(yi, xi)| yi + a * xi).collect() };
    let k1 = f(y)?;
    let k2 = f(&axpy(0.5 * dt, &k1))?;
    let k3 = f(&axpy(0.5 * dt, &k2))?;
    let k4 = f(&axpy(dt, &k3))?;
    Ok((0..y.len())
        .map(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Time derivative of every agent and of the target.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldDerivative {
    pub agents: Vec<AgentState>,
    pub target: (Vec2, Vec2),
}

/// Assembles agent dynamics, controller, internal model and exosystem.
///
/// `ids` holds the original labels of `agents`; only the label-fixed baseline
/// uses them, to look up each agent's offset.
pub fn world_derivative(
    agents: &[AgentState],
    ids: &[usize],
    target: &TargetState,
    scenario: &Scenario,
) -> Result<WorldDerivative, Error> {
    let g = &scenario.gains;
    let s1 = target.s1();
    let out = match &scenario.controller {
        ControllerKind::LabelFree => {
            let positions: Vec<Vec2> = agents.iter().map(|a| a.x).collect();
            let etas = repulsion_all(&positions, &scenario.potential)?;
            agents
                .iter()
                .zip(etas)
                .map(|(a, eta)| {
                    let (deps, dzeta) = internal_model_derivative(a, target.x_d, eta, s1, g.k5);
                    AgentState { x: a.v, v: control_input(a, eta, g), eps: deps, zeta: dzeta }
                })
                .collect()
        }
        ControllerKind::LabelFixed { offsets } => agents
            .iter()
            .zip(ids)
            .map(|(a, &id)| {
                let (u, (deps, dzeta)) = label_fixed_control(a, target.x_d, offsets[id], s1, g);
                AgentState { x: a.v, v: u, eps: deps, zeta: dzeta }
            })
            .collect(),
    };
    Ok(WorldDerivative { agents: out, target: target.derivative() })
}

fn pack(agents: &[AgentState], (x_d, v_d): (Vec2, Vec2)) -> Vec<f64> {
    let mut y = Vec::with_capacity(agents.len() * AgentState::DIM + 4);
    for a in agents {
        y.extend_from_slice(&a.to_array());
    }
    y.extend_from_slice(&[x_d.x, x_d.y, v_d.x, v_d.y]);
    y
}

fn unpack(y: &[f64], s1: f64) -> (Vec<AgentState>, TargetState) {
    let n = (y.len() - 4) / AgentState::DIM;
    let agents = (0..n).map(|i| AgentState::from_slice(&y[i * 8..i * 8 + 8])).collect();
    let t = &y[n * 8..];
    let target = TargetState::new(Vec2::new(t[0], t[1]), Vec2::new(t[2], t[3]), s1).expect("s1 validated");
    (agents, target)
}

fn min_pairwise(positions: &[Vec2]) -> (f64, Option<(usize, usize)>) {
    let mut best = (f64::INFINITY, None);
    for i in 0..positions.len() {
        for k in i + 1..positions.len() {
            let d = (positions[i] - positions[k]).norm();
            if d < best.0 {
                best = (d, Some((i, k)));
            }
        }
    }
    best
}

struct LyapunovMonitor {
    reg: RegulatorSolution,
    lyap: LyapunovData,
}

fn lyapunov_monitor(scenario: &Scenario) -> Option<LyapunovMonitor> {
    if scenario.controller != ControllerKind::LabelFree {
        return None;
    }
    let s1 = scenario.target0.s1();
    let report = check_gains(&scenario.gains, s1).ok()?;
    if !report.c2_holds {
        return None;
    }
    let reg = solve_regulator_equation(&build_closed_loop(&scenario.gains, s1)).ok()?;
    let lyap = build_p(&scenario.gains, s1, scenario.p4).ok()?;
    Some(LyapunovMonitor { reg, lyap })
}

fn snapshot(
    n_total: usize,
    ids: &[usize],
    agents: &[AgentState],
    target: &TargetState,
    scenario: &Scenario,
    monitor: Option<&LyapunovMonitor>,
) -> Snapshot {
    let positions: Vec<Vec2> = agents.iter().map(|a| a.x).collect();
    let mut by_id = vec![None; n_total];
    let mut vel_err = vec![None; n_total];
    for (a, &id) in agents.iter().zip(ids) {
        by_id[id] = Some(*a);
        vel_err[id] = Some((a.v - target.v_d).norm());
    }
    let centroid = canonical_sum(positions.clone()) * (1.0 / agents.len() as f64);
    let lyapunov_v1 = monitor.and_then(|m| {
        lyapunov_value(agents, target, &m.reg, &m.lyap, scenario.gains.k5, &scenario.potential).ok()
    });
    Snapshot {
        agents: by_id,
        target: *target,
        fencing_error: centroid - target.x_d,
        hull_distance: distance_to_hull(target.x_d, &convex_hull(&positions)),
        min_pairwise_distance: min_pairwise(&positions).0,
        velocity_errors: vel_err,
        lyapunov_v1,
    }
}

/// Integrates the scenario from 0 to `t_end`.
///
/// Under the label-free controller an inter-agent distance at or below `r`
/// aborts the run, since the potential is undefined there. The label-fixed
/// baseline has no potential; its close approaches only show up in the
/// metrics.
pub fn run(scenario: &Scenario) -> Result<TrajectoryLog, SimError> {
    scenario.validate()?;
    let n_total = scenario.n();
    let s1 = scenario.target0.s1();
    let r = scenario.potential.r();
    let monitor = lyapunov_monitor(scenario);
    let label_free = scenario.controller == ControllerKind::LabelFree;

    let mut ids: Vec<usize> = (0..n_total).collect();
    let mut y = pack(&scenario.initial_agents, (scenario.target0.x_d, scenario.target0.v_d));
    let mut log = TrajectoryLog {
        times: Vec::new(),
        snapshots: Vec::new(),
        min_distance_all_steps: f64::INFINITY,
        safe_distance: r,
    };

    let steps = scenario.steps();
    let drop_step = scenario.dropout.map(|d| (d.time / scenario.dt).round() as usize);

    for step in 0..=steps {
        let t = step as f64 * scenario.dt;
        if Some(step) == drop_step {
            let agent = scenario.dropout.expect("drop step implies dropout").agent;
            if let Some(slot) = ids.iter().position(|&id| id == agent) {
                ids.remove(slot);
                y.drain(slot * 8..slot * 8 + 8);
            }
        }
        let (agents, target) = unpack(&y, s1);

        if y.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT) {
            return Err(SimError::Diverged { time: t, log: Box::new(log) });
        }
        let positions: Vec<Vec2> = agents.iter().map(|a| a.x).collect();
        let (dmin, _) = min_pairwise(&positions);
        log.min_distance_all_steps = log.min_distance_all_steps.min(dmin);
        if label_free && dmin <= r {
            return Err(SimError::Collision { time: t, distance: dmin, log: Box::new(log) });
        }

        if step % scenario.log_stride == 0 || step == steps {
            log.times.push(t);
            log.snapshots.push(snapshot(n_total, &ids, &agents, &target, scenario, monitor.as_ref()));
        }
        if step == steps {
            break;
        }

        let next = rk4_step(&y, scenario.dt, |state| {
            let (a, tg) = unpack(state, s1);
            let d = world_derivative(&a, &ids, &tg, scenario)?;
            Ok::<_, Error>(pack(&d.agents, d.target))
        });
        y = match next {
            Ok(v) => v,
            Err(Error::BelowSafeDistance { distance, .. }) => {
                log.min_distance_all_steps = log.min_distance_all_steps.min(distance);
                return Err(SimError::Collision { time: t, distance, log: Box::new(log) });
            }
            Err(e) => return Err(e.into()),
        };
    }
    Ok(log)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    /// Bound on the fencing error norm.
    pub fencing: f64,
    /// Bound on the largest agent velocity error.
    pub velocity: f64,
    /// Samples at or before this time are excluded from the oscillation measure.
    pub transient_onset: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { fencing: 0.05, velocity: 0.05, transient_onset: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub fencing_converged_at: Option<f64>,
    pub velocity_converged_at: Option<f64>,
    pub min_distance_overall: f64,
    pub collision: bool,
    pub hull_contains_target_from: Option<f64>,
    pub peak_pairwise_oscillation: f64,
}

/// First logged time after which `ok` holds for every remaining sample.
fn settled_from(log: &TrajectoryLog, ok: impl Fn(&Snapshot) -> bool) -> Option<f64> {
    match log.snapshots.iter().rposition(|s| !ok(s)) {
        None => log.times.first().copied(),
        Some(i) => log.times.get(i + 1).copied(),
    }
}

pub fn metrics(log: &TrajectoryLog, thresholds: &Thresholds) -> MetricsReport {
    let logged_min = log.snapshots.iter().map(|s| s.min_pairwise_distance).fold(f64::INFINITY, f64::min);
    let min_distance_overall = logged_min.min(log.min_distance_all_steps);

    let n = log.snapshots.first().map_or(0, |s| s.agents.len());
    let mut peak: f64 = 0.0;
    for i in 0..n {
        for k in i + 1..n {
            let (lo, hi) = log
                .iter()
                .filter(|(t, _)| *t > thresholds.transient_onset)
                .filter_map(|(_, s)| Some((s.agents[i]?.x - s.agents[k]?.x).norm()))
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
            if hi >= lo {
                peak = peak.max(hi - lo);
            }
        }
    }

    MetricsReport {
        fencing_converged_at: settled_from(log, |s| s.fencing_error.norm() < thresholds.fencing),
        velocity_converged_at: settled_from(log, |s| s.max_velocity_error() < thresholds.velocity),
        min_distance_overall,
        collision: min_distance_overall <= log.safe_distance,
        hull_contains_target_from: settled_from(log, |s| s.hull_distance == 0.0),
        peak_pairwise_oscillation: peak,
    }
}

/// Outcome of running one initial condition under two controllers.
#[derive(Debug)]
pub struct Comparison {
    pub first: Result<TrajectoryLog, SimError>,
    pub second: Result<TrajectoryLog, SimError>,
    pub first_metrics: Option<MetricsReport>,
    pub second_metrics: Option<MetricsReport>,
    /// Peak pairwise oscillation of the second run over that of the first.
    pub oscillation_ratio: Option<f64>,
    /// Fencing convergence time of the second run minus that of the first.
    pub convergence_time_difference: Option<f64>,
}

/// Runs `base` under both controllers in parallel.
pub fn compare(base: &Scenario, first: ControllerKind, second: ControllerKind, thresholds: &Thresholds) -> Comparison {
    let a = Scenario { controller: first, ..base.clone() };
    let b = Scenario { controller: second, ..base.clone() };
    let (first, second) = std::thread::scope(|s| {
        let ha = s.spawn(|| run(&a));
        let hb = s.spawn(|| run(&b));
        (ha.join().expect("simulation thread panicked"), hb.join().expect("simulation thread panicked"))
    });
    let m = |r: &Result<TrajectoryLog, SimError>| {
        let log = match r {
            Ok(log) => Some(log),
            Err(e) => e.partial_log(),
        };
        log.filter(|l| !l.is_empty()).map(|l| metrics(l, thresholds))
    };
    let first_metrics = m(&first);
    let second_metrics = m(&second);
    let oscillation_ratio = match (first_metrics, second_metrics) {
        (Some(a), Some(b)) if a.peak_pairwise_oscillation > 0.0 => Some(b.peak_pairwise_oscillation / a.peak_pairwise_oscillation),
        (Some(a), Some(b)) if a.peak_pairwise_oscillation == b.peak_pairwise_oscillation => Some(1.0),
        _ => None,
    };
    let convergence_time_difference = first_metrics.zip(second_metrics).and_then(|(a, b)| {
        Some(b.fencing_converged_at? - a.fencing_converged_at?)
    });
    Comparison { first, second, first_metrics, second_metrics, oscillation_ratio, convergence_time_difference }
}
