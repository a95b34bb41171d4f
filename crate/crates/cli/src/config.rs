//! Flat TOML run configuration.
//!
//! Every key is optional; missing keys fall back to the four-agent periodic
//! target scenario. Recognised keys:
//!
//! | key | default | meaning |
//! |---|---|---|
//! | `n` | 4 | number of agents |
//! | `s1` | -0.1 | target exosystem parameter (`<= 0`) |
//! | `k1`..`k5` | 2.2, 6, 0.1, 3, 20 | controller gains |
//! | `r`, `R` | 2, 10 | safe distance and sensing radius |
//! | `dt`, `t_end` | 0.01, 200 | RK4 step and horizon |
//! | `dropout_agent` | none | 1-based agent that stops at `dropout_time` |
//! | `dropout_time` | none | must be given together with `dropout_agent` |
//! | `controller` | `"label_free"` | or `"label_fixed"` |
//! | `offsets` | square of side 14 | label-fixed offsets, one `[x, y]` per agent |
//! | `seed` | 0 | seed for the random starts |
//! | `out` | `"out"` | output directory |
//! | `xd0`, `vd0` | [2, 8], [0.5, 0.5] | initial target position and velocity |
//! | `positions` | seeded | explicit starts, one `[x, y]` per agent |
//! | `log_stride` | 10 | integrator steps per logged row |
//! | `p4` | 1 | scale of the Lyapunov matrix |

use std::path::{Path, PathBuf};

use fence_core::simulator::{default_offsets, random_positions, ControllerKind, Dropout, Scenario, DEFAULT_SEED};
use fence_core::{AgentState, Gains, PotentialParams, TargetState, Vec2};
use serde::Deserialize;

use crate::CliError;

/// Environment variable that overrides `log_stride`.
pub const LOG_STRIDE_ENV: &str = "FENCE_SIM_LOG_STRIDE";

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    n: Option<usize>,
    s1: Option<f64>,
    k1: Option<f64>,
    k2: Option<f64>,
    k3: Option<f64>,
    k4: Option<f64>,
    k5: Option<f64>,
    r: Option<f64>,
    #[serde(rename = "R")]
    big_r: Option<f64>,
    dt: Option<f64>,
    t_end: Option<f64>,
    dropout_agent: Option<usize>,
    dropout_time: Option<f64>,
    controller: Option<String>,
    offsets: Option<Vec<[f64; 2]>>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    xd0: Option<[f64; 2]>,
    vd0: Option<[f64; 2]>,
    positions: Option<Vec<[f64; 2]>>,
    log_stride: Option<usize>,
    p4: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n: usize,
    pub target0: TargetState,
    pub gains: Gains,
    pub potential: PotentialParams,
    pub dt: f64,
    pub t_end: f64,
    /// 0-based, already converted from the 1-based key.
    pub dropout: Option<Dropout>,
    pub controller: ControllerKind,
    /// Offsets for the label-fixed baseline, also used by `compare`.
    pub offsets: Vec<Vec2>,
    pub seed: u64,
    pub out: PathBuf,
    pub positions: Option<Vec<Vec2>>,
    pub log_stride: usize,
    pub p4: f64,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Parse {
            line: e.span().map_or(1, |s| line_of(text, s.start)),
            message: e.message().to_string(),
        })?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawConfig) -> Result<Self, CliError> {
        let n = raw.n.unwrap_or(4);
        if n == 0 {
            return Err(invalid("n must be at least 1"));
        }
        let gains = Gains::new(
            raw.k1.unwrap_or(2.2),
            raw.k2.unwrap_or(6.0),
            raw.k3.unwrap_or(0.1),
            raw.k4.unwrap_or(3.0),
            raw.k5.unwrap_or(20.0),
        )
        .map_err(|e| invalid(e.to_string()))?;
        let potential =
            PotentialParams::new(raw.r.unwrap_or(2.0), raw.big_r.unwrap_or(10.0)).map_err(|e| invalid(e.to_string()))?;
        let target0 = TargetState::new(
            raw.xd0.unwrap_or([2.0, 8.0]).into(),
            raw.vd0.unwrap_or([0.5, 0.5]).into(),
            raw.s1.unwrap_or(-0.1),
        )
        .map_err(|e| invalid(e.to_string()))?;
        let dt = positive("dt", raw.dt.unwrap_or(0.01))?;
        let t_end = positive("t_end", raw.t_end.unwrap_or(200.0))?;
        let p4 = positive("p4", raw.p4.unwrap_or(1.0))?;

        let dropout = match (raw.dropout_agent, raw.dropout_time) {
            (None, None) => None,
            (Some(agent), Some(time)) => {
                if !(1..=n).contains(&agent) {
                    return Err(invalid(format!("dropout_agent must be in 1..={n}, got {agent}")));
                }
                if !(time > 0.0 && time < t_end) {
                    return Err(invalid(format!("dropout_time must lie in (0, t_end), got {time}")));
                }
                Some(Dropout { agent: agent - 1, time })
            }
            _ => return Err(invalid("dropout_agent and dropout_time must be given together")),
        };

        let offsets: Vec<Vec2> = match raw.offsets {
            Some(o) => o.into_iter().map(Vec2::from).collect(),
            None => default_offsets(n),
        };
        if offsets.len() != n {
            return Err(invalid(format!("{} offsets given for {n} agents", offsets.len())));
        }
        let controller = match raw.controller.as_deref().unwrap_or("label_free") {
            "label_free" => ControllerKind::LabelFree,
            "label_fixed" => ControllerKind::LabelFixed { offsets: offsets.clone() },
            other => return Err(invalid(format!("controller must be \"label_free\" or \"label_fixed\", got \"{other}\""))),
        };

        let positions: Option<Vec<Vec2>> = raw.positions.map(|p| p.into_iter().map(Vec2::from).collect());
        if let Some(p) = &positions {
            if p.len() != n {
                return Err(invalid(format!("{} positions given for {n} agents", p.len())));
            }
        }
        let log_stride = raw.log_stride.unwrap_or(10);
        if log_stride == 0 {
            return Err(invalid("log_stride must be at least 1"));
        }

        Ok(Self {
            n,
            target0,
            gains,
            potential,
            dt,
            t_end,
            dropout,
            controller,
            offsets,
            seed: raw.seed.unwrap_or(DEFAULT_SEED),
            out: raw.out.unwrap_or_else(|| PathBuf::from("out")),
            positions,
            log_stride,
            p4,
        })
    }

    /// Applies `FENCE_SIM_LOG_STRIDE` if `lookup` finds it.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<(), CliError> {
        if let Some(v) = lookup(LOG_STRIDE_ENV) {
            self.log_stride = match v.trim().parse::<usize>() {
                Ok(s) if s > 0 => s,
                _ => return Err(invalid(format!("{LOG_STRIDE_ENV} must be a positive integer, got \"{v}\""))),
            };
        }
        Ok(())
    }

    pub fn scenario(&self) -> Scenario {
        let starts = self
            .positions
            .clone()
            .unwrap_or_else(|| random_positions(self.n, self.seed, &self.potential));
        Scenario {
            initial_agents: starts.into_iter().map(AgentState::at_rest).collect(),
            target0: self.target0,
            gains: self.gains,
            potential: self.potential,
            dt: self.dt,
            t_end: self.t_end,
            dropout: self.dropout,
            controller: self.controller.clone(),
            log_stride: self.log_stride,
            p4: self.p4,
        }
    }
}
