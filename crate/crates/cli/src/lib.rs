//! Command-line front end of the fencing simulator: configuration parsing,
//! subcommands and CSV output.

pub mod config;
pub mod output;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use fence_core::analysis::verify;
use fence_core::controller::check_gains;
use fence_core::simulator::{compare, metrics, run, ControllerKind, SimError, Thresholds, TrajectoryLog};
use nalgebra::{Dim, Matrix, RawStorage};
use thiserror::Error;

pub use config::RunConfig;

#[derive(Debug, Error, PartialEq)]
pub enum CliError {
    #[error("I/O error: {0}")]
    Io(String),
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("collision at t = {time}: inter-agent distance {distance} is not above the safe distance")]
    Collision { time: f64, distance: f64 },
    #[error("simulation diverged at t = {time}")]
    Divergence { time: f64 },
}

impl CliError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Collision { .. } => 3,
            CliError::Divergence { .. } => 4,
            CliError::Parse { .. } => 5,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Invalid(m) => CliError::Validation(m),
            SimError::Model(e) => CliError::Validation(e.to_string()),
            SimError::Collision { time, distance, .. } => CliError::Collision { time, distance },
            SimError::Diverged { time, .. } => CliError::Divergence { time },
        }
    }
}

fn io(e: std::io::Error) -> CliError {
    CliError::Io(e.to_string())
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn out_dir(cfg: &RunConfig, out_override: Option<&Path>) -> Result<PathBuf, CliError> {
    let dir = out_override.map_or_else(|| cfg.out.clone(), Path::to_path_buf);
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn log_of(result: &Result<TrajectoryLog, SimError>) -> Option<&TrajectoryLog> {
    match result {
        Ok(log) => Some(log),
        Err(e) => e.partial_log(),
    }
    .filter(|l| !l.is_empty())
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |v| v.to_string())
}

/// `run`: simulates the configured scenario and writes `trajectory.csv` and
/// `metrics.csv`. A collision or divergence still writes the partial log.
pub fn cmd_run(cfg: &RunConfig, out_override: Option<&Path>, stdout: &mut dyn Write) -> Result<(), CliError> {
    let scenario = cfg.scenario();
    scenario.validate()?;
    let dir = out_dir(cfg, out_override)?;
    let result = run(&scenario);
    if let Some(log) = log_of(&result) {
        output::write_trajectory(create(&dir.join("trajectory.csv"))?, log)?;
        let m = metrics(log, &Thresholds::default());
        output::write_metrics(create(&dir.join("metrics.csv"))?, &[(scenario.controller.name(), m)])?;
        writeln!(stdout, "rows={}", log.len()).map_err(io)?;
        writeln!(stdout, "fencing_converged_at={}", opt(m.fencing_converged_at)).map_err(io)?;
        writeln!(stdout, "velocity_converged_at={}", opt(m.velocity_converged_at)).map_err(io)?;
        writeln!(stdout, "min_distance_overall={}", m.min_distance_overall).map_err(io)?;
        writeln!(stdout, "collision={}", m.collision).map_err(io)?;
        writeln!(stdout, "hull_contains_target_from={}", opt(m.hull_contains_target_from)).map_err(io)?;
        writeln!(stdout, "peak_pairwise_oscillation={}", m.peak_pairwise_oscillation).map_err(io)?;
    }
    result.map(|_| ()).map_err(CliError::from)
}

/// `check-gains`: prints the gain report; fails unless the fencing condition holds.
pub fn cmd_check_gains(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let rep = check_gains(&cfg.gains, cfg.target0.s1()).map_err(|e| CliError::Validation(e.to_string()))?;
    writeln!(stdout, "c2_equality_residual={}", rep.c2_equality_residual).map_err(io)?;
    writeln!(stdout, "c2_inequality={}", rep.c2_inequality).map_err(io)?;
    writeln!(stdout, "fencing_lhs1={}", rep.fencing_lhs1).map_err(io)?;
    writeln!(stdout, "fencing_lhs2={}", rep.fencing_lhs2).map_err(io)?;
    writeln!(stdout, "c2_holds={}", rep.c2_holds).map_err(io)?;
    writeln!(stdout, "fencing_holds={}", rep.fencing_holds).map_err(io)?;
    if rep.fencing_holds {
        Ok(())
    } else {
        Err(CliError::Validation("gains fail the Hurwitz fencing condition".into()))
    }
}

/// `verify`: prints the closed-loop analysis, one `key=value` line each.
pub fn cmd_verify(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let rep = verify(&cfg.gains, cfg.target0.s1(), cfg.p4);
    let mut lines = Vec::new();
    match &rep.gains {
        Ok(g) => {
            lines.push(format!("c2_holds={}", g.c2_holds));
            lines.push(format!("fencing_holds={}", g.fencing_holds));
        }
        Err(e) => lines.push(format!("gain_error={e}")),
    }
    lines.push(format!("a_c={}", matrix_rows(&rep.matrices.a_c)));
    lines.push(format!("char_poly={:?}", rep.char_poly));
    match &rep.routh_first_column {
        Ok(col) => lines.push(format!("routh_first_column={col:?}")),
        Err(e) => lines.push(format!("routh_first_column=none ({e})")),
    }
    lines.push(format!("hurwitz={}", rep.routh.as_ref().is_ok_and(|h| *h)));
    lines.push(format!("spectral_abscissa={}", rep.spectral_abscissa));
    match &rep.regulator {
        Ok(reg) => {
            lines.push(format!("sylvester_residual={}", reg.sylvester_residual));
            lines.push(format!("output_residual={}", reg.output_residual));
            lines.push(format!("x_c={}", matrix_rows(&reg.x_c)));
        }
        Err(e) => lines.push(format!("regulator_error={e}")),
    }
    match &rep.lyapunov {
        Ok(l) => {
            lines.push(format!("p={}", matrix_rows(&l.p)));
            lines.push(format!("gamma={}", l.gamma));
            lines.push(format!("p_positive_definite={}", rep.p_positive_definite.unwrap_or(false)));
        }
        Err(e) => lines.push(format!("lyapunov_error={e}")),
    }
    for l in lines {
        writeln!(stdout, "{l}").map_err(io)?;
    }
    Ok(())
}

/// `compare`: runs the same starts under both controllers and writes
/// `label_free.csv`, `label_fixed.csv`, `metrics.csv` and `comparison.csv`.
pub fn cmd_compare(cfg: &RunConfig, out_override: Option<&Path>, stdout: &mut dyn Write) -> Result<(), CliError> {
    let base = cfg.scenario();
    let fixed = ControllerKind::LabelFixed { offsets: cfg.offsets.clone() };
    base.validate()?;
    let dir = out_dir(cfg, out_override)?;
    let c = compare(&base, ControllerKind::LabelFree, fixed, &Thresholds::default());

    let mut rows = Vec::new();
    for (name, result, m) in [("label_free", &c.first, c.first_metrics), ("label_fixed", &c.second, c.second_metrics)] {
        if let Some(log) = log_of(result) {
            output::write_trajectory(create(&dir.join(format!("{name}.csv")))?, log)?;
        }
        if let Some(m) = m {
            rows.push((name, m));
        }
    }
    output::write_metrics(create(&dir.join("metrics.csv"))?, &rows)?;
    output::write_comparison(
        create(&dir.join("comparison.csv"))?,
        c.first_metrics.as_ref(),
        c.second_metrics.as_ref(),
        c.oscillation_ratio,
        c.convergence_time_difference,
    )?;

    let osc = |m: Option<fence_core::simulator::MetricsReport>| opt(m.map(|m| m.peak_pairwise_oscillation));
    writeln!(stdout, "label_free_oscillation={}", osc(c.first_metrics)).map_err(io)?;
    writeln!(stdout, "label_fixed_oscillation={}", osc(c.second_metrics)).map_err(io)?;
    writeln!(stdout, "oscillation_ratio={}", opt(c.oscillation_ratio)).map_err(io)?;
    writeln!(stdout, "convergence_time_difference={}", opt(c.convergence_time_difference)).map_err(io)?;
    writeln!(
        stdout,
        "label_free_hull_contains_target_from={}",
        opt(c.first_metrics.and_then(|m| m.hull_contains_target_from))
    )
    .map_err(io)?;
    writeln!(
        stdout,
        "label_fixed_final_hull_distance={}",
        opt(log_of(&c.second).and_then(|l| l.last()).map(|s| s.hull_distance))
    )
    .map_err(io)?;

    c.first.map_err(CliError::from)?;
    c.second.map_err(CliError::from)?;
    Ok(())
}

/// `[[a, b], [c, d]]`, row by row.
fn matrix_rows<R: Dim, C: Dim, S: RawStorage<f64, R, C>>(m: &Matrix<f64, R, C, S>) -> String {
    let rows: Vec<String> = m
        .row_iter()
        .map(|row| format!("[{}]", row.iter().map(f64::to_string).collect::<Vec<_>>().join(", ")))
        .collect();
    format!("[{}]", rows.join(", "))
}
