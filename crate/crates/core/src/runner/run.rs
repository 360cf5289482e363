//! A single configured run: evolution, snapshots, diagnostics and manifest.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::diagnostics::{
    charge, constraint_residual, continuity_refinement, continuity_residual, energy_drift,
    equivalence_refinement, equivalence_residual, DiagnosticSeries, RefinementStudy,
};
use crate::error::{Error, Result};
use crate::evolution::{
    cfl_limit, evolve_with, picard_solve_with, EvolveOptions, InitialData, Method, PicardReport,
    RhsMonitor, Trajectory,
};
use crate::runner::config::RunConfig;
use crate::runner::data::{generate_data, seed_record, SeedRecord};
use crate::runner::report::{write_csv, Check};
use crate::runner::snapshot::persist_state;
use crate::runner::tolerances as tol;

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";

#[derive(Clone, Debug, Serialize)]
pub struct Override {
    pub key: String,
    pub value: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Passed,
    Failed,
    Error,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunError {
    pub message: String,
    /// Term being assembled when an elliptic solve failed.
    pub term: Option<String>,
    pub suggested_dt: Option<f64>,
}

impl RunError {
    fn from_error(e: &Error) -> Self {
        let term = match e {
            Error::Elliptic { term, .. } => Some(term.to_string()),
            Error::ConstraintViolation { .. } => Some("constraint".to_string()),
            _ => None,
        };
        let suggested_dt = match e {
            Error::CflViolation { suggested, .. } => Some(*suggested),
            _ => None,
        };
        Self {
            message: e.to_string(),
            term,
            suggested_dt,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub manifest_version: u32,
    pub code_version: String,
    pub config: RunConfig,
    pub overrides: Vec<Override>,
    pub seeds: SeedRecord,
    pub status: Status,
    pub error: Option<RunError>,
    pub steps: usize,
    pub snapshots: Vec<String>,
    pub diagnostics_csv: Option<String>,
    pub checks: Vec<Check>,
    pub refinement: Vec<RefinementStudy>,
    pub rhs: Option<RhsMonitor>,
    pub picard: Option<PicardReport>,
    pub notes: Vec<String>,
}

impl Manifest {
    fn new(cfg: &RunConfig, overrides: &[(String, String)]) -> Self {
        Self {
            manifest_version: MANIFEST_VERSION,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            config: cfg.clone(),
            overrides: overrides
                .iter()
                .map(|(key, value)| Override {
                    key: key.clone(),
                    value: value.clone(),
                })
                .collect(),
            seeds: seed_record(cfg),
            status: Status::Passed,
            error: None,
            steps: 0,
            snapshots: Vec::new(),
            diagnostics_csv: None,
            checks: Vec::new(),
            refinement: Vec::new(),
            rhs: None,
            picard: None,
            notes: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub directory: PathBuf,
    pub manifest: Manifest,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.manifest.status == Status::Passed
    }
}

/// Applies `overrides` to `base`, runs it and writes the artifacts into
/// `output.directory`. Configuration errors are returned; everything after
/// the output directory exists is recorded in the manifest instead.
pub fn run(base: &RunConfig, overrides: &[(String, String)]) -> Result<RunOutcome> {
    let cfg = base.with_overrides(overrides)?;
    let dir = cfg.output.directory.clone();
    std::fs::create_dir_all(&dir)?;
    let mut manifest = Manifest::new(&cfg, overrides);
    if let Err(e) = execute(&cfg, &dir, &mut manifest) {
        manifest.status = Status::Error;
        manifest.error = Some(RunError::from_error(&e));
    } else if manifest.checks.iter().any(|c| !c.passed) {
        manifest.status = Status::Failed;
    }
    std::fs::write(dir.join(MANIFEST_FILE), manifest.to_json())?;
    Ok(RunOutcome {
        directory: dir,
        manifest,
    })
}

fn integrate(cfg: &RunConfig, data: &InitialData, dt: f64) -> Result<(Trajectory, Option<PicardReport>)> {
    let p = cfg.phys_params()?;
    let t_final = cfg.solver.t_final;
    let opts = EvolveOptions {
        picard: cfg.picard_options(),
        ..EvolveOptions::default()
    };
    match cfg.solver.method {
        Method::Picard if t_final > 0.0 => {
            let (traj, report) = picard_solve_with(data, &p, t_final, dt, &opts.picard)?;
            for s in &traj.states {
                let r = s.divergence_residual();
                if r > opts.constraint_tol {
                    return Err(Error::ConstraintViolation {
                        t: s.t,
                        residual: r,
                        tolerance: opts.constraint_tol,
                    });
                }
            }
            Ok((traj, Some(report)))
        }
        method => Ok((evolve_with(data, &p, t_final, dt, method, &opts)?, None)),
    }
}

fn snapshot_indices(len: usize, every: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..len).step_by(every).collect();
    if idx.last() != Some(&(len - 1)) {
        idx.push(len - 1);
    }
    idx
}

fn diagnostic_term(term: &'static str) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::NonConvergence { .. } => Error::Elliptic {
            term,
            source: Box::new(e),
        },
        other => other,
    }
}

fn execute(cfg: &RunConfig, dir: &Path, manifest: &mut Manifest) -> Result<()> {
    cfg.check_cfl()?;
    let data = generate_data(cfg)?;
    let dt = cfg.solver.dt;
    let (traj, picard) = integrate(cfg, &data, dt)?;
    manifest.steps = traj.len() - 1;
    manifest.picard = picard;
    if traj.monitor.evaluations > 0 {
        manifest.rhs = Some(traj.monitor);
    }

    for i in snapshot_indices(traj.len(), cfg.output.snapshot_every) {
        let name = format!("snapshot_{i:06}.mkg4");
        persist_state(&traj.states[i], cfg.phys.mass, &dir.join(&name))?;
        manifest.snapshots.push(name);
    }

    let mut series: Vec<DiagnosticSeries> = Vec::new();
    let constraint = constraint_residual(&traj);
    manifest
        .checks
        .push(Check::at_most("constraint_max", constraint.summary.max, tol::CONSTRAINT));
    series.push(constraint);
    if let Some(m) = &manifest.rhs {
        manifest
            .checks
            .push(Check::at_most("m_divergence_max", m.max_m_divergence, tol::M_DIVERGENCE));
    }
    if let Some(report) = &manifest.picard {
        manifest.checks.push(
            Check::holds("picard_converged", report.converged)
                .with_detail(format!("{} iterates", report.iterate_count)),
        );
    }
    if traj.len() > 1 {
        let q = charge(&traj).map_err(diagnostic_term("A0 (charge)"))?;
        manifest.checks.push(Check::at_most(
            "charge_relative_drift",
            q.relative_drift.unwrap_or(0.0),
            tol::CHARGE_DRIFT,
        ));
        series.push(q);
        let e = energy_drift(&traj).map_err(diagnostic_term("A0 (energy)"))?;
        manifest.checks.push(Check::at_most(
            "energy_relative_drift",
            e.relative_drift.unwrap_or(0.0),
            tol::ENERGY_DRIFT,
        ));
        series.push(e);
    }
    if traj.len() >= 3 {
        let eq = equivalence_residual(&traj).map_err(diagnostic_term("A0 (equivalence)"))?;
        manifest.checks.push(Check::at_most(
            "equivalence_terminal_relative",
            eq.terminal_relative(),
            tol::EQUIVALENCE_TERMINAL_RELATIVE,
        ));
        series.push(eq.residual);
        series.push(eq.b0_norm);
        series.push(continuity_residual(&traj).map_err(diagnostic_term("A0 (continuity)"))?);
    }
    refinement(cfg, &data, traj, manifest)?;

    let refs: Vec<&DiagnosticSeries> = series.iter().collect();
    write_csv(&dir.join(DIAGNOSTICS_FILE), &refs)?;
    manifest.diagnostics_csv = Some(DIAGNOSTICS_FILE.to_string());
    Ok(())
}

/// Reruns at `4dt` and `2dt` and measures the order of the equivalence and
/// continuity residuals, when the coarse step is admissible.
fn refinement(cfg: &RunConfig, data: &InitialData, fine: Trajectory, manifest: &mut Manifest) -> Result<()> {
    let dt = cfg.solver.dt;
    let coarse_dt = 4.0 * dt;
    let coarse_steps = (fine.len() - 1) / 4;
    if (fine.len() - 1) % 4 != 0 || coarse_steps < 2 {
        manifest
            .notes
            .push("refinement skipped: T must span at least 8 steps, in multiples of 4".into());
        return Ok(());
    }
    if coarse_dt > cfl_limit(&cfg.grid_spec()?) {
        manifest
            .notes
            .push(format!("refinement skipped: 4dt = {coarse_dt} violates the CFL guard"));
        return Ok(());
    }
    let trajs = vec![
        integrate(cfg, data, coarse_dt)?.0,
        integrate(cfg, data, 2.0 * dt)?.0,
        fine,
    ];
    let studies = [
        equivalence_refinement(&trajs).map_err(diagnostic_term("A0 (equivalence refinement)"))?,
        continuity_refinement(&trajs).map_err(diagnostic_term("A0 (continuity refinement)"))?,
    ];
    for study in studies {
        let order = study.observed_order().unwrap_or(f64::NAN);
        manifest.checks.push(
            Check::at_least(
                &format!("{}_order", study.name),
                order,
                tol::MIN_ORDER - tol::ORDER_SLACK,
            )
            .with_detail(format!("norm orders {:?}", study.norm_orders)),
        );
        manifest.checks.push(Check::holds(
            &format!("{}_decreasing", study.name),
            study.decreasing,
        ));
        manifest.refinement.push(study);
    }
    Ok(())
}
