//! Named verification suites with pinned seeds, reported as pass/fail checks.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analysis::{
    band_limited_field, bilinear_ratio_probe, hdot_norm, scaling_check, select_parameters,
    NormParams, PROBE_BAND,
};
use crate::diagnostics::{
    charge, constraint_residual, energy_drift, equivalence_refinement, equivalence_residual,
    identity_suite, DiagnosticSeries,
};
use crate::elliptic::{a0_source, compute_a0_with, ScreenedOperator, SolveOptions};
use crate::error::{Error, Result};
use crate::evolution::{
    evolve_with, first_iterate_scaling, picard_solve_with, EvolveOptions, InitialData, Method,
    PhysParams, Trajectory,
};
use crate::lattice::{Domain, GridSpec, ScalarField};
use crate::runner::config::RunConfig;
use crate::runner::data::generate_data;
use crate::runner::report::{write_csv, Check};
use crate::runner::tolerances as tol;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteName {
    Identities,
    Elliptic,
    Conservation,
    Picard,
    Scaling,
    Bilinear,
}

pub const SUITES: [SuiteName; 6] = [
    SuiteName::Identities,
    SuiteName::Elliptic,
    SuiteName::Conservation,
    SuiteName::Picard,
    SuiteName::Scaling,
    SuiteName::Bilinear,
];

impl SuiteName {
    pub fn as_str(self) -> &'static str {
        match self {
            SuiteName::Identities => "identities",
            SuiteName::Elliptic => "elliptic",
            SuiteName::Conservation => "conservation",
            SuiteName::Picard => "picard",
            SuiteName::Scaling => "scaling",
            SuiteName::Bilinear => "bilinear",
        }
    }
}

impl fmt::Display for SuiteName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SuiteName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SUITES
            .iter()
            .copied()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = SUITES.iter().map(|n| n.as_str()).collect();
                Error::Config(format!("unknown suite `{s}`; expected one of {}", names.join(", ")))
            })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub name: SuiteName,
    pub passed: bool,
    pub seconds: f64,
    pub checks: Vec<Check>,
    #[serde(skip)]
    pub evidence: Vec<DiagnosticSeries>,
}

impl SuiteReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Writes `<name>.json` and `<name>.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{}.json", self.name)), self.to_json())?;
        let refs: Vec<&DiagnosticSeries> = self.evidence.iter().collect();
        write_csv(&dir.join(format!("{}.csv", self.name)), &refs)
    }

    /// Checks whose name starts with `prefix`.
    pub fn checks_for<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a Check> {
        self.checks.iter().filter(move |c| c.name.starts_with(prefix))
    }
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

#[derive(Default)]
struct Collector {
    checks: Vec<Check>,
    evidence: Vec<DiagnosticSeries>,
}

impl Collector {
    fn push(&mut self, c: Check) {
        self.checks.push(c);
    }

    /// Runs a block; an error becomes a failed check named `<label>.completed`.
    fn block<F: FnOnce(&mut Self) -> Result<()>>(&mut self, label: &str, f: F) {
        if let Err(e) = f(self) {
            self.push(Check::holds(&format!("{label}.completed"), false).with_detail(e.to_string()));
        }
    }
}

/// Runs one suite. Failures, including solver errors, are report content.
pub fn suite(name: SuiteName) -> SuiteReport {
    let start = Instant::now();
    let mut c = Collector::default();
    match name {
        SuiteName::Identities => identities(&mut c),
        SuiteName::Elliptic => c.block("A2", elliptic),
        SuiteName::Conservation => conservation(&mut c),
        SuiteName::Picard => c.block("A6", picard),
        SuiteName::Scaling => c.block("A7", scaling),
        SuiteName::Bilinear => c.block("A8", bilinear),
    }
    SuiteReport {
        name,
        passed: c.checks.iter().all(|ch| ch.passed),
        seconds: start.elapsed().as_secs_f64(),
        checks: c.checks,
        evidence: c.evidence,
    }
}

fn identities(c: &mut Collector) {
    let start = Instant::now();
    let report = identity_suite(tol::IDENTITY_SEED);
    let seconds = start.elapsed().as_secs_f64();
    for check in &report.checks {
        c.push(Check::at_most(
            &format!("A1.{}", check.name),
            check.max_residual,
            tol::IDENTITY_RESIDUAL,
        ));
    }
    c.push(Check::below("A1.runtime_seconds", seconds, tol::IDENTITY_RUNTIME_SECONDS));
}

fn elliptic(c: &mut Collector) -> Result<()> {
    let grid = GridSpec::periodic(8)?;
    let opts = SolveOptions::with_tol(tol::ELLIPTIC_SOLVE_TOLERANCE);
    let zero = ScalarField::zeros(grid, Domain::Spectral, true);
    let mut residual: f64 = 0.0;
    let mut bound: f64 = 0.0;
    let mut homogeneous: f64 = 0.0;
    let mut agreement: f64 = 0.0;
    let mut ratios = Vec::with_capacity(tol::ELLIPTIC_SLICES);
    for i in 0..tol::ELLIPTIC_SLICES {
        let seed = tol::ELLIPTIC_SEED.wrapping_mul(1_000_003).wrapping_add(i as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amp: f64 = rng.gen_range(0.1..4.0);
        let phi = band_limited_field(grid, &mut rng, PROBE_BAND, 1.0)?.scale(amp.into());
        let phit = band_limited_field(grid, &mut rng, PROBE_BAND, 1.0)?.scale(amp.into());
        let op = ScreenedOperator::new(&phi);
        let source = a0_source(&phi, &phit);
        let rep = compute_a0_with(&phi, &phit, &opts)?;
        let direct = (&op.apply(&rep.solution) - &source).l2_norm() / source.l2_norm();
        residual = residual.max(direct);
        let ratio = rep.bound_ratio.unwrap_or(f64::INFINITY);
        bound = bound.max(ratio);
        ratios.push(ratio);

        let hom = op.solve(&zero, &opts.clone().random_start(grid, seed))?;
        homogeneous = homogeneous.max(hdot_norm(&hom.solution, 1.0));

        let other = op.solve(&source, &opts.clone().random_start(grid, seed ^ 0x5eed))?;
        let scale = hdot_norm(&rep.solution, 1.0);
        if scale > 0.0 {
            agreement = agreement.max(hdot_norm(&(&rep.solution - &other.solution), 1.0) / scale);
        }
    }
    c.push(Check::at_most("A2.screened_residual", residual, tol::SCREENED_RESIDUAL));
    c.push(
        Check::at_most("A2.a0_bound_ratio", bound, 1.0 + tol::A0_BOUND_SLACK)
            .with_detail(format!("{} slices", tol::ELLIPTIC_SLICES)),
    );
    c.push(Check::at_most("A2.homogeneous_hdot1", homogeneous, tol::HOMOGENEOUS_HDOT1));
    c.push(Check::at_most("A2.two_start_agreement", agreement, tol::TWO_START_AGREEMENT));
    let index = (0..ratios.len()).map(|i| i as f64).collect();
    c.evidence.push(DiagnosticSeries::new("a0_bound_ratio", index, ratios));
    Ok(())
}

fn acceptance_data() -> Result<(RunConfig, InitialData, PhysParams)> {
    let cfg = RunConfig::default();
    let data = generate_data(&cfg)?;
    let p = cfg.phys_params()?;
    Ok((cfg, data, p))
}

/// Evolution that records constraint values instead of aborting on them.
fn unguarded(data: &InitialData, p: &PhysParams, t_final: f64, dt: f64) -> Result<Trajectory> {
    let opts = EvolveOptions {
        constraint_tol: f64::INFINITY,
        ..EvolveOptions::default()
    };
    evolve_with(data, p, t_final, dt, Method::Rk4, &opts)
}

fn conservation(c: &mut Collector) {
    c.block("A3", |c| {
        let (cfg, data, p) = acceptance_data()?;
        let traj = unguarded(&data, &p, cfg.solver.t_final, cfg.solver.dt)?;
        let constraint = constraint_residual(&traj);
        c.push(Check::at_most("A3.constraint_max", constraint.summary.max, tol::CONSTRAINT));
        c.push(
            Check::at_most("A3.m_divergence_max", traj.monitor.max_m_divergence, tol::M_DIVERGENCE)
                .with_detail(format!("{} evaluations", traj.monitor.evaluations)),
        );
        c.evidence.push(constraint);
        c.block("A5", |c| conservation_laws(c, &cfg, &data, &p, &traj));
        Ok(())
    });
    c.block("A4", equivalence);
}

fn conservation_laws(
    c: &mut Collector,
    cfg: &RunConfig,
    data: &InitialData,
    p: &PhysParams,
    traj: &Trajectory,
) -> Result<()> {
    let q = charge(traj)?;
    let drift = q.relative_drift.unwrap_or(0.0);
    c.push(Check::at_most("A5.charge_relative_drift", drift, tol::CHARGE_DRIFT));
    let coarse = unguarded(data, p, cfg.solver.t_final, 2.0 * cfg.solver.dt)?;
    let coarse_drift = charge(&coarse)?.relative_drift.unwrap_or(0.0);
    let ratio = if drift > 0.0 {
        coarse_drift / drift
    } else {
        f64::INFINITY
    };
    c.push(
        Check::at_least("A5.charge_halving_ratio", ratio, tol::CHARGE_HALVING_RATIO)
            .with_detail(format!("drift {coarse_drift:.3e} at 2dt, {drift:.3e} at dt")),
    );
    c.evidence.push(q);

    let e = energy_drift(traj)?;
    c.push(Check::at_most(
        "A5.energy_relative_drift",
        e.relative_drift.unwrap_or(0.0),
        tol::ENERGY_DRIFT,
    ));
    c.evidence.push(e);
    let drifts: Vec<f64> = tol::ENERGY_REFINEMENT_DTS
        .iter()
        .map(|&dt| {
            let t = unguarded(data, p, cfg.solver.t_final, dt)?;
            Ok(energy_drift(&t)?.relative_drift.unwrap_or(0.0))
        })
        .collect::<Result<_>>()?;
    c.push(
        Check::holds("A5.energy_drift_decreasing", drifts.windows(2).all(|w| w[1] < w[0]))
            .with_detail(format!("dt {:?}: drift {}", tol::ENERGY_REFINEMENT_DTS, sci(&drifts))),
    );
    c.evidence.push(DiagnosticSeries::new(
        "energy_drift_vs_dt",
        tol::ENERGY_REFINEMENT_DTS.to_vec(),
        drifts,
    ));
    Ok(())
}

fn equivalence(c: &mut Collector) -> Result<()> {
    let (_, data, p) = acceptance_data()?;
    let trajs: Vec<Trajectory> = tol::EQUIVALENCE_DTS
        .iter()
        .map(|&dt| unguarded(&data, &p, tol::EQUIVALENCE_T, dt))
        .collect::<Result<_>>()?;
    let study = equivalence_refinement(&trajs)?;
    c.push(
        Check::holds("A4.residual_decreasing", study.decreasing)
            .with_detail(format!("max residual {}", sci(&study.residual_max))),
    );
    c.push(
        Check::at_least(
            "A4.observed_order",
            study.observed_order().unwrap_or(f64::NAN),
            tol::MIN_ORDER - tol::ORDER_SLACK,
        )
        .with_detail(format!("norm-ratio orders {:.4?}", study.norm_orders)),
    );
    let finest = equivalence_residual(trajs.last().expect("three levels"))?;
    c.push(Check::at_most(
        "A4.terminal_relative",
        finest.terminal_relative(),
        tol::EQUIVALENCE_TERMINAL_RELATIVE,
    ));
    c.evidence.push(finest.residual);
    Ok(())
}

/// `max_t (‖φ_P − φ_R‖ + ‖A_P − A_R‖)` over the samples shared with the
/// coarsest level, `stride` being the level's refinement factor.
fn method_gap(picard: &Trajectory, rk4: &Trajectory, stride: usize) -> f64 {
    picard
        .states
        .iter()
        .zip(&rk4.states)
        .step_by(stride)
        .map(|(a, b)| (&a.phi - &b.phi).l2_norm() + (&a.a - &b.a).l2_norm())
        .fold(0.0, f64::max)
}

fn picard(c: &mut Collector) -> Result<()> {
    let (cfg, data, p) = acceptance_data()?;
    let opts = cfg.picard_options();
    let mut window = None;
    let mut tried = Vec::new();
    let mut worst = Vec::new();
    for &t in &tol::PICARD_WINDOWS {
        let dt = t / tol::PICARD_SEARCH_SAMPLES as f64;
        let outcome = picard_solve_with(&data, &p, t, dt, &opts);
        let max_ratio = match &outcome {
            Ok((_, r)) if r.converged => r.contraction_ratios.iter().cloned().fold(0.0, f64::max),
            _ => f64::INFINITY,
        };
        tried.push(t);
        worst.push(max_ratio);
        if max_ratio <= tol::PICARD_CONTRACTION {
            window = Some(t);
            break;
        }
    }
    c.evidence.push(DiagnosticSeries::new("picard_max_contraction", tried.clone(), worst.clone()));
    let best = worst.iter().cloned().fold(f64::INFINITY, f64::min);
    c.push(
        Check::at_most("A6.contraction_max", best, tol::PICARD_CONTRACTION)
            .with_detail(format!("windows {tried:?}, max ratios {}", sci(&worst))),
    );
    let Some(t) = window else {
        return Ok(());
    };
    let mut gaps = Vec::new();
    let mut dts = Vec::new();
    for (k, &samples) in tol::PICARD_REFINEMENT_SAMPLES.iter().enumerate() {
        let dt = t / samples as f64;
        let (pt, report) = picard_solve_with(&data, &p, t, dt, &opts)?;
        if !report.converged {
            return Err(Error::InvalidParameter(format!(
                "Picard iteration did not converge at dt = {dt}"
            )));
        }
        let rt = unguarded(&data, &p, t, dt)?;
        gaps.push(method_gap(&pt, &rt, 1 << k));
        dts.push(dt);
    }
    let orders: Vec<f64> = gaps.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let order = orders.iter().cloned().fold(f64::INFINITY, f64::min);
    c.push(
        Check::at_least("A6.agreement_order", order, tol::MIN_ORDER)
            .with_detail(format!("T = {t}, gaps {}", sci(&gaps))),
    );
    c.evidence.push(DiagnosticSeries::new("picard_rk4_gap", dts, gaps));
    Ok(())
}

fn scaling(c: &mut Collector) -> Result<()> {
    let grid = GridSpec::periodic(tol::SCALING_N)?;
    let mut rng = ChaCha8Rng::seed_from_u64(tol::SCALING_SEED);
    let f = band_limited_field(grid, &mut rng, 1, 1.0)?.without_mean();
    let mut errors = Vec::new();
    for &s in &tol::SCALING_EXPONENTS {
        let check = scaling_check(&f, s, 2)?;
        let threshold = if s == 1.0 {
            tol::CRITICAL_INVARIANCE
        } else {
            tol::SCALING
        };
        c.push(
            Check::at_most(&format!("A7.data_scaling_s{s}"), check.relative_error, threshold)
                .with_detail(format!("lhs {:.16e}, rhs {:.16e}", check.lhs, check.rhs)),
        );
        errors.push(check.relative_error);
    }
    c.evidence.push(DiagnosticSeries::new(
        "scaling_relative_error",
        tol::SCALING_EXPONENTS.to_vec(),
        errors,
    ));
    let phi0 = band_limited_field(grid, &mut rng, 1, 1.0)?;
    let fi = first_iterate_scaling(&phi0, 2, tol::FIRST_ITERATE_T, tol::FIRST_ITERATE_DT)?;
    c.push(
        Check::at_most("A7.first_iterate", fi.relative_error, tol::FIRST_ITERATE)
            .with_detail(format!("{} samples", fi.samples)),
    );
    Ok(())
}

/// The tuple `select_parameters(1.1)` must produce.
pub const REFERENCE_PARAMETERS: NormParams = NormParams {
    s: 1.1,
    theta: 0.525,
    eps: 0.003125,
    gamma: 0.015625,
    p: 1.0 / 0.96875,
    q: 256.0,
    r: 1.0 / 0.46875,
};

fn bilinear(c: &mut Collector) -> Result<()> {
    c.push(Check::holds(
        "A8.validator_accepts_reference",
        REFERENCE_PARAMETERS.validate().is_ok(),
    ));
    let rejects = [1.0, 0.9, 0.0]
        .iter()
        .all(|&s| select_parameters(s).is_err() && NormParams { s, ..REFERENCE_PARAMETERS }.validate().is_err());
    c.push(Check::holds("A8.validator_rejects_s_le_1", rejects));
    let np = select_parameters(tol::BILINEAR_S)?;
    let coarse = bilinear_ratio_probe(tol::BILINEAR_SEED, tol::BILINEAR_SAMPLES, &np, 8)?;
    let fine = bilinear_ratio_probe(tol::BILINEAR_SEED, tol::BILINEAR_SAMPLES, &np, 16)?;
    let change = (fine.max / coarse.max).max(coarse.max / fine.max);
    c.push(
        Check::below("A8.ratio_change", change, tol::BILINEAR_CHANGE).with_detail(format!(
            "max {:.4e} -> {:.4e}, mean {:.4e} -> {:.4e}",
            coarse.max, fine.max, coarse.mean, fine.mean
        )),
    );
    for (name, stats) in [("ratio_n8", &coarse), ("ratio_n16", &fine)] {
        let index = (0..stats.ratios.len()).map(|i| i as f64).collect();
        c.evidence.push(DiagnosticSeries::new(name, index, stats.ratios.clone()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for n in SUITES {
            assert_eq!(n.as_str().parse::<SuiteName>().unwrap(), n);
        }
        let err = "nope".parse::<SuiteName>().unwrap_err().to_string();
        assert!(err.contains("unknown suite") && err.contains("bilinear"), "{err}");
    }

    #[test]
    fn reference_parameters_match_selection() {
        let np = select_parameters(1.1).unwrap();
        for (a, b) in [
            (np.theta, REFERENCE_PARAMETERS.theta),
            (np.eps, REFERENCE_PARAMETERS.eps),
            (np.gamma, REFERENCE_PARAMETERS.gamma),
            (1.0 / np.p, 1.0 / REFERENCE_PARAMETERS.p),
            (1.0 / np.r, 1.0 / REFERENCE_PARAMETERS.r),
            (np.q, REFERENCE_PARAMETERS.q),
        ] {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn block_errors_become_failed_checks() {
        let mut c = Collector::default();
        c.block("X", |_| Err(Error::Config("boom".into())));
        assert_eq!(c.checks.len(), 1);
        assert!(!c.checks[0].passed);
        assert_eq!(c.checks[0].name, "X.completed");
    }
}
