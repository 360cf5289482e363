//! Acceptance criteria A1–A9. Each test prints one PASS/FAIL line per check
//! and a summary line per criterion. Tests hold a shared lock so timings are
//! not distorted by concurrent work.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::{Mutex, MutexGuard, OnceLock};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mkg4d::evolution::{evolve_with, EvolveOptions, InitialData, Method, PhysParams, State};
use mkg4d::lattice::{GridSpec, ScalarField, VectorField};
use mkg4d::runner::report::Check;
use mkg4d::runner::snapshot::{self, Snapshot};
use mkg4d::runner::tolerances as tol;
use mkg4d::runner::{run, suite, RunConfig, SuiteName, SuiteReport};

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict<'a>(criterion: &str, checks: impl IntoIterator<Item = &'a Check>) -> bool {
    let mut all = true;
    let mut count = 0;
    for c in checks {
        println!("{}", c.line());
        all &= c.passed;
        count += 1;
    }
    let ok = all && count > 0;
    println!("{criterion}: {} ({count} checks)", if ok { "PASS" } else { "FAIL" });
    ok
}

fn suite_criterion(report: &SuiteReport, criterion: &str) {
    let prefix = format!("{criterion}.");
    assert!(verdict(criterion, report.checks_for(&prefix)), "{criterion} failed");
}

fn conservation() -> &'static SuiteReport {
    static REPORT: OnceLock<SuiteReport> = OnceLock::new();
    REPORT.get_or_init(|| suite(SuiteName::Conservation))
}

#[test]
fn a1_identities() {
    let _g = serial();
    suite_criterion(&suite(SuiteName::Identities), "A1");
}

#[test]
fn a2_elliptic() {
    let _g = serial();
    suite_criterion(&suite(SuiteName::Elliptic), "A2");
}

#[test]
fn a3_constraint_propagation() {
    let _g = serial();
    suite_criterion(conservation(), "A3");
}

#[test]
fn a4_equivalence() {
    let _g = serial();
    suite_criterion(conservation(), "A4");
}

#[test]
fn a5_conservation() {
    let _g = serial();
    suite_criterion(conservation(), "A5");
}

#[test]
fn a6_picard() {
    let _g = serial();
    suite_criterion(&suite(SuiteName::Picard), "A6");
}

#[test]
fn a7_scaling() {
    let _g = serial();
    suite_criterion(&suite(SuiteName::Scaling), "A7");
}

#[test]
fn a8_bilinear() {
    let _g = serial();
    suite_criterion(&suite(SuiteName::Bilinear), "A8");
}

fn random_state(grid: GridSpec, seed: u64) -> State {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut real = || {
        let v: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        ScalarField::from_real_position(grid, &v).unwrap()
    };
    let a = VectorField::new(std::array::from_fn(|_| real())).unwrap();
    let at = VectorField::new(std::array::from_fn(|_| real())).unwrap();
    let phi = &real().as_complex() + &real().scale(Complex64::new(0.0, 1.0));
    let phit = &real().as_complex() + &real().scale(Complex64::new(0.0, 1.0));
    State::new(0.375, a, at, phi, phit).unwrap()
}

fn snapshot_round_trip(dir: &Path) -> Vec<Check> {
    let state = random_state(GridSpec::periodic(4).unwrap(), 17);
    let snap = Snapshot::from_state(&state, 0.5);
    let path = dir.join("state.mkg4");
    snapshot::persist(&snap, &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    let loaded = snapshot::load(&path).unwrap();
    let identical = loaded == snap && loaded.to_bytes() == bytes;

    let fixture_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/snapshot_n4.mkg4");
    let fixture_bytes = std::fs::read(&fixture_path).unwrap();
    let fixture = Snapshot::from_bytes(&fixture_bytes).unwrap();
    let expected = |f: usize, i: usize| (f * 256 + i) as f64 / 64.0 - 17.0;
    let values_ok = fixture.n == 4
        && fixture.box_length == 8.0
        && fixture.t == 0.25
        && fixture.mass == 0.5
        && fixture
            .fields
            .iter()
            .enumerate()
            .all(|(f, v)| v.iter().enumerate().all(|(i, &x)| x == expected(f, i)));
    vec![
        Check::holds("A9.snapshot_round_trip_bit_identical", identical),
        Check::holds("A9.fixture_values", values_ok),
        Check::holds("A9.fixture_rewrite_bit_identical", fixture.to_bytes() == fixture_bytes),
    ]
}

fn rerun_from_manifest(dir: &Path) -> Vec<Check> {
    let first = dir.join("first");
    let second = dir.join("second");
    let base = RunConfig {
        solver: mkg4d::runner::config::SolverConfig {
            t_final: 0.008,
            ..RunConfig::default().solver
        },
        ..RunConfig::default()
    };
    let set = |d: &Path| vec![
        ("output.directory".to_string(), d.display().to_string()),
        ("output.snapshot_every".to_string(), "4".to_string()),
    ];
    let a = run(&base, &set(&first)).unwrap();
    let from_manifest = RunConfig::load(&first.join("manifest.json")).unwrap();
    let b = run(&from_manifest, &[("output.directory".into(), second.display().to_string())]).unwrap();
    let mut files = a.manifest.snapshots.clone();
    files.push("diagnostics.csv".into());
    let identical = a.manifest.snapshots == b.manifest.snapshots
        && files.iter().all(|f| {
            std::fs::read(first.join(f)).unwrap() == std::fs::read(second.join(f)).unwrap()
        });
    vec![
        Check::holds("A9.run_passed", a.passed() && b.passed())
            .with_detail(format!("{} snapshots", files.len() - 1)),
        Check::holds("A9.rerun_from_manifest_bit_identical", identical),
    ]
}

/// Linearized evolution of `φ = e^{i(k·x − ωt)}`, `ω² = |k|² + m²`, and a
/// transverse wave `A = e₂ cos(k·x) cos(|k|t)` against the exact solutions.
fn plane_wave() -> Check {
    let grid = GridSpec::new(8, 2.0 * PI).unwrap();
    let k = [1i64, 0, 0, 0];
    let mass = 0.5;
    let kk = 1.0f64;
    let omega = (kk * kk + mass * mass).sqrt();
    let one = Complex64::new(1.0, 0.0);
    let phi0 = ScalarField::plane_wave(grid, k, one).unwrap();
    let phi1 = phi0.scale(Complex64::new(0.0, -omega));
    let zero = ScalarField::zeros(grid, mkg4d::lattice::Domain::Spectral, true);
    let wave = ScalarField::cosine_wave(grid, k, 1.0, 0.0).unwrap();
    let a = VectorField::new([zero.clone(), wave, zero.clone(), zero.clone()]).unwrap();
    let data = InitialData::new(a, VectorField::zeros(grid), phi0.clone(), phi1).unwrap();
    let opts = EvolveOptions {
        linearized: true,
        ..EvolveOptions::default()
    };
    let p = PhysParams::new(mass).unwrap();
    let traj = evolve_with(&data, &p, tol::PLANE_WAVE_T, tol::PLANE_WAVE_DT, Method::Rk4, &opts).unwrap();
    let mut worst: f64 = 0.0;
    for s in &traj.states {
        let exact_phi = phi0.scale(Complex64::from_polar(1.0, -omega * s.t));
        let exact_a2 = ScalarField::cosine_wave(grid, k, (kk * s.t).cos(), 0.0).unwrap();
        let e_phi = (&s.phi - &exact_phi).l2_norm() / exact_phi.l2_norm();
        let e_a = (s.a.component(1) - &exact_a2).l2_norm() / exact_phi.l2_norm();
        worst = worst.max(e_phi).max(e_a);
    }
    Check::at_most("A9.plane_wave_dispersion", worst, tol::PLANE_WAVE)
        .with_detail(format!("{} steps, omega = {omega:.6}", traj.len() - 1))
}

#[test]
fn a9_plumbing() {
    let _g = serial();
    let dir = tempfile::tempdir().unwrap();
    let mut checks = snapshot_round_trip(dir.path());
    checks.extend(rerun_from_manifest(dir.path()));
    checks.push(plane_wave());
    assert!(verdict("A9", &checks), "A9 failed");
}
