//! Pass thresholds and pinned parameters of the verification suites.

pub const IDENTITY_RESIDUAL: f64 = 1e-10;
pub const IDENTITY_RUNTIME_SECONDS: f64 = 5.0;
pub const IDENTITY_SEED: u64 = 2024;

pub const ELLIPTIC_SLICES: usize = 100;
pub const ELLIPTIC_SEED: u64 = 11;
pub const ELLIPTIC_SOLVE_TOLERANCE: f64 = 1e-12;
pub const SCREENED_RESIDUAL: f64 = 1e-10;
pub const A0_BOUND_SLACK: f64 = 1e-8;
pub const HOMOGENEOUS_HDOT1: f64 = 1e-10;
pub const TWO_START_AGREEMENT: f64 = 1e-9;

pub const CONSTRAINT: f64 = 1e-8;
pub const M_DIVERGENCE: f64 = 1e-10;

pub const EQUIVALENCE_DTS: [f64; 3] = [2e-3, 1e-3, 5e-4];
pub const EQUIVALENCE_T: f64 = 0.02;
pub const EQUIVALENCE_TERMINAL_RELATIVE: f64 = 1e-5;
pub const MIN_ORDER: f64 = 2.0;
/// Allowance below `MIN_ORDER` for the measured three-level order.
pub const ORDER_SLACK: f64 = 0.05;

pub const CHARGE_DRIFT: f64 = 1e-6;
pub const CHARGE_HALVING_RATIO: f64 = 8.0;
pub const ENERGY_DRIFT: f64 = 1e-4;
pub const ENERGY_REFINEMENT_DTS: [f64; 3] = [0.1, 0.05, 0.025];

pub const PICARD_WINDOWS: [f64; 4] = [1.0, 0.5, 0.25, 0.125];
pub const PICARD_CONTRACTION: f64 = 0.5;
/// Samples per window in the contraction search.
pub const PICARD_SEARCH_SAMPLES: usize = 16;
/// Samples per window at the three refinement levels.
pub const PICARD_REFINEMENT_SAMPLES: [usize; 3] = [8, 16, 32];

pub const SCALING: f64 = 1e-12;
pub const SCALING_EXPONENTS: [f64; 3] = [1.0, 1.25, 1.5];
pub const SCALING_N: usize = 4;
pub const SCALING_SEED: u64 = 5;
/// Relative error allowed for the exactly invariant `s = 1` row.
pub const CRITICAL_INVARIANCE: f64 = 4.0 * f64::EPSILON;
pub const FIRST_ITERATE: f64 = 1e-8;
pub const FIRST_ITERATE_T: f64 = 0.25;
pub const FIRST_ITERATE_DT: f64 = 0.0625;

pub const BILINEAR_SEED: u64 = 3;
pub const BILINEAR_SAMPLES: usize = 32;
pub const BILINEAR_S: f64 = 1.1;
pub const BILINEAR_CHANGE: f64 = 2.0;

pub const PLANE_WAVE: f64 = 1e-6;
pub const PLANE_WAVE_T: f64 = 1.0;
pub const PLANE_WAVE_DT: f64 = 0.01;
