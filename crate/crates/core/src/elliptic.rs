//! Elimination of the non-dynamical variables.
//!
//! `A₀` solves the screened Poisson problem `ΔA₀ − |φ|²A₀ = −Im(φ ∂_tφ̄)` on
//! every time slice; `B₀` (which stands in for `∂_tA₀`) is explicit:
//! `B₀ = R^j(−Δ)^{−1/2}[Im(φ∂_jφ̄) − |φ|²A_j]`.
//!
//! The screened problem is solved by preconditioned conjugate gradients on
//! the symmetric positive operator `−Δ + |φ|²`, restricted to the
//! Nyquist-free modes (the band every dealiased product lands in). The
//! preconditioner is the exact Fourier inverse of `−Δ + mean(|φ|²)`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::hdot_norm;
use crate::error::{Error, Result};
use crate::lattice::{dealias, pairwise_sum, GridSpec, ScalarField, VectorField, DIM};
use crate::spectral;

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_MAX_ITERATIONS: usize = 500;

/// Slack allowed on `‖A₀‖_{Ḣ¹} ≤ 2‖∂_tφ‖_{L²}`.
pub const A0_BOUND_SLACK: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct EllipticSolveReport {
    pub solution: ScalarField,
    /// `‖Δu − |φ|²u − f‖_{L²}`.
    pub residual_l2: f64,
    /// `residual_l2 / ‖f‖_{L²}` (zero when `f = 0`).
    pub relative_residual: f64,
    pub iterations: usize,
    /// `‖A₀‖_{Ḣ¹} / (2‖∂_tφ‖_{L²})`, populated by [`compute_a0`].
    pub bound_ratio: Option<f64>,
    pub bound_violated: bool,
    /// Mean removed from `f` when `φ ≡ 0` (torus solvability).
    pub mean_subtracted: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iterations: usize,
    pub initial_guess: Option<ScalarField>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOLERANCE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            initial_guess: None,
        }
    }
}

impl SolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    pub fn warm_start(mut self, guess: Option<ScalarField>) -> Self {
        self.initial_guess = guess;
        self
    }

    /// Seeded random starting vector, for uniqueness checks.
    pub fn random_start(mut self, grid: GridSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        self.initial_guess = Some(
            ScalarField::from_real_position(grid, &v)
                .expect("grid length")
                .spectral(),
        );
        self
    }
}

/// The operator `u ↦ Δu − w·u` for a non-negative weight `w = |φ|²`.
pub struct ScreenedOperator {
    grid: GridSpec,
    weight_fine: Vec<f64>,
    mean_weight: f64,
}

impl ScreenedOperator {
    pub fn new(phi: &ScalarField) -> Self {
        let fine = dealias::to_fine(phi);
        let weight: Vec<f64> = fine.iter().map(|v| v.norm_sqr()).collect();
        Self::from_fine_weight(*phi.grid(), weight)
    }

    /// Builds the operator from `|φ|²` already sampled on the dealiasing grid.
    pub fn from_fine_weight(grid: GridSpec, weight_fine: Vec<f64>) -> Self {
        let mean_weight = pairwise_sum(&weight_fine) / weight_fine.len() as f64;
        Self {
            grid,
            weight_fine,
            mean_weight,
        }
    }

    pub fn is_unscreened(&self) -> bool {
        self.weight_fine.iter().all(|&w| w == 0.0)
    }

    /// `Δu − |φ|²u`.
    pub fn apply(&self, u: &ScalarField) -> ScalarField {
        let lap = spectral::laplacian(u);
        let wu = self.weighted(u);
        &lap - &wu
    }

    fn weighted(&self, u: &ScalarField) -> ScalarField {
        if self.is_unscreened() {
            return ScalarField::zeros(self.grid, crate::lattice::Domain::Spectral, u.is_real());
        }
        let mut fine = dealias::to_fine(u);
        for (v, w) in fine.iter_mut().zip(&self.weight_fine) {
            *v *= *w;
        }
        dealias::from_fine(&self.grid, fine, u.is_real())
    }

    /// `(−Δ + |φ|²)u` on spectral coefficients.
    fn apply_spd(&self, u: &[Complex64]) -> Vec<Complex64> {
        let field =
            ScalarField::from_spectral(self.grid, u.to_vec(), true).expect("grid length");
        let table = self.grid.modes();
        let wu = self.weighted(&field);
        u.iter()
            .zip(wu.values())
            .enumerate()
            .map(|(i, (&c, &w))| c * table.xi_sq[i] + w)
            .collect()
    }

    fn precondition(&self, r: &[Complex64]) -> Vec<Complex64> {
        let table = self.grid.modes();
        r.iter()
            .enumerate()
            .map(|(i, &c)| {
                let d = table.xi_sq[i] + self.mean_weight;
                if d == 0.0 || !table.nyquist_free[i] {
                    Complex64::new(0.0, 0.0)
                } else {
                    c / d
                }
            })
            .collect()
    }

    /// Solves `Δu − |φ|²u = f` for real `u`.
    pub fn solve(&self, f: &ScalarField, opts: &SolveOptions) -> Result<EllipticSolveReport> {
        if !(opts.tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tolerance must be positive, got {}",
                opts.tol
            )));
        }
        let table = self.grid.modes();
        let mut rhs = f.spectral().into_real();
        let mut mean_subtracted = None;
        if self.is_unscreened() {
            let m = rhs.mean().re;
            if m != 0.0 {
                rhs.values_mut()[0] = Complex64::new(0.0, 0.0);
                mean_subtracted = Some(m);
            }
        }
        // Only the Nyquist-free band is reachable by the operator.
        for (v, &free) in rhs.values_mut().iter_mut().zip(&table.nyquist_free) {
            if !free {
                *v = Complex64::new(0.0, 0.0);
            }
        }
        let f_norm = rhs.l2_norm();

        // K u = b with K = −Δ + |φ|², b = −f.
        let b: Vec<Complex64> = rhs.values().iter().map(|v| -v).collect();
        let mut x: Vec<Complex64> = match &opts.initial_guess {
            Some(g) => {
                let mut g = g.spectral().into_real().into_values();
                for (v, &free) in g.iter_mut().zip(&table.nyquist_free) {
                    if !free {
                        *v = Complex64::new(0.0, 0.0);
                    }
                }
                if self.is_unscreened() {
                    g[0] = Complex64::new(0.0, 0.0);
                }
                g
            }
            None => vec![Complex64::new(0.0, 0.0); self.grid.len()],
        };

        let b_norm = dot(&b, &b).sqrt();
        let target = opts.tol * b_norm;
        let mut iterations = 0;

        if b_norm > 0.0 {
            'restart: loop {
                let kx = self.apply_spd(&x);
                let mut r: Vec<Complex64> = b.iter().zip(&kx).map(|(a, c)| a - c).collect();
                if dot(&r, &r).sqrt() <= target {
                    break;
                }
                let mut z = self.precondition(&r);
                let mut p = z.clone();
                let mut rz = dot(&r, &z);
                loop {
                    if iterations >= opts.max_iterations {
                        let res = dot(&r, &r).sqrt() / b_norm;
                        return Err(Error::NonConvergence {
                            iterations,
                            residual: res,
                        });
                    }
                    iterations += 1;
                    let kp = self.apply_spd(&p);
                    let pkp = dot(&p, &kp);
                    if pkp <= 0.0 {
                        break 'restart;
                    }
                    let alpha = rz / pkp;
                    for i in 0..x.len() {
                        x[i] += p[i] * alpha;
                        r[i] -= kp[i] * alpha;
                    }
                    if dot(&r, &r).sqrt() <= target {
                        // Confirm against the true residual.
                        continue 'restart;
                    }
                    z = self.precondition(&r);
                    let rz_new = dot(&r, &z);
                    let beta = rz_new / rz;
                    rz = rz_new;
                    for i in 0..p.len() {
                        p[i] = z[i] + p[i] * beta;
                    }
                }
            }
        } else {
            x.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        }

        let solution = ScalarField::from_spectral(self.grid, x, true)?;
        let residual = &self.apply(&solution) - &rhs;
        let residual_l2 = residual.l2_norm();
        let relative_residual = if f_norm > 0.0 {
            residual_l2 / f_norm
        } else {
            0.0
        };
        if relative_residual > opts.tol {
            return Err(Error::NonConvergence {
                iterations,
                residual: relative_residual,
            });
        }
        Ok(EllipticSolveReport {
            solution,
            residual_l2,
            relative_residual,
            iterations,
            bound_ratio: None,
            bound_violated: false,
            mean_subtracted,
        })
    }
}

fn dot(a: &[Complex64], b: &[Complex64]) -> f64 {
    let terms: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x.conj() * y).re).collect();
    pairwise_sum(&terms)
}

/// Solves `Δu − |φ|²u = f`.
pub fn solve_screened_poisson(
    phi: &ScalarField,
    f: &ScalarField,
    tol: f64,
) -> Result<EllipticSolveReport> {
    ScreenedOperator::new(phi).solve(f, &SolveOptions::with_tol(tol))
}

/// `−Im(φ ∂_tφ̄)`, the source of the `A₀` equation.
pub fn a0_source(phi: &ScalarField, phit: &ScalarField) -> ScalarField {
    let a = dealias::to_fine(phi);
    let b = dealias::to_fine(phit);
    let prod = a
        .iter()
        .zip(&b)
        .map(|(x, y)| Complex64::new(-(x * y.conj()).im, 0.0))
        .collect();
    dealias::from_fine(phi.grid(), prod, true)
}

pub fn compute_a0(phi: &ScalarField, phit: &ScalarField, tol: f64) -> Result<EllipticSolveReport> {
    compute_a0_with(phi, phit, &SolveOptions::with_tol(tol))
}

/// Solves `ΔA₀ − |φ|²A₀ = −Im(φ ∂_tφ̄)` and checks `‖A₀‖_{Ḣ¹} ≤ 2‖∂_tφ‖`.
pub fn compute_a0_with(
    phi: &ScalarField,
    phit: &ScalarField,
    opts: &SolveOptions,
) -> Result<EllipticSolveReport> {
    let op = ScreenedOperator::new(phi);
    let source = a0_source(phi, phit);
    let mut report = op.solve(&source, opts)?;
    attach_bound(&mut report, phit);
    Ok(report)
}

pub(crate) fn attach_bound(report: &mut EllipticSolveReport, phit: &ScalarField) {
    let denom = 2.0 * phit.l2_norm();
    let num = hdot_norm(&report.solution, 1.0);
    let ratio = if denom > 0.0 {
        num / denom
    } else if num == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    report.bound_ratio = Some(ratio);
    report.bound_violated = ratio > 1.0 + A0_BOUND_SLACK;
}

/// `B₀ = Σ_j R^j(−Δ)^{−1/2}[Im(φ∂_jφ̄) − |φ|²A_j]`.
pub fn compute_b0(a: &VectorField, phi: &ScalarField) -> ScalarField {
    let grid = *phi.grid();
    let phi_f = dealias::to_fine(phi);
    let dphi: [Vec<Complex64>; 4] =
        std::array::from_fn(|j| dealias::to_fine(&spectral::derivative(phi, j)));
    let a_f: [Vec<Complex64>; 4] = std::array::from_fn(|j| dealias::to_fine(a.component(j)));
    b0_from_fine(&grid, &phi_f, &dphi, &a_f)
}

pub(crate) fn b0_from_fine(
    grid: &GridSpec,
    phi: &[Complex64],
    dphi: &[Vec<Complex64>; 4],
    a: &[Vec<Complex64>; 4],
) -> ScalarField {
    let table = grid.modes();
    let mut acc = vec![Complex64::new(0.0, 0.0); grid.len()];
    let flux = |j: usize| -> Vec<Complex64> {
        (0..phi.len())
            .map(|i| {
                let cur = (phi[i] * dphi[j][i].conj()).im;
                Complex64::new(cur - phi[i].norm_sqr() * a[j][i].re, 0.0)
            })
            .collect()
    };
    for j in [0, 2] {
        let (g0, g1) = dealias::from_fine_pair(grid, &flux(j), &flux(j + 1));
        for (jj, gj) in [(j, g0), (j + 1, g1)] {
            for (i, (o, c)) in acc.iter_mut().zip(gj.values()).enumerate() {
                let xi_sq = table.xi_sq[i];
                if xi_sq > 0.0 {
                    *o += Complex64::new(0.0, table.xi[i][jj] / xi_sq) * c;
                }
            }
        }
    }
    ScalarField::from_spectral(*grid, acc, true).expect("grid length")
}

/// Right-hand side of `ΔB₀ = −Im ∂^j(φ∂_jφ̄) + ∂^j(|φ|²A_j)`, assembled
/// directly from its definition.
pub fn b0_equation_rhs(a: &VectorField, phi: &ScalarField) -> ScalarField {
    let grid = *phi.grid();
    let phi_f = dealias::to_fine(phi);
    let mut total = ScalarField::zeros(grid, crate::lattice::Domain::Spectral, true);
    for j in 0..DIM {
        let dphi_f = dealias::to_fine(&spectral::derivative(phi, j));
        let a_f = dealias::to_fine(a.component(j));
        let term: Vec<Complex64> = (0..phi_f.len())
            .map(|i| {
                let flux = phi_f[i].norm_sqr() * a_f[i].re;
                let cur = (phi_f[i] * dphi_f[i].conj()).im;
                Complex64::new(flux - cur, 0.0)
            })
            .collect();
        let term = dealias::from_fine(&grid, term, true);
        total = &total + &spectral::derivative(&term, j);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Domain;
    use crate::lattice::GridSpec;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn band_limited(grid: GridSpec, seed: u64, band: i64, real: bool) -> ScalarField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = ScalarField::zeros(grid, Domain::Spectral, false);
        for flat in 0..grid.len() {
            let k = grid.mode_of(flat);
            if k.iter().all(|c| c.abs() <= band) {
                f.values_mut()[flat] = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                    / (1.0 + k.iter().map(|c| (c * c) as f64).sum::<f64>());
            }
        }
        if real {
            f.into_real()
        } else {
            f
        }
    }

    #[test]
    fn unscreened_plane_wave() {
        let g = GridSpec::periodic(8).unwrap();
        let phi = ScalarField::zeros(g, Domain::Spectral, false);
        let f = ScalarField::cosine_wave(g, [0, 1, 0, 0], 1.0, 0.3).unwrap();
        let rep = solve_screened_poisson(&phi, &f, 1e-12).unwrap();
        let err = (&rep.solution + &f).l2_norm() / f.l2_norm();
        assert!(err < 1e-12, "{err}");
        assert!(rep.mean_subtracted.is_none());
    }

    #[test]
    fn unscreened_random_matches_inverse_laplacian() {
        let g = GridSpec::periodic(8).unwrap();
        let phi = ScalarField::zeros(g, Domain::Spectral, false);
        let f = band_limited(g, 1, 3, true).without_mean();
        let rep = solve_screened_poisson(&phi, &f, 1e-11).unwrap();
        let expect = spectral::apply_symbol(&f, true, |_, s| {
            if s == 0.0 {
                c(0.0, 0.0)
            } else {
                c(-1.0 / s, 0.0)
            }
        });
        assert!((&rep.solution - &expect).l2_norm() <= 1e-10 * expect.l2_norm());
    }

    #[test]
    fn unscreened_mean_is_subtracted_and_reported() {
        let g = GridSpec::periodic(4).unwrap();
        let phi = ScalarField::zeros(g, Domain::Spectral, false);
        let f = &ScalarField::cosine_wave(g, [1, 0, 0, 0], 1.0, 0.0).unwrap()
            + &ScalarField::constant(g, c(0.25, 0.0));
        let rep = solve_screened_poisson(&phi, &f, 1e-12).unwrap();
        assert_eq!(rep.mean_subtracted, Some(0.25));
    }

    #[test]
    fn screened_random_residual() {
        let g = GridSpec::periodic(8).unwrap();
        let phi = band_limited(g, 2, 2, false).scale(c(3.0, 0.0));
        let f = band_limited(g, 3, 3, true);
        let rep = solve_screened_poisson(&phi, &f, 1e-11).unwrap();
        let op = ScreenedOperator::new(&phi);
        let direct = (&op.apply(&rep.solution) - &f).l2_norm();
        assert!(direct <= 1e-10 * f.l2_norm(), "{direct}");
        assert!(rep.solution.is_real());
    }

    #[test]
    fn bad_tolerance_rejected() {
        let g = GridSpec::periodic(4).unwrap();
        let phi = ScalarField::zeros(g, Domain::Spectral, false);
        assert!(solve_screened_poisson(&phi, &phi.re(), 0.0).is_err());
    }

    #[test]
    fn iteration_cap_reports_failure() {
        let g = GridSpec::periodic(8).unwrap();
        let phi = band_limited(g, 4, 3, false).scale(c(20.0, 0.0));
        let f = band_limited(g, 5, 3, true);
        let op = ScreenedOperator::new(&phi);
        let opts = SolveOptions {
            tol: 1e-14,
            max_iterations: 1,
            initial_guess: None,
        };
        assert!(matches!(
            op.solve(&f, &opts),
            Err(Error::NonConvergence { .. })
        ));
    }

    #[test]
    fn a0_vanishes_without_source() {
        let g = GridSpec::periodic(8).unwrap();
        let zero = ScalarField::zeros(g, Domain::Spectral, false);
        let phi = band_limited(g, 6, 2, false);
        let rep = compute_a0(&zero, &phi, 1e-10).unwrap();
        assert!(rep.solution.is_zero());
        let rep = compute_a0(&phi, &zero, 1e-10).unwrap();
        assert!(rep.solution.l2_norm() == 0.0);
        assert_eq!(rep.bound_ratio, Some(0.0));
    }

    #[test]
    fn a0_satisfies_factor_two_bound() {
        let g = GridSpec::periodic(8).unwrap();
        for seed in 0..5 {
            let phi = band_limited(g, 10 + seed, 2, false).scale(c(4.0, 0.0));
            let phit = band_limited(g, 20 + seed, 2, false).scale(c(4.0, 0.0));
            let rep = compute_a0(&phi, &phit, 1e-10).unwrap();
            assert!(!rep.bound_violated, "ratio {:?}", rep.bound_ratio);
        }
    }

    #[test]
    fn b0_plane_wave_vanishes() {
        let g = GridSpec::periodic(8).unwrap();
        let phi = ScalarField::plane_wave(g, [1, 2, 0, -1], c(1.0, 0.0)).unwrap();
        let b0 = compute_b0(&VectorField::zeros(g), &phi);
        assert!(b0.l2_norm() < 1e-12);
        let zero = ScalarField::zeros(g, Domain::Spectral, false);
        assert!(compute_b0(&VectorField::zeros(g), &zero).is_zero());
    }

    #[test]
    fn b0_solves_its_equation() {
        let g = GridSpec::periodic(8).unwrap();
        let phi = band_limited(g, 30, 2, false);
        let a = crate::spectral::leray_project(
            &VectorField::new(std::array::from_fn(|j| band_limited(g, 40 + j as u64, 2, true)))
                .unwrap(),
        );
        let b0 = compute_b0(&a, &phi);
        let lhs = spectral::laplacian(&b0);
        let rhs = b0_equation_rhs(&a, &phi);
        assert!((&lhs - &rhs).l2_norm() <= 1e-10 * rhs.l2_norm());
    }
}
