//! Fourier-multiplier calculus on the torus: Bessel potentials, fractional
//! Laplacians, Riesz transforms, the Leray projection and the null forms
//! `Q_jk(u, v) = ∂_j u ∂_k v − ∂_k u ∂_j v`.
//!
//! Axis indices are zero-based (`0` is x¹). Zero-mode conventions:
//! homogeneous multipliers of negative order (Riesz transforms,
//! `(-Δ)^{α/2}` with `α < 0`) annihilate the mean; the Leray projection is the
//! identity on it. Every symbol is evaluated at the wavevector with its
//! Nyquist components set to zero.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::lattice::{dealias, ScalarField, VectorField, DIM};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum MultiplierSpec {
    /// `Λ^α`: `(1 + |ξ|²)^{α/2}`.
    Bessel(f64),
    /// `R_j = (-Δ)^{-1/2} ∂_j`: `iξ_j / |ξ|`.
    Riesz(usize),
    /// `(-Δ)^{α/2}`: `|ξ|^α`.
    FractionalLaplacian(f64),
    /// `∂_j`: `iξ_j`.
    Derivative(usize),
}

impl MultiplierSpec {
    pub fn symbol(&self, xi: &[f64; 4], xi_sq: f64) -> Complex64 {
        match *self {
            MultiplierSpec::Bessel(alpha) => Complex64::new((1.0 + xi_sq).powf(0.5 * alpha), 0.0),
            MultiplierSpec::Riesz(j) => {
                if xi_sq == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    I * (xi[j] / xi_sq.sqrt())
                }
            }
            MultiplierSpec::FractionalLaplacian(alpha) => {
                if alpha == 0.0 {
                    Complex64::new(1.0, 0.0)
                } else if xi_sq == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(xi_sq.powf(0.5 * alpha), 0.0)
                }
            }
            MultiplierSpec::Derivative(j) => I * xi[j],
        }
    }

    fn check(&self) {
        if let MultiplierSpec::Riesz(j) | MultiplierSpec::Derivative(j) = *self {
            assert!(j < DIM, "axis index {j} out of range 0..4");
        }
    }
}

/// Pointwise multiplication of the spectral coefficients by the symbol.
pub fn apply_multiplier(f: &ScalarField, m: MultiplierSpec) -> ScalarField {
    m.check();
    let table = f.grid().modes();
    f.map_modes(f.is_real(), |i, c| c * m.symbol(&table.xi[i], table.xi_sq[i]))
}

/// Applies an arbitrary symbol `σ(ξ, |ξ|²)`. The result is flagged real
/// when `f` is real and `keeps_reality` is set.
pub fn apply_symbol<S>(f: &ScalarField, keeps_reality: bool, symbol: S) -> ScalarField
where
    S: Fn(&[f64; 4], f64) -> Complex64,
{
    let table = f.grid().modes();
    f.map_modes(f.is_real() && keeps_reality, |i, c| {
        c * symbol(&table.xi[i], table.xi_sq[i])
    })
}

pub fn derivative(f: &ScalarField, j: usize) -> ScalarField {
    apply_multiplier(f, MultiplierSpec::Derivative(j))
}

pub fn gradient(f: &ScalarField) -> [ScalarField; 4] {
    std::array::from_fn(|j| derivative(f, j))
}

pub fn laplacian(f: &ScalarField) -> ScalarField {
    apply_symbol(f, true, |_, xi_sq| Complex64::new(-xi_sq, 0.0))
}

pub fn riesz(f: &ScalarField, j: usize) -> ScalarField {
    apply_multiplier(f, MultiplierSpec::Riesz(j))
}

/// `(-Δ)^{-1/2}`.
pub fn inv_sqrt_neg_laplacian(f: &ScalarField) -> ScalarField {
    apply_multiplier(f, MultiplierSpec::FractionalLaplacian(-1.0))
}

/// `R_k (-Δ)^{-1/2}`, symbol `iξ_k / |ξ|²`.
pub fn riesz_inv_sqrt(f: &ScalarField, k: usize) -> ScalarField {
    assert!(k < DIM);
    apply_symbol(f, true, |xi, xi_sq| {
        if xi_sq == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            I * (xi[k] / xi_sq)
        }
    })
}

/// `𝒫X_j = X_j + R_j R^k X_k`; the identity on the zero mode.
pub fn leray_project(x: &VectorField) -> VectorField {
    let grid = *x.grid();
    let table = grid.modes();
    let comps: [ScalarField; 4] = std::array::from_fn(|j| x.component(j).spectral());
    let mut out: [Vec<Complex64>; 4] = std::array::from_fn(|j| comps[j].values().to_vec());
    for i in 0..grid.len() {
        let xi_sq = table.xi_sq[i];
        if xi_sq == 0.0 {
            continue;
        }
        let xi = &table.xi[i];
        let dot: Complex64 = (0..DIM).map(|k| comps[k].values()[i] * xi[k]).sum();
        for j in 0..DIM {
            out[j][i] -= dot * (xi[j] / xi_sq);
        }
    }
    let fields: [ScalarField; 4] = std::array::from_fn(|j| {
        let v = std::mem::take(&mut out[j]);
        ScalarField::from_spectral(grid, v, comps[j].is_real()).expect("grid length")
    });
    VectorField::new(fields).expect("shared grid")
}

/// `∂^j X_j`.
pub fn divergence(x: &VectorField) -> ScalarField {
    let grid = *x.grid();
    let table = grid.modes();
    let comps: [ScalarField; 4] = std::array::from_fn(|j| x.component(j).spectral());
    let values = (0..grid.len())
        .map(|i| {
            let xi = &table.xi[i];
            (0..DIM).map(|k| I * xi[k] * comps[k].values()[i]).sum()
        })
        .collect();
    let real = comps.iter().all(ScalarField::is_real);
    ScalarField::from_spectral(grid, values, real).expect("grid length")
}

/// `Q_jk(u, v) = ∂_j u ∂_k v − ∂_k u ∂_j v`, products formed on the
/// dealiasing grid.
pub fn null_form_q(u: &ScalarField, v: &ScalarField, j: usize, k: usize) -> ScalarField {
    assert!(j < DIM && k < DIM, "axis indices must be in 0..4");
    let real = u.is_real() && v.is_real();
    if j == k {
        return ScalarField::zeros(*u.grid(), crate::lattice::Domain::Spectral, real);
    }
    let uj = dealias::to_fine(&derivative(u, j));
    let uk = dealias::to_fine(&derivative(u, k));
    let vj = dealias::to_fine(&derivative(v, j));
    let vk = dealias::to_fine(&derivative(v, k));
    let prod = (0..uj.len())
        .map(|i| uj[i] * vk[i] - uk[i] * vj[i])
        .collect();
    dealias::from_fine(u.grid(), prod, real)
}

/// All `Q_jk(u, v)` at once, sharing the refined derivative samples.
pub fn null_forms(u: &ScalarField, v: &ScalarField) -> [[ScalarField; 4]; 4] {
    let grid = *u.grid();
    let real = u.is_real() && v.is_real();
    let du: [Vec<Complex64>; 4] = std::array::from_fn(|j| dealias::to_fine(&derivative(u, j)));
    let dv: [Vec<Complex64>; 4] = std::array::from_fn(|j| dealias::to_fine(&derivative(v, j)));
    let zero = ScalarField::zeros(grid, crate::lattice::Domain::Spectral, real);
    let mut out: [[ScalarField; 4]; 4] = std::array::from_fn(|_| std::array::from_fn(|_| zero.clone()));
    for j in 0..DIM {
        for k in (j + 1)..DIM {
            let prod = (0..du[j].len())
                .map(|i| du[j][i] * dv[k][i] - du[k][i] * dv[j][i])
                .collect();
            let q = dealias::from_fine(&grid, prod, real);
            out[k][j] = -&q;
            out[j][k] = q;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{GridSpec, VectorField};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn grid() -> GridSpec {
        GridSpec::periodic(8).unwrap()
    }

    fn random_real(g: GridSpec, seed: u64) -> ScalarField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        ScalarField::from_real_position(g, &v).unwrap().spectral()
    }

    fn random_vector(g: GridSpec, seed: u64) -> VectorField {
        VectorField::new(std::array::from_fn(|j| random_real(g, seed * 10 + j as u64))).unwrap()
    }

    fn rel(a: &ScalarField, b: &ScalarField) -> f64 {
        (a - b).l2_norm() / b.l2_norm().max(1e-300)
    }

    #[test]
    fn riesz_on_unit_plane_wave() {
        let g = grid();
        let f = ScalarField::plane_wave(g, [1, 0, 0, 0], c(1.0, 0.0)).unwrap();
        let r = apply_multiplier(&f, MultiplierSpec::Riesz(0));
        assert!(rel(&r, &f.scale(c(0.0, 1.0))) < 1e-15);
    }

    #[test]
    fn bessel_minus_two_on_unit_mode() {
        let g = grid();
        let f = ScalarField::plane_wave(g, [0, 0, 1, 0], c(1.0, 0.0)).unwrap();
        let r = apply_multiplier(&f, MultiplierSpec::Bessel(-2.0));
        assert!(rel(&r, &f.scale(c(0.5, 0.0))) < 1e-15);
    }

    #[test]
    fn negative_fractional_laplacian_kills_constants() {
        let g = grid();
        let f = ScalarField::constant(g, c(1.0, 0.0));
        let r = apply_multiplier(&f, MultiplierSpec::FractionalLaplacian(-1.0));
        assert!(r.is_zero());
    }

    #[test]
    fn leray_annihilates_gradients() {
        let g = grid();
        let f = random_real(g, 4).without_mean();
        let grad = VectorField::new(gradient(&f)).unwrap();
        let p = leray_project(&grad);
        assert!(p.l2_norm() <= 1e-13 * grad.l2_norm());
    }

    #[test]
    fn leray_fixes_divergence_free_fields_and_is_idempotent() {
        let g = grid();
        let x = random_vector(g, 5);
        let p = leray_project(&x);
        let pp = leray_project(&p);
        assert!((&pp - &p).l2_norm() <= 1e-13 * p.l2_norm());
        assert!(divergence(&p).l2_norm() <= 1e-12 * p.l2_norm());
        // zero mode passes through
        for j in 0..4 {
            let m = (p.component(j).mean() - x.component(j).mean()).norm();
            assert!(m < 1e-15);
        }
    }

    #[test]
    fn riesz_is_an_l2_contraction() {
        let g = grid();
        let f = random_real(g, 6);
        for j in 0..4 {
            assert!(riesz(&f, j).l2_norm() <= f.l2_norm());
        }
    }

    #[test]
    fn null_form_on_orthogonal_modes() {
        let g = grid();
        let u = ScalarField::plane_wave(g, [1, 0, 0, 0], c(1.0, 0.0)).unwrap();
        let v = ScalarField::plane_wave(g, [0, 1, 0, 0], c(1.0, 0.0)).unwrap();
        let q = null_form_q(&u, &v, 0, 1);
        let expect = ScalarField::plane_wave(g, [1, 1, 0, 0], c(-1.0, 0.0)).unwrap();
        assert!(rel(&q, &expect) < 1e-13);
    }

    #[test]
    fn null_form_vanishes_on_parallel_frequencies_and_diagonal() {
        let g = grid();
        let u = ScalarField::plane_wave(g, [1, 2, 0, -1], c(0.7, 0.2)).unwrap();
        let v = ScalarField::plane_wave(g, [-1, -2, 0, 1], c(1.3, -0.4)).unwrap();
        for j in 0..4 {
            for k in 0..4 {
                assert!(null_form_q(&u, &v, j, k).l2_norm() < 1e-13);
            }
        }
    }

    #[test]
    fn null_form_is_antisymmetric() {
        let g = grid();
        let u = random_real(g, 7);
        let v = random_real(g, 8);
        let scale = u.l2_norm() * v.l2_norm();
        for j in 0..4 {
            assert!(null_form_q(&u, &u, j, (j + 1) % 4).l2_norm() <= 1e-13 * scale);
            for k in 0..4 {
                let a = null_form_q(&u, &v, j, k);
                let b = null_form_q(&u, &v, k, j);
                assert!((&a + &b).l2_norm() <= 1e-13 * scale);
            }
        }
    }

    #[test]
    fn batched_null_forms_match_single_ones() {
        let g = grid();
        let u = random_real(g, 9);
        let v = random_real(g, 10).scale(c(0.3, 1.1));
        let all = null_forms(&u, &v);
        for j in 0..4 {
            for k in 0..4 {
                let one = null_form_q(&u, &v, j, k);
                assert!((&all[j][k] - &one).l2_norm() <= 1e-14 * one.l2_norm().max(1.0));
            }
        }
    }

    #[test]
    fn divergence_examples() {
        let g = grid();
        let e = ScalarField::plane_wave(g, [1, 0, 0, 0], c(1.0, 0.0)).unwrap();
        let z = ScalarField::zeros(g, crate::lattice::Domain::Spectral, false);
        let x = VectorField::new([e.clone(), z.clone(), z.clone(), z]).unwrap();
        assert!(rel(&divergence(&x), &e.scale(c(0.0, 1.0))) < 1e-15);
        let k = ScalarField::constant(g, c(2.5, 0.0));
        let x = VectorField::new([k.clone(), k.clone(), k.clone(), k]).unwrap();
        assert!(divergence(&x).is_zero());
    }
}
