//! Riesz transforms, the Leray projection and the null forms `Q_jk`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mkg4d::lattice::{GridSpec, ScalarField, VectorField};
use mkg4d::spectral::{self, MultiplierSpec};

fn random_real(grid: GridSpec, rng: &mut ChaCha8Rng) -> ScalarField {
    let v: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    ScalarField::from_real_position(grid, &v).expect("grid length").spectral()
}

fn main() -> mkg4d::Result<()> {
    let grid = GridSpec::periodic(8)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    let f = mkg4d::analysis::band_limited_field(grid, &mut rng, 3, 1.0)?.without_mean();
    let sum_sq = (0..4)
        .map(|j| spectral::riesz(&spectral::riesz(&f, j), j))
        .fold(ScalarField::zeros(grid, mkg4d::lattice::Domain::Spectral, true), |a, b| &a + &b);
    println!("sum_j R_j R_j f + f  = {:.3e}", (&sum_sq + &f).l2_norm() / f.l2_norm());

    let half = spectral::apply_multiplier(&f, MultiplierSpec::FractionalLaplacian(1.0));
    let full = spectral::apply_multiplier(&half, MultiplierSpec::FractionalLaplacian(1.0));
    println!("(-Δ)^½(-Δ)^½ f + Δf  = {:.3e}", (&full + &spectral::laplacian(&f)).l2_norm() / full.l2_norm());

    let x = VectorField::new(std::array::from_fn(|_| random_real(grid, &mut rng)))?;
    let px = spectral::leray_project(&x);
    println!("‖div P x‖            = {:.3e}", spectral::divergence(&px).l2_norm());
    println!("‖P P x − P x‖        = {:.3e}", (&spectral::leray_project(&px) - &px).l2_norm());

    let u = random_real(grid, &mut rng);
    let v = random_real(grid, &mut rng);
    let q = spectral::null_forms(&u, &v);
    println!("‖Q_01 + Q_10‖        = {:.3e}", (&q[0][1] + &q[1][0]).l2_norm());
    let p = ScalarField::plane_wave(grid, [1, 1, 0, 0], Complex64::new(1.0, 0.0))?;
    let w = ScalarField::plane_wave(grid, [2, 2, 0, 0], Complex64::new(0.0, 1.0))?;
    println!("‖Q_01(parallel)‖     = {:.3e}", spectral::null_form_q(&p, &w, 0, 1).l2_norm());
    Ok(())
}
