//! The temporal potential `A₀` from the screened Poisson equation, the
//! factor-two bound and the companion field `B₀`.

use num_complex::Complex64;

use mkg4d::elliptic::{compute_a0, compute_b0, solve_screened_poisson};
use mkg4d::lattice::{GridSpec, ScalarField, VectorField};
use mkg4d::spectral;

fn main() -> mkg4d::Result<()> {
    let grid = GridSpec::periodic(8)?;
    let phi = &ScalarField::plane_wave(grid, [1, 0, 0, 0], Complex64::new(1.0, 0.0))?
        + &ScalarField::plane_wave(grid, [0, 1, -1, 0], Complex64::new(0.3, 0.4))?;
    let phit = &ScalarField::plane_wave(grid, [0, 0, 1, 0], Complex64::new(0.0, 0.5))?
        + &ScalarField::plane_wave(grid, [1, 1, 0, 0], Complex64::new(0.2, 0.0))?;

    let a0 = compute_a0(&phi, &phit, 1e-12)?;
    println!(
        "A0: {} iterations, relative residual {:.3e}, bound ratio {:.4}",
        a0.iterations,
        a0.relative_residual,
        a0.bound_ratio.unwrap_or(f64::NAN)
    );

    let zero = ScalarField::zeros(grid, mkg4d::lattice::Domain::Spectral, false);
    let f = ScalarField::cosine_wave(grid, [0, 2, 0, 0], 1.0, 0.0)?;
    let u = solve_screened_poisson(&zero, &f, 1e-12)?;
    println!("Δu = cos(2y): u + cos(2y)/4 = {:.3e}", (&u.solution + &f.scale(Complex64::new(0.25, 0.0))).l2_norm());

    let a = spectral::leray_project(&VectorField::new([
        ScalarField::cosine_wave(grid, [0, 1, 0, 0], 0.2, 0.0)?,
        ScalarField::cosine_wave(grid, [1, 0, 0, 1], 0.1, 0.3)?,
        ScalarField::zeros(grid, mkg4d::lattice::Domain::Spectral, true),
        ScalarField::cosine_wave(grid, [0, 0, 1, 0], 0.1, 0.0)?,
    ])?);
    let b0 = compute_b0(&a, &phi);
    println!("‖B0‖ = {:.6e}", b0.l2_norm());
    Ok(())
}
