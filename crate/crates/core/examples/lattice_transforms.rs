//! Grids, spectral/position round trips and dealiased products.

use num_complex::Complex64;

use mkg4d::lattice::{dealias, GridSpec, ScalarField};

fn main() -> mkg4d::Result<()> {
    let grid = GridSpec::periodic(8)?;
    println!("n = {}, L = {:.6}, h = {:.6}, {} points", grid.n(), grid.box_length(), grid.spacing(), grid.len());

    let f = ScalarField::from_fn(grid, true, |x| {
        Complex64::new((x[0] + 2.0 * x[2]).sin() + 0.5 * x[1].cos(), 0.0)
    });
    let back = f.spectral().position();
    println!("round-trip error     {:.3e}", (&back - &f).max_abs());
    println!("coefficient at (1,0,2,0) = {:.6}", f.coefficient([1, 0, 2, 0])?);

    let u = ScalarField::cosine_wave(grid, [3, 0, 0, 0], 1.0, 0.0)?;
    let v = ScalarField::cosine_wave(grid, [2, 0, 0, 0], 1.0, 0.0)?;
    let uv = dealias::product(&u, &v);
    println!(
        "cos(3x)cos(2x): modes ±1 = {:.6}, {:.6} (mode 5 is beyond the band), nyquist content {:.1e}",
        uv.coefficient([1, 0, 0, 0])?.re,
        uv.coefficient([-1, 0, 0, 0])?.re,
        uv.nyquist_content()
    );
    Ok(())
}
