//! Picard iteration on the Duhamel form and its agreement with RK4.

use mkg4d::evolution::{evolve, picard_solve, Method};
use mkg4d::runner::{generate_data, RunConfig};

fn main() -> mkg4d::Result<()> {
    let cfg = RunConfig::default();
    let data = generate_data(&cfg)?;
    let p = cfg.phys_params()?;
    let (t_final, dt) = (0.25, 1.0 / 32.0);
    let (picard, report) = picard_solve(&data, &p, t_final, dt, 30, 1e-10)?;
    println!("converged {} after {} iterates", report.converged, report.iterate_count);
    for (m, (w, r)) in report.omega.iter().zip(report.contraction_ratios.iter().chain([f64::NAN].iter())).enumerate() {
        println!("  m = {m:2}  omega {w:.3e}  next/this {r:.3}");
    }
    println!("integral-equation residual {:.3e}", report.residual);
    let rk4 = evolve(&data, &p, t_final, dt, Method::Rk4)?;
    let (a, b) = (picard.last(), rk4.last());
    println!("terminal gap to RK4: phi {:.3e}, A {:.3e}", (&a.phi - &b.phi).l2_norm(), (&a.a - &b.a).l2_norm());
    Ok(())
}
