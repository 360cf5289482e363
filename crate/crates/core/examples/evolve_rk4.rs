//! Small-data coupled evolution with the RK4 stepper and its conserved
//! quantities.

use mkg4d::diagnostics::{charge, constraint_residual, energy_drift};
use mkg4d::evolution::{evolve, Method};
use mkg4d::runner::{generate_data, RunConfig};

fn main() -> mkg4d::Result<()> {
    let cfg = RunConfig::default();
    let data = generate_data(&cfg)?;
    let p = cfg.phys_params()?;
    let traj = evolve(&data, &p, 0.05, 5e-3, Method::Rk4)?;
    println!("{} states, {} right-hand-side evaluations", traj.len(), traj.monitor.evaluations);
    println!("max ‖div A‖          {:.3e}", constraint_residual(&traj).summary.max);
    println!("max ‖div M‖          {:.3e}", traj.monitor.max_m_divergence);
    println!("charge drift         {:.3e}", charge(&traj)?.relative_drift.unwrap_or(0.0));
    let e = energy_drift(&traj)?;
    println!("energy {:.10e}, drift {:.3e}", e.values[0], e.relative_drift.unwrap_or(0.0));
    Ok(())
}
