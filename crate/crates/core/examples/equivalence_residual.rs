//! `∂_tA₀ = B₀` and current conservation measured on trajectories with
//! halved steps.

use mkg4d::diagnostics::{continuity_refinement, equivalence_refinement, equivalence_residual};
use mkg4d::evolution::{evolve, Method, Trajectory};
use mkg4d::runner::{generate_data, RunConfig};

fn main() -> mkg4d::Result<()> {
    let cfg = RunConfig::default();
    let data = generate_data(&cfg)?;
    let p = cfg.phys_params()?;
    let trajs: Vec<Trajectory> = [4e-3, 2e-3, 1e-3]
        .iter()
        .map(|&dt| evolve(&data, &p, 0.016, dt, Method::Rk4))
        .collect::<mkg4d::Result<_>>()?;
    for study in [equivalence_refinement(&trajs)?, continuity_refinement(&trajs)?] {
        println!(
            "{}: max residual {:?}, norm orders {:?}, three-level order {:.6}",
            study.name,
            study.residual_max,
            study.norm_orders,
            study.observed_order().unwrap_or(f64::NAN)
        );
    }
    let eq = equivalence_residual(trajs.last().expect("three levels"))?;
    println!("terminal ‖∂tA0 − B0‖ / ‖B0‖ = {:.3e}", eq.terminal_relative());
    Ok(())
}
