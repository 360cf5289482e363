//! Writing, reading and summarizing binary snapshots.

use mkg4d::evolution::State;
use mkg4d::runner::snapshot::{self, Snapshot};
use mkg4d::runner::{generate_data, RunConfig};

fn main() -> mkg4d::Result<()> {
    let cfg = RunConfig::default();
    let state = State::from_data(&generate_data(&cfg)?, 0.0);
    let path = std::env::temp_dir().join("mkg4d-example.mkg4");
    snapshot::persist_state(&state, cfg.phys.mass, &path)?;

    let loaded = snapshot::load(&path)?;
    println!("bit-identical: {}", loaded == Snapshot::from_state(&state, cfg.phys.mass));
    println!("{}", serde_json::to_string_pretty(&loaded.summary())?);
    let back = loaded.to_state()?;
    println!("state round trip: ‖Δphi‖ = {:.3e}", (&back.phi - &state.phi).l2_norm());
    Ok(())
}
