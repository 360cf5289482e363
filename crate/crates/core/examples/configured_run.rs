//! A configured run with overrides: snapshots, diagnostics CSV and manifest.

use mkg4d::runner::{run, RunConfig};

fn main() -> mkg4d::Result<()> {
    let dir = std::env::temp_dir().join("mkg4d-example-run");
    let overrides = vec![
        ("solver.T".to_string(), "0.008".to_string()),
        ("output.snapshot_every".to_string(), "4".to_string()),
        ("output.directory".to_string(), dir.display().to_string()),
    ];
    let outcome = run(&RunConfig::default(), &overrides)?;
    for check in &outcome.manifest.checks {
        println!("{}", check.line());
    }
    println!("status {:?}, snapshots {:?}", outcome.manifest.status, outcome.manifest.snapshots);
    println!("artifacts in {}", outcome.directory.display());
    Ok(())
}
