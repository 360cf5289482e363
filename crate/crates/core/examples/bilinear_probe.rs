//! Ensemble statistics of the bilinear ratio on seeded free waves.

use mkg4d::analysis::{bilinear_ratio_probe, select_parameters};

fn main() -> mkg4d::Result<()> {
    let np = select_parameters(1.1)?;
    let stats = bilinear_ratio_probe(3, 8, &np, 8)?;
    println!("{} ratios ({} skipped)", stats.ratios.len(), stats.skipped);
    println!("max {:.4e}, mean {:.4e}", stats.max, stats.mean);
    println!("histogram {:?}", stats.histogram);
    Ok(())
}
