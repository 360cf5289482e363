//! Null-form gain against the angle between interacting frequencies.

use mkg4d::diagnostics::nullform_gain;

fn main() -> mkg4d::Result<()> {
    let stats = nullform_gain(1, 8)?;
    for row in &stats.rows {
        println!(
            "angle {:.4} rad: mean gain {:.4e}, gain/angle in [{:.4}, {:.4}]",
            row.angle, row.mean_gain, row.min_gain_over_angle, row.max_gain_over_angle
        );
    }
    println!("halving ratios {:?}, monotone {}", stats.halving_ratios, stats.monotone);
    println!(
        "parallel {:.1e}, orthogonal {:.4} vs generic product {:.4}",
        stats.parallel_gain, stats.orthogonal_gain, stats.orthogonal_baseline
    );
    Ok(())
}
