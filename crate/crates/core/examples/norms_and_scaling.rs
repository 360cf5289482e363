//! Exponent selection, Sobolev-type norms and the critical scaling check.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mkg4d::analysis::{band_limited_field, hdot_norm, lp_norm, scaling_check, select_parameters, sobolev_norm};
use mkg4d::lattice::GridSpec;

fn main() -> mkg4d::Result<()> {
    for s in [1.1, 1.4] {
        let np = select_parameters(s)?;
        println!(
            "s = {s}: theta {:.4}, eps {:.6}, gamma {:.6}, 1/p {:.5}, 1/r {:.5}, q {}",
            np.theta, np.eps, np.gamma, 1.0 / np.p, 1.0 / np.r, np.q
        );
    }
    println!("s = 1.0 rejected: {}", select_parameters(1.0).is_err());

    let grid = GridSpec::periodic(4)?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let f = band_limited_field(grid, &mut rng, 1, 1.0)?.without_mean();
    println!(
        "‖f‖_H1.1 {:.6}, ‖f‖_Ḣ1 {:.6}, ‖f‖_L4 {:.6}",
        sobolev_norm(&f, 1.1),
        hdot_norm(&f, 1.0),
        lp_norm(&f, 4.0)?
    );
    for s in [1.0, 1.25, 1.5] {
        let c = scaling_check(&f, s, 2)?;
        println!("s = {s}: lhs/rhs = {:.15} (2^(s-1) = {:.15}), error {:.1e}", c.lhs / c.rhs, 2f64.powf(s - 1.0), c.relative_error);
    }
    Ok(())
}
