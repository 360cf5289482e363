//! Seeded initial data honoring the Coulomb condition.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analysis::band_modes;
use crate::error::{Error, Result};
use crate::evolution::InitialData;
use crate::lattice::{GridSpec, ScalarField, VectorField};
use crate::spectral;

use super::config::RunConfig;

/// Field order of the random streams: `a₁…a₄, b₁…b₄, φ₀, φ₁`.
pub const FIELD_STREAMS: [&str; 10] = ["a1", "a2", "a3", "a4", "b1", "b2", "b3", "b4", "phi0", "phi1"];

#[derive(Clone, Debug, Serialize)]
pub struct SeedRecord {
    pub seed: u64,
    pub generator: &'static str,
    /// ChaCha stream index per field.
    pub streams: Vec<(&'static str, u64)>,
}

pub fn seed_record(cfg: &RunConfig) -> SeedRecord {
    SeedRecord {
        seed: cfg.data.seed,
        generator: "ChaCha8",
        streams: FIELD_STREAMS.iter().enumerate().map(|(i, &f)| (f, i as u64)).collect(),
    }
}

fn is_positive(k: &[i64; 4]) -> bool {
    k.iter().find(|&&c| c != 0).is_some_and(|&c| c > 0)
}

/// Coefficients `amplitude · (1 + |ξ|²)^{−(s+σ)/2} e^{iθ}` on the band cube
/// without the zero mode, `θ` uniform. Real fields draw one phase per pair
/// `±k`.
fn random_field(cfg: &RunConfig, grid: GridSpec, stream: u64, real: bool) -> Result<ScalarField> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.data.seed);
    rng.set_stream(stream);
    let decay = 0.5 * (cfg.analysis.s + cfg.data.spectral_slope);
    let mut vals = vec![Complex64::new(0.0, 0.0); grid.len()];
    for k in band_modes(cfg.data.band_limit as i64) {
        if k == [0; 4] || (real && !is_positive(&k)) {
            continue;
        }
        let xi = grid.wavevector(k)?;
        let xi_sq: f64 = xi.iter().map(|x| x * x).sum();
        let magnitude = cfg.data.amplitude * (1.0 + xi_sq).powf(-decay);
        let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let c = Complex64::from_polar(magnitude, theta);
        vals[grid.mode_index(k)?] = c;
        if real {
            vals[grid.mode_index(k.map(|m| -m))?] = c.conj();
        }
    }
    ScalarField::from_spectral(grid, vals, real)
}

/// Mean-zero random data; `a` and `b` are Leray-projected.
pub fn generate_data(cfg: &RunConfig) -> Result<InitialData> {
    cfg.validate()?;
    let grid = cfg.grid_spec()?;
    if 2 * cfg.data.band_limit >= grid.n() {
        return Err(Error::InvalidParameter(format!(
            "band_limit {} beyond the Nyquist-free band of n = {}",
            cfg.data.band_limit,
            grid.n()
        )));
    }
    let vector = |offset: u64| -> Result<VectorField> {
        let comps: Vec<ScalarField> = (0..4)
            .map(|j| random_field(cfg, grid, offset + j, true))
            .collect::<Result<_>>()?;
        let comps: [ScalarField; 4] = comps.try_into().expect("four components");
        Ok(spectral::leray_project(&VectorField::new(comps)?))
    };
    let a = vector(0)?;
    let b = vector(4)?;
    let phi0 = random_field(cfg, grid, 8, false)?;
    let phi1 = random_field(cfg, grid, 9, false)?;
    InitialData::new(a, b, phi0, phi1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::vector_sobolev_norm;

    fn cfg_with(pairs: &[(&str, &str)]) -> RunConfig {
        let o: Vec<(String, String)> =
            pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        RunConfig::default().with_overrides(&o).unwrap()
    }

    #[test]
    fn zero_amplitude_gives_zero_data() {
        let d = generate_data(&cfg_with(&[("data.amplitude", "0")])).unwrap();
        assert!(d.a.is_zero() && d.b.is_zero() && d.phi0.is_zero() && d.phi1.is_zero());
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let cfg = RunConfig::default();
        let (x, y) = (generate_data(&cfg).unwrap(), generate_data(&cfg).unwrap());
        assert_eq!(x.phi1.values(), y.phi1.values());
        assert_eq!(x.b.component(3).values(), y.b.component(3).values());
        let other = generate_data(&cfg_with(&[("data.seed", "8")])).unwrap();
        assert_ne!(x.phi0.values(), other.phi0.values());
    }

    #[test]
    fn data_is_divergence_free_real_and_mean_zero() {
        let d = generate_data(&cfg_with(&[("data.band_limit", "2"), ("data.amplitude", "1")])).unwrap();
        assert!(spectral::divergence(&d.a).l2_norm() <= 1e-12);
        assert!(spectral::divergence(&d.b).l2_norm() <= 1e-12);
        for f in d.a.components().iter().chain(d.b.components()) {
            assert!(f.is_real());
            assert!(f.position().max_abs_imag() < 1e-15);
            assert_eq!(f.mean().norm(), 0.0);
        }
        assert_eq!(d.phi0.mean().norm(), 0.0);
        assert!(d.phi0.l2_norm() > 0.0);
    }

    #[test]
    fn norm_is_stable_under_refinement() {
        let base = [("data.spectral_slope", "2.5"), ("analysis.s", "1.1"), ("data.band_limit", "2")];
        let coarse = generate_data(&cfg_with(&base)).unwrap();
        let mut fine_pairs = base.to_vec();
        fine_pairs.push(("grid.n", "16"));
        let fine = generate_data(&cfg_with(&fine_pairs)).unwrap();
        let (nc, nf) = (vector_sobolev_norm(&coarse.a, 1.1), vector_sobolev_norm(&fine.a, 1.1));
        assert!(nc > 0.0 && (nc - nf).abs() <= 0.1 * nc, "{nc} {nf}");
    }

    #[test]
    fn coefficients_follow_the_power_law() {
        let cfg = cfg_with(&[("data.amplitude", "0.3")]);
        let d = generate_data(&cfg).unwrap();
        let c = d.phi0.coefficient([1, 0, 0, 0]).unwrap();
        let expect = 0.3 * 2f64.powf(-0.5 * (1.1 + 2.5));
        assert!((c.norm() - expect).abs() < 1e-15);
    }
}
