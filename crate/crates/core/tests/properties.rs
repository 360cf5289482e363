//! Property tests for the lattice transform and the spectral calculus.

use num_complex::Complex64;
use proptest::prelude::*;

use mkg4d::lattice::{dealias, GridSpec, ScalarField, VectorField};
use mkg4d::spectral;

fn grid() -> GridSpec {
    GridSpec::periodic(4).unwrap()
}

fn real_field() -> impl Strategy<Value = ScalarField> {
    prop::collection::vec(-1.0f64..1.0, 256)
        .prop_map(|v| ScalarField::from_real_position(grid(), &v).unwrap().spectral())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn transform_round_trips(f in real_field()) {
        let back = f.position().spectral();
        prop_assert!((&back - &f).max_abs() <= 1e-13 * (1.0 + f.max_abs()));
    }

    #[test]
    fn leray_projection_is_idempotent_and_divergence_free(
        c in prop::array::uniform4(real_field())
    ) {
        let x = VectorField::new(c).unwrap();
        let px = spectral::leray_project(&x);
        let scale = 1.0 + x.l2_norm();
        prop_assert!(spectral::divergence(&px).l2_norm() <= 1e-12 * scale);
        prop_assert!((&spectral::leray_project(&px) - &px).l2_norm() <= 1e-12 * scale);
    }

    #[test]
    fn null_forms_are_antisymmetric(u in real_field(), v in real_field(), j in 0usize..4, k in 0usize..4) {
        let q = spectral::null_form_q(&u, &v, j, k);
        let r = spectral::null_form_q(&u, &v, k, j);
        prop_assert!((&q + &r).l2_norm() <= 1e-12 * (1.0 + q.l2_norm()));
    }

    #[test]
    fn dealiased_product_is_symmetric(u in real_field(), v in real_field()) {
        let uv = dealias::product(&u, &v);
        let vu = dealias::product(&v, &u);
        prop_assert!((&uv - &vu).max_abs() <= 1e-13);
    }

    #[test]
    fn plane_waves_have_unit_mean_square(k in prop::array::uniform4(-1i64..=1), re in -2.0f64..2.0, im in -2.0f64..2.0) {
        let amp = Complex64::new(re, im);
        let w = ScalarField::plane_wave(grid(), k, amp).unwrap();
        let volume = grid().box_length().powi(4);
        prop_assert!((w.l2_norm() - amp.norm() * volume.sqrt()).abs() <= 1e-12 * (1.0 + amp.norm() * volume.sqrt()));
    }
}
