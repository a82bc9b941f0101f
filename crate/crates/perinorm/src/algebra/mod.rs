//! Exact symbolic layer: multi-indices, trigonometric polynomials with
//! finite mode support, homogeneous polynomial parts with trig coefficients,
//! and graded polynomial maps with composition and directional derivatives.
//!
//! Everything here is closed-form f64 arithmetic on finitely many
//! coefficients. There is no floating truncation of series: polynomial
//! compositions of polynomials terminate, products of trigonometric
//! polynomials have finite mode support, so the only error source anywhere
//! downstream is rounding.

mod multi_index;
mod poly;
mod system;
mod trig;

pub use multi_index::{enumerate_indices, MultiIndex};
pub use poly::{
    compose, dense_indices, directional_derivative, directional_derivative_map, Codomain,
    HomoPoly, PolyMap, DEG_INF,
};
pub use system::{EigenBasis, SystemSpec};
pub use trig::TrigPoly;

#[cfg(test)]
mod proptests {
    use super::*;
    use nalgebra::DVector;
    use num_complex::Complex64;
    use proptest::prelude::*;

    const TAU: f64 = std::f64::consts::TAU;

    fn arb_scalar_trig(max_mode: i64) -> impl Strategy<Value = TrigPoly> {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), (2 * max_mode + 1) as usize).prop_map(
            move |coeffs| {
                let modes: Vec<(i64, DVector<Complex64>)> = coeffs
                    .iter()
                    .enumerate()
                    .map(|(i, (re, im))| {
                        (
                            i as i64 - max_mode,
                            DVector::from_element(1, Complex64::new(*re, *im)),
                        )
                    })
                    .collect();
                TrigPoly::from_modes(TAU, 1, modes, false).unwrap()
            },
        )
    }

    proptest! {
        #[test]
        fn trig_mul_commutes(a in arb_scalar_trig(3), b in arb_scalar_trig(3)) {
            let ab = a.mul(&b).unwrap();
            let ba = b.mul(&a).unwrap();
            prop_assert!(ab.sub(&ba).unwrap().max_coeff() < 1e-13);
        }

        #[test]
        fn trig_mul_associates(
            a in arb_scalar_trig(2),
            b in arb_scalar_trig(2),
            c in arb_scalar_trig(2),
        ) {
            let left = a.mul(&b).unwrap().mul(&c).unwrap();
            let right = a.mul(&b.mul(&c).unwrap()).unwrap();
            prop_assert!(left.sub(&right).unwrap().max_coeff() < 1e-13);
        }

        #[test]
        fn trig_mul_distributes(
            a in arb_scalar_trig(2),
            b in arb_scalar_trig(2),
            c in arb_scalar_trig(2),
        ) {
            let left = a.mul(&b.add(&c).unwrap()).unwrap();
            let right = a.mul(&b).unwrap().add(&a.mul(&c).unwrap()).unwrap();
            prop_assert!(left.sub(&right).unwrap().max_coeff() < 1e-13);
        }

        #[test]
        fn product_support_in_minkowski_sum(a in arb_scalar_trig(3), b in arb_scalar_trig(3)) {
            let p = a.mul(&b).unwrap();
            let sa = a.support();
            let sb = b.support();
            for k in p.support() {
                let hit = sa.iter().any(|ka| sb.iter().any(|kb| ka + kb == k));
                prop_assert!(hit, "mode {k} outside the Minkowski sum");
            }
        }

        #[test]
        fn realness_survives_products(coeffs in prop::collection::vec(-1.0f64..1.0, 4)) {
            let a = TrigPoly::cosine(TAU, 1, coeffs[0])
                .add(&TrigPoly::sine(TAU, 2, coeffs[1])).unwrap();
            let b = TrigPoly::cosine(TAU, 3, coeffs[2])
                .add(&TrigPoly::constant_scalar(TAU, coeffs[3])).unwrap();
            let p = a.mul(&b).unwrap();
            prop_assert!(p.is_real());
            prop_assert_eq!(p.symmetry_defect(), 0.0);
        }
    }
}
