use std::f64::consts::PI;

use nalgebra::DMatrix;
use pap_core::groups::{
    d_a_prime, d_a_sl3, d_a_sp2, d_beta_gamma, d_rst, d_theta, embed_unitary, k_delta, membership_residual,
    operator_norm, symplectic_form, u_circle, u_theta, v_elem, GroupElement, HaarSampler,
};
use proptest::prelude::*;

fn members(g: &GroupElement) -> bool {
    membership_residual(g.tag(), g.matrix()) <= 1e-12
}

proptest! {
    #[test]
    fn constructors_are_members(
        r in -6.0..6.0f64,
        s in -6.0..6.0f64,
        delta in -1.0..=1.0f64,
        theta in -PI..PI,
        beta in 0.0..8.0f64,
        frac in 0.0..=1.0f64,
        a in -5.0..5.0f64,
    ) {
        prop_assert!(members(&d_rst(r, s, -r - s).unwrap()));
        prop_assert!(members(&k_delta(delta).unwrap()));
        prop_assert!(members(&u_circle(theta)));
        prop_assert!(members(&d_theta(theta)));
        prop_assert!(members(&u_theta(theta)));
        prop_assert!(members(&v_elem()));
        prop_assert!(members(&d_beta_gamma(beta, frac * beta)));
        prop_assert!(members(&d_a_sl3(a)));
        prop_assert!(members(&d_a_sp2(a)));
        prop_assert!(members(&d_a_prime(a)));
    }

    #[test]
    fn embedding_is_a_homomorphism(seed in any::<u64>()) {
        let mut h = HaarSampler::new(seed);
        let (u1, u2) = (h.u2_matrix(), h.u2_matrix());
        let lhs = embed_unitary(&(u1 * u2)).unwrap();
        let rhs = embed_unitary(&u1).unwrap().mul(&embed_unitary(&u2).unwrap()).unwrap();
        prop_assert!((lhs.matrix() - rhs.matrix()).amax() <= 1e-12);
    }

    #[test]
    fn operator_norm_is_bi_invariant(seed in any::<u64>(), x in 0.0..6.0f64, y in 0.0..6.0f64, frac in 0.0..=1.0f64) {
        let mut h = HaarSampler::new(seed);
        let g = d_rst(x, y - x, -y).unwrap();
        let moved = h.so3().mul(&g).unwrap().mul(&h.so3()).unwrap();
        let n = operator_norm(&g);
        prop_assert!((operator_norm(&moved) - n).abs() <= 1e-12 * n);

        let g = d_beta_gamma(x, frac * x);
        let moved = h.u2().mul(&g).unwrap().mul(&h.u2()).unwrap();
        let n = operator_norm(&g);
        prop_assert!((operator_norm(&moved) - n).abs() <= 1e-12 * n);
    }

    #[test]
    fn sp2_inverse_is_conjugated_transpose(seed in any::<u64>(), beta in 0.0..3.0f64, frac in 0.0..=1.0f64) {
        let mut h = HaarSampler::new(seed);
        let g = h.u2().mul(&d_beta_gamma(beta, frac * beta)).unwrap().mul(&h.u2()).unwrap();
        let j = symplectic_form();
        let j_inv = -&j;
        let inv = &j_inv * g.matrix().transpose() * &j;
        let err = (g.matrix() * &inv - DMatrix::<f64>::identity(4, 4)).amax();
        prop_assert!(err <= 1e-12, "g * J^-1 g^T J deviates from I by {err:e}");
        prop_assert!((g.inverse().matrix() - &inv).amax() <= 1e-12 * g.matrix().amax().powi(2));
    }
}
