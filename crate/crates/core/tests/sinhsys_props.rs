use pap_core::sinhsys::{lhs_s, lhs_t, solve_beta_gamma, solve_s, solve_t, SinhSolution};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn chamber_solutions_are_accurate(beta in 0.0..30.0f64, frac in 0.0..=1.0f64) {
        let gamma = frac * beta;
        let sol = SinhSolution::from_chamber(beta, gamma).unwrap();
        prop_assert!(sol.residual_s <= 1e-12 && sol.residual_t <= 1e-12);
        prop_assert!(sol.s >= beta / 4.0 && sol.t >= gamma / 2.0);
    }

    #[test]
    fn left_sides_are_increasing(x in 0.0..20.0f64, dx in 1e-6..1.0f64) {
        prop_assert!(lhs_s(x) < lhs_s(x + dx));
        prop_assert!(lhs_t(x) < lhs_t(x + dx));
    }

    #[test]
    fn ray_and_chamber_solves_invert_each_other(beta in 0.5..25.0f64, frac in 0.05..0.95f64) {
        let gamma = frac * beta;
        let (s, t) = (solve_s(beta, gamma).unwrap(), solve_t(beta, gamma).unwrap());
        if let Ok((b, g)) = solve_beta_gamma(s, t) {
            prop_assert!((b - beta).abs() <= 1e-10 * beta.max(1.0), "beta {beta} -> {b}");
            prop_assert!((g - gamma).abs() <= 1e-10 * beta.max(1.0), "gamma {gamma} -> {g}");
        }
    }

    #[test]
    fn ray_solutions_stay_near_the_ray(t in 1.0..30.0f64, frac in 0.0..=0.5f64) {
        let s = t * (1.0 + frac);
        let sol = SinhSolution::from_ray(s, t).unwrap();
        prop_assert!(sol.residual_s <= 1e-12 && sol.residual_t <= 1e-12);
        prop_assert!((sol.beta - 2.0 * s).abs() <= 1.0);
        prop_assert!((sol.gamma + 2.0 * s - 3.0 * t).abs() <= 1.0);
    }

    #[test]
    fn ray_solutions_keep_both_gaps_large(t in 2.0..30.0f64, frac in 0.0..=0.2f64) {
        let s = t * (1.0 + frac);
        let sol = SinhSolution::from_ray(s, t).unwrap();
        prop_assert!(sol.gamma.min(sol.beta - sol.gamma) >= s / 2.0 - 1.0);
    }
}
