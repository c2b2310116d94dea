use std::sync::OnceLock;

use pap_core::certify::{
    check_certificate, constants_sl3, constants_sp2, constants_sp2_default, plan_path_sl3, plan_path_sp2, Certificate,
    ConstantsTable,
};
use pap_core::kak::{ChamberPointSL3, ChamberPointSp2};
use proptest::prelude::*;

const PS: [f64; 4] = [2.0, 3.0, 4.0, 7.0];

fn sp2_table(i: usize) -> &'static ConstantsTable {
    static TABLES: OnceLock<Vec<ConstantsTable>> = OnceLock::new();
    &TABLES.get_or_init(|| PS.iter().map(|&p| constants_sp2_default(p).unwrap()).collect())[i]
}

fn sl3_point(x: f64, y: f64) -> ChamberPointSL3 {
    ChamberPointSL3::from_unsorted([(2.0 * x + y) / 3.0, (y - x) / 3.0, -(x + 2.0 * y) / 3.0])
}

fn sl3_sorted(a: ChamberPointSL3, b: ChamberPointSL3) -> (ChamberPointSL3, ChamberPointSL3) {
    if b.t <= a.t {
        (a, b)
    } else {
        (b, a)
    }
}

fn sp2_sorted(a: ChamberPointSp2, b: ChamberPointSp2) -> (ChamberPointSp2, ChamberPointSp2) {
    if a.beta <= b.beta {
        (a, b)
    } else {
        (b, a)
    }
}

fn sp2_point(beta: f64, frac: f64) -> ChamberPointSp2 {
    ChamberPointSp2 { beta, gamma: frac * beta }
}

fn sound(c: &Certificate) -> Result<(), TestCaseError> {
    let report = check_certificate(c);
    prop_assert!(report.valid, "{:?}", report.first_violation());
    prop_assert!(c.total <= c.envelope.value());
    Ok(())
}

/// Only the envelope may be violated by a concatenation; steps, chaining
/// and the total must all still check.
fn concat_consistent(a: &Certificate, b: &Certificate) -> Result<(), TestCaseError> {
    let c = a.concat(b).unwrap();
    prop_assert_eq!(c.steps.len(), a.steps.len() + b.steps.len());
    prop_assert!((c.total - (a.total + b.total)).abs() <= 1e-12 * c.total.max(1.0));
    let report = check_certificate(&c);
    for v in &report.violations {
        prop_assert!(v.message.contains("exceeds envelope"), "{v:?}");
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn sl3_planner_output_checks(i in 0usize..4, x1 in 0.0..20.0f64, y1 in 0.0..20.0f64, x2 in 0.0..20.0f64, y2 in 0.0..20.0f64) {
        let (a, b) = sl3_sorted(sl3_point(x1, y1), sl3_point(x2, y2));
        sound(&plan_path_sl3(a, b, PS[i]).unwrap())?;
    }

    #[test]
    fn sp2_planner_output_checks(i in 0usize..4, b1 in 0.0..60.0f64, f1 in 0.0..=1.0f64, b2 in 0.0..60.0f64, f2 in 0.0..=1.0f64) {
        let (a, b) = sp2_sorted(sp2_point(b1, f1), sp2_point(b2, f2));
        sound(&plan_path_sp2(a, b, sp2_table(i)).unwrap())?;
    }

    #[test]
    fn sl3_concatenation_adds_totals(
        i in 0usize..4,
        pts in proptest::array::uniform3((0.0..15.0f64, 0.0..15.0f64)),
    ) {
        let mut v: Vec<ChamberPointSL3> = pts.iter().map(|&(x, y)| sl3_point(x, y)).collect();
        v.sort_by(|a, b| b.t.partial_cmp(&a.t).unwrap());
        let p = PS[i];
        concat_consistent(&plan_path_sl3(v[0], v[1], p).unwrap(), &plan_path_sl3(v[1], v[2], p).unwrap())?;
    }

    #[test]
    fn sp2_concatenation_adds_totals(
        i in 0usize..4,
        pts in proptest::array::uniform3((0.0..40.0f64, 0.0..=1.0f64)),
    ) {
        let mut v: Vec<ChamberPointSp2> = pts.iter().map(|&(b, f)| sp2_point(b, f)).collect();
        v.sort_by(|a, b| a.beta.partial_cmp(&b.beta).unwrap());
        let t = sp2_table(i);
        concat_consistent(&plan_path_sp2(v[0], v[1], t).unwrap(), &plan_path_sp2(v[1], v[2], t).unwrap())?;
    }

    #[test]
    fn constant_tables_satisfy_identities(p in 1.01..50.0f64, c1 in 0.01..100.0f64, c2 in 0.01..100.0f64) {
        let t = constants_sl3(p).unwrap();
        prop_assert!(t.verify().is_ok());
        let s = t.sl3.unwrap();
        prop_assert_eq!(t.c_tilde, 2f64.powf(1.0 + 2.0 / p));
        prop_assert_eq!(s.c_sl3, s.c3.max(s.c4));
        prop_assert_eq!(s.c3, s.c1 + 2.0 * s.c2);
        let t = constants_sp2(p, c1, c2).unwrap();
        prop_assert!(t.verify().is_ok());
        let s = t.sp2.unwrap();
        let c5 = (1.0 / (4.0 * p)).exp() * (s.c3_sp2 + s.c4_sp2);
        prop_assert!((s.c5 - c5).abs() <= 1e-15 * c5);
        prop_assert!((s.c7 - (2.0 * s.c_ray + s.c6)).abs() <= 1e-15 * s.c7);
        prop_assert!(s.c6 >= s.c_geom && s.c_geom > s.c5);
    }

    #[test]
    fn sl3_bounds_decay_along_rays(i in 0usize..4, x in 0.2..3.0f64, y in 0.2..3.0f64) {
        let dir = sl3_point(x, y);
        let at = |n: f64| ChamberPointSL3 { r: n * dir.r, s: n * dir.s, t: n * dir.t };
        let start = (1.0 / -dir.t).ceil() + 1.0;
        // Crossing the s = -1 wall switches the normalization step and the
        // staircase length, so totals are compared within one branch only.
        let branch = |n: f64| (at(n).s < -1.0, at(n + 1.0).s < -1.0);
        let mut prev = (branch(start), f64::INFINITY);
        for k in 0..12 {
            let n = start + k as f64;
            let total = plan_path_sl3(at(n), at(n + 1.0), PS[i]).unwrap().total;
            if prev.0 == branch(n) {
                prop_assert!(total <= prev.1 * (1.0 + 1e-12), "n = {n}: {total} > {}", prev.1);
            }
            prev = (branch(n), total);
        }
    }

    #[test]
    fn sp2_bounds_decay_along_rays(i in 0usize..4, beta in 0.5..3.0f64, frac in 0.0..=1.0f64) {
        let at = |n: f64| sp2_point(n * beta, frac);
        let start = (12.0 / beta).ceil();
        let mut prev = f64::INFINITY;
        for k in 0..12 {
            let n = start + k as f64;
            let total = plan_path_sp2(at(n), at(n + 1.0), sp2_table(i)).unwrap().total;
            prop_assert!(total <= prev * (1.0 + 1e-12), "n = {n}: {total} > {prev}");
            prev = total;
        }
    }
}
