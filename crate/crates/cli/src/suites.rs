//! `verify-all`: every numerical suite at a configurable batch size.
//!
//! Output carries no timings so that identical flags give identical bytes.

use pap_core::certify::{
    check_certificate, plan_path_sl3, plan_path_sp2, Certificate, ConstantsTable, StepTag,
};
use pap_core::groups::{d_a_sl3, k_delta, GroupElement, HaarSampler};
use pap_core::kak::{chamber, gamma_sl3, solve_delta_sl3, wall_gamma1, ChamberPoint, ChamberPointSL3, ChamberPointSp2};
use pap_core::sinhsys::{solve_wall_s_pair, solve_wall_t, SinhSolution};
use pap_core::spectra::legendre::legendre_all;
use pap_core::spectra::{family_points, fit_exponent, log_grid, quad_theta_matrix, theta_gap_norm, Family};
use pap_core::witness::{check_lemma_drst, gaussian_phi, obstruction_demo, EscapeSequence};
use rand::Rng;
use serde_json::json;

use crate::commands::{demo_checks, par_map, random_element, sl3_point, sp2_point, sp2_table, SL3_SPREAD, SP2_MAX_BETA};
use crate::report::{pass_word, Check, Report, Table};
use crate::{CliResult, Opts};

struct Ctx {
    p: f64,
    n: usize,
    seed: u64,
    sp2: ConstantsTable,
}

impl Ctx {
    fn sampler(&self, suite: u64) -> HaarSampler {
        HaarSampler::new(self.seed.wrapping_add(suite))
    }
}

pub fn verify_all(opts: &Opts) -> CliResult<Report> {
    let ctx = Ctx {
        p: opts.p,
        n: opts.samples.unwrap_or(1000),
        seed: opts.seed,
        sp2: sp2_table(opts)?,
    };
    let mut config = serde_json::Map::new();
    config.insert("p".into(), json!(ctx.p));
    config.insert("samples".into(), json!(ctx.n));
    config.insert("seed".into(), json!(ctx.seed));
    config.insert(
        "sp2_constants".into(),
        match (opts.c1_sp2, opts.c2_sp2) {
            (Some(a), Some(b)) => json!({ "c1Sp2": a, "c2Sp2": b }),
            _ => json!("fitted"),
        },
    );
    let mut report = Report::new("verify-all", config);
    let suites: [(&str, fn(&Ctx) -> CliResult<(bool, String)>); 9] = [
        ("legendre bound", legendre_bound),
        ("quadrature agreement", quadrature_agreement),
        ("kak round trips", kak_round_trips),
        ("wall identities", wall_identities),
        ("sinh systems", sinh_systems),
        ("gaussian witness", gaussian_witness),
        ("certificates", certificates),
        ("spectral fits", spectral_fits),
        ("obstruction demo", demo),
    ];
    report.table = Table::new(&["suite", "result", "detail"]);
    for (name, suite) in suites {
        let (passed, detail) = match suite(&ctx) {
            Ok(r) => r,
            Err(crate::CliError::Runtime(m)) => (false, format!("error: {m}")),
            Err(e) => return Err(e),
        };
        report.table.push(vec![name.into(), pass_word(passed).into(), format!("\"{}\"", detail.replace('"', "'"))]);
        report.checks.push(Check::new(name, passed, detail));
    }
    let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    report.data = json!({ "suites": report.checks.len(), "failed": failed });
    Ok(report)
}

fn legendre_bound(_: &Ctx) -> CliResult<(bool, String)> {
    let deltas = log_grid(1e-3, 1.0, 64);
    let gaps = par_map(&deltas, |&d| theta_gap_norm(d, 256).map(|g| (g, 4.0 * d.sqrt())));
    let (mut bad, mut worst) = (0, 0.0f64);
    for r in gaps {
        let (gap, bound) = r?;
        worst = worst.max(gap / bound);
        bad += usize::from(gap > bound);
    }
    Ok((bad == 0, format!("64 deltas at cutoff 256, violations {bad}, max gap/bound {worst:.4}")))
}

fn quadrature_agreement(_: &Ctx) -> CliResult<(bool, String)> {
    let band = 8;
    let mut worst = 0.0f64;
    for i in 0..16 {
        let delta = -1.0 + 2.0 * i as f64 / 15.0;
        let q = quad_theta_matrix(band, delta, 64)?;
        let eig = legendre_all(band, delta);
        for l in 0..=band {
            for row in 0..q.matrix.nrows() {
                for col in l * l..(l + 1) * (l + 1) {
                    let want = if row == col { eig[l] } else { 0.0 };
                    worst = worst.max((q.matrix[(row, col)] - want).abs());
                }
            }
        }
    }
    Ok((worst < 1e-8, format!("harmonics up to degree 8 at 16 deltas, max error {worst:.2e}")))
}

fn kak_round_trips(ctx: &Ctx) -> CliResult<(bool, String)> {
    let mut h = ctx.sampler(3);
    let mut worst = [0.0f64; 4];
    for _ in 0..ctx.n {
        for point in [
            ChamberPoint::Sl3(sl3_point(h.rng(), SL3_SPREAD)),
            ChamberPoint::Sp2(sp2_point(h.rng(), SP2_MAX_BETA)),
        ] {
            let g = random_element(&mut h, &point)?;
            let f = pap_core::kak::kak(&g)?;
            let got = f.chamber;
            let g2 = match point {
                ChamberPoint::Sl3(_) => h.so3().mul(&g)?.mul(&h.so3())?,
                ChamberPoint::Sp2(_) => h.u2().mul(&g)?.mul(&h.u2())?,
            };
            let cols = [
                got.max_abs_diff(&point).unwrap_or(f64::INFINITY),
                chamber(&g2)?.max_abs_diff(&got).unwrap_or(f64::INFINITY),
                f.residual(&g) / g.matrix().amax(),
                [&f.k, &f.k2]
                    .iter()
                    .map(|k| pap_core::groups::membership_residual(k.tag(), k.matrix()))
                    .fold(0.0, f64::max),
            ];
            for (w, c) in worst.iter_mut().zip(cols) {
                *w = w.max(c);
            }
        }
    }
    let max = worst.iter().copied().fold(0.0, f64::max);
    Ok((
        max <= 1e-9,
        format!(
            "{} per group; chamber {:.1e}, bi-invariance {:.1e}, relative reconstruction {:.1e}, compact {:.1e}",
            ctx.n, worst[0], worst[1], worst[2], worst[3]
        ),
    ))
}

fn wall_identities(ctx: &Ctx) -> CliResult<(bool, String)> {
    let mut worst_id = 0.0f64;
    for i in 0..50 {
        let a = 0.1 + 4.9 * i as f64 / 49.0;
        let d = d_a_sl3(a);
        for j in 0..=10 {
            let g = d.mul(&k_delta(j as f64 / 10.0)?)?.mul(&d)?;
            worst_id = worst_id.max((gamma_sl3(&g)?.t + a).abs());
        }
        let t = -a;
        worst_id = worst_id.max((wall_gamma1(t, 1.0)? + 2.0 * t).abs());
        worst_id = worst_id.max((wall_gamma1(t, 0.0)? + t / 2.0).abs());
    }
    let mut h = ctx.sampler(4);
    let r = h.rng();
    let (mut worst_res, mut bad) = (0.0f64, 0);
    for _ in 0..ctx.n {
        let t = -(0.1 + 7.9 * r.random::<f64>());
        let rr = -t / 2.0 + r.random::<f64>() * (-1.5 * t);
        let delta = solve_delta_sl3(rr, t)?;
        let res = (wall_gamma1(t, delta)? - rr).abs();
        worst_res = worst_res.max(res);
        if res > 1e-10 || delta > (rr + 2.0 * t).exp() * (1.0 + 1e-9) {
            bad += 1;
        }
    }
    Ok((
        worst_id <= 1e-9 && bad == 0,
        format!("identities {worst_id:.1e}; {} roots, residual {worst_res:.1e}, violations {bad}", ctx.n),
    ))
}

fn sinh_systems(ctx: &Ctx) -> CliResult<(bool, String)> {
    let mut h = ctx.sampler(5);
    let r = h.rng();
    let (mut res, mut bad) = (0.0f64, 0);
    for _ in 0..ctx.n {
        let q = sp2_point(r, 30.0);
        let sol = SinhSolution::from_chamber(q.beta, q.gamma)?;
        res = res.max(sol.residual_s).max(sol.residual_t);
        bad += usize::from(sol.s < q.beta / 4.0 || sol.t < q.gamma / 2.0);
        let t = 1.0 + 29.0 * r.random::<f64>();
        let s = t + r.random::<f64>() * 0.5 * t;
        let sol = SinhSolution::from_ray(s, t)?;
        res = res.max(sol.residual_s).max(sol.residual_t);
        bad += usize::from((sol.beta - 2.0 * s).abs() > 1.0 || (sol.gamma + 2.0 * s - 3.0 * t).abs() > 1.0);
    }
    let slack = 1.0 + 1e-6;
    let mut bad_walls = 0;
    for _ in 0..ctx.n.min(100) {
        let gamma = 6.0 * r.random::<f64>();
        let beta = gamma + 8.0 + 8.0 * r.random::<f64>();
        let w = solve_wall_t(beta, gamma)?;
        bad_walls += usize::from(w.param > slack * 2.0 * ((gamma - beta) / 4.0).exp());
        let gamma = 2.0 + 10.0 * r.random::<f64>();
        let beta = gamma + 10.0 * r.random::<f64>();
        let pair = solve_wall_s_pair(beta, gamma)?;
        bad_walls += usize::from(pair.param_gap > slack * (-gamma / 2.0).exp());
    }
    Ok((
        res <= 1e-12 && bad == 0 && bad_walls == 0,
        format!("residual {res:.1e}; inequality violations {bad}; wall bound violations {bad_walls}"),
    ))
}

fn sp2_pair_bound(ga: &GroupElement, gb: &GroupElement, table: &ConstantsTable) -> CliResult<f64> {
    let (ChamberPoint::Sp2(a), ChamberPoint::Sp2(b)) = (chamber(ga)?, chamber(gb)?) else {
        unreachable!("Sp(2) elements")
    };
    let (a, b) = if a.beta <= b.beta { (a, b) } else { (b, a) };
    Ok(plan_path_sp2(a, b, table)?.total)
}

fn gaussian_witness(ctx: &Ctx) -> CliResult<(bool, String)> {
    let mut h = ctx.sampler(6);
    let (mut bad_lemma, mut checked) = (0, 0);
    while checked < ctx.n {
        let c = sl3_point(h.rng(), 12.0);
        if !(c.t < 0.0) {
            continue;
        }
        checked += 1;
        bad_lemma += usize::from(!check_lemma_drst(c, ctx.p)?.passed);
    }
    let mut bad_pairs = 0;
    for _ in 0..ctx.n {
        let (a, b) = (sl3_point(h.rng(), 12.0), sl3_point(h.rng(), 12.0));
        let ga = random_element(&mut h, &ChamberPoint::Sl3(a))?;
        let gb = random_element(&mut h, &ChamberPoint::Sl3(b))?;
        let gap = (gaussian_phi(&ga)? - gaussian_phi(&gb)?).abs();
        bad_pairs += usize::from(gap > pap_core::certify::pair_bound(&ga, &gb, ctx.p)? + 1e-12);
    }
    Ok((
        bad_lemma == 0 && bad_pairs == 0,
        format!("wall lemma on {} points: violations {bad_lemma}; {} SL3 pairs: violations {bad_pairs}", ctx.n, ctx.n),
    ))
}

fn tamper(c: &Certificate, r: &mut impl Rng) -> Certificate {
    let mut t = c.clone();
    let i = r.random_range(0..t.steps.len());
    match r.random_range(0..6) {
        0 => t.steps[i].bound *= 0.5,
        1 => t.steps[i].bound *= 1.0 + 1e-6,
        2 => {
            t.steps[i].from = match t.steps[i].from {
                ChamberPoint::Sl3(p) => ChamberPoint::Sl3(ChamberPointSL3 { r: p.r + 1e-3, s: p.s - 1e-3, t: p.t }),
                ChamberPoint::Sp2(p) => ChamberPoint::Sp2(ChamberPointSp2 { beta: p.beta + 1e-3, gamma: p.gamma }),
            }
        }
        3 => t.total *= 1.0 + 1e-6,
        4 => t.envelope.constant *= 0.5,
        _ => {
            let tags = [
                StepTag::FixGamma3,
                StepTag::FixGamma1,
                StepTag::SmallT,
                StepTag::Sp2ToRayViaT,
                StepTag::Sp2ToRayViaS,
                StepTag::Sp2RaySegment,
                StepTag::Sp2SmallRegion,
            ];
            let others: Vec<_> = tags.into_iter().filter(|&x| x != t.steps[i].tag).collect();
            t.steps[i].tag = others[r.random_range(0..others.len())];
        }
    }
    t
}

fn certificates(ctx: &Ctx) -> CliResult<(bool, String)> {
    let mut h = ctx.sampler(7);
    let r = h.rng();
    let mut certs = Vec::new();
    let (mut rejected, mut over) = (0, 0);
    for _ in 0..ctx.n {
        let (a, b) = (sl3_point(r, 20.0), sl3_point(r, 20.0));
        let (a, b) = if b.t <= a.t { (a, b) } else { (b, a) };
        certs.push(plan_path_sl3(a, b, ctx.p)?);
        let (a, b) = (sp2_point(r, 60.0), sp2_point(r, 60.0));
        let (a, b) = if a.beta <= b.beta { (a, b) } else { (b, a) };
        certs.push(plan_path_sp2(a, b, &ctx.sp2)?);
    }
    for c in &certs {
        rejected += usize::from(!check_certificate(c).valid);
        over += usize::from(c.total > c.envelope.value());
    }
    let candidates: Vec<&Certificate> = certs.iter().filter(|c| !c.steps.is_empty()).collect();
    let mut accepted = 0;
    if !candidates.is_empty() {
        for k in 0..ctx.n {
            let c = candidates[(k * 7919) % candidates.len()];
            accepted += usize::from(check_certificate(&tamper(c, r)).valid);
        }
    }
    Ok((
        rejected == 0 && over == 0 && accepted == 0,
        format!(
            "{} planner outputs per group: rejected {rejected}, over envelope {over}; {} tamperings: accepted {accepted}",
            ctx.n, ctx.n
        ),
    ))
}

fn spectral_fits(ctx: &Ctx) -> CliResult<(bool, String)> {
    let mut pass = true;
    let mut detail = Vec::new();
    for (family, name, lo, hi) in [
        (Family::TNearQuarterPi, "T", 0.4, 0.6),
        (Family::SGap { base: 0.3 }, "S", 0.15, 0.35),
    ] {
        let grid = family.default_grid();
        let at64 = family_points(family, &grid, 64)?;
        let at128 = family_points(family, &grid, 128)?;
        let e = fit_exponent(&at64)?;
        let change = at64.iter().zip(&at128).map(|(a, b)| (b.1 - a.1).abs() / a.1).fold(0.0, f64::max);
        pass &= (lo..=hi).contains(&e) && change <= 0.05;
        detail.push(format!("{name} exponent {e:.3} in [{lo}, {hi}], doubling change {:.2}%", 100.0 * change));
    }
    let mut h = ctx.sampler(8);
    let mut bad = 0;
    for _ in 0..ctx.n {
        let (a, b) = (sp2_point(h.rng(), 8.0), sp2_point(h.rng(), 8.0));
        let ga = random_element(&mut h, &ChamberPoint::Sp2(a))?;
        let gb = random_element(&mut h, &ChamberPoint::Sp2(b))?;
        let gap = (gaussian_phi(&ga)? - gaussian_phi(&gb)?).abs();
        bad += usize::from(gap > sp2_pair_bound(&ga, &gb, &ctx.sp2)? + 1e-12);
    }
    pass &= bad == 0;
    detail.push(format!("{} Sp2 witness pairs: violations {bad}", ctx.n));
    Ok((pass, detail.join("; ")))
}

fn demo(ctx: &Ctx) -> CliResult<(bool, String)> {
    let mut pass = true;
    let mut detail = Vec::new();
    for seq in [EscapeSequence::sl3_default(20), EscapeSequence::sp2_default(20)] {
        let rep = obstruction_demo(&seq, crate::commands::DEMO_RADIUS, ctx.p, Some(&ctx.sp2))?;
        let checks = demo_checks(&rep);
        let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        pass &= failed.is_empty();
        detail.push(format!(
            "{}: max step ratio {:.4}, {}",
            seq.group,
            rep.tail.max_ratio,
            if failed.is_empty() { "all checks pass".to_string() } else { format!("failed {}", failed.join(", ")) }
        ));
    }
    Ok((pass, detail.join("; ")))
}
