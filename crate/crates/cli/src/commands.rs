use std::f64::consts::PI;

use pap_core::certify::{
    check_certificate, constants_sl3, constants_sp2, constants_sp2_default, plan_path_sl3, plan_path_sp2,
    Certificate, ConstantsTable,
};
use pap_core::groups::{membership_residual, GroupElement, GroupTag, HaarSampler};
use pap_core::kak::{chamber, kak as factor, ChamberPoint, ChamberPointSL3, ChamberPointSp2};
use pap_core::sinhsys::SinhSolution;
use pap_core::spectra::{family_sweep, fit_exponent, log_grid, theta_delta_sweep, Family, SweepRow};
use pap_core::witness::{obstruction_demo, EscapeSequence, DEMO_CSV_HEADER};
use rand::Rng;
use serde_json::{json, Map, Value};

use crate::report::{coords, num, Check, Report, Table};
use crate::{CliError, CliResult, GroupArg, OpArg, Opts};

/// Bump radius used by `demo`.
pub const DEMO_RADIUS: f64 = 50.0;
/// Random SL(3) chamber points have `r − t` up to this spread.
pub const SL3_SPREAD: f64 = 8.0;
/// Random Sp(2) chamber points have `β` up to this value.
pub const SP2_MAX_BETA: f64 = 6.0;

pub fn group_name(g: GroupArg) -> &'static str {
    match g {
        GroupArg::Sl3 => "sl3",
        GroupArg::Sp2 => "sp2",
    }
}

fn groups_or_both(g: Option<GroupArg>) -> Vec<GroupArg> {
    g.map_or_else(|| vec![GroupArg::Sl3, GroupArg::Sp2], |g| vec![g])
}

fn require_group(opts: &Opts, command: &str) -> CliResult<GroupArg> {
    opts.group
        .ok_or_else(|| CliError::Config(format!("{command} needs --group sl3|sp2")))
}

fn config(pairs: &[(&str, Value)]) -> Map<String, Value> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

pub fn parse_point(group: GroupArg, text: &str) -> CliResult<ChamberPoint> {
    let vals: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Config(format!("cannot parse chamber point {text:?}: {e}")))?;
    let invalid = |e: pap_core::Error| CliError::Config(format!("invalid chamber point {text:?}: {e}"));
    match (group, vals.as_slice()) {
        (GroupArg::Sl3, &[r, s, t]) => Ok(ChamberPoint::Sl3(ChamberPointSL3::new(r, s, t).map_err(invalid)?)),
        (GroupArg::Sp2, &[b, g]) => Ok(ChamberPoint::Sp2(ChamberPointSp2::new(b, g).map_err(invalid)?)),
        (GroupArg::Sl3, _) => Err(CliError::Config(format!("sl3 points need r,s,t; got {text:?}"))),
        (GroupArg::Sp2, _) => Err(CliError::Config(format!("sp2 points need beta,gamma; got {text:?}"))),
    }
}

pub fn point_coords(p: &ChamberPoint) -> Vec<f64> {
    match p {
        ChamberPoint::Sl3(x) => x.as_array().to_vec(),
        ChamberPoint::Sp2(x) => vec![x.beta, x.gamma],
    }
}

pub fn sl3_point(r: &mut impl Rng, spread: f64) -> ChamberPointSL3 {
    let x: f64 = r.random::<f64>() * spread;
    let y: f64 = r.random::<f64>() * spread;
    ChamberPointSL3::from_unsorted([(2.0 * x + y) / 3.0, (y - x) / 3.0, -(x + 2.0 * y) / 3.0])
}

pub fn sp2_point(r: &mut impl Rng, max_beta: f64) -> ChamberPointSp2 {
    let beta: f64 = r.random::<f64>() * max_beta;
    let gamma: f64 = r.random::<f64>() * beta;
    ChamberPointSp2 { beta, gamma }
}

/// `k D k'` with Haar-random compact factors.
pub fn random_element(h: &mut HaarSampler, point: &ChamberPoint) -> CliResult<GroupElement> {
    let d = point.diag();
    let (k1, k2) = match point {
        ChamberPoint::Sl3(_) => (h.so3(), h.so3()),
        ChamberPoint::Sp2(_) => (h.u2(), h.u2()),
    };
    Ok(k1.mul(&d)?.mul(&k2)?)
}

/// Sp(2,R) constants from `--c1-sp2/--c2-sp2`, or the fitted defaults.
pub fn sp2_table(opts: &Opts) -> CliResult<ConstantsTable> {
    match (opts.c1_sp2, opts.c2_sp2) {
        (Some(c1), Some(c2)) => constants_sp2(opts.p, c1, c2).map_err(|e| CliError::Config(e.to_string())),
        _ if opts.p < 2.0 => Err(CliError::Config(
            "the fitted Sp(2,R) constants need p >= 2; pass --c1-sp2 and --c2-sp2".into(),
        )),
        _ => Ok(constants_sp2_default(opts.p)?),
    }
}

fn sp2_constants_config(opts: &Opts) -> Value {
    match (opts.c1_sp2, opts.c2_sp2) {
        (Some(c1), Some(c2)) => json!({ "c1Sp2": c1, "c2Sp2": c2 }),
        _ => json!("fitted"),
    }
}

/// Maps `f` over `items` on all cores, keeping input order.
pub fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(items.len().max(1));
    let chunk = items.len().div_ceil(workers).max(1);
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| scope.spawn(|| part.iter().map(&f).collect::<Vec<R>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    })
}

pub fn kak(opts: &Opts) -> CliResult<Report> {
    let n = opts.samples.unwrap_or(1000);
    let tol = opts.tol.unwrap_or(1e-9);
    if opts.from.is_some() && opts.group.is_none() {
        return Err(CliError::Config("--from needs --group".into()));
    }
    let groups = groups_or_both(opts.group);
    let fixed = match (&opts.from, opts.group) {
        (Some(text), Some(g)) => Some(parse_point(g, text)?),
        _ => None,
    };
    let mut report = Report::new(
        "kak",
        config(&[
            ("groups", json!(groups.iter().map(|g| group_name(*g)).collect::<Vec<_>>())),
            ("samples", json!(n)),
            ("seed", json!(opts.seed)),
            ("tol", json!(tol)),
            ("from", json!(opts.from.clone().unwrap_or_else(|| "random".into()))),
            ("sl3_spread", json!(SL3_SPREAD)),
            ("sp2_max_beta", json!(SP2_MAX_BETA)),
        ]),
    );
    report.table = Table::new(&["group", "index", "input", "recovered", "chamber_error", "relative_residual"]);
    let mut data = Map::new();
    for group in groups {
        let mut h = HaarSampler::new(opts.seed);
        let (mut chamber_err, mut residual, mut bi, mut compact) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for i in 0..n {
            let point = match fixed {
                Some(p) => p,
                None => match group {
                    GroupArg::Sl3 => ChamberPoint::Sl3(sl3_point(h.rng(), SL3_SPREAD)),
                    GroupArg::Sp2 => ChamberPoint::Sp2(sp2_point(h.rng(), SP2_MAX_BETA)),
                },
            };
            let g = random_element(&mut h, &point)?;
            let f = factor(&g)?;
            let err = f.chamber.max_abs_diff(&point).unwrap_or(f64::INFINITY);
            let res = f.residual(&g) / g.matrix().amax();
            chamber_err = chamber_err.max(err);
            residual = residual.max(res);
            for k in [&f.k, &f.k2] {
                compact = compact.max(membership_residual(k.tag(), k.matrix()));
            }
            let moved = match group {
                GroupArg::Sl3 => h.so3().mul(&g)?.mul(&h.so3())?,
                GroupArg::Sp2 => h.u2().mul(&g)?.mul(&h.u2())?,
            };
            bi = bi.max(chamber(&moved)?.max_abs_diff(&f.chamber).unwrap_or(f64::INFINITY));
            report.table.push(vec![
                group_name(group).into(),
                i.to_string(),
                coords(&point_coords(&point)),
                coords(&point_coords(&f.chamber)),
                num(err),
                num(res),
            ]);
        }
        let name = group_name(group);
        report.checks.push(Check::new(format!("{name} chamber"), chamber_err <= tol, format!("max error {chamber_err:.3e}")));
        report.checks.push(Check::new(format!("{name} reconstruction"), residual <= tol, format!("max relative residual {residual:.3e}")));
        report.checks.push(Check::new(format!("{name} bi-invariance"), bi <= tol, format!("max drift {bi:.3e}")));
        report.checks.push(Check::new(format!("{name} compact factors"), compact <= tol, format!("max membership residual {compact:.3e}")));
        data.insert(
            name.into(),
            json!({ "max_chamber_error": chamber_err, "max_residual": residual, "max_bi_invariance": bi, "max_compact_residual": compact }),
        );
    }
    report.data = Value::Object(data);
    Ok(report)
}

pub fn spectra(opts: &Opts) -> CliResult<Report> {
    let op = opts.op.unwrap_or(OpArg::Theta);
    let n = opts.delta_grid;
    let cutoff = opts.cutoff.unwrap_or(match op {
        OpArg::Theta => 256,
        _ => 64,
    });
    let (op_name, range, family) = match op {
        OpArg::Theta => ("theta", (1e-3, 1.0), None),
        OpArg::T => ("t", (0.05, PI / 12.0), Some(Family::TNearQuarterPi)),
        OpArg::S => ("s", (0.1, 1.0), Some(Family::SGap { base: 0.3 })),
    };
    let grid = log_grid(range.0, range.1, n);
    let rows: Vec<SweepRow> = par_map(&grid, |&x| match family {
        None => theta_delta_sweep(&[x], cutoff),
        Some(f) => family_sweep(f, &[x], cutoff),
    })
    .into_iter()
    .collect::<pap_core::Result<Vec<_>>>()?
    .into_iter()
    .flatten()
    .collect();

    let mut report = Report::new(
        "spectra",
        config(&[
            ("op", json!(op_name)),
            ("grid_points", json!(n)),
            ("grid_range", json!([range.0, range.1])),
            ("grid_spacing", json!("log")),
            ("cutoff", json!(cutoff)),
        ]),
    );
    let violations = rows.iter().filter(|r| !(r.computed_norm <= r.bound)).count();
    let worst = rows.iter().map(|r| r.computed_norm / r.bound).fold(0.0, f64::max);
    report.checks.push(Check::new(
        "bound >= norm",
        violations == 0,
        format!("{} rows, violations {violations}, max norm/bound {worst:.4}", rows.len()),
    ));
    let mut exponent = Value::Null;
    if let Some(f) = family {
        if rows.len() >= 4 {
            let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.parameter, r.computed_norm)).collect();
            let e = fit_exponent(&pts)?;
            let (lo, hi) = match f {
                Family::TNearQuarterPi => (0.4, 0.6),
                Family::SGap { .. } => (0.15, 0.35),
            };
            report.checks.push(Check::new(
                "decay exponent",
                (lo..=hi).contains(&e),
                format!("fitted {e:.4} in [{lo}, {hi}]"),
            ));
            exponent = json!(e);
        }
    }
    report.table = Table::new(&["index", "parameter", "bound", "norm", "cutoff"]);
    for (i, r) in rows.iter().enumerate() {
        report.table.push(vec![i.to_string(), num(r.parameter), num(r.bound), num(r.computed_norm), r.cutoff.to_string()]);
    }
    report.data = json!({
        "fitted_exponent": exponent,
        "rows": rows.iter().map(|r| json!({ "parameter": r.parameter, "bound": r.bound, "norm": r.computed_norm })).collect::<Vec<_>>(),
    });
    Ok(report)
}

/// Upper end of `β` for random `sinh` samples.
pub const SINH_MAX_BETA: f64 = 30.0;

pub fn sinh(opts: &Opts) -> CliResult<Report> {
    if opts.group == Some(GroupArg::Sl3) {
        return Err(CliError::Config("the sinh systems are defined for sp2 only".into()));
    }
    let tol = opts.tol.unwrap_or(1e-12);
    let points: Vec<ChamberPointSp2> = match &opts.from {
        Some(text) => match parse_point(GroupArg::Sp2, text)? {
            ChamberPoint::Sp2(q) => vec![q],
            _ => unreachable!("parsed as sp2"),
        },
        None => {
            let mut h = HaarSampler::new(opts.seed);
            (0..opts.samples.unwrap_or(1000)).map(|_| sp2_point(h.rng(), SINH_MAX_BETA)).collect()
        }
    };
    let mut report = Report::new(
        "sinh",
        config(&[
            ("from", json!(opts.from.clone().unwrap_or_else(|| "random".into()))),
            ("samples", json!(points.len())),
            ("seed", json!(opts.seed)),
            ("tol", json!(tol)),
            ("max_beta", json!(SINH_MAX_BETA)),
        ]),
    );
    report.table = Table::new(&["beta", "gamma", "s", "t", "residual_s", "residual_t"]);
    let (mut residual, mut lower) = (0.0f64, 0usize);
    let mut rows = Vec::new();
    for q in &points {
        let sol = SinhSolution::from_chamber(q.beta, q.gamma)?;
        residual = residual.max(sol.residual_s).max(sol.residual_t);
        if sol.s < q.beta / 4.0 || sol.t < q.gamma / 2.0 {
            lower += 1;
        }
        report.table.push(vec![num(q.beta), num(q.gamma), num(sol.s), num(sol.t), num(sol.residual_s), num(sol.residual_t)]);
        rows.push(json!({ "beta": q.beta, "gamma": q.gamma, "s": sol.s, "t": sol.t, "residual_s": sol.residual_s, "residual_t": sol.residual_t }));
    }
    report.checks.push(Check::new("residuals", residual <= tol, format!("max relative residual {residual:.3e}")));
    report.checks.push(Check::new("s >= beta/4, t >= gamma/2", lower == 0, format!("violations {lower}")));
    report.data = json!({ "max_residual": residual, "rows": rows });
    Ok(report)
}

fn plan(group: GroupArg, from: ChamberPoint, to: ChamberPoint, opts: &Opts) -> CliResult<Certificate> {
    let planned = match (group, from, to) {
        (GroupArg::Sl3, ChamberPoint::Sl3(a), ChamberPoint::Sl3(b)) => plan_path_sl3(a, b, opts.p),
        (GroupArg::Sp2, ChamberPoint::Sp2(a), ChamberPoint::Sp2(b)) => plan_path_sp2(a, b, &sp2_table(opts)?),
        _ => unreachable!("points parsed for the chosen group"),
    };
    planned.map_err(|e| match e {
        pap_core::Error::Ordering(m) => CliError::Config(format!(
            "endpoint order: {m} (sl3 needs t(from) >= t(to); sp2 needs beta(from) <= beta(to))"
        )),
        other => other.into(),
    })
}

pub fn certify(opts: &Opts) -> CliResult<Report> {
    let group = require_group(opts, "certify")?;
    let (Some(from), Some(to)) = (&opts.from, &opts.to) else {
        return Err(CliError::Config("certify needs --from and --to".into()));
    };
    let (a, b) = (parse_point(group, from)?, parse_point(group, to)?);
    let cert = plan(group, a, b, opts)?;
    let check = check_certificate(&cert);
    let mut report = Report::new(
        "certify",
        config(&[
            ("group", json!(group_name(group))),
            ("p", json!(opts.p)),
            ("from", json!(from)),
            ("to", json!(to)),
            ("sp2_constants", if group == GroupArg::Sp2 { sp2_constants_config(opts) } else { Value::Null }),
        ]),
    );
    let detail = match check.first_violation() {
        Some(v) => format!("step {:?}: {}", v.step, v.message),
        None => format!(
            "{} steps, total {:.6e} <= envelope {:.6e}",
            cert.steps.len(),
            cert.total,
            check.envelope_value
        ),
    };
    report.checks.push(Check::new("certificate", check.valid, detail));
    report.table = Table::new(&["index", "tag", "from", "to", "bound"]);
    for (i, s) in cert.steps.iter().enumerate() {
        report.table.push(vec![
            i.to_string(),
            format!("{:?}", s.tag),
            coords(&point_coords(&s.from)),
            coords(&point_coords(&s.to)),
            num(s.bound),
        ]);
    }
    report.table.push(vec!["total".into(), String::new(), String::new(), String::new(), num(cert.total)]);
    report.document = Some(cert.to_json());
    Ok(report)
}

pub fn demo(opts: &Opts) -> CliResult<Report> {
    let group = require_group(opts, "demo")?;
    let n_max = opts.cutoff.unwrap_or(20) as usize;
    let (seq, table) = match group {
        GroupArg::Sl3 => (EscapeSequence::sl3_default(n_max), None),
        GroupArg::Sp2 => (EscapeSequence::sp2_default(n_max), Some(sp2_table(opts)?)),
    };
    let rep = obstruction_demo(&seq, DEMO_RADIUS, opts.p, table.as_ref())?;
    let mut report = Report::new(
        "demo",
        config(&[
            ("group", json!(group_name(group))),
            ("p", json!(opts.p)),
            ("n_max", json!(n_max)),
            ("direction", json!(point_coords(&seq.direction))),
            ("radius", json!(DEMO_RADIUS)),
            ("sp2_constants", if group == GroupArg::Sp2 { sp2_constants_config(opts) } else { Value::Null }),
        ]),
    );
    for c in demo_checks(&rep) {
        report.checks.push(c);
    }
    report.table = Table::new(&DEMO_CSV_HEADER.split(',').collect::<Vec<_>>());
    for line in rep.to_csv().lines().skip(1) {
        report.table.push(line.split(',').map(String::from).collect());
    }
    report.data = serde_json::to_value(&rep).map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(report)
}

/// Column, gap and tail checks on a demo run. The rate check uses `e^{-1/p}`
/// on the SL(3) ray and the envelope's own rate on the Sp(2) ray.
pub fn demo_checks(rep: &pap_core::witness::DemoReport) -> Vec<Check> {
    let t = rep.tail;
    let rate = match rep.group {
        GroupTag::Sl3 => Check::new(
            "step ratio <= e^(-1/p)",
            t.unit_rate_ok,
            format!("max ratio {:.5}, e^(-1/p) = {:.5}", t.max_ratio, t.unit_rate),
        ),
        _ => Check::new(
            "step ratio <= envelope rate",
            t.envelope_rate_ok,
            format!(
                "max ratio {:.5}, envelope rate {:.5}; e^(-1/p) = {:.5} {}",
                t.max_ratio,
                t.envelope_rate,
                t.unit_rate,
                if t.unit_rate_ok { "also holds" } else { "is not met" }
            ),
        ),
    };
    vec![
        Check::new("constant column", rep.constant_ok(), "constant multiplier pairs to 1"),
        Check::new("bump column", rep.bump_ok(), format!("zero beyond radius {}", rep.radius)),
        Check::new("gaussian gaps", rep.gaps_ok(), "consecutive differences within certificate bounds"),
        Check::new(
            "cauchy tail",
            t.tail_sum_bound.is_finite() && t.max_ratio < 1.0,
            format!("partial sum {:.6e}, tail bound {:.3e}", t.partial_sum, t.tail_sum_bound),
        ),
        rate,
    ]
}

pub fn constants(opts: &Opts) -> CliResult<Report> {
    let groups = groups_or_both(opts.group);
    let mut report = Report::new(
        "constants",
        config(&[
            ("groups", json!(groups.iter().map(|g| group_name(*g)).collect::<Vec<_>>())),
            ("p", json!(opts.p)),
            ("sp2_constants", if groups.contains(&GroupArg::Sp2) { sp2_constants_config(opts) } else { Value::Null }),
        ]),
    );
    report.table = Table::new(&["group", "name", "value"]);
    let mut data = Map::new();
    for group in groups {
        let table = match group {
            GroupArg::Sl3 => constants_sl3(opts.p).map_err(|e| CliError::Config(e.to_string()))?,
            GroupArg::Sp2 => sp2_table(opts)?,
        };
        let name = group_name(group);
        let verified = table.verify();
        report.checks.push(Check::new(
            format!("{name} identities"),
            verified.is_ok(),
            verified.err().unwrap_or_else(|| "all identities hold".into()),
        ));
        let value = serde_json::to_value(table).map_err(|e| CliError::Runtime(e.to_string()))?;
        if let Value::Object(fields) = &value {
            for (k, v) in fields {
                if let Some(x) = v.as_f64() {
                    report.table.push(vec![name.into(), k.clone(), num(x)]);
                }
            }
        }
        data.insert(name.into(), value);
    }
    report.data = Value::Object(data);
    Ok(report)
}
