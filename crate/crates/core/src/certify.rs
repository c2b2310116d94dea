//! Decay certificates for pairs of chamber points.
//!
//! A certificate is a chain of chamber points joined by elementary steps. Each
//! step carries a tag naming the estimate that justifies it and a bound that is
//! a closed formula in the endpoints and the constants table, so a checker can
//! recompute everything from the serialized document alone.

use std::io;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groups::{GroupElement, GroupTag};
use crate::kak::{chamber, ChamberPoint, ChamberPointSL3, ChamberPointSp2};
use crate::sinhsys::{solve_beta_gamma, solve_s, solve_t};
use crate::spectra::sp2_default_constants;

/// SL(3,R) staircase constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Sl3Constants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    #[serde(rename = "cSL3")]
    pub c_sl3: f64,
}

/// Sp(2,R) chain constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Sp2Constants {
    pub c1_sp2: f64,
    pub c2_sp2: f64,
    pub c3_sp2: f64,
    pub c4_sp2: f64,
    /// `max(c3Sp2, c4Sp2)`, the constant of the reduction to the ray.
    pub c_ray: f64,
    pub c5: f64,
    pub c_geom: f64,
    pub c6: f64,
    pub c7: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConstantsTable {
    pub p: f64,
    pub c_tilde: f64,
    #[serde(flatten, skip_serializing_if = "Option::is_none", default)]
    pub sl3: Option<Sl3Constants>,
    #[serde(flatten, skip_serializing_if = "Option::is_none", default)]
    pub sp2: Option<Sp2Constants>,
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 1.0) || p.is_infinite() {
        return Err(Error::Domain {
            name: "p",
            value: p,
            expected: "1 < p < inf",
        });
    }
    Ok(())
}

fn c_tilde(p: f64) -> f64 {
    2f64.powf(1.0 + 2.0 / p)
}

fn sl3_constants(p: f64) -> Sl3Constants {
    let ct = c_tilde(p);
    let c1 = 2.0 * ct * (2.0 / (1.0 - (-2.0 / p).exp()) + 1.0 + (1.0 / p).exp());
    // Larger of the two normalization branches, 2C̃e^{1/p} and 2C̃e^{-2/p}.
    let c2 = 2.0 * ct * (1.0 / p).exp();
    let c3 = c1 + 2.0 * c2;
    let c4 = 2.0 * (1.0 / p).exp();
    Sl3Constants { c1, c2, c3, c4, c_sl3: c3.max(c4) }
}

fn sp2_constants(p: f64, c1_sp2: f64, c2_sp2: f64) -> Sp2Constants {
    let c3_sp2 = (2.0 * 4f64.powf(1.0 / p) * c1_sp2).max(2.0 * (2.0 / p).exp());
    let c4_sp2 = c2_sp2.max(2.0 * (1.0 / (2.0 * p)).exp());
    let c_ray = c3_sp2.max(c4_sp2);
    let c5 = (1.0 / (4.0 * p)).exp() * (c3_sp2 + c4_sp2);
    let c_geom = c5 / (1.0 - (-1.0 / (8.0 * p)).exp());
    let c6 = c_geom.max(2.0 * (5.0 / (8.0 * p)).exp());
    let c7 = 2.0 * c_ray + c6;
    Sp2Constants { c1_sp2, c2_sp2, c3_sp2, c4_sp2, c_ray, c5, c_geom, c6, c7 }
}

pub fn constants_sl3(p: f64) -> Result<ConstantsTable> {
    check_p(p)?;
    Ok(ConstantsTable {
        p,
        c_tilde: c_tilde(p),
        sl3: Some(sl3_constants(p)),
        sp2: None,
    })
}

pub fn constants_sp2(p: f64, c1_sp2: f64, c2_sp2: f64) -> Result<ConstantsTable> {
    check_p(p)?;
    for (name, v) in [("c1Sp2", c1_sp2), ("c2Sp2", c2_sp2)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Domain {
                name,
                value: v,
                expected: "positive finite constant",
            });
        }
    }
    Ok(ConstantsTable {
        p,
        c_tilde: c_tilde(p),
        sl3: None,
        sp2: Some(sp2_constants(p, c1_sp2, c2_sp2)),
    })
}

/// Sp(2,R) table with the spectrally fitted default `C1`, `C2`.
pub fn constants_sp2_default(p: f64) -> Result<ConstantsTable> {
    check_p(p)?;
    let (c1, c2) = sp2_default_constants(p.max(2.0))?;
    constants_sp2(p, c1, c2)
}

impl ConstantsTable {
    pub fn group(&self) -> Option<GroupTag> {
        match (self.sl3.is_some(), self.sp2.is_some()) {
            (true, false) => Some(GroupTag::Sl3),
            (false, true) => Some(GroupTag::Sp2),
            _ => None,
        }
    }

    /// `ε(e^{-a}) = C̃ e^{-a/p}` for `a ≥ 0`.
    fn eps_exp(&self, exponent: f64) -> f64 {
        self.c_tilde * (exponent.min(0.0) / self.p).exp()
    }

    /// Re-derives every derived constant and reports the first mismatch.
    pub fn verify(&self) -> std::result::Result<(), String> {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
        if !close(self.c_tilde, c_tilde(self.p)) {
            return Err(format!("cTilde {} != 2^(1+2/p)", self.c_tilde));
        }
        if let Some(s) = &self.sl3 {
            let want = sl3_constants(self.p);
            let pairs = [
                ("c1", s.c1, want.c1),
                ("c2", s.c2, want.c2),
                ("c3", s.c3, want.c3),
                ("c4", s.c4, want.c4),
                ("cSL3", s.c_sl3, want.c_sl3),
            ];
            for (name, got, want) in pairs {
                if !close(got, want) {
                    return Err(format!("{name} = {got} but formula gives {want}"));
                }
            }
        }
        if let Some(s) = &self.sp2 {
            if !(s.c1_sp2 > 0.0 && s.c2_sp2 > 0.0) {
                return Err("c1Sp2 and c2Sp2 must be positive".to_string());
            }
            let want = sp2_constants(self.p, s.c1_sp2, s.c2_sp2);
            let pairs = [
                ("c3Sp2", s.c3_sp2, want.c3_sp2),
                ("c4Sp2", s.c4_sp2, want.c4_sp2),
                ("cRay", s.c_ray, want.c_ray),
                ("c5", s.c5, want.c5),
                ("cGeom", s.c_geom, want.c_geom),
                ("c6", s.c6, want.c6),
                ("c7", s.c7, want.c7),
            ];
            for (name, got, want) in pairs {
                if !close(got, want) {
                    return Err(format!("{name} = {got} but formula gives {want}"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StepTag {
    /// Equal `γ3`: `ε(e^{r+2t}) + ε(e^{r'+2t})`.
    FixGamma3,
    /// Equal `γ1`: `ε(e^{-2r-t}) + ε(e^{-2r-t'})`.
    FixGamma1,
    /// Both points in `t > -1`: `c4 e^{t/p}`.
    SmallT,
    Sp2ToRayViaT,
    Sp2ToRayViaS,
    Sp2RaySegment,
    Sp2SmallRegion,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PathStep {
    pub from: ChamberPoint,
    pub to: ChamberPoint,
    pub tag: StepTag,
    pub bound: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sub_steps: Vec<PathStep>,
}

/// `constant · e^{coeff · anchor}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub constant: f64,
    pub coeff: f64,
    pub anchor: f64,
}

impl Envelope {
    pub fn value(&self) -> f64 {
        self.constant * (self.coeff * self.anchor).exp()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub group: GroupTag,
    pub p: f64,
    pub constants: ConstantsTable,
    /// The pair being certified; the steps must run from `from` to `to`.
    pub from: ChamberPoint,
    pub to: ChamberPoint,
    pub steps: Vec<PathStep>,
    pub total: f64,
    pub envelope: Envelope,
}

impl Certificate {
    fn assemble(
        group: GroupTag,
        constants: ConstantsTable,
        (from, to): (ChamberPoint, ChamberPoint),
        steps: Vec<PathStep>,
        envelope: Envelope,
    ) -> Self {
        let total = steps.iter().map(|s| s.bound).sum();
        Self { group, p: constants.p, constants, from, to, steps, total, envelope }
    }

    /// Appends `other`, whose path must start where this one ends.
    pub fn concat(&self, other: &Certificate) -> Result<Certificate> {
        if self.group != other.group || self.constants != other.constants {
            return Err(Error::Certificate("certificates use different groups or constants".into()));
        }
        if self.to.max_abs_diff(&other.from).is_none_or(|d| d > POINT_TOL) {
            return Err(Error::Certificate("paths do not join".into()));
        }
        let mut steps = self.steps.clone();
        steps.extend(other.steps.iter().cloned());
        Ok(Certificate::assemble(self.group, self.constants, (self.from, other.to), steps, self.envelope))
    }

    pub fn to_json(&self) -> String {
        to_json_string(self).expect("certificates serialize")
    }

    pub fn from_json(text: &str) -> Result<Certificate> {
        serde_json::from_str(text).map_err(|e| Error::Certificate(e.to_string()))
    }
}

/// JSON with every float written in scientific notation with 17 significant digits.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SciFormatter::default());
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Certificate(e.to_string()))?;
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

#[derive(Default)]
struct SciFormatter {
    inner: serde_json::ser::PrettyFormatter<'static>,
}

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*);)*) => {
        $(fn $name<W: ?Sized + io::Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> io::Result<()> {
            self.inner.$name(w $(, $arg)*)
        })*
    };
}

impl serde_json::ser::Formatter for SciFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(w, "{value:.16e}")
        } else {
            w.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    delegate! {
        begin_array();
        end_array();
        begin_array_value(first: bool);
        end_array_value();
        begin_object();
        end_object();
        begin_object_key(first: bool);
        end_object_key();
        begin_object_value();
        end_object_value();
    }
}

const POINT_TOL: f64 = 1e-9;
const BOUND_TOL: f64 = 1e-12;
const TOTAL_TOL: f64 = 1e-10;

fn sl3(r: f64, s: f64, t: f64) -> ChamberPoint {
    ChamberPoint::Sl3(ChamberPointSL3 { r, s, t })
}

fn sp2(beta: f64, gamma: f64) -> ChamberPoint {
    ChamberPoint::Sp2(ChamberPointSp2 { beta, gamma })
}

fn ray(x: f64) -> ChamberPoint {
    sp2(2.0 * x, x)
}

/// Bound attached to a top-level step, from its tag and endpoints.
fn step_bound(table: &ConstantsTable, tag: StepTag, from: &ChamberPoint, to: &ChamberPoint) -> std::result::Result<f64, String> {
    let p = table.p;
    match (tag, from, to) {
        (StepTag::FixGamma3, ChamberPoint::Sl3(a), ChamberPoint::Sl3(b)) => {
            Ok(table.eps_exp(a.r + 2.0 * a.t) + table.eps_exp(b.r + 2.0 * a.t))
        }
        (StepTag::FixGamma1, ChamberPoint::Sl3(a), ChamberPoint::Sl3(b)) => {
            Ok(table.eps_exp(-2.0 * a.r - a.t) + table.eps_exp(-2.0 * a.r - b.t))
        }
        (StepTag::SmallT, ChamberPoint::Sl3(a), ChamberPoint::Sl3(b)) => {
            let c4 = table.sl3.ok_or("missing SL3 constants")?.c4;
            Ok(c4 * (a.t.max(b.t) / p).exp())
        }
        (StepTag::Sp2ToRayViaT | StepTag::Sp2ToRayViaS, ChamberPoint::Sp2(_), ChamberPoint::Sp2(_)) => {
            let c = table.sp2.ok_or("missing Sp2 constants")?;
            let (x, _) = ray_reduction(tag, from, to)?;
            let k = if tag == StepTag::Sp2ToRayViaT { c.c3_sp2 } else { c.c4_sp2 };
            Ok(k * (-x.beta / (8.0 * p)).exp())
        }
        (StepTag::Sp2RaySegment, ChamberPoint::Sp2(a), ChamberPoint::Sp2(b)) => {
            let c = table.sp2.ok_or("missing Sp2 constants")?;
            Ok(c.c5 * (-a.gamma.max(b.gamma) / (8.0 * p)).exp())
        }
        (StepTag::Sp2SmallRegion, ChamberPoint::Sp2(a), ChamberPoint::Sp2(b)) => {
            Ok(2.0 * (5.0 / (8.0 * p)).exp() * (-a.gamma.min(b.gamma) / (8.0 * p)).exp())
        }
        _ => Err(format!("tag {tag:?} does not apply to these points")),
    }
}

/// Bound of a ray-reduction part inside a segment: `c3 e^{-(β-γ)/(4p)}` or `c4 e^{-γ/(4p)}`.
fn lemma_bound(table: &ConstantsTable, tag: StepTag, from: &ChamberPoint, to: &ChamberPoint) -> std::result::Result<f64, String> {
    let c = table.sp2.ok_or("missing Sp2 constants")?;
    let (x, _) = ray_reduction(tag, from, to)?;
    match tag {
        StepTag::Sp2ToRayViaT => Ok(c.c3_sp2 * (-(x.beta - x.gamma) / (4.0 * table.p)).exp()),
        StepTag::Sp2ToRayViaS => Ok(c.c4_sp2 * (-x.gamma / (4.0 * table.p)).exp()),
        _ => Err(format!("tag {tag:?} cannot appear inside a segment")),
    }
}

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= POINT_TOL * (1.0 + a.abs().max(b.abs()))
}

/// Identifies which endpoint is reduced to the ray; returns it and the ray coordinate.
fn ray_reduction(tag: StepTag, from: &ChamberPoint, to: &ChamberPoint) -> std::result::Result<(ChamberPointSp2, f64), String> {
    let (ChamberPoint::Sp2(a), ChamberPoint::Sp2(b)) = (from, to) else {
        return Err("ray reduction needs Sp2 points".into());
    };
    let reduce = |x: &ChamberPointSp2| match tag {
        StepTag::Sp2ToRayViaT => solve_s(x.beta, x.gamma).ok(),
        _ => solve_t(x.beta, x.gamma).ok(),
    };
    for (x, y) in [(a, b), (b, a)] {
        if let Some(r) = reduce(x) {
            if near(y.beta, 2.0 * r) && near(y.gamma, r) {
                return Ok((*x, r));
            }
        }
    }
    Err(format!("neither endpoint of {tag:?} maps onto the other"))
}

fn make_step(table: &ConstantsTable, tag: StepTag, from: ChamberPoint, to: ChamberPoint) -> Result<PathStep> {
    let bound = step_bound(table, tag, &from, &to).map_err(Error::Certificate)?;
    Ok(PathStep { from, to, tag, bound, sub_steps: Vec::new() })
}

fn reverse_steps(steps: Vec<PathStep>) -> Vec<PathStep> {
    steps
        .into_iter()
        .rev()
        .map(|s| PathStep {
            from: s.to,
            to: s.from,
            tag: s.tag,
            bound: s.bound,
            sub_steps: reverse_steps(s.sub_steps),
        })
        .collect()
}

fn same_point(a: &ChamberPoint, b: &ChamberPoint) -> bool {
    a.max_abs_diff(b) == Some(0.0)
}

fn push_step(out: &mut Vec<PathStep>, table: &ConstantsTable, tag: StepTag, from: ChamberPoint, to: ChamberPoint) -> Result<()> {
    if !same_point(&from, &to) {
        out.push(make_step(table, tag, from, to)?);
    }
    Ok(())
}

/// Moves an SL(3) point with `t ≤ -1` onto the wall `s = -1`.
fn normalize_sl3(table: &ConstantsTable, p: ChamberPointSL3, out: &mut Vec<PathStep>) -> Result<ChamberPointSL3> {
    if p.s > -1.0 {
        let q = ChamberPointSL3 { r: 1.0 - p.t, s: -1.0, t: p.t };
        push_step(out, table, StepTag::FixGamma3, ChamberPoint::Sl3(p), ChamberPoint::Sl3(q))?;
        Ok(q)
    } else if p.s < -1.0 {
        let q = ChamberPointSL3 { r: p.r, s: -1.0, t: 1.0 - p.r };
        push_step(out, table, StepTag::FixGamma1, ChamberPoint::Sl3(p), ChamberPoint::Sl3(q))?;
        Ok(q)
    } else {
        Ok(p)
    }
}

/// Staircase from `(1-t0, -1, t0)` down to `(1-t1, -1, t1)`, `t1 ≤ t0 ≤ -1`.
fn staircase(table: &ConstantsTable, t0: f64, t1: f64) -> Result<Vec<PathStep>> {
    let mut out = Vec::new();
    let n = ((t0 - t1) / 2.0).floor().max(0.0) as usize;
    for i in 0..n {
        let fi = 2.0 * i as f64;
        let a = sl3(1.0 - t0 + fi, -1.0, t0 - fi);
        let b = sl3(1.0 - t0 + fi, 1.0, t0 - fi - 2.0);
        let c = sl3(3.0 - t0 + fi, -1.0, t0 - fi - 2.0);
        push_step(&mut out, table, StepTag::FixGamma1, a, b)?;
        push_step(&mut out, table, StepTag::FixGamma3, b, c)?;
    }
    let fnn = 2.0 * n as f64;
    let a = sl3(1.0 - t0 + fnn, -1.0, t0 - fnn);
    let b = sl3(1.0 - t0 + fnn, -1.0 + t0 - fnn - t1, t1);
    let c = sl3(1.0 - t1, -1.0, t1);
    push_step(&mut out, table, StepTag::FixGamma1, a, b)?;
    push_step(&mut out, table, StepTag::FixGamma3, b, c)?;
    Ok(out)
}

/// Certificate joining `from` to `to` in SL(3,R); needs `t(to) ≤ t(from)`.
pub fn plan_path_sl3(from: ChamberPointSL3, to: ChamberPointSL3, p: f64) -> Result<Certificate> {
    let table = constants_sl3(p)?;
    let c = table.sl3.expect("SL3 table");
    ChamberPointSL3::new(from.r, from.s, from.t)?;
    ChamberPointSL3::new(to.r, to.s, to.t)?;
    if to.t > from.t {
        return Err(Error::Ordering(format!(
            "need t(to) <= t(from), got {} > {}",
            to.t, from.t
        )));
    }
    let envelope = Envelope { constant: c.c_sl3, coeff: 1.0 / p, anchor: from.t };
    let ends = (ChamberPoint::Sl3(from), ChamberPoint::Sl3(to));
    let mut steps = Vec::new();
    if from == to {
        return Ok(Certificate::assemble(GroupTag::Sl3, table, ends, steps, envelope));
    }
    if from.t > -1.0 {
        push_step(&mut steps, &table, StepTag::SmallT, ChamberPoint::Sl3(from), ChamberPoint::Sl3(to))?;
        return Ok(Certificate::assemble(GroupTag::Sl3, table, ends, steps, envelope));
    }
    let a = normalize_sl3(&table, from, &mut steps)?;
    let mut tail = Vec::new();
    let b = normalize_sl3(&table, to, &mut tail)?;
    let tail = reverse_steps(tail);
    if a.t >= b.t {
        steps.extend(staircase(&table, a.t, b.t)?);
    } else {
        steps.extend(reverse_steps(staircase(&table, b.t, a.t)?));
    }
    steps.extend(tail);
    Ok(Certificate::assemble(GroupTag::Sl3, table, ends, steps, envelope))
}

/// Moves an Sp(2) point onto the ray `(2x, x)`; returns `x`.
fn reduce_to_ray(table: &ConstantsTable, q: ChamberPointSp2, out: &mut Vec<PathStep>) -> Result<f64> {
    let (tag, x) = if q.beta >= 2.0 * q.gamma {
        (StepTag::Sp2ToRayViaT, solve_s(q.beta, q.gamma)?)
    } else {
        (StepTag::Sp2ToRayViaS, solve_t(q.beta, q.gamma)?)
    };
    let target = ray(x);
    if q.max_abs_diff(&ChamberPointSp2 { beta: 2.0 * x, gamma: x }) > 0.0 {
        out.push(make_step(table, tag, ChamberPoint::Sp2(q), target)?);
    }
    Ok(x)
}

/// Unit segment `(2t, t) → (2s, s)` with its two ray-reduction parts through
/// the point `(β, γ)` whose ray coordinates are `(s, t)`.
fn ray_segment(table: &ConstantsTable, t: f64, s: f64) -> Result<PathStep> {
    let (beta, gamma) = solve_beta_gamma(s, t)?;
    let mid = sp2(beta, gamma);
    let first = PathStep {
        from: ray(t),
        to: mid,
        tag: StepTag::Sp2ToRayViaS,
        bound: lemma_bound(table, StepTag::Sp2ToRayViaS, &ray(t), &mid).map_err(Error::Certificate)?,
        sub_steps: Vec::new(),
    };
    let second = PathStep {
        from: mid,
        to: ray(s),
        tag: StepTag::Sp2ToRayViaT,
        bound: lemma_bound(table, StepTag::Sp2ToRayViaT, &mid, &ray(s)).map_err(Error::Certificate)?,
        sub_steps: Vec::new(),
    };
    let mut step = make_step(table, StepTag::Sp2RaySegment, ray(t), ray(s))?;
    step.sub_steps = vec![first, second];
    Ok(step)
}

/// Chain along the ray from `(2lo, lo)` up to `(2hi, hi)`.
fn ray_chain(table: &ConstantsTable, lo: f64, hi: f64) -> Result<Vec<PathStep>> {
    let mut out = Vec::new();
    if lo == hi {
        return Ok(out);
    }
    if lo < 5.0 {
        push_step(&mut out, table, StepTag::Sp2SmallRegion, ray(lo), ray(hi))?;
        return Ok(out);
    }
    let n = (hi - lo).floor() as usize;
    for j in 0..n {
        out.push(ray_segment(table, lo + j as f64, lo + j as f64 + 1.0)?);
    }
    let last = lo + n as f64;
    if hi > last {
        out.push(ray_segment(table, last, hi)?);
    }
    Ok(out)
}

/// Certificate joining `from` to `to` in Sp(2,R); needs `β(from) ≤ β(to)`.
pub fn plan_path_sp2(from: ChamberPointSp2, to: ChamberPointSp2, table: &ConstantsTable) -> Result<Certificate> {
    let c = table
        .sp2
        .ok_or_else(|| Error::Certificate("table has no Sp2 constants".into()))?;
    ChamberPointSp2::new(from.beta, from.gamma)?;
    ChamberPointSp2::new(to.beta, to.gamma)?;
    if from.beta > to.beta {
        return Err(Error::Ordering(format!(
            "need beta(from) <= beta(to), got {} > {}",
            from.beta, to.beta
        )));
    }
    let p = table.p;
    let envelope = Envelope { constant: c.c7, coeff: -1.0 / (32.0 * p), anchor: from.beta };
    let ends = (ChamberPoint::Sp2(from), ChamberPoint::Sp2(to));
    let mut steps = Vec::new();
    if from == to {
        return Ok(Certificate::assemble(GroupTag::Sp2, *table, ends, steps, envelope));
    }
    let x1 = reduce_to_ray(table, from, &mut steps)?;
    let mut tail = Vec::new();
    let x2 = reduce_to_ray(table, to, &mut tail)?;
    if x1 <= x2 {
        steps.extend(ray_chain(table, x1, x2)?);
    } else {
        steps.extend(reverse_steps(ray_chain(table, x2, x1)?));
    }
    steps.extend(reverse_steps(tail));
    Ok(Certificate::assemble(GroupTag::Sp2, *table, ends, steps, envelope))
}

/// One entry of a checker report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub step: Option<usize>,
    pub sub_step: Option<usize>,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub valid: bool,
    pub recomputed_total: f64,
    pub envelope_value: f64,
    pub violations: Vec<Violation>,
}

impl CheckReport {
    pub fn first_violation(&self) -> Option<&Violation> {
        self.violations.first()
    }
}

fn bound_matches(stored: f64, recomputed: f64) -> bool {
    (stored - recomputed).abs() <= BOUND_TOL * recomputed.abs().max(1e-300) + 1e-300
}

fn check_point(p: &ChamberPoint, group: GroupTag) -> std::result::Result<(), String> {
    match (p, group) {
        (ChamberPoint::Sl3(x), GroupTag::Sl3) => ChamberPointSL3::new(x.r, x.s, x.t)
            .map(|_| ())
            .map_err(|e| e.to_string()),
        (ChamberPoint::Sp2(x), GroupTag::Sp2) => ChamberPointSp2::new(x.beta, x.gamma)
            .map(|_| ())
            .map_err(|e| e.to_string()),
        _ => Err(format!("point {p:?} is not in {group}")),
    }
}

fn side_condition(tag: StepTag, from: &ChamberPoint, to: &ChamberPoint) -> std::result::Result<(), String> {
    let on_ray = |x: &ChamberPointSp2| near(x.beta, 2.0 * x.gamma);
    match (tag, from, to) {
        (StepTag::FixGamma3, ChamberPoint::Sl3(a), ChamberPoint::Sl3(b)) => {
            if (a.t - b.t).abs() > 1e-12 * (1.0 + a.t.abs()) {
                return Err(format!("FixGamma3 needs equal t, got {} and {}", a.t, b.t));
            }
            Ok(())
        }
        (StepTag::FixGamma1, ChamberPoint::Sl3(a), ChamberPoint::Sl3(b)) => {
            if (a.r - b.r).abs() > 1e-12 * (1.0 + a.r.abs()) {
                return Err(format!("FixGamma1 needs equal r, got {} and {}", a.r, b.r));
            }
            Ok(())
        }
        (StepTag::SmallT, ChamberPoint::Sl3(a), ChamberPoint::Sl3(b)) => {
            if a.t.max(b.t) <= -1.0 {
                return Err("SmallT needs t > -1 at one endpoint".into());
            }
            Ok(())
        }
        (StepTag::Sp2ToRayViaT | StepTag::Sp2ToRayViaS, _, _) => {
            let (x, _) = ray_reduction(tag, from, to)?;
            let via_t = x.beta >= 2.0 * x.gamma;
            if via_t != (tag == StepTag::Sp2ToRayViaT) {
                return Err(format!("{tag:?} used at ({}, {}) on the wrong side of beta = 2 gamma", x.beta, x.gamma));
            }
            Ok(())
        }
        (StepTag::Sp2RaySegment, ChamberPoint::Sp2(a), ChamberPoint::Sp2(b)) => {
            if !on_ray(a) || !on_ray(b) {
                return Err("segment endpoints must lie on the ray".into());
            }
            let (t, s) = (a.gamma.min(b.gamma), a.gamma.max(b.gamma));
            if !(t >= 2.0 && s <= 1.2 * t * (1.0 + 1e-12)) {
                return Err(format!("segment ({t}, {s}) outside 2 <= t <= s <= 6t/5"));
            }
            Ok(())
        }
        (StepTag::Sp2SmallRegion, ChamberPoint::Sp2(a), ChamberPoint::Sp2(b)) => {
            if !on_ray(a) || !on_ray(b) {
                return Err("small-region endpoints must lie on the ray".into());
            }
            if a.gamma.min(b.gamma) >= 5.0 {
                return Err("small-region step needs its lower endpoint below 5".into());
            }
            Ok(())
        }
        _ => Err(format!("tag {tag:?} does not apply to these points")),
    }
}

fn check_sub_steps(table: &ConstantsTable, step: &PathStep) -> std::result::Result<(), (Option<usize>, String)> {
    if step.tag != StepTag::Sp2RaySegment {
        if !step.sub_steps.is_empty() {
            return Err((None, "only ray segments carry sub-steps".into()));
        }
        return Ok(());
    }
    if step.sub_steps.len() != 2 {
        return Err((None, format!("ray segment needs 2 sub-steps, has {}", step.sub_steps.len())));
    }
    let mut cursor = step.from;
    let mut sum = 0.0;
    for (j, sub) in step.sub_steps.iter().enumerate() {
        if sub.from.max_abs_diff(&cursor).is_none_or(|d| d > POINT_TOL) {
            return Err((Some(j), "sub-step does not continue the chain".into()));
        }
        let want = lemma_bound(table, sub.tag, &sub.from, &sub.to).map_err(|m| (Some(j), m))?;
        if !bound_matches(sub.bound, want) {
            return Err((Some(j), format!("bound {} but formula gives {want}", sub.bound)));
        }
        sum += sub.bound;
        cursor = sub.to;
    }
    if cursor.max_abs_diff(&step.to).is_none_or(|d| d > POINT_TOL) {
        return Err((None, "sub-steps do not end at the segment endpoint".into()));
    }
    if sum > step.bound * (1.0 + BOUND_TOL) {
        return Err((None, format!("sub-step bounds sum to {sum} > segment bound {}", step.bound)));
    }
    Ok(())
}

/// The planners' ordering: `t(to) ≤ t(from)` in SL(3), `β(from) ≤ β(to)` in Sp(2).
fn check_orientation(cert: &Certificate) -> std::result::Result<(), String> {
    match (cert.from, cert.to) {
        (ChamberPoint::Sl3(a), ChamberPoint::Sl3(b)) if b.t > a.t + POINT_TOL => {
            Err(format!("endpoints out of order: t(to) = {} > t(from) = {}", b.t, a.t))
        }
        (ChamberPoint::Sp2(a), ChamberPoint::Sp2(b)) if a.beta > b.beta + POINT_TOL => {
            Err(format!("endpoints out of order: beta(from) = {} > beta(to) = {}", a.beta, b.beta))
        }
        _ => Ok(()),
    }
}

/// Re-derives every bound, side condition, the total and the envelope.
pub fn check_certificate(cert: &Certificate) -> CheckReport {
    let mut violations = Vec::new();
    let mut flag = |step: Option<usize>, sub_step: Option<usize>, message: String| {
        violations.push(Violation { step, sub_step, message });
    };
    let table = &cert.constants;
    if let Err(m) = table.verify() {
        flag(None, None, format!("constants: {m}"));
    }
    if table.group() != Some(cert.group) {
        flag(None, None, "constants table does not match the group".into());
    }
    if table.p != cert.p {
        flag(None, None, "p differs between header and table".into());
    }
    for pt in [&cert.from, &cert.to] {
        if let Err(m) = check_point(pt, cert.group) {
            flag(None, None, format!("endpoint: {m}"));
        }
    }
    if let Err(m) = check_orientation(cert) {
        flag(None, None, m);
    }
    let mut prev = Some(cert.from);
    let mut total = 0.0;
    for (i, step) in cert.steps.iter().enumerate() {
        for pt in [&step.from, &step.to] {
            if let Err(m) = check_point(pt, cert.group) {
                flag(Some(i), None, m);
            }
        }
        if let Some(p) = prev {
            if step.from.max_abs_diff(&p).is_none_or(|d| d > POINT_TOL) {
                flag(Some(i), None, "step does not start where the previous one ended".into());
            }
        }
        prev = Some(step.to);
        if let Err(m) = side_condition(step.tag, &step.from, &step.to) {
            flag(Some(i), None, m);
        }
        match step_bound(table, step.tag, &step.from, &step.to) {
            Ok(want) if !bound_matches(step.bound, want) => {
                flag(Some(i), None, format!("bound {} but formula gives {want}", step.bound));
            }
            Err(m) => flag(Some(i), None, m),
            _ => {}
        }
        if let Err((j, m)) = check_sub_steps(table, step) {
            flag(Some(i), j, m);
        }
        total += step.bound;
    }
    if prev.is_none_or(|p| p.max_abs_diff(&cert.to).is_none_or(|d| d > POINT_TOL)) {
        flag(None, None, "path does not end at the certified endpoint".into());
    }
    if (total - cert.total).abs() > TOTAL_TOL * total.abs().max(1.0) {
        flag(None, None, format!("total {} but steps sum to {total}", cert.total));
    }
    let env = cert.envelope;
    let (want_constant, want_coeff, want_anchor) = match (cert.group, table.sl3, table.sp2, cert.from) {
        (GroupTag::Sl3, Some(c), _, ChamberPoint::Sl3(x)) => (c.c_sl3, 1.0 / cert.p, x.t),
        (GroupTag::Sp2, _, Some(c), ChamberPoint::Sp2(x)) => (c.c7, -1.0 / (32.0 * cert.p), x.beta),
        _ => (f64::NAN, f64::NAN, f64::NAN),
    };
    if !bound_matches(env.constant, want_constant) || !bound_matches(env.coeff, want_coeff) {
        flag(None, None, "envelope constant or coefficient does not match the table".into());
    }
    if !near(want_anchor, env.anchor) {
        flag(None, None, format!("envelope anchor {} but path starts at {want_anchor}", env.anchor));
    }
    let envelope_value = env.value();
    if !(cert.total <= envelope_value * (1.0 + BOUND_TOL)) {
        flag(None, None, format!("total {} exceeds envelope {envelope_value}", cert.total));
    }
    CheckReport {
        valid: violations.is_empty(),
        recomputed_total: total,
        envelope_value,
        violations,
    }
}

/// Certified bound on `‖m_g − m_{g'}‖`, orienting the pair as the estimates need.
pub fn pair_certificate(g: &GroupElement, g2: &GroupElement, p: f64) -> Result<Certificate> {
    if g.tag().ambient() != g2.tag().ambient() {
        return Err(Error::MixedGroups(g.tag(), g2.tag()));
    }
    match (chamber(g)?, chamber(g2)?) {
        (ChamberPoint::Sl3(a), ChamberPoint::Sl3(b)) => {
            if b.t <= a.t {
                plan_path_sl3(a, b, p)
            } else {
                plan_path_sl3(b, a, p)
            }
        }
        (ChamberPoint::Sp2(a), ChamberPoint::Sp2(b)) => {
            let table = constants_sp2_default(p)?;
            if a.beta <= b.beta {
                plan_path_sp2(a, b, &table)
            } else {
                plan_path_sp2(b, a, &table)
            }
        }
        _ => unreachable!("same ambient group"),
    }
}

pub fn pair_bound(g: &GroupElement, g2: &GroupElement, p: f64) -> Result<f64> {
    pair_certificate(g, g2, p).map(|c| c.total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::d_rst;

    fn pt(r: f64, s: f64, t: f64) -> ChamberPointSL3 {
        ChamberPointSL3::new(r, s, t).unwrap()
    }

    #[test]
    fn sl3_constants_at_two() {
        let t = constants_sl3(2.0).unwrap();
        let c = t.sl3.unwrap();
        assert_eq!(t.c_tilde, 4.0);
        let want_c1 = 8.0 * (2.0 / (1.0 - (-1f64).exp()) + 1.0 + 0.5f64.exp());
        assert!((c.c1 - want_c1).abs() < 1e-12 && (c.c1 - 46.50).abs() < 0.01);
        assert!((c.c4 - 2.0 * 0.5f64.exp()).abs() < 1e-14);
        assert_eq!(c.c_sl3, c.c3.max(c.c4));
    }

    #[test]
    fn sp2_table_identities() {
        let t = constants_sp2(2.0, 1.0, 1.0).unwrap();
        let c = t.sp2.unwrap();
        assert_eq!(c.c5, (1.0 / 8.0f64).exp() * (c.c3_sp2 + c.c4_sp2));
        assert_eq!(c.c7, 2.0 * c.c3_sp2.max(c.c4_sp2) + c.c6);
        assert_eq!(c.c6, c.c_geom.max(2.0 * (5.0 / 16.0f64).exp()));
        assert!(t.verify().is_ok());
        assert!(constants_sp2(2.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn equal_points_give_empty_certificates() {
        let c = plan_path_sl3(pt(1.0, 0.0, -1.0), pt(1.0, 0.0, -1.0), 2.0).unwrap();
        assert!(c.steps.is_empty() && c.total == 0.0);
        let table = constants_sp2(2.0, 1.0, 1.0).unwrap();
        let q = ChamberPointSp2 { beta: 3.0, gamma: 1.0 };
        let c = plan_path_sp2(q, q, &table).unwrap();
        assert!(c.steps.is_empty());
    }

    #[test]
    fn staircase_with_one_zig_zag() {
        let c = plan_path_sl3(pt(4.0, -1.0, -3.0), pt(6.0, -1.0, -5.0), 2.0).unwrap();
        let report = check_certificate(&c);
        assert!(report.valid, "{report:?}");
        let tags: Vec<_> = c.steps.iter().map(|s| s.tag).collect();
        assert_eq!(tags, vec![StepTag::FixGamma1, StepTag::FixGamma3]);
        assert!(c.total <= c.envelope.value());
        let c_sl3 = c.constants.sl3.unwrap().c_sl3;
        assert!((c.envelope.value() - c_sl3 * (-1.5f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn small_t_shortcut() {
        let c = plan_path_sl3(pt(0.4, 0.0, -0.4), pt(3.0, -1.0, -2.0), 2.0).unwrap();
        assert_eq!(c.steps.len(), 1);
        assert_eq!(c.steps[0].tag, StepTag::SmallT);
        let c4 = c.constants.sl3.unwrap().c4;
        assert!((c.steps[0].bound - c4 * (-0.2f64).exp()).abs() < 1e-14);
        assert!(check_certificate(&c).valid);
    }

    #[test]
    fn sl3_ordering_violation() {
        assert!(matches!(
            plan_path_sl3(pt(6.0, -1.0, -5.0), pt(4.0, -1.0, -3.0), 2.0),
            Err(Error::Ordering(_))
        ));
    }

    #[test]
    fn sp2_mixed_pair() {
        let table = constants_sp2(2.0, 1.0, 1.0).unwrap();
        let c = plan_path_sp2(
            ChamberPointSp2 { beta: 9.0, gamma: 8.0 },
            ChamberPointSp2 { beta: 12.0, gamma: 1.0 },
            &table,
        )
        .unwrap();
        let report = check_certificate(&c);
        assert!(report.valid, "{report:?}");
        let c7 = table.sp2.unwrap().c7;
        assert!((c.envelope.value() - c7 * (-9.0f64 / 64.0).exp()).abs() < 1e-12);
    }

    #[test]
    fn sp2_ray_chain_uses_segments() {
        let table = constants_sp2(2.0, 1.0, 1.0).unwrap();
        let c = plan_path_sp2(
            ChamberPointSp2 { beta: 12.0, gamma: 6.0 },
            ChamberPointSp2 { beta: 20.0, gamma: 10.0 },
            &table,
        )
        .unwrap();
        assert!(c.steps.iter().all(|s| s.tag == StepTag::Sp2RaySegment));
        assert_eq!(c.steps.len(), 4);
        let report = check_certificate(&c);
        assert!(report.valid, "{report:?}");
        let c_geom = table.sp2.unwrap().c_geom;
        assert!(c.total <= c_geom * (-6.0f64 / 16.0).exp());
    }

    #[test]
    fn tampered_bound_is_caught() {
        let mut c = plan_path_sl3(pt(4.0, -1.0, -3.0), pt(9.0, -1.5, -7.5), 3.0).unwrap();
        assert!(check_certificate(&c).valid);
        c.steps[1].bound *= 0.5;
        let report = check_certificate(&c);
        assert!(!report.valid);
        assert_eq!(report.first_violation().unwrap().step, Some(1));
    }

    #[test]
    fn unequal_t_in_fix_gamma3_is_caught() {
        let table = constants_sl3(2.0).unwrap();
        let from = sl3(3.0, -1.0, -2.0);
        let to = sl3(4.5, -1.0, -3.5);
        let bound = step_bound(&table, StepTag::FixGamma3, &from, &to).unwrap();
        let step = PathStep { from, to, tag: StepTag::FixGamma3, bound, sub_steps: vec![] };
        let cert = Certificate::assemble(
            GroupTag::Sl3,
            table,
            (from, to),
            vec![step],
            Envelope { constant: table.sl3.unwrap().c_sl3, coeff: 0.5, anchor: -2.0 },
        );
        let report = check_certificate(&cert);
        assert!(!report.valid);
        assert_eq!(report.first_violation().unwrap().step, Some(0));
    }

    #[test]
    fn json_round_trip_keeps_seventeen_digits() {
        let c = plan_path_sl3(pt(4.0, -1.0, -3.0), pt(6.0, -2.0, -4.0), 2.0).unwrap();
        let text = c.to_json();
        assert!(text.contains("\"cTilde\": 4.0000000000000000e0"));
        assert!(text.contains("\"tag\": \"FixGamma"));
        let back = Certificate::from_json(&text).unwrap();
        assert_eq!(back, c);
        assert!(check_certificate(&back).valid);
    }

    #[test]
    fn concatenation_adds_totals() {
        let a = plan_path_sl3(pt(4.0, -1.0, -3.0), pt(6.0, -1.0, -5.0), 2.0).unwrap();
        let b = plan_path_sl3(pt(6.0, -1.0, -5.0), pt(9.0, -2.0, -7.0), 2.0).unwrap();
        let ab = a.concat(&b).unwrap();
        assert!((ab.total - (a.total + b.total)).abs() < 1e-12);
    }

    #[test]
    fn pair_bound_of_equal_elements_is_zero() {
        let g = d_rst(2.0, -1.0, -1.0).unwrap();
        assert_eq!(pair_bound(&g, &g, 2.0).unwrap(), 0.0);
    }
}
