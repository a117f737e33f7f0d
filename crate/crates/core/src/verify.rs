//! Numerical checks of the construction's bounds, each producing a report entry.

use serde::Serialize;
use serde_json::{json, Value};

use crate::catalog::FunctionOracle;
use crate::error::{Error, Result};
use crate::extension::SmoothEvaluator;
use crate::open_set::{Interval, KnotLadder, LadderShape, OpenSet, Side};
use crate::taming::knot_value;

/// Highest order [`fd_derivative`] accepts; beyond it round-off dominates.
pub const FD_ORDER_LIMIT: usize = 8;

/// Relative drop required of a derivative between the first and last probe depth.
pub const DECAY_FACTOR: f64 = 1e-8;

/// Absolute level below which a probed derivative counts as vanished.
pub const DECAY_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
    #[serde(rename = "N/A")]
    NotApplicable,
}

impl Status {
    pub fn from_pass(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::NotApplicable => "N/A",
        }
    }
}

/// One line of the verification report.
///
/// `worst_margin` is the smallest relative slack `(bound - attained) / bound`
/// over everything the check looked at; negative means violated. `None` for
/// N/A entries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportEntry {
    pub check: String,
    pub paper_ref: String,
    pub params: Value,
    pub worst_margin: Option<f64>,
    pub status: Status,
}

impl ReportEntry {
    fn new(check: &str, reference: &str, params: Value, worst_margin: f64, ok: bool) -> Self {
        Self {
            check: check.into(),
            paper_ref: reference.into(),
            params,
            worst_margin: Some(match (worst_margin.is_finite(), ok) {
                (true, _) => worst_margin,
                (false, true) => 1.0,
                (false, false) => -1.0,
            }),
            status: Status::from_pass(ok),
        }
    }

    fn not_applicable(check: &str, reference: &str, params: Value) -> Self {
        Self {
            check: check.into(),
            paper_ref: reference.into(),
            params,
            worst_margin: None,
            status: Status::NotApplicable,
        }
    }

    pub fn passed(&self) -> bool {
        self.status != Status::Fail
    }
}

fn slack(bound: f64, attained: f64) -> f64 {
    if bound > 0.0 {
        (bound - attained) / bound
    } else if attained <= 0.0 {
        1.0
    } else {
        f64::NEG_INFINITY
    }
}

/// Distance from `|y|` to the next larger double.
pub fn ulp(y: f64) -> f64 {
    let a = y.abs();
    if !a.is_finite() {
        return f64::NAN;
    }
    f64::from_bits(a.to_bits() + 1) - a
}

/// Central `i`-th difference quotient
/// `Σ_j (-1)^j C(i,j) f(x + (i/2 - j) step) / step^i`.
pub fn fd_derivative(f: &dyn Fn(f64) -> f64, i: usize, x: f64, step: f64) -> Result<f64> {
    if i > FD_ORDER_LIMIT {
        return Err(Error::Contract(format!(
            "finite differences of order {i} exceed {FD_ORDER_LIMIT}"
        )));
    }
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::Contract(format!(
            "finite-difference step must be positive, got {step}"
        )));
    }
    if i == 0 {
        return Ok(f(x));
    }
    let mut coef = 1.0;
    let mut sum = 0.0;
    for j in 0..=i {
        let offset = (i as f64 / 2.0 - j as f64) * step;
        sum += coef * f(x + offset);
        coef *= -((i - j) as f64) / (j + 1) as f64;
    }
    Ok(sum / step.powi(i as i32))
}

/// The bounded window standing in for a component in sampling: the component
/// itself, or the unit window next to its finite end.
pub fn sampling_window(c: &Interval) -> (f64, f64) {
    match (c.lo.is_finite(), c.hi.is_finite()) {
        (true, true) => (c.lo, c.hi),
        (false, true) => (c.hi - 1.0, c.hi),
        (true, false) => (c.lo, c.lo + 1.0),
        (false, false) => (-1.0, 1.0),
    }
}

/// `count` cell midpoints spread over the sampling windows of `set`, in
/// proportion to window length (largest remainder, at least one per component).
pub fn sample_open_set(set: &OpenSet, count: usize) -> Vec<f64> {
    let windows: Vec<(f64, f64)> = set.components().iter().map(sampling_window).collect();
    if windows.is_empty() {
        return Vec::new();
    }
    let total: f64 = windows.iter().map(|(a, b)| b - a).sum();
    let quotas: Vec<f64> = windows
        .iter()
        .map(|(a, b)| count as f64 * (b - a) / total)
        .collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..windows.len()).collect();
    order.sort_by(|&i, &j| {
        (quotas[j] - quotas[j].floor()).total_cmp(&(quotas[i] - quotas[i].floor()))
    });
    let missing = count.saturating_sub(counts.iter().sum());
    for &i in order.iter().take(missing) {
        counts[i] += 1;
    }
    let mut out = Vec::with_capacity(count + windows.len());
    for ((a, b), n) in windows.into_iter().zip(counts) {
        let n = n.max(1);
        out.extend((0..n).map(|j| a + (b - a) * (j as f64 + 0.5) / n as f64));
    }
    out
}

/// Samples of the closed set `ℝ ∖ U`: its boundary points plus midpoints of
/// the sampling windows of `Int(ℝ ∖ U)`.
pub fn sample_complement(u: &OpenSet, count: usize) -> Vec<f64> {
    let interior = u.complement_interior();
    let mut out = u.boundary();
    if !interior.is_empty() {
        out.extend(sample_open_set(
            &interior,
            count.saturating_sub(out.len()).max(1),
        ));
    }
    out
}

/// `|h - f·g| <= ulp(f·g)` at samples of `U`.
pub fn check_extension_identity(
    g: &SmoothEvaluator,
    h: &SmoothEvaluator,
    samples: usize,
) -> ReportEntry {
    const NAME: &str = "extension_identity";
    const REF: &str = "h restricted to U equals f·g";
    let Some(c) = g.construction() else {
        return ReportEntry::not_applicable(NAME, REF, json!({}));
    };
    let points = sample_open_set(&c.u, samples);
    let mut worst: f64 = 1.0;
    let mut violations = 0usize;
    for &x in &points {
        let product = c.f.value(x) * g.eval(x);
        let dev = (h.eval(x) - product).abs();
        let tol = ulp(product);
        if !(dev <= tol) {
            violations += 1;
        }
        worst = worst.min(slack(tol, dev));
    }
    ReportEntry::new(
        NAME,
        REF,
        json!({"samples": points.len(), "violations": violations}),
        worst,
        violations == 0,
    )
}

fn ladder_sides(ladder: &KnotLadder) -> Vec<Side> {
    ladder.sides().collect()
}

/// `g(knot_l) = L²/(2^{2l+1} S_l)` bit for bit, and consecutive knot values shrink by 4 or more.
pub fn check_knot_values(g: &SmoothEvaluator) -> ReportEntry {
    const NAME: &str = "knot_values";
    const REF: &str = "g at the l-th knot equals L^2/(2^(2l+1) S_l)";
    let Some(c) = g.construction() else {
        return ReportEntry::not_applicable(NAME, REF, json!({}));
    };
    let mut mismatches = 0usize;
    let mut ratio_violations = 0usize;
    let mut worst: f64 = 1.0;
    let mut checked = 0usize;
    for comp in &c.components {
        let ladder = &comp.ladder;
        for side in ladder_sides(ladder) {
            let consts = comp
                .side(side)
                .expect("side constants exist for ladder sides");
            let mut prev: Option<f64> = None;
            for l in 1..=ladder.max_depth {
                let x = ladder.knot_unchecked(side, l);
                let got = g.eval(x);
                let want = knot_value(consts.length, l, consts.s(l));
                checked += 1;
                if got.to_bits() != want.to_bits() {
                    mismatches += 1;
                    worst = worst.min(-((got - want).abs() / want.abs().max(f64::MIN_POSITIVE)));
                }
                if let Some(p) = prev {
                    let ok = if p > 0.0 { got <= p / 4.0 } else { got == 0.0 };
                    if !ok {
                        ratio_violations += 1;
                    }
                    if p > 0.0 {
                        worst = worst.min(slack(0.25, got / p));
                    }
                }
                prev = Some(got);
            }
        }
    }
    ReportEntry::new(
        NAME,
        REF,
        json!({"knots": checked, "mismatches": mismatches, "ratio_violations": ratio_violations}),
        worst,
        mismatches == 0 && ratio_violations == 0,
    )
}

/// `|h| <= L²/2^{2n+1}` at 16 points of every segment `n <= max_depth - 1`.
pub fn check_product_bound(h: &SmoothEvaluator) -> ReportEntry {
    const NAME: &str = "product_bound";
    const REF: &str = "|f g| <= L^2/2^(2n+1) on the n-th segment";
    const PER_SEGMENT: usize = 16;
    let Some(c) = h.construction() else {
        return ReportEntry::not_applicable(NAME, REF, json!({}));
    };
    let mut worst: f64 = 1.0;
    let mut violations = 0usize;
    let mut samples = 0usize;
    for comp in &c.components {
        let ladder = &comp.ladder;
        let l = ladder.length;
        for side in ladder_sides(ladder) {
            for n in 1..ladder.max_depth {
                let bound = l * l / 2f64.powi(2 * n as i32 + 1);
                let (k0, k1) = (
                    ladder.knot_unchecked(side, n),
                    ladder.knot_unchecked(side, n + 1),
                );
                for j in 0..PER_SEGMENT {
                    let x = k0 + (k1 - k0) * j as f64 / PER_SEGMENT as f64;
                    let attained = h.eval(x).abs();
                    samples += 1;
                    if !(attained <= bound) {
                        violations += 1;
                    }
                    worst = worst.min(slack(bound, attained));
                }
            }
        }
    }
    ReportEntry::new(
        NAME,
        REF,
        json!({"samples": samples, "violations": violations}),
        worst,
        violations == 0,
    )
}

/// `|h^{(r-1)}(x)| / dist(x, end) <= 5rL/2^{n+2} + L/2^n` at knots `n >= r`
/// and segment midpoints.
pub fn check_quotient_bound(h: &SmoothEvaluator, r: usize) -> ReportEntry {
    const NAME: &str = "quotient_bound";
    const REF: &str = "|h^(r-1)(x)|/(v-x) <= 5rL/2^(n+2) + L/2^n near each endpoint";
    let Some(c) = h.construction() else {
        return ReportEntry::not_applicable(NAME, REF, json!({"r": r}));
    };
    if r == 0 || !h.order_bound().allows(r - 1) {
        return ReportEntry::not_applicable(NAME, REF, json!({"r": r, "k": c.k().to_string()}));
    }
    let mut worst: f64 = 1.0;
    let mut violations = 0usize;
    let mut samples = 0usize;
    for comp in &c.components {
        let ladder = &comp.ladder;
        let l = ladder.length;
        for side in ladder_sides(ladder) {
            let end = ladder.end(side);
            for n in r.max(1)..ladder.max_depth {
                let bound = 5.0 * r as f64 * l / 2f64.powi(n as i32 + 2) + l / 2f64.powi(n as i32);
                let (k0, k1) = (
                    ladder.knot_unchecked(side, n),
                    ladder.knot_unchecked(side, n + 1),
                );
                for x in [k0, 0.5 * (k0 + k1)] {
                    let dist = (end - x).abs();
                    let d = match h.eval_deriv(r - 1, x) {
                        Ok(d) => d.abs(),
                        Err(_) => f64::INFINITY,
                    };
                    let attained = d / dist;
                    samples += 1;
                    if !(attained <= bound) {
                        violations += 1;
                    }
                    worst = worst.min(slack(bound, attained));
                }
            }
        }
    }
    ReportEntry::new(
        NAME,
        REF,
        json!({"r": r, "samples": samples, "violations": violations}),
        worst,
        violations == 0,
    )
}

/// Probe positions and stencil steps for approaching `end` from inside a ladder.
fn probe(ladder: &KnotLadder, side: Side, j: usize, r: usize) -> (f64, f64) {
    let delta = ladder.length * 2f64.powi(-(j as i32));
    // 0.7δ from the end keeps the stencil inside one segment and away from
    // knots, where every derivative of g vanishes identically
    let x = match side {
        Side::Right => ladder.end(side) - 0.7 * delta,
        Side::Left => ladder.end(side) + 0.7 * delta,
    };
    (x, delta / (10.0 * r as f64))
}

fn decays(series: &[f64]) -> (bool, f64) {
    let (Some(&first), Some(&last)) = (series.first(), series.last()) else {
        return (true, 1.0);
    };
    let threshold = (DECAY_FACTOR * first.abs()).max(DECAY_FLOOR);
    let ok = last.abs() < threshold;
    // allow 10% of steps to grow by more than 10%, ignoring values under the floor
    let transitions = series.len().saturating_sub(1);
    let allowed = (transitions as f64 * 0.1).ceil() as usize;
    let jumps = series
        .windows(2)
        .filter(|w| w[1].abs() > 1.1 * w[0].abs() && w[1].abs() > DECAY_FLOOR)
        .count();
    (ok && jumps <= allowed, slack(threshold, last.abs()))
}

/// Order-`r` derivatives of `e` probed at distance `~L/2^j`, `j ∈ depths`, from
/// every finite end of every component of `V` must decay to 0, both as finite
/// differences and as analytic values.
pub fn check_boundary_vanishing(e: &SmoothEvaluator, r: usize, depths: &[usize]) -> ReportEntry {
    const NAME: &str = "boundary_vanishing";
    const REF: &str = "derivatives of g and h vanish on the boundary of V";
    let role = e.role().as_str();
    let Some(c) = e.construction() else {
        return ReportEntry::not_applicable(NAME, REF, json!({"function": role, "order": r}));
    };
    if !e.order_bound().allows(r) || r == 0 || r > FD_ORDER_LIMIT {
        return ReportEntry::not_applicable(
            NAME,
            REF,
            json!({"function": role, "order": r, "k": e.order_bound().to_string()}),
        );
    }
    let f = |x: f64| e.eval(x);
    let mut worst: f64 = 1.0;
    let mut failures = Vec::new();
    let mut ends = 0usize;
    for (m, comp) in c.components.iter().enumerate() {
        let ladder = &comp.ladder;
        if ladder.shape == LadderShape::Whole {
            continue;
        }
        for side in ladder_sides(ladder) {
            ends += 1;
            let mut fd_series = Vec::with_capacity(depths.len());
            let mut exact_series = Vec::with_capacity(depths.len());
            for &j in depths {
                let (x, step) = probe(ladder, side, j, r);
                fd_series.push(fd_derivative(&f, r, x, step).unwrap_or(f64::INFINITY));
                exact_series.push(e.eval_deriv(r, x).unwrap_or(f64::INFINITY));
            }
            let (fd_ok, fd_margin) = decays(&fd_series);
            let (ex_ok, ex_margin) = decays(&exact_series);
            worst = worst.min(fd_margin).min(ex_margin);
            if !(fd_ok && ex_ok) {
                failures.push(json!({"component": m, "end": ladder.end(side)}));
            }
        }
    }
    ReportEntry::new(
        NAME,
        REF,
        json!({"function": role, "order": r, "depths": depths, "ends": ends, "failures": failures}),
        worst,
        failures.is_empty(),
    )
}

/// Central differences of `e` agree with `eval_deriv(e, 1, ·)` at interior samples of `V`.
pub fn check_fd_consistency(e: &SmoothEvaluator, samples: usize) -> ReportEntry {
    const NAME: &str = "fd_consistency";
    const REF: &str = "first derivatives agree with central differences inside V";
    let Some(c) = e.construction() else {
        return ReportEntry::not_applicable(NAME, REF, json!({"function": e.role().as_str()}));
    };
    if !e.order_bound().allows(1) {
        return ReportEntry::not_applicable(NAME, REF, json!({"function": e.role().as_str()}));
    }
    let f = |x: f64| e.eval(x);
    let mut worst: f64 = 1.0;
    let mut violations = 0usize;
    let points = sample_open_set(&c.v, samples);
    for &x in &points {
        let scale = match c.locate(x) {
            crate::open_set::Location::Segment {
                component,
                side,
                index,
            } => {
                let s = c.segment_spline(component, side, index);
                s.c - s.a
            }
            _ => 1.0,
        };
        let step = 1e-4 * scale;
        let exact = e.eval_deriv(1, x).unwrap_or(f64::NAN);
        let fd = fd_derivative(&f, 1, x, step).unwrap_or(f64::NAN);
        let tol = 1e-5 * (exact.abs() + e.eval(x).abs() / scale);
        let dev = (fd - exact).abs();
        if !(dev <= tol) {
            violations += 1;
        }
        worst = worst.min(slack(tol, dev));
    }
    ReportEntry::new(
        NAME,
        REF,
        json!({"function": e.role().as_str(), "samples": points.len(), "violations": violations}),
        worst,
        violations == 0,
    )
}

/// `a > 0` at every `inside` sample and `a = 0` at every `outside` sample.
pub fn check_cozero(a: &SmoothEvaluator, inside: &[f64], outside: &[f64]) -> ReportEntry {
    let positive = inside.iter().filter(|&&x| a.eval(x) > 0.0).count();
    let zero = outside.iter().filter(|&&x| a.eval(x) == 0.0).count();
    let ok = positive == inside.len() && zero == outside.len();
    ReportEntry::new(
        "cozero_witness",
        "the witness is positive exactly on U",
        json!({"inside": inside.len(), "positive": positive, "outside": outside.len(), "zero": zero}),
        if ok { 1.0 } else { -1.0 },
        ok,
    )
}

/// `a·b = 0` at `samples` points of `[lo, hi]`, and `a + b` is non-zero
/// somewhere in each of `cells` equal cells of `[lo, hi]`.
pub fn check_complement(
    a: &SmoothEvaluator,
    b: &dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    samples: usize,
    cells: usize,
) -> ReportEntry {
    const PROBES_PER_CELL: usize = 11;
    let mut product_violations = 0usize;
    for j in 0..samples {
        let x = lo + (hi - lo) * (j as f64 + 0.5) / samples as f64;
        if a.eval(x) * b(x) != 0.0 {
            product_violations += 1;
        }
    }
    let width = (hi - lo) / cells as f64;
    let mut empty_cells = Vec::new();
    for cell in 0..cells {
        let start = lo + width * cell as f64;
        let hit = (0..PROBES_PER_CELL).any(|t| {
            let x = start + width * (t as f64 + 0.5) / PROBES_PER_CELL as f64;
            a.eval(x) + b(x) != 0.0
        });
        if !hit {
            empty_cells.push(cell);
        }
    }
    let ok = product_violations == 0 && empty_cells.is_empty();
    ReportEntry::new(
        "complement_witness",
        "a b = 0 and a + b has dense cozero set",
        json!({
            "window": [lo, hi],
            "samples": samples,
            "product_violations": product_violations,
            "cells": cells,
            "cells_without_cozero_points": empty_cells,
        }),
        if ok { 1.0 } else { -1.0 },
        ok,
    )
}
