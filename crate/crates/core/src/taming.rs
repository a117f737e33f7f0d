//! Taming constants `A_{n,i}`, `B_{n,i}`, `S_n` and the knot values of `g`.

use std::fmt;

use crate::catalog::{FunctionOracle, OrderBound};
use crate::error::{Error, Result};
use crate::mspline::mspline_sup_deriv;
use crate::open_set::{KnotLadder, LadderShape, Side};
use crate::search::grid_max_abs;

/// Grid size for [`derivative_sup`].
pub const DERIVATIVE_SUP_POINTS: usize = 1 << 12;

/// Relative widening applied to sup estimates, as a fraction of the observed range.
pub const SUP_MARGIN: f64 = 0.05;

/// Highest derivative order used inside the construction.
pub const DEFAULT_MAX_ORDER: usize = 32;

/// An upper estimate of `sup |f^{(i)}|` on `[lo, hi]`.
///
/// The grid maximum is widened by `SUP_MARGIN · (max - min)`, so a constant
/// `|f^{(i)}|` is returned exactly.
pub fn derivative_sup(f: &dyn FunctionOracle, i: usize, lo: f64, hi: f64) -> Result<f64> {
    if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Construction(format!(
            "bad sup interval [{lo}, {hi}]"
        )));
    }
    if !f.order_bound().allows(i) {
        return Err(Error::OrderExceeded {
            order: i,
            bound: f.order_bound().capped(usize::MAX),
        });
    }
    let found =
        grid_max_abs(|x| f.deriv(i, x), lo, hi, DERIVATIVE_SUP_POINTS).ok_or_else(|| {
            Error::Construction(format!(
                "{} derivative {i} is undefined somewhere in [{lo}, {hi}]",
                f.label()
            ))
        })?;
    if found.max.is_infinite() {
        return Ok(f64::INFINITY);
    }
    Ok(found.max + SUP_MARGIN * (found.max - found.min))
}

/// `B_{n,i} = 1 + max_{j<=n} sup |Φ_{knot_j, knot_{j+1}}^{(i)}|`.
pub fn compute_b(ladder: &KnotLadder, side: Side, n: usize, i: usize) -> Result<f64> {
    let mut best: f64 = 0.0;
    for j in 1..=n {
        let (lo, hi) = ordered(
            ladder.knot_unchecked(side, j),
            ladder.knot_unchecked(side, j + 1),
        );
        best = best.max(mspline_sup_deriv(i, lo, hi)?);
    }
    Ok(1.0 + best)
}

fn ordered(a: f64, b: f64) -> (f64, f64) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Case {
    /// `L >= 1`, or an unbounded component.
    A,
    /// `L < 1`: the first `p` stages use derivatives up to order `p`.
    B,
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Case::A => "A",
            Case::B => "B",
        })
    }
}

/// Case flag and threshold `p = ⌊1/L⌋` (Case B only).
pub fn classify(ladder: &KnotLadder) -> (Case, Option<usize>) {
    if ladder.shape != LadderShape::Bounded || ladder.length >= 1.0 {
        (Case::A, None)
    } else {
        (Case::B, Some((1.0 / ladder.length).floor() as usize))
    }
}

/// `L² / (2^{2l+1} S_l)`.
pub fn knot_value(length: f64, l: usize, s: f64) -> f64 {
    length * length / (2f64.powi(2 * l as i32 + 1) * s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TamingOptions {
    pub max_depth: usize,
    pub max_order: usize,
}

impl Default for TamingOptions {
    fn default() -> Self {
        Self {
            max_depth: crate::open_set::DEFAULT_MAX_DEPTH,
            max_order: DEFAULT_MAX_ORDER,
        }
    }
}

/// Constants for one side of one component.
///
/// Tables are indexed from stage 1: `a_table[n - 1][i]` is `A_{n,i}`. Rows
/// stop once `S_n` saturates; from then on `S` is `+∞` and knot values are 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SideConstants {
    pub side: Side,
    pub case: Case,
    pub p: Option<usize>,
    pub k: OrderBound,
    pub length: f64,
    pub max_order: usize,
    pub a_table: Vec<Vec<f64>>,
    pub b_table: Vec<Vec<f64>>,
    /// `S_n` for `n = 1..=max_depth`.
    pub s_table: Vec<f64>,
    /// `g` at knot `l` for `l = 1..=max_depth`.
    pub knot_values: Vec<f64>,
    /// First stage whose knot value is 0.
    pub saturated_at: Option<usize>,
}

impl SideConstants {
    /// Highest derivative order in the stage-`n` products.
    pub fn top_order(&self, n: usize) -> usize {
        top_order(self.case, self.p, n, self.max_order)
    }

    pub fn a(&self, n: usize, i: usize) -> Option<f64> {
        self.a_table.get(n.checked_sub(1)?)?.get(i).copied()
    }

    pub fn b(&self, n: usize, i: usize) -> Option<f64> {
        self.b_table.get(n.checked_sub(1)?)?.get(i).copied()
    }

    /// `S_n`; `+∞` past the last stored stage.
    pub fn s(&self, n: usize) -> f64 {
        n.checked_sub(1)
            .and_then(|j| self.s_table.get(j))
            .copied()
            .unwrap_or(f64::INFINITY)
    }

    /// Knot value at `l`; 0 past the last stored knot.
    pub fn knot(&self, l: usize) -> f64 {
        l.checked_sub(1)
            .and_then(|j| self.knot_values.get(j))
            .copied()
            .unwrap_or(0.0)
    }

    fn raw_products(&self) -> Vec<f64> {
        let depth = self.s_table.len();
        (1..=depth)
            .map(
                |n| match (self.a_table.get(n - 1), self.b_table.get(n - 1)) {
                    (Some(a), Some(b)) => a.iter().product::<f64>() * b.iter().product::<f64>(),
                    _ => f64::INFINITY,
                },
            )
            .collect()
    }

    /// Rebuilds `S` and the knot values from raw products, raised to at least `floor`.
    fn finalize(&mut self, raw: &[f64], floor: f64) {
        let mut running: f64 = floor;
        self.saturated_at = None;
        self.s_table.clear();
        self.knot_values.clear();
        for (j, &s) in raw.iter().enumerate() {
            let l = j + 1;
            running = running.max(s);
            if self.saturated_at.is_none()
                && !(knot_value(self.length, l, running) >= f64::MIN_POSITIVE)
            {
                self.saturated_at = Some(l);
            }
            if self.saturated_at.is_some() {
                running = f64::INFINITY;
            }
            self.s_table.push(running);
            self.knot_values.push(knot_value(self.length, l, running));
        }
    }
}

fn top_order(case: Case, p: Option<usize>, n: usize, max_order: usize) -> usize {
    let top = match (case, p) {
        (Case::B, Some(p)) if n <= p => p,
        _ => n,
    };
    top.min(max_order)
}

/// Builds the tables for one side, stopping at saturation.
fn build_side(
    ladder: &KnotLadder,
    side: Side,
    f: &dyn FunctionOracle,
    opts: &TamingOptions,
) -> Result<SideConstants> {
    let (case, p) = classify(ladder);
    let k = f.order_bound();
    let max_order = opts.max_order.min(DEFAULT_MAX_ORDER);
    let depth = ladder.max_depth.min(opts.max_depth).max(2);
    let mut out = SideConstants {
        side,
        case,
        p,
        k,
        length: ladder.length,
        max_order,
        a_table: Vec::new(),
        b_table: Vec::new(),
        s_table: Vec::new(),
        knot_values: Vec::new(),
        saturated_at: None,
    };

    // running sup of |f^{(order)}| over the segments seen so far, per order
    let mut f_sup: Vec<f64> = Vec::new();
    let mut f_seen: Vec<usize> = Vec::new();
    let mut b_sup: Vec<f64> = Vec::new();
    let segment = |j: usize| {
        ordered(
            ladder.knot_unchecked(side, j),
            ladder.knot_unchecked(side, j + 1),
        )
    };

    let mut raw = Vec::with_capacity(depth);
    for n in 1..=depth {
        let top = top_order(case, p, n, max_order);
        while f_sup.len() <= top {
            f_sup.push(0.0);
            f_seen.push(0);
            b_sup.push(0.0);
        }
        let mut a_row = Vec::with_capacity(top + 1);
        let mut b_row = Vec::with_capacity(top + 1);
        for i in 0..=top {
            let order = match k {
                OrderBound::Finite(k) => i.min(k),
                OrderBound::Infinite => i,
            };
            while f_seen[order] < n {
                let (lo, hi) = segment(f_seen[order] + 1);
                f_sup[order] = f_sup[order].max(derivative_sup(f, order, lo, hi)?);
                f_seen[order] += 1;
            }
            a_row.push(1.0 + f_sup[order]);
            let (lo, hi) = segment(n);
            b_sup[i] = b_sup[i].max(mspline_sup_deriv(i, lo, hi)?);
            b_row.push(1.0 + b_sup[i]);
        }
        let s = a_row.iter().product::<f64>() * b_row.iter().product::<f64>();
        out.a_table.push(a_row);
        out.b_table.push(b_row);
        raw.push(s);
        if !(knot_value(ladder.length, n, s) >= f64::MIN_POSITIVE) {
            break;
        }
    }
    raw.resize(depth, f64::INFINITY);
    out.finalize(&raw, 1.0);
    Ok(out)
}

/// Constants for both sides of one component of `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentConstants {
    pub ladder: KnotLadder,
    pub left: Option<SideConstants>,
    pub right: Option<SideConstants>,
}

impl ComponentConstants {
    /// Computes both sides and makes them agree at the shared midpoint knot by
    /// using `max(S_1^left, S_1^right)` as a floor for every `S_n`.
    pub fn build(ladder: KnotLadder, f: &dyn FunctionOracle, opts: &TamingOptions) -> Result<Self> {
        let mut out = Self {
            ladder,
            left: None,
            right: None,
        };
        for side in ladder.sides() {
            let c = build_side(&ladder, side, f, opts)?;
            match side {
                Side::Left => out.left = Some(c),
                Side::Right => out.right = Some(c),
            }
        }
        out.harmonize(1.0);
        Ok(out)
    }

    pub fn side(&self, side: Side) -> Option<&SideConstants> {
        match side {
            Side::Left => self.left.as_ref(),
            Side::Right => self.right.as_ref(),
        }
    }

    /// Rebuilds `S` on both sides with floor `max(floor, S_1^left, S_1^right)`.
    fn harmonize(&mut self, floor: f64) {
        let raws: Vec<Vec<f64>> = [&self.left, &self.right]
            .into_iter()
            .flatten()
            .map(|c| c.raw_products())
            .collect();
        let shared = raws
            .iter()
            .filter_map(|r| r.first().copied())
            .fold(floor, f64::max);
        for (c, raw) in [&mut self.left, &mut self.right]
            .into_iter()
            .flatten()
            .zip(raws)
        {
            c.finalize(&raw, shared);
        }
    }

    /// Every `A` and `B` entry divided by `factor`, with `S` and the knot
    /// values rebuilt from the shrunken tables. Used for fault injection, so
    /// the usual floor `S >= 1` is dropped as well.
    pub fn deflated(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for c in [&mut out.left, &mut out.right].into_iter().flatten() {
            for row in c.a_table.iter_mut().chain(c.b_table.iter_mut()) {
                row.iter_mut().for_each(|v| *v /= factor);
            }
        }
        out.harmonize(0.0);
        out
    }

    /// `L² / 2^{2·max_depth+1}`: the largest value dropped by truncating the ladder.
    pub fn truncation_error_bound(&self) -> f64 {
        let depth = self.ladder.max_depth as i32;
        self.ladder.length * self.ladder.length * 2f64.powi(-(2 * depth + 1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::make_oracle;
    use crate::mollifier::sup_phi_big_deriv;
    use crate::open_set::{Interval, OpenSet};
    use approx::assert_relative_eq;
    use serde_json::{json, Map, Value};

    fn oracle(id: &str, params: Value, lo: f64, hi: f64) -> crate::catalog::CatalogOracle {
        let domain = OpenSet::normalize(&[(lo, hi)]).unwrap();
        make_oracle(id, params.as_object().unwrap_or(&Map::new()), domain).unwrap()
    }

    fn unit_ladder() -> KnotLadder {
        KnotLadder::new(Interval::new(0.0, 1.0).unwrap(), 40)
    }

    #[test]
    fn derivative_sup_examples() {
        let one = oracle("constant", json!({"c": 1.0}), 0.0, 1.0);
        for i in 1..5 {
            assert_eq!(derivative_sup(&one, i, 0.2, 0.7).unwrap(), 0.0);
        }
        let rec = oracle("reciprocal", Value::Null, 0.0, 1.0);
        let s = derivative_sup(&rec, 0, 0.5, 0.875).unwrap();
        assert!((2.0..=2.1).contains(&s), "{s}");

        let sr = oracle("sin_reciprocal", Value::Null, 0.0, 1.0);
        let bound = derivative_sup(&sr, 1, 0.5, 0.75).unwrap();
        let n = 1_000_000;
        let reference = (0..=n)
            .map(|j| {
                let x = 0.5 + 0.25 * j as f64 / n as f64;
                ((1.0 / x).cos() / (x * x)).abs()
            })
            .fold(0.0, f64::max);
        assert!(bound >= reference);
    }

    #[test]
    fn derivative_sup_rejects_orders_beyond_k() {
        let f = oracle("ck_only", json!({"k": 2, "shift": 0.5}), 0.0, 1.0);
        assert!(matches!(
            derivative_sup(&f, 3, 0.1, 0.2),
            Err(Error::OrderExceeded { .. })
        ));
    }

    #[test]
    fn a_and_b_examples() {
        let ladder = unit_ladder();
        let one = oracle("constant", json!({"c": 1.0}), 0.0, 1.0);
        let c = ComponentConstants::build(ladder, &one, &TamingOptions::default()).unwrap();
        let right = c.right.as_ref().unwrap();
        assert_eq!(right.a(1, 0), Some(2.0));
        assert_eq!(right.a(1, 1), Some(1.0));
        assert_eq!(right.b(1, 0), Some(2.0));
        assert_relative_eq!(
            right.b(1, 1).unwrap(),
            1.0 + 8.0 * sup_phi_big_deriv(1),
            max_relative = 1e-15
        );
        assert!((right.b(1, 1).unwrap() - 7.6287).abs() < 2e-3);
        assert_relative_eq!(
            compute_b(&ladder, Side::Right, 1, 1).unwrap(),
            right.b(1, 1).unwrap()
        );
        assert_eq!(compute_b(&ladder, Side::Right, 5, 0).unwrap(), 2.0);

        let rec = oracle("reciprocal", Value::Null, 0.0, 1.0);
        let c = ComponentConstants::build(ladder, &rec, &TamingOptions::default()).unwrap();
        let a = c.right.as_ref().unwrap().a(1, 0).unwrap();
        assert!((3.0..=3.1).contains(&a), "{a}");
    }

    #[test]
    fn s_and_knot_value_examples() {
        let one = oracle("constant", json!({"c": 1.0}), 0.0, 1.0);
        let c = ComponentConstants::build(unit_ladder(), &one, &TamingOptions::default()).unwrap();
        let right = c.right.as_ref().unwrap();
        assert_eq!(right.case, Case::A);
        let s1 = 2.0 * 2.0 * (1.0 + 8.0 * sup_phi_big_deriv(1));
        assert_relative_eq!(right.s(1), s1, max_relative = 1e-15);
        assert!((right.s(1) - 30.51).abs() < 0.01);
        assert_eq!(right.knot(1), knot_value(1.0, 1, right.s(1)));
        assert!((right.knot(1) - 0.004096).abs() < 1e-6);
        assert_eq!(c.left.as_ref().unwrap().knot(1), right.knot(1));
    }

    #[test]
    fn case_b_threshold() {
        let ladder = |l: f64| KnotLadder::new(Interval::new(0.0, l).unwrap(), 40);
        assert_eq!(classify(&ladder(0.5)), (Case::B, Some(2)));
        assert_eq!(classify(&ladder(1.0 / 3.0)), (Case::B, Some(3)));
        assert_eq!(classify(&ladder(1.0)), (Case::A, None));
        assert_eq!(classify(&ladder(4.0)), (Case::A, None));
        let unbounded = KnotLadder::new(Interval::new(f64::NEG_INFINITY, 0.0).unwrap(), 40);
        assert_eq!(classify(&unbounded), (Case::A, None));

        let f = oracle("constant", json!({"c": 1.0}), 0.0, 0.5);
        let c = ComponentConstants::build(ladder(0.5), &f, &TamingOptions::default()).unwrap();
        let right = c.right.as_ref().unwrap();
        assert_eq!(right.a_table[0].len(), 3);
        assert_eq!(right.a_table[1].len(), 3);
        assert_eq!(right.a_table[2].len(), 4);
    }

    #[test]
    fn tables_are_monotone_and_knot_values_shrink() {
        let fixtures = [
            ("constant", json!({"c": 1.0}), 0.0, 1.0),
            ("reciprocal", Value::Null, 0.0, 1.0),
            ("sin_reciprocal", Value::Null, 0.0, 1.0),
            ("ck_only", json!({"k": 2, "shift": 0.5}), 0.0, 1.0),
            ("exp", json!({"rate": 1.0}), 2.0, 5.5),
            ("log", Value::Null, 0.5, 0.9),
        ];
        for (id, params, lo, hi) in fixtures {
            let f = oracle(id, params, lo, hi);
            let ladder = KnotLadder::new(Interval::new(lo, hi).unwrap(), 40);
            let c = ComponentConstants::build(ladder, &f, &TamingOptions::default()).unwrap();
            for side in [&c.left, &c.right].into_iter().flatten() {
                assert_eq!(side.s_table.len(), 40);
                assert!(side.saturated_at.is_some(), "{id}");
                for n in 1..side.a_table.len() {
                    for i in 0..side.a_table[n - 1].len() {
                        assert!(side.a(n + 1, i).unwrap() >= side.a(n, i).unwrap());
                        assert!(side.b(n + 1, i).unwrap() >= side.b(n, i).unwrap());
                        assert!(side.a(n, i).unwrap() >= 1.0);
                    }
                }
                for l in 1..40 {
                    assert!(side.s(l + 1) >= side.s(l));
                    assert!(side.s(l) >= 1.0);
                    assert_eq!(side.knot(l), knot_value(side.length, l, side.s(l)));
                    assert!(
                        side.knot(l) <= side.length * side.length / 2f64.powi(2 * l as i32 + 1)
                    );
                    if side.knot(l) > 0.0 {
                        assert!(side.knot(l + 1) <= side.knot(l) / 4.0, "{id} l = {l}");
                    } else {
                        assert_eq!(side.knot(l + 1), 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn finite_k_reuses_the_top_derivative() {
        let f = oracle("ck_only", json!({"k": 2, "shift": 0.3}), 0.0, 1.0);
        let c = ComponentConstants::build(unit_ladder(), &f, &TamingOptions::default()).unwrap();
        let right = c.right.as_ref().unwrap();
        for n in 3..right.a_table.len() {
            for i in 3..=n {
                assert_eq!(right.a(n, i), right.a(n, 2));
            }
        }
    }

    #[test]
    fn deflation_shrinks_constants() {
        let f = oracle("reciprocal", Value::Null, 0.0, 1.0);
        let c = ComponentConstants::build(unit_ladder(), &f, &TamingOptions::default()).unwrap();
        let d = c.deflated(10.0);
        let (r, dr) = (c.right.as_ref().unwrap(), d.right.as_ref().unwrap());
        assert_relative_eq!(dr.a(1, 0).unwrap(), r.a(1, 0).unwrap() / 10.0);
        assert!(dr.s(1) < r.s(1) / 100.0);
        assert!(dr.knot(2) > r.knot(2));
        assert_eq!(d.left.as_ref().unwrap().knot(1), dr.knot(1));
    }

    #[test]
    fn unit_window_for_unbounded_components() {
        let f = oracle("exp", json!({"rate": 1.0}), f64::NEG_INFINITY, 0.0);
        let ladder = KnotLadder::new(Interval::new(f64::NEG_INFINITY, 0.0).unwrap(), 40);
        let c = ComponentConstants::build(ladder, &f, &TamingOptions::default()).unwrap();
        assert!(c.left.is_none());
        let right = c.right.as_ref().unwrap();
        assert_eq!(right.length, 1.0);
        assert!(right.knot(1) > 0.0);
        assert_eq!(c.truncation_error_bound(), 2f64.powi(-81));
    }
}
