//! Evaluators for the multiplier `g`, the extension `h = f·g`, and the cozero
//! and complement witnesses.

use std::sync::Arc;

use crate::catalog::{FunctionOracle, OrderBound};
use crate::error::{Error, Result};
use crate::mollifier::SIGMA_ORDER_LIMIT;
use crate::mspline::MSpline;
use crate::open_set::{KnotLadder, Location, OpenSet, Side, DEFAULT_MAX_DEPTH};
use crate::taming::{Case, ComponentConstants, TamingOptions, DEFAULT_MAX_ORDER};

/// Highest derivative order an evaluator will produce.
pub const EVAL_ORDER_LIMIT: usize = SIGMA_ORDER_LIMIT;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildOptions {
    pub max_depth: usize,
    pub max_order: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            max_depth: DEFAULT_MAX_DEPTH,
            max_order: DEFAULT_MAX_ORDER,
        }
    }
}

impl BuildOptions {
    fn taming(&self) -> TamingOptions {
        TamingOptions {
            max_depth: self.max_depth,
            max_order: self.max_order,
        }
    }
}

/// `f` on `U`, `0` on the interior of the complement, with a possibly lowered order bound.
#[derive(Debug, Clone)]
pub struct DensifiedOracle {
    inner: Arc<dyn FunctionOracle>,
    u: OpenSet,
    k: OrderBound,
}

impl DensifiedOracle {
    pub fn new(inner: Arc<dyn FunctionOracle>, u: OpenSet, k: OrderBound) -> Self {
        let k = k.min(inner.order_bound());
        Self { inner, u, k }
    }

    pub fn domain(&self) -> &OpenSet {
        &self.u
    }
}

impl FunctionOracle for DensifiedOracle {
    fn deriv(&self, order: usize, x: f64) -> f64 {
        if self.u.contains(x) {
            self.inner.deriv(order, x)
        } else {
            0.0
        }
    }

    fn order_bound(&self) -> OrderBound {
        self.k
    }

    fn label(&self) -> String {
        self.inner.label()
    }
}

/// `f ≡ 1`, used for cozero witnesses.
#[derive(Debug, Clone, Copy)]
pub struct UnitOracle;

impl FunctionOracle for UnitOracle {
    fn deriv(&self, order: usize, _x: f64) -> f64 {
        if order == 0 {
            1.0
        } else {
            0.0
        }
    }

    fn order_bound(&self) -> OrderBound {
        OrderBound::Infinite
    }

    fn label(&self) -> String {
        "indicator_smooth".into()
    }
}

/// Ladders and taming constants for every component of `V = densify(U)`.
#[derive(Debug, Clone)]
pub struct Construction {
    pub u: OpenSet,
    pub v: OpenSet,
    pub f: Arc<DensifiedOracle>,
    pub options: BuildOptions,
    pub components: Vec<ComponentConstants>,
}

/// Per-component facts for reports.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSummary {
    pub lo: f64,
    pub hi: f64,
    pub in_u: bool,
    pub length: f64,
    pub case: Option<Case>,
    pub p: Option<usize>,
    pub saturated_at: Option<usize>,
    pub truncation_error_bound: f64,
}

impl Construction {
    /// Densifies `U` and computes constants for every component of `V`, with
    /// `f` taken as `0` off `U` and order bound `min(k, f's own bound)`.
    pub fn build(
        u: &OpenSet,
        f: Arc<dyn FunctionOracle>,
        k: OrderBound,
        options: BuildOptions,
    ) -> Result<Self> {
        let v = u.densify()?;
        for m in 0..v.len() {
            check_ladder_resolution(&v.ladder(m, options.max_depth))?;
        }
        let f = Arc::new(DensifiedOracle::new(f, u.clone(), k));
        let components = (0..v.len())
            .map(|m| {
                ComponentConstants::build(
                    v.ladder(m, options.max_depth),
                    f.as_ref(),
                    &options.taming(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            u: u.clone(),
            v,
            f,
            options,
            components,
        })
    }

    pub fn k(&self) -> OrderBound {
        self.f.order_bound()
    }

    pub fn ladder(&self, component: usize) -> &KnotLadder {
        &self.components[component].ladder
    }

    pub fn summary(&self) -> Vec<ComponentSummary> {
        self.components
            .iter()
            .map(|c| {
                let first = c.left.as_ref().or(c.right.as_ref());
                let saturated_at = [&c.left, &c.right]
                    .into_iter()
                    .flatten()
                    .filter_map(|s| s.saturated_at)
                    .min();
                ComponentSummary {
                    lo: c.ladder.interval.lo,
                    hi: c.ladder.interval.hi,
                    in_u: self.u.contains(c.ladder.midpoint()),
                    length: c.ladder.length,
                    case: first.map(|s| s.case),
                    p: first.and_then(|s| s.p),
                    saturated_at,
                    truncation_error_bound: c.truncation_error_bound(),
                }
            })
            .collect()
    }

    /// A copy with every `A`, `B` divided by `factor`.
    pub fn deflated(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.components = self.components.iter().map(|c| c.deflated(factor)).collect();
        out
    }

    /// A copy whose knot values are scaled by `1 + relative`.
    pub fn with_perturbed_knots(&self, relative: f64) -> Self {
        let mut out = self.clone();
        for c in &mut out.components {
            for side in [&mut c.left, &mut c.right].into_iter().flatten() {
                side.knot_values
                    .iter_mut()
                    .for_each(|v| *v *= 1.0 + relative);
            }
        }
        out
    }

    pub fn locate(&self, x: f64) -> Location {
        if !x.is_finite() {
            return Location::Outside;
        }
        self.v.locate(x, self.options.max_depth)
    }

    /// `g` at knot `n` of `side` in `component`.
    pub fn knot_value(&self, component: usize, side: Side, n: usize) -> f64 {
        self.components[component]
            .side(side)
            .map_or(0.0, |s| s.knot(n))
    }

    /// Fills `out[i] = g^{(i)}(x)` for `i < out.len()`.
    pub fn g_jet(&self, x: f64, out: &mut [f64]) {
        out.fill(0.0);
        if out.is_empty() {
            return;
        }
        match self.locate(x) {
            Location::Outside => {}
            Location::Whole { .. } => out[0] = 1.0,
            Location::Constant { component, side } => out[0] = self.knot_value(component, side, 1),
            Location::Truncated { component, side } => {
                let ladder = self.ladder(component);
                let depth = ladder.max_depth;
                if x == ladder.knot_unchecked(side, depth) {
                    out[0] = self.knot_value(component, side, depth);
                }
            }
            Location::Segment {
                component,
                side,
                index,
            } => {
                self.segment_spline(component, side, index)
                    .jet_unchecked(x, out);
            }
        }
    }

    /// The spline piece of `g` on segment `n`.
    pub fn segment_spline(&self, component: usize, side: Side, n: usize) -> MSpline {
        let ladder = self.ladder(component);
        let (k0, k1) = (
            ladder.knot_unchecked(side, n),
            ladder.knot_unchecked(side, n + 1),
        );
        let (g0, g1) = (
            self.knot_value(component, side, n),
            self.knot_value(component, side, n + 1),
        );
        match side {
            Side::Right => MSpline {
                a: k0,
                b: g0,
                c: k1,
                d: g1,
            },
            Side::Left => MSpline {
                a: k1,
                b: g1,
                c: k0,
                d: g0,
            },
        }
    }

    pub fn g(&self, x: f64) -> f64 {
        let mut v = [0.0];
        self.g_jet(x, &mut v);
        v[0]
    }
}

/// Knots up to `max_depth + 1` must be distinct doubles, or the spline pieces degenerate.
fn check_ladder_resolution(ladder: &KnotLadder) -> Result<()> {
    for side in ladder.sides() {
        for n in 1..=ladder.max_depth {
            let (a, b) = (
                ladder.knot_unchecked(side, n),
                ladder.knot_unchecked(side, n + 1),
            );
            let ordered = match side {
                Side::Right => a < b && b < ladder.end(side),
                Side::Left => a > b && b > ladder.end(side),
            };
            if !ordered {
                return Err(Error::Validation(format!(
                    "max_depth {} is too deep for component {}: knots {n} and {} are not distinct in double precision",
                    ladder.max_depth,
                    ladder.interval,
                    n + 1
                )));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    G,
    H,
    Cozero,
    /// The identically zero witness.
    Zero,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::G => "g",
            Role::H => "h",
            Role::Cozero => "cozero",
            Role::Zero => "zero",
        }
    }
}

/// An immutable evaluator for one constructed function.
#[derive(Debug, Clone)]
pub struct SmoothEvaluator {
    role: Role,
    construction: Option<Arc<Construction>>,
}

fn binomial_row(n: usize) -> Vec<f64> {
    let mut row = vec![1.0; n + 1];
    for j in 1..n {
        row[j] = row[j - 1] * (n - j + 1) as f64 / j as f64;
    }
    row
}

impl SmoothEvaluator {
    pub fn new(role: Role, construction: Arc<Construction>) -> Self {
        Self {
            role,
            construction: Some(construction),
        }
    }

    pub fn zero() -> Self {
        Self {
            role: Role::Zero,
            construction: None,
        }
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn construction(&self) -> Option<&Arc<Construction>> {
        self.construction.as_ref()
    }

    /// Highest order for which [`eval_deriv`](Self::eval_deriv) is defined.
    pub fn order_bound(&self) -> OrderBound {
        match (self.role, &self.construction) {
            (Role::H, Some(c)) => c.k(),
            _ => OrderBound::Infinite,
        }
    }

    fn multiplies_f(&self) -> bool {
        matches!(self.role, Role::H | Role::Cozero)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let Some(c) = &self.construction else {
            return 0.0;
        };
        let g = c.g(x);
        if self.multiplies_f() && g != 0.0 {
            c.f.value(x) * g
        } else {
            g
        }
    }

    /// `i`-th derivative. For `h` this is the Leibniz sum over the oracle's
    /// exact derivatives and the spline derivatives of `g`.
    pub fn eval_deriv(&self, i: usize, x: f64) -> Result<f64> {
        if !self.order_bound().allows(i) {
            return Err(Error::OrderExceeded {
                order: i,
                bound: self.order_bound().capped(usize::MAX),
            });
        }
        if i > EVAL_ORDER_LIMIT {
            return Err(Error::OrderExceeded {
                order: i,
                bound: EVAL_ORDER_LIMIT,
            });
        }
        if !x.is_finite() {
            return Err(Error::Domain(format!("evaluation at non-finite x = {x}")));
        }
        if i == 0 {
            return Ok(self.eval(x));
        }
        let Some(c) = &self.construction else {
            return Ok(0.0);
        };
        let mut jet = [0.0; EVAL_ORDER_LIMIT + 1];
        let jet = &mut jet[..=i];
        c.g_jet(x, jet);
        if !self.multiplies_f() {
            return Ok(jet[i]);
        }
        if jet.iter().all(|&v| v == 0.0) {
            return Ok(0.0);
        }
        let binom = binomial_row(i);
        let mut sum = 0.0;
        for (j, &coef) in binom.iter().enumerate() {
            let gd = jet[i - j];
            if gd != 0.0 {
                sum += coef * c.f.deriv(j, x) * gd;
            }
        }
        Ok(sum)
    }

    /// `f(x)` where the construction's `f` is defined (on `V`), else `None`.
    pub fn f_value(&self, x: f64) -> Option<f64> {
        let c = self.construction.as_ref()?;
        c.v.contains(x).then(|| c.f.value(x))
    }
}

/// `g` and `h` for `f` on `U`.
pub fn build_g(
    u: &OpenSet,
    f: Arc<dyn FunctionOracle>,
    k: OrderBound,
    options: BuildOptions,
) -> Result<SmoothEvaluator> {
    Ok(SmoothEvaluator::new(
        Role::G,
        Arc::new(Construction::build(u, f, k, options)?),
    ))
}

pub fn build_h(
    u: &OpenSet,
    f: Arc<dyn FunctionOracle>,
    k: OrderBound,
    options: BuildOptions,
) -> Result<SmoothEvaluator> {
    Ok(SmoothEvaluator::new(
        Role::H,
        Arc::new(Construction::build(u, f, k, options)?),
    ))
}

/// A smooth function whose cozero set is `U` (up to ladder truncation).
pub fn build_cozero(u: &OpenSet, options: BuildOptions) -> Result<SmoothEvaluator> {
    let c = Construction::build(u, Arc::new(UnitOracle), OrderBound::Infinite, options)?;
    Ok(SmoothEvaluator::new(Role::Cozero, Arc::new(c)))
}

/// How the zero set of `b` is supplied to [`build_complement`].
#[derive(Debug, Clone, PartialEq)]
pub enum ZeroSet {
    /// Closed intervals `[lo, hi]` (points when `lo == hi`) making up `Z(b)`.
    Declared(Vec<(f64, f64)>),
    /// Scan `b` on `points` uniform samples of `[lo, hi]`; runs of exact zeros
    /// are taken as intervals of `Z(b)`, runs touching the window edge as unbounded.
    Detected { lo: f64, hi: f64, points: usize },
}

#[derive(Debug, Clone)]
pub struct Complement {
    pub a: SmoothEvaluator,
    /// `Int Z(b)`.
    pub interior: OpenSet,
    pub warning: Option<String>,
}

/// Interior of a closed set given as a union of closed intervals.
pub fn interior_of_closed(intervals: &[(f64, f64)]) -> Result<OpenSet> {
    let mut sorted: Vec<(f64, f64)> = Vec::with_capacity(intervals.len());
    for &(lo, hi) in intervals {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::Validation(format!(
                "zero-set interval [{lo}, {hi}] is malformed"
            )));
        }
        sorted.push((lo, hi));
    }
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    // closed intervals that touch merge, unlike open ones
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (lo, hi) in sorted {
        match merged.last_mut() {
            Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
            _ => merged.push((lo, hi)),
        }
    }
    let open: Vec<(f64, f64)> = merged.into_iter().filter(|(lo, hi)| lo < hi).collect();
    OpenSet::normalize(&open)
}

/// Approximates `Int Z(b)` from samples.
pub fn detect_zero_interior(
    b: &dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    points: usize,
) -> Result<OpenSet> {
    if !(lo < hi) || points < 3 || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Validation(format!(
            "bad detection window [{lo}, {hi}] with {points} points"
        )));
    }
    let step = (hi - lo) / (points - 1) as f64;
    let at = |j: usize| {
        if j == points - 1 {
            hi
        } else {
            lo + step * j as f64
        }
    };
    let zero: Vec<bool> = (0..points).map(|j| b(at(j)) == 0.0).collect();
    let mut runs = Vec::new();
    let mut j = 0;
    while j < points {
        if !zero[j] {
            j += 1;
            continue;
        }
        let start = j;
        while j + 1 < points && zero[j + 1] {
            j += 1;
        }
        if j > start {
            let a = if start == 0 {
                f64::NEG_INFINITY
            } else {
                at(start)
            };
            let c = if j == points - 1 {
                f64::INFINITY
            } else {
                at(j)
            };
            runs.push((a, c));
        }
        j += 1;
    }
    OpenSet::normalize(&runs)
}

/// `a = cozero(Int Z(b))`, so that `a·b = 0` and `a + b` has dense cozero set.
pub fn build_complement(
    b: &dyn Fn(f64) -> f64,
    zero_set: &ZeroSet,
    options: BuildOptions,
) -> Result<Complement> {
    let interior = match zero_set {
        ZeroSet::Declared(intervals) => interior_of_closed(intervals)?,
        ZeroSet::Detected { lo, hi, points } => detect_zero_interior(b, *lo, *hi, *points)?,
    };
    if interior.is_empty() {
        return Ok(Complement {
            a: SmoothEvaluator::zero(),
            interior,
            warning: Some("Int Z(b) is empty: b is already a non-zero divisor, a = 0".into()),
        });
    }
    Ok(Complement {
        a: build_cozero(&interior, options)?,
        interior,
        warning: None,
    })
}
