//! Finite unions of disjoint open intervals of the real line and the geometric
//! knot ladders that subdivide each component toward its endpoints.

use std::fmt;

use crate::error::{Error, Result};

/// Default number of knots per ladder half.
pub const DEFAULT_MAX_DEPTH: usize = 40;

/// An open interval `(lo, hi)`; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan()
            || hi.is_nan()
            || !(lo < hi)
            || lo == f64::INFINITY
            || hi == f64::NEG_INFINITY
        {
            return Err(Error::Validation(format!(
                "invalid open interval ({lo}, {hi})"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.lo, self.hi)
    }
}

/// Sorted, pairwise disjoint, maximal open intervals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OpenSet {
    components: Vec<Interval>,
}

impl OpenSet {
    /// Merges overlapping intervals into maximal components. Intervals that only
    /// share an endpoint stay separate since the endpoint is not in the union.
    pub fn normalize(raw: &[(f64, f64)]) -> Result<Self> {
        let mut items = raw
            .iter()
            .map(|&(lo, hi)| Interval::new(lo, hi))
            .collect::<Result<Vec<_>>>()?;
        items.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        let mut components: Vec<Interval> = Vec::with_capacity(items.len());
        for iv in items {
            match components.last_mut() {
                Some(last) if iv.lo < last.hi => last.hi = last.hi.max(iv.hi),
                _ => components.push(iv),
            }
        }
        Ok(Self { components })
    }

    pub fn from_intervals(intervals: &[Interval]) -> Result<Self> {
        let raw: Vec<(f64, f64)> = intervals.iter().map(|i| (i.lo, i.hi)).collect();
        Self::normalize(&raw)
    }

    pub fn real_line() -> Self {
        Self {
            components: vec![Interval {
                lo: f64::NEG_INFINITY,
                hi: f64::INFINITY,
            }],
        }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn components(&self) -> &[Interval] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Index of the component containing `x`.
    pub fn component_of(&self, x: f64) -> Option<usize> {
        if x.is_nan() {
            return None;
        }
        let idx = self.components.partition_point(|c| c.hi <= x);
        self.components
            .get(idx)
            .filter(|c| c.contains(x))
            .map(|_| idx)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.component_of(x).is_some()
    }

    /// Interior of the complement: the open gaps between consecutive components
    /// together with the unbounded ends.
    pub fn complement_interior(&self) -> OpenSet {
        let mut out = Vec::new();
        let mut cursor = f64::NEG_INFINITY;
        for c in &self.components {
            if cursor < c.lo {
                out.push(Interval {
                    lo: cursor,
                    hi: c.lo,
                });
            }
            cursor = c.hi;
        }
        if cursor < f64::INFINITY {
            out.push(Interval {
                lo: cursor,
                hi: f64::INFINITY,
            });
        }
        OpenSet { components: out }
    }

    /// `V = U ∪ Int(ℝ \ U)`, a dense open set whose complement is the boundary of `U`.
    pub fn densify(&self) -> Result<OpenSet> {
        if self.is_empty() {
            return Err(Error::Validation("cannot densify the empty set".into()));
        }
        let mut all = self.components.clone();
        all.extend(self.complement_interior().components);
        all.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        Ok(OpenSet { components: all })
    }

    /// Finite endpoints of the components, sorted and deduplicated.
    pub fn boundary(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self
            .components
            .iter()
            .flat_map(|c| [c.lo, c.hi])
            .filter(|v| v.is_finite())
            .collect();
        pts.dedup();
        pts
    }

    pub fn ladder(&self, component: usize, max_depth: usize) -> KnotLadder {
        KnotLadder::new(self.components[component], max_depth)
    }

    /// Locates `x` relative to the components and their knot ladders.
    pub fn locate(&self, x: f64, max_depth: usize) -> Location {
        match self.component_of(x) {
            None => Location::Outside,
            Some(m) => self.ladder(m, max_depth).locate(m, x),
        }
    }
}

/// Which half of a component a ladder runs through: `Right` knots `a_n`
/// increase toward the upper end, `Left` knots `b_n` decrease toward the lower end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LadderShape {
    Bounded,
    /// `(-∞, v)`: only a right ladder, constant to the left of `a_1`.
    UpperBoundedOnly,
    /// `(u, ∞)`: only a left ladder, constant to the right of `b_1`.
    LowerBoundedOnly,
    /// The whole line: no ladder.
    Whole,
}

/// Geometric subdivision of one component: `a_n = v - L/2^n`, `b_n = u + L/2^n`,
/// with `a_1 = b_1` the midpoint. Unbounded components use the unit window
/// adjacent to their finite end, with `L = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnotLadder {
    pub interval: Interval,
    pub effective_u: f64,
    pub effective_v: f64,
    pub length: f64,
    pub shape: LadderShape,
    pub max_depth: usize,
}

/// Position of a point of `V` with respect to the ladders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Location {
    Outside,
    /// `V` component is the whole line.
    Whole {
        component: usize,
    },
    /// Constant stretch of an unbounded component.
    Constant {
        component: usize,
        side: Side,
    },
    /// Right side: `x ∈ [a_n, a_{n+1})`; left side: `x ∈ (b_{n+1}, b_n]`.
    Segment {
        component: usize,
        side: Side,
        index: usize,
    },
    /// Closer to the endpoint than the deepest knot (`a_{max_depth}` / `b_{max_depth}`).
    Truncated {
        component: usize,
        side: Side,
    },
}

impl KnotLadder {
    pub fn new(interval: Interval, max_depth: usize) -> Self {
        let (eu, ev, shape) = match (interval.lo.is_finite(), interval.hi.is_finite()) {
            (true, true) => (interval.lo, interval.hi, LadderShape::Bounded),
            (false, true) => (
                interval.hi - 1.0,
                interval.hi,
                LadderShape::UpperBoundedOnly,
            ),
            (true, false) => (
                interval.lo,
                interval.lo + 1.0,
                LadderShape::LowerBoundedOnly,
            ),
            (false, false) => (-0.5, 0.5, LadderShape::Whole),
        };
        let length = match shape {
            LadderShape::Bounded => ev - eu,
            _ => 1.0,
        };
        Self {
            interval,
            effective_u: eu,
            effective_v: ev,
            length,
            shape,
            max_depth: max_depth.max(2),
        }
    }

    pub fn midpoint(&self) -> f64 {
        self.effective_u + 0.5 * self.length
    }

    pub fn has_side(&self, side: Side) -> bool {
        matches!(
            (self.shape, side),
            (LadderShape::Bounded, _)
                | (LadderShape::UpperBoundedOnly, Side::Right)
                | (LadderShape::LowerBoundedOnly, Side::Left)
        )
    }

    pub fn sides(&self) -> impl Iterator<Item = Side> + '_ {
        [Side::Left, Side::Right]
            .into_iter()
            .filter(|s| self.has_side(*s))
    }

    /// The component endpoint a side's knots converge to.
    pub fn end(&self, side: Side) -> f64 {
        match side {
            Side::Left => self.effective_u,
            Side::Right => self.effective_v,
        }
    }

    /// `L / 2^n`, the exact distance from knot `n` to the end of its side.
    pub fn gap_to_end(&self, n: usize) -> f64 {
        self.length * 2f64.powi(-(n as i32))
    }

    /// `a_n` (right) or `b_n` (left), `1 <= n <= max_depth`.
    pub fn knot(&self, side: Side, n: usize) -> Result<f64> {
        if n == 0 || n > self.max_depth {
            return Err(Error::DepthExceeded {
                index: n,
                max_depth: self.max_depth,
            });
        }
        Ok(self.knot_unchecked(side, n))
    }

    pub(crate) fn knot_unchecked(&self, side: Side, n: usize) -> f64 {
        if n == 1 {
            return self.midpoint();
        }
        match side {
            Side::Right => self.effective_v - self.gap_to_end(n),
            Side::Left => self.effective_u + self.gap_to_end(n),
        }
    }

    fn estimate_index(&self, dist: f64) -> usize {
        let est = (self.length / dist).log2().floor();
        if est.is_finite() {
            (est.max(1.0) as usize).min(self.max_depth)
        } else {
            self.max_depth
        }
    }

    /// Locates `x`, assumed to lie inside this ladder's interval.
    pub fn locate(&self, component: usize, x: f64) -> Location {
        let mid = self.midpoint();
        match self.shape {
            LadderShape::Whole => return Location::Whole { component },
            LadderShape::UpperBoundedOnly if x < mid => {
                return Location::Constant {
                    component,
                    side: Side::Right,
                }
            }
            LadderShape::LowerBoundedOnly if x > mid => {
                return Location::Constant {
                    component,
                    side: Side::Left,
                }
            }
            _ => {}
        }
        let side = match self.shape {
            LadderShape::UpperBoundedOnly => Side::Right,
            LadderShape::LowerBoundedOnly => Side::Left,
            _ if x >= mid => Side::Right,
            _ => Side::Left,
        };
        let depth = self.max_depth;
        let k = |n: usize| self.knot_unchecked(side, n);
        match side {
            Side::Right => {
                let mut n = self.estimate_index(self.effective_v - x);
                while n < depth && k(n + 1) <= x {
                    n += 1;
                }
                while n > 1 && k(n) > x {
                    n -= 1;
                }
                if n >= depth {
                    Location::Truncated { component, side }
                } else {
                    Location::Segment {
                        component,
                        side,
                        index: n,
                    }
                }
            }
            Side::Left => {
                let mut n = self.estimate_index(x - self.effective_u);
                while n < depth && k(n + 1) >= x {
                    n += 1;
                }
                while n > 1 && k(n) < x {
                    n -= 1;
                }
                if n >= depth {
                    Location::Truncated { component, side }
                } else {
                    Location::Segment {
                        component,
                        side,
                        index: n,
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const INF: f64 = f64::INFINITY;

    fn set(raw: &[(f64, f64)]) -> OpenSet {
        OpenSet::normalize(raw).unwrap()
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(
            set(&[(0.0, 2.0), (1.0, 3.0)]).components(),
            &[Interval { lo: 0.0, hi: 3.0 }]
        );
        assert_eq!(set(&[(1.0, 2.0), (0.0, 1.0)]).len(), 2);
        let s = set(&[(-INF, 0.0), (5.0, INF)]);
        assert_eq!(s.components()[0], Interval { lo: -INF, hi: 0.0 });
        assert_eq!(s.components()[1], Interval { lo: 5.0, hi: INF });
        assert_eq!(set(&[(0.0, 10.0), (2.0, 3.0)]).len(), 1);
    }

    #[test]
    fn normalize_rejects_bad_intervals() {
        assert!(matches!(
            OpenSet::normalize(&[(1.0, 1.0)]),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            OpenSet::normalize(&[(2.0, 1.0)]),
            Err(Error::Validation(_))
        ));
        assert!(OpenSet::normalize(&[(f64::NAN, 1.0)]).is_err());
        assert!(OpenSet::normalize(&[(INF, INF)]).is_err());
    }

    #[test]
    fn densify_examples() {
        let v = set(&[(0.0, 1.0)]).densify().unwrap();
        assert_eq!(v, set(&[(-INF, 0.0), (0.0, 1.0), (1.0, INF)]));
        assert_eq!(
            OpenSet::real_line().densify().unwrap(),
            OpenSet::real_line()
        );
        let v = set(&[(0.0, 1.0), (1.0, 2.0)]).densify().unwrap();
        assert_eq!(v, set(&[(-INF, 0.0), (0.0, 1.0), (1.0, 2.0), (2.0, INF)]));
        assert_eq!(v.boundary(), vec![0.0, 1.0, 2.0]);
        assert!(OpenSet::empty().densify().is_err());
    }

    #[test]
    fn right_knots_of_unit_interval() {
        let l = set(&[(0.0, 1.0)]).ladder(0, 40);
        let a: Vec<f64> = (1..=3).map(|n| l.knot(Side::Right, n).unwrap()).collect();
        assert_eq!(a, vec![0.5, 0.75, 0.875]);
        assert_eq!(l.knot(Side::Left, 2).unwrap(), 0.25);
        assert!(matches!(
            l.knot(Side::Right, 41),
            Err(Error::DepthExceeded { .. })
        ));
        assert!(l.knot(Side::Right, 0).is_err());
    }

    #[test]
    fn unbounded_ladders() {
        let l = set(&[(-INF, 3.0)]).ladder(0, 40);
        assert_eq!(l.effective_u, 2.0);
        assert_eq!(l.length, 1.0);
        assert_eq!(l.knot(Side::Right, 1).unwrap(), 2.5);
        assert!(!l.has_side(Side::Left));
        let r = set(&[(3.0, INF)]).ladder(0, 40);
        assert_eq!(r.effective_v, 4.0);
        assert_eq!(r.knot(Side::Left, 2).unwrap(), 3.25);
        assert!(!r.has_side(Side::Right));
    }

    #[test]
    fn locate_examples() {
        let v = set(&[(0.0, 1.0)]).densify().unwrap();
        assert_eq!(
            v.locate(0.8, 40),
            Location::Segment {
                component: 1,
                side: Side::Right,
                index: 2
            }
        );
        assert_eq!(v.locate(0.0, 40), Location::Outside);
        assert_eq!(v.locate(1.0, 40), Location::Outside);
        assert_eq!(
            v.locate(0.3, 40),
            Location::Segment {
                component: 1,
                side: Side::Left,
                index: 1
            }
        );
        let w = set(&[(-INF, 3.0)]);
        assert_eq!(
            w.locate(0.0, 40),
            Location::Constant {
                component: 0,
                side: Side::Right
            }
        );
        assert_eq!(
            w.locate(2.5, 40),
            Location::Segment {
                component: 0,
                side: Side::Right,
                index: 1
            }
        );
        assert_eq!(
            OpenSet::real_line().locate(7.0, 40),
            Location::Whole { component: 0 }
        );
        assert_eq!(
            v.locate(1.0 - 1e-15, 40),
            Location::Truncated {
                component: 1,
                side: Side::Right
            }
        );
    }

    #[test]
    fn gap_identity_is_exact_on_dyadic_interval() {
        let l = set(&[(0.0, 1.0)]).ladder(0, 40);
        for n in 1..40 {
            let a = l.knot(Side::Right, n + 1).unwrap();
            assert_eq!(l.effective_v - a, l.gap_to_end(n + 1));
        }
    }

    proptest! {
        #[test]
        fn densify_is_idempotent(raw in prop::collection::vec((-50.0f64..50.0, 0.01f64..5.0), 1..8)) {
            let raw: Vec<(f64, f64)> = raw.into_iter().map(|(lo, w)| (lo, lo + w)).collect();
            let u = OpenSet::normalize(&raw).unwrap();
            let v = u.densify().unwrap();
            prop_assert_eq!(v.densify().unwrap(), v.clone());
            for c in u.components() {
                prop_assert!(v.contains(0.5 * (c.lo + c.hi)));
            }
        }

        #[test]
        fn knots_locate_to_their_index(lo in -20.0f64..20.0, len in 0.01f64..30.0, n in 1usize..39) {
            let iv = Interval::new(lo, lo + len).unwrap();
            let l = KnotLadder::new(iv, 40);
            for side in [Side::Left, Side::Right] {
                let x = l.knot(side, n).unwrap();
                if iv.contains(x) {
                    match l.locate(0, x) {
                        Location::Segment { side: s, index, .. } => {
                            prop_assert_eq!(index, n);
                            prop_assert!(n == 1 || s == side);
                        }
                        other => prop_assert!(false, "unexpected {:?}", other),
                    }
                }
            }
        }

        #[test]
        fn gap_identity_within_one_ulp(lo in -20.0f64..20.0, len in 0.01f64..30.0, n in 1usize..40) {
            let l = KnotLadder::new(Interval::new(lo, lo + len).unwrap(), 40);
            let a = l.knot(Side::Right, n + 1).unwrap();
            let ulp = f64::EPSILON * l.effective_v.abs().max(a.abs());
            prop_assert!((l.effective_v - a - l.gap_to_end(n + 1)).abs() <= ulp);
            // On dyadic-friendly scales the identity is exact to 1e-12 relative.
            let gap = l.gap_to_end(n + 1);
            if gap >= 1e4 * ulp {
                prop_assert!((l.effective_v - a - gap).abs() / gap <= 1e-4);
            }
        }
    }
}
