//! Dense-grid maximisation of `|f|` on an interval with golden-section polish.

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Outcome of a grid search for `max |f|` on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridMax {
    /// Largest `|f|` found (grid plus refinement).
    pub max: f64,
    /// Smallest `|f|` seen on the grid.
    pub min: f64,
    pub argmax: f64,
}

/// Samples `|f|` at `points` uniform abscissae of `[lo, hi]` (endpoints
/// included), then polishes every grid-local maximum by golden-section search
/// on its neighbouring cells. Returns `None` if `f` produced a NaN.
pub fn grid_max_abs<F>(f: F, lo: f64, hi: f64, points: usize) -> Option<GridMax>
where
    F: Fn(f64) -> f64,
{
    assert!(points >= 2 && lo <= hi);
    let step = (hi - lo) / (points - 1) as f64;
    let at = |j: usize| {
        if j == points - 1 {
            hi
        } else {
            lo + step * j as f64
        }
    };

    let mut values = Vec::with_capacity(points);
    for j in 0..points {
        let v = f(at(j)).abs();
        if v.is_nan() {
            return None;
        }
        values.push(v);
    }
    let mut best = GridMax {
        max: values[0],
        min: values[0],
        argmax: lo,
    };
    for (j, &v) in values.iter().enumerate() {
        if v > best.max {
            best.max = v;
            best.argmax = at(j);
        }
        best.min = best.min.min(v);
    }
    if lo == hi || best.max == 0.0 || best.max.is_infinite() {
        return Some(best);
    }

    // Polish interior grid-local maxima that are within reach of the best one.
    for j in 1..points - 1 {
        let v = values[j];
        if v >= values[j - 1] && v >= values[j + 1] && v > 0.5 * best.max {
            let (x, fx) = golden_max(|x| f(x).abs(), at(j - 1), at(j + 1), 60);
            if fx.is_nan() {
                return None;
            }
            if fx > best.max {
                best.max = fx;
                best.argmax = x;
            }
        }
    }
    Some(best)
}

/// Golden-section search for a maximum of a unimodal `f` on `[a, b]`.
pub fn golden_max<F>(f: F, mut a: f64, mut b: f64, iterations: usize) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iterations {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        if b - a <= f64::EPSILON * (a.abs() + b.abs()) {
            break;
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}
