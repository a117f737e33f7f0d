//! Smooth monotone connectors between two points built on the cumulative mollifier.

use crate::error::{Error, Result};
use crate::mollifier::{phi_big, phi_big_deriv, phi_big_jet, sup_phi_big_deriv, SIGMA_ORDER_LIMIT};

/// Maps `[a, c]` affinely onto `[-1, 1]`.
pub fn affine_pullback(a: f64, c: f64, x: f64) -> Result<f64> {
    if !(a < c) {
        return Err(Error::Contract(format!(
            "affine pullback needs a < c, got a = {a}, c = {c}"
        )));
    }
    Ok((2.0 * x - (a + c)) / (c - a))
}

/// The C^∞ spline from `(a, b)` to `(c, d)`:
/// `γ(x) = b + (d - b) Φ((2x - (a + c)) / (c - a))` on `[a, c]`.
///
/// All one-sided derivatives vanish at both abscissae, so splines chained end to
/// end join smoothly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MSpline {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl MSpline {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        if !(a < c) {
            return Err(Error::Contract(format!(
                "spline abscissae must satisfy a < c ({a}, {c})"
            )));
        }
        if !(b.is_finite() && d.is_finite()) {
            return Err(Error::Validation(format!(
                "spline ordinates must be finite ({b}, {d})"
            )));
        }
        Ok(Self { a, b, c, d })
    }

    fn check(&self, x: f64) -> Result<()> {
        if x >= self.a && x <= self.c {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "x = {x} outside spline support [{}, {}]",
                self.a, self.c
            )))
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        Ok(self.eval_unchecked(x))
    }

    /// `i`-th derivative (one-sided at the endpoints, where it is exactly 0).
    pub fn deriv(&self, i: usize, x: f64) -> Result<f64> {
        if i == 0 {
            return self.eval(x);
        }
        self.check(x)?;
        if x == self.a || x == self.c || self.b == self.d {
            return Ok(0.0);
        }
        let t = (2.0 * x - (self.a + self.c)) / (self.c - self.a);
        let scale = (2.0 / (self.c - self.a)).powi(i as i32);
        Ok((self.d - self.b) * scale * phi_big_deriv(i, t)?)
    }

    pub(crate) fn eval_unchecked(&self, x: f64) -> f64 {
        if x == self.a || self.b == self.d {
            return self.b;
        }
        if x == self.c {
            return self.d;
        }
        let t = (2.0 * x - (self.a + self.c)) / (self.c - self.a);
        // anchor at the nearer ordinate; `b + (d - b)Φ(t)` cancels to 0 near `c` when `|d| << |b|`
        if t > 0.0 {
            self.d + (self.b - self.d) * phi_big(-t)
        } else {
            self.b + (self.d - self.b) * phi_big(t)
        }
    }

    /// `out[i] = γ^{(i)}(x)` for `i < out.len()`, with `x` inside `[a, c]`.
    pub(crate) fn jet_unchecked(&self, x: f64, out: &mut [f64]) {
        debug_assert!(out.len() <= SIGMA_ORDER_LIMIT + 2);
        if out.is_empty() {
            return;
        }
        out.fill(0.0);
        out[0] = self.eval_unchecked(x);
        if out.len() == 1 || x == self.a || x == self.c || self.b == self.d {
            return;
        }
        let t = (2.0 * x - (self.a + self.c)) / (self.c - self.a);
        phi_big_jet(t, out);
        out[0] = self.eval_unchecked(x);
        let k = 2.0 / (self.c - self.a);
        let mut scale = 1.0;
        for v in out.iter_mut().skip(1) {
            scale *= k;
            *v *= (self.d - self.b) * scale;
        }
    }
}

/// `(2 / (c - a))^i · M_i`, an upper bound for `max_{[a,c]} |Φ_{a,c}^{(i)}|`.
pub fn mspline_sup_deriv(i: usize, a: f64, c: f64) -> Result<f64> {
    if !(a < c) {
        return Err(Error::Contract(format!(
            "mspline_sup_deriv needs a < c ({a}, {c})"
        )));
    }
    Ok((2.0 / (c - a)).powi(i as i32) * sup_phi_big_deriv(i))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mollifier::normalization_constant;
    use approx::assert_relative_eq;

    fn unit() -> MSpline {
        MSpline::new(0.0, 0.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn tiny_target_ordinate_survives_near_the_end() {
        let s = MSpline::new(0.0, 3.8e-26, 1.0, 1.5e-44).unwrap();
        for x in [0.9, 0.99, 0.999_999] {
            let v = s.eval(x).unwrap();
            assert!(v >= 1.5e-44 && v < 3.8e-26, "{x}: {v}");
        }
        let up = MSpline::new(0.0, 1.5e-44, 1.0, 3.8e-26).unwrap();
        assert!(up.eval(1e-6).unwrap() >= 1.5e-44);
    }

    #[test]
    fn pullback_examples() {
        assert_eq!(affine_pullback(0.0, 1.0, 0.5).unwrap(), 0.0);
        assert_eq!(affine_pullback(0.0, 1.0, 0.0).unwrap(), -1.0);
        assert_eq!(affine_pullback(2.0, 6.0, 5.0).unwrap(), 0.5);
        assert!(matches!(
            affine_pullback(1.0, 1.0, 0.0),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn eval_examples() {
        assert_eq!(unit().eval(0.5).unwrap(), 0.5);
        assert_eq!(unit().eval(0.0).unwrap(), 0.0);
        let s = MSpline::new(0.0, 2.0, 2.0, 1.0).unwrap();
        assert_eq!(s.eval(1.0).unwrap(), 1.5);
        assert!(matches!(unit().eval(1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn deriv_examples() {
        let phi0 = (-1.0f64).exp() / normalization_constant();
        assert_eq!(unit().deriv(1, 0.0).unwrap(), 0.0);
        assert_relative_eq!(
            unit().deriv(1, 0.5).unwrap(),
            2.0 * phi0,
            max_relative = 1e-15
        );
        assert!((unit().deriv(1, 0.5).unwrap() - 1.657_137_7).abs() < 1e-6);
        assert_eq!(unit().deriv(2, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn endpoints_are_flat_for_all_orders() {
        let s = MSpline::new(-3.0, 5.0, 7.5, -2.0).unwrap();
        for i in 1..=32 {
            assert_eq!(s.deriv(i, s.a).unwrap(), 0.0);
            assert_eq!(s.deriv(i, s.c).unwrap(), 0.0);
        }
    }

    #[test]
    fn constant_spline() {
        let s = MSpline::new(0.0, 3.0, 1.0, 3.0).unwrap();
        assert_eq!(s.eval(0.3).unwrap(), 3.0);
        assert_eq!(s.deriv(2, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn jet_matches_individual_derivatives() {
        let s = MSpline::new(1.0, 4.0, 1.25, 0.5).unwrap();
        let mut jet = [0.0; 7];
        for x in [1.01, 1.1, 1.125, 1.2, 1.249] {
            s.jet_unchecked(x, &mut jet);
            for (i, &v) in jet.iter().enumerate() {
                let d = s.deriv(i, x).unwrap();
                assert!(
                    (v - d).abs() <= 1e-13 * d.abs().max(1.0),
                    "i = {i}, x = {x}"
                );
            }
        }
    }

    #[test]
    fn sup_deriv_examples() {
        let m1 = sup_phi_big_deriv(1);
        assert_eq!(mspline_sup_deriv(0, 3.0, 4.0).unwrap(), 1.0);
        assert_relative_eq!(mspline_sup_deriv(1, 0.0, 0.25).unwrap(), 8.0 * m1);
        assert!((mspline_sup_deriv(1, 0.0, 0.25).unwrap() - 6.6287).abs() < 1e-3);
        assert_relative_eq!(mspline_sup_deriv(1, 0.0, 2.0).unwrap(), m1);
        assert!(mspline_sup_deriv(1, 2.0, 2.0).is_err());
    }

    #[test]
    fn decreasing_spline_is_monotone() {
        let s = MSpline::new(0.0, 1.0, 1.0, -1.0).unwrap();
        let mut prev = f64::INFINITY;
        for j in 0..=1000 {
            let v = s.eval(j as f64 / 1000.0).unwrap();
            assert!(v <= prev);
            prev = v;
        }
    }
}
