//! The standard mollifier `σ(x) = exp(-1/(1-x²))` on `(-1, 1)`, its normalised
//! density `φ = σ / C`, the cumulative `Φ`, and derivatives of all three.
//!
//! Derivatives of `σ` are computed by truncated Taylor-series arithmetic at the
//! evaluation point (exact jet of `exp ∘ u` with `u = -1/(1-x²)`), carried out in
//! a rescaled variable and recombined in log space so that neither the growing
//! rational prefactor nor the vanishing exponential overflows or underflows
//! prematurely near `|x| = 1`. The closed rational form of each derivative is
//! available separately as [`RationalExpDerivative`].
//!
//! Every cached quantity (`C`, the `Φ` table, the suprema `M_i`) sits behind a
//! `OnceLock`, so concurrent first use is race-free.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::quadrature::adaptive_simpson;
use crate::search::grid_max_abs;

/// Highest derivative order of `σ` supported by the evaluators.
pub const SIGMA_ORDER_LIMIT: usize = 64;

/// Number of uniform nodes of the cumulative table on `[-1, 0]`.
pub const PHI_TABLE_NODES: usize = 4096;

/// Absolute tolerance used for every quadrature of `σ`.
pub const QUADRATURE_TOLERANCE: f64 = 1e-12;

/// Grid resolution for the suprema of `|Φ^{(i)}|`.
pub const SUP_GRID_POINTS: usize = 100_000;

/// Relative inflation applied to the refined grid maximum of `|Φ^{(i)}|`.
pub const SUP_SAFETY: f64 = 1.0 + 1e-8;

// Below this value of 1 - x² every derivative up to SIGMA_ORDER_LIMIT is far
// below the smallest subnormal double.
const NEGLIGIBLE_Q: f64 = 1e-5;

/// `σ^{(i)}(x) = P_i(x) / (1 - x²)^{2i} · σ(x)` with integer-coefficient `P_i`.
///
/// Produced by formal differentiation:
/// `P_{i+1} = P_i' (1-x²)² + 4 i x (1-x²) P_i - 2 x P_i`.
/// Evaluating the expanded numerator loses accuracy quickly with the order
/// (massive cancellation beyond order ~10); [`sigma_deriv`] does not use it.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalExpDerivative {
    pub order: usize,
    /// Coefficients of `P_i`, lowest degree first.
    pub numerator: Vec<f64>,
    /// Exponent of `(1 - x²)` in the denominator, always `2 * order`.
    pub denominator_power: usize,
}

impl RationalExpDerivative {
    pub fn zeroth() -> Self {
        Self {
            order: 0,
            numerator: vec![1.0],
            denominator_power: 0,
        }
    }

    /// Formal derivative of `self`.
    pub fn next(&self) -> Self {
        let i = self.order as f64;
        let p = &self.numerator;
        let deg = p.len() + 3;
        let mut out = vec![0.0; deg + 1];
        // P' (1 - 2x² + x⁴)
        for (k, &c) in p.iter().enumerate().skip(1) {
            let d = c * k as f64;
            out[k - 1] += d;
            out[k + 1] -= 2.0 * d;
            out[k + 3] += d;
        }
        // (4 i x - 4 i x³ - 2 x) P
        for (k, &c) in p.iter().enumerate() {
            out[k + 1] += (4.0 * i - 2.0) * c;
            out[k + 3] -= 4.0 * i * c;
        }
        while out.len() > 1 && *out.last().unwrap() == 0.0 {
            out.pop();
        }
        Self {
            order: self.order + 1,
            numerator: out,
            denominator_power: 2 * (self.order + 1),
        }
    }

    /// The first `count` entries of the recurrence, orders `0..count`.
    pub fn sequence(count: usize) -> Vec<Self> {
        let mut out = Vec::with_capacity(count);
        let mut cur = Self::zeroth();
        for _ in 0..count {
            let nxt = cur.next();
            out.push(cur);
            cur = nxt;
        }
        out
    }

    pub fn numerator_at(&self, x: f64) -> f64 {
        self.numerator.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// Evaluates the represented derivative; zero for `|x| >= 1`.
    pub fn eval(&self, x: f64) -> f64 {
        let q = (1.0 - x) * (1.0 + x);
        if q <= 0.0 {
            return 0.0;
        }
        let log_mag = -1.0 / q - self.denominator_power as f64 * q.ln();
        self.numerator_at(x) * log_mag.exp()
    }
}

fn check_finite(x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "mollifier evaluated at non-finite x = {x}"
        )))
    }
}

/// `σ(x)`; exactly zero for `|x| >= 1`.
pub fn sigma(x: f64) -> Result<f64> {
    check_finite(x)?;
    Ok(sigma_raw(x))
}

#[inline]
pub(crate) fn sigma_raw(x: f64) -> f64 {
    let q = (1.0 - x) * (1.0 + x);
    if q <= 0.0 {
        0.0
    } else {
        (-1.0 / q).exp()
    }
}

/// `σ^{(i)}(x)`; exactly zero for `|x| >= 1`.
pub fn sigma_deriv(i: usize, x: f64) -> Result<f64> {
    check_finite(x)?;
    if i > SIGMA_ORDER_LIMIT {
        return Err(Error::Contract(format!(
            "derivative order {i} exceeds the supported limit {SIGMA_ORDER_LIMIT}"
        )));
    }
    let mut out = [0.0; SIGMA_ORDER_LIMIT + 1];
    sigma_jet(x, &mut out[..=i]);
    Ok(out[i])
}

fn ln_factorials() -> &'static [f64; SIGMA_ORDER_LIMIT + 1] {
    static TABLE: OnceLock<[f64; SIGMA_ORDER_LIMIT + 1]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [0.0; SIGMA_ORDER_LIMIT + 1];
        for m in 1..=SIGMA_ORDER_LIMIT {
            t[m] = t[m - 1] + (m as f64).ln();
        }
        t
    })
}

/// Fills `out[m] = σ^{(m)}(x)` for `m < out.len()`.
///
/// `x` must be finite and `out.len() <= SIGMA_ORDER_LIMIT + 1`.
pub(crate) fn sigma_jet(x: f64, out: &mut [f64]) {
    debug_assert!(out.len() <= SIGMA_ORDER_LIMIT + 1);
    out.fill(0.0);
    let q = (1.0 - x) * (1.0 + x);
    if q <= NEGLIGIBLE_Q || out.is_empty() {
        return;
    }
    let n = out.len() - 1;
    let u0 = -1.0 / q;
    let (dm, dp) = (1.0 - x, 1.0 + x);
    let rho = dm.min(dp);
    let (rm, rp) = (rho / dm, rho / dp);

    // Scaled coefficients of u(x + rho * tau) - u(x) in tau.
    let mut u = [0.0; SIGMA_ORDER_LIMIT + 1];
    let (mut pm, mut pp) = (1.0, 1.0);
    for (k, uk) in u.iter_mut().enumerate().take(n + 1).skip(1) {
        pm *= rm;
        pp *= rp;
        let alt = if k % 2 == 0 { pp / dp } else { -pp / dp };
        *uk = -0.5 * (pm / dm + alt);
    }
    // exp of the series, normalised so that e[0] = 1.
    let mut e = [0.0; SIGMA_ORDER_LIMIT + 1];
    e[0] = 1.0;
    for m in 1..=n {
        let mut s = 0.0;
        for k in 1..=m {
            s += k as f64 * u[k] * e[m - k];
        }
        e[m] = s / m as f64;
    }
    let ln_rho = rho.ln();
    let lnf = ln_factorials();
    for m in 0..=n {
        if e[m] == 0.0 {
            continue;
        }
        let log_mag = u0 + e[m].abs().ln() - m as f64 * ln_rho + lnf[m];
        out[m] = e[m].signum() * log_mag.exp();
    }
}

/// `C = ∫_{-1}^{1} σ`.
pub fn normalization_constant() -> f64 {
    phi_table().normalization
}

/// `φ(x) = σ(x) / C`.
pub fn phi(x: f64) -> Result<f64> {
    Ok(sigma(x)? / normalization_constant())
}

/// Cumulative `Φ` sampled on `[-1, 0]` and interpolated by monotone cubic
/// Hermite splines using the exact node slopes `φ(x_j)`.
///
/// Values on `(0, 1)` follow from the symmetry `Φ(x) = 1 - Φ(-x)`.
#[derive(Debug)]
pub struct PhiTable {
    pub normalization: f64,
    pub nodes: Vec<f64>,
    /// `Φ` at the nodes; first entry 0, last entry exactly 1/2.
    pub values: Vec<f64>,
    spacing: f64,
    /// Per-cell (left, right) slopes after the Fritsch–Carlson limiter.
    cell_slopes: Vec<(f64, f64)>,
}

impl PhiTable {
    fn build() -> Self {
        let n = PHI_TABLE_NODES;
        let spacing = 1.0 / (n - 1) as f64;
        let nodes: Vec<f64> = (0..n)
            .map(|j| {
                if j == n - 1 {
                    0.0
                } else {
                    -1.0 + spacing * j as f64
                }
            })
            .collect();
        let cell_tol = QUADRATURE_TOLERANCE / n as f64;
        let mut cumulative = Vec::with_capacity(n);
        cumulative.push(0.0);
        for w in nodes.windows(2) {
            let prev = *cumulative.last().unwrap();
            cumulative.push(prev + adaptive_simpson(sigma_raw, w[0], w[1], cell_tol));
        }
        let half = cumulative[n - 1];
        let normalization = 2.0 * half;
        let values: Vec<f64> = cumulative.iter().map(|&c| c / normalization).collect();
        let slopes: Vec<f64> = nodes
            .iter()
            .map(|&x| sigma_raw(x) / normalization)
            .collect();

        let cell_slopes = (0..n - 1)
            .map(|j| {
                let delta = (values[j + 1] - values[j]) / spacing;
                if delta <= 0.0 {
                    return (0.0, 0.0);
                }
                let (a, b) = (slopes[j] / delta, slopes[j + 1] / delta);
                let r2 = a * a + b * b;
                if r2 > 9.0 {
                    let tau = 3.0 / r2.sqrt();
                    (tau * a * delta, tau * b * delta)
                } else {
                    (slopes[j], slopes[j + 1])
                }
            })
            .collect();

        Self {
            normalization,
            nodes,
            values,
            spacing,
            cell_slopes,
        }
    }

    /// `Φ(x)` for `x` in `[-1, 0]`.
    fn lower(&self, x: f64) -> f64 {
        let s = (x + 1.0) / self.spacing;
        let j = (s.floor() as usize).min(self.values.len() - 2);
        let t = s - j as f64;
        let (m0, m1) = self.cell_slopes[j];
        let (v0, v1) = (self.values[j], self.values[j + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let v = h00 * v0 + h10 * self.spacing * m0 + h01 * v1 + h11 * self.spacing * m1;
        v.clamp(v0, v1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x.is_nan() {
            x
        } else if x <= -1.0 {
            0.0
        } else if x >= 1.0 {
            1.0
        } else if x > 0.0 {
            1.0 - self.lower(-x)
        } else {
            self.lower(x)
        }
    }
}

pub fn phi_table() -> &'static PhiTable {
    static TABLE: OnceLock<PhiTable> = OnceLock::new();
    TABLE.get_or_init(PhiTable::build)
}

/// `Φ(x) = ∫_{-∞}^{x} φ`; exactly 0 for `x <= -1` and exactly 1 for `x >= 1`.
pub fn phi_big(x: f64) -> f64 {
    phi_table().eval(x)
}

/// `Φ(x)` by direct adaptive quadrature, bypassing the table.
pub fn phi_big_quadrature(x: f64) -> f64 {
    if x <= -1.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let c = normalization_constant();
    if x > 0.0 {
        1.0 - integrate_sigma_from_left(-x) / c
    } else {
        integrate_sigma_from_left(x) / c
    }
}

/// `∫_{-1}^{x} σ`, split into pieces of width at most 1/64 so the adaptive
/// error estimate is not fooled by the flat start near -1.
fn integrate_sigma_from_left(x: f64) -> f64 {
    const PIECES_PER_UNIT: f64 = 64.0;
    let pieces = ((x + 1.0) * PIECES_PER_UNIT).ceil().max(1.0) as usize;
    let width = (x + 1.0) / pieces as f64;
    let tol = QUADRATURE_TOLERANCE / pieces as f64;
    (0..pieces)
        .map(|j| {
            let lo = -1.0 + width * j as f64;
            let hi = if j + 1 == pieces { x } else { lo + width };
            adaptive_simpson(sigma_raw, lo, hi, tol)
        })
        .sum()
}

/// `Φ^{(i)}(x) = σ^{(i-1)}(x) / C` for `i >= 1`.
pub fn phi_big_deriv(i: usize, x: f64) -> Result<f64> {
    if i == 0 {
        return Err(Error::Contract(
            "phi_big_deriv needs order >= 1; use phi_big".into(),
        ));
    }
    Ok(sigma_deriv(i - 1, x)? / normalization_constant())
}

/// Fills `out[i] = Φ^{(i)}(x)` for `1 <= i < out.len()`; `out[0]` receives `Φ(x)`.
pub(crate) fn phi_big_jet(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = phi_big(x);
    if out.len() > 1 {
        let c = normalization_constant();
        let tail = &mut out[1..];
        sigma_jet(x, tail);
        for v in tail.iter_mut() {
            *v /= c;
        }
    }
}

/// Upper bound `M_i` for `max_{[-1,1]} |Φ^{(i)}|`, cached per order.
pub fn sup_phi_big_deriv(i: usize) -> f64 {
    static CACHE: [OnceLock<f64>; SIGMA_ORDER_LIMIT + 2] =
        [const { OnceLock::new() }; SIGMA_ORDER_LIMIT + 2];
    if i == 0 {
        return 1.0;
    }
    assert!(
        i <= SIGMA_ORDER_LIMIT + 1,
        "order {i} above the supported limit"
    );
    *CACHE[i].get_or_init(|| {
        let c = normalization_constant();
        let m = i - 1;
        let f = |x: f64| {
            let mut buf = [0.0; SIGMA_ORDER_LIMIT + 1];
            sigma_jet(x, &mut buf[..=m]);
            buf[m] / c
        };
        let found =
            grid_max_abs(f, -1.0, 1.0, SUP_GRID_POINTS).expect("mollifier derivatives are finite");
        found.max * SUP_SAFETY
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sigma_values() {
        assert_relative_eq!(sigma(0.0).unwrap(), (-1.0f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(
            sigma(0.5).unwrap(),
            (-4.0f64 / 3.0).exp(),
            max_relative = 1e-15
        );
        assert_eq!(sigma(1.0).unwrap(), 0.0);
        assert_eq!(sigma(-1.0).unwrap(), 0.0);
        assert_eq!(sigma(3.0).unwrap(), 0.0);
        assert_eq!(sigma(1.0 - 1e-300).unwrap(), 0.0);
    }

    #[test]
    fn non_finite_input_is_a_domain_error() {
        assert!(matches!(sigma(f64::NAN), Err(Error::Domain(_))));
        assert!(matches!(
            sigma_deriv(2, f64::INFINITY),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn sigma_deriv_small_cases() {
        assert_relative_eq!(
            sigma_deriv(0, 0.0).unwrap(),
            (-1.0f64).exp(),
            max_relative = 1e-15
        );
        assert_eq!(sigma_deriv(1, 0.0).unwrap(), 0.0);
        assert_eq!(sigma_deriv(3, 0.0).unwrap(), 0.0);
        for i in 0..=SIGMA_ORDER_LIMIT {
            assert_eq!(sigma_deriv(i, 1.0).unwrap(), 0.0);
            assert_eq!(sigma_deriv(i, -1.5).unwrap(), 0.0);
        }
    }

    #[test]
    fn third_derivative_matches_central_difference() {
        let h = 1e-5;
        let x = 0.9;
        let fd = (sigma_deriv(2, x + h).unwrap() - sigma_deriv(2, x - h).unwrap()) / (2.0 * h);
        assert_relative_eq!(sigma_deriv(3, x).unwrap(), fd, max_relative = 1e-4);
    }

    // Values of σ^{(i)}(0) for i <= 5 from symbolic differentiation of
    // exp(-1/(1-x²)): e^{-1} * (1, 0, -2, 0, -12, 0).
    const SYMBOLIC_AT_ZERO: [f64; 6] = [
        0.367_879_441_171_442_3,
        0.0,
        -0.735_758_882_342_884_6,
        0.0,
        -4.414_553_294_057_308,
        0.0,
    ];

    #[test]
    fn recurrence_matches_symbolic_values_at_zero() {
        let seq = RationalExpDerivative::sequence(6);
        for (i, r) in seq.iter().enumerate() {
            assert_eq!(r.order, i);
            assert_eq!(r.denominator_power, 2 * i);
            assert!(
                (r.eval(0.0) - SYMBOLIC_AT_ZERO[i]).abs() < 1e-14,
                "order {i}"
            );
            assert!((sigma_deriv(i, 0.0).unwrap() - SYMBOLIC_AT_ZERO[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn recurrence_polynomials_known_forms() {
        let seq = RationalExpDerivative::sequence(3);
        assert_eq!(seq[1].numerator, vec![0.0, -2.0]);
        // P_2 = -2 + 6x⁴ ... expanded: -2(1-x²)² - 8x²(1-x²) + 4x²
        assert_eq!(seq[2].numerator, vec![-2.0, 0.0, 0.0, 0.0, 6.0]);
    }

    #[test]
    fn jet_agrees_with_rational_form_for_low_orders() {
        let seq = RationalExpDerivative::sequence(9);
        for r in &seq {
            let scale = sup_phi_big_deriv(r.order + 1) * normalization_constant();
            for j in 0..=40 {
                let x = -0.98 + 1.96 * j as f64 / 40.0;
                let jet = sigma_deriv(r.order, x).unwrap();
                let tol = 1e-8 * jet.abs() + 1e-12 * scale;
                assert!((jet - r.eval(x)).abs() <= tol, "order {} x {x}", r.order);
            }
        }
    }

    #[test]
    fn sigma_is_even_and_odd_derivatives_are_odd() {
        for j in 0..50 {
            let x = j as f64 / 50.0;
            assert_eq!(sigma(x).unwrap(), sigma(-x).unwrap());
            for i in 1..6 {
                let a = sigma_deriv(i, x).unwrap();
                let b = sigma_deriv(i, -x).unwrap();
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                assert!((a - sign * b).abs() <= 1e-12 * a.abs().max(1e-300));
            }
        }
    }

    #[test]
    fn normalization_constant_value() {
        let c = normalization_constant();
        assert!((c - 0.443_993_8).abs() < 1e-7, "C = {c}");
        // reference from 30-digit quadrature
        assert!((c - 0.443_993_816_168_078_6).abs() < 1e-13, "C = {c}");
        let left = adaptive_simpson(sigma_raw, -1.0, 0.0, 1e-13);
        let right = adaptive_simpson(sigma_raw, 0.0, 1.0, 1e-13);
        assert!((left - right).abs() < 1e-14);
        let total = adaptive_simpson(|x| sigma_raw(x) / c, -1.0, 1.0, 1e-13);
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn phi_big_fixed_points() {
        assert_eq!(phi_big(-1.0), 0.0);
        assert_eq!(phi_big(-7.0), 0.0);
        assert_eq!(phi_big(0.0), 0.5);
        assert_eq!(phi_big(1.0), 1.0);
        assert_eq!(phi_big(2.0), 1.0);
    }

    #[test]
    fn phi_big_deriv_values() {
        let phi0 = (-1.0f64).exp() / normalization_constant();
        assert_relative_eq!(phi_big_deriv(1, 0.0).unwrap(), phi0, max_relative = 1e-15);
        assert!((phi0 - 0.828_568_8).abs() < 1e-7);
        assert_eq!(phi_big_deriv(5, 1.0).unwrap(), 0.0);
        assert_eq!(phi_big_deriv(2, 0.0).unwrap(), 0.0);
        assert!(matches!(phi_big_deriv(0, 0.3), Err(Error::Contract(_))));
    }

    #[test]
    fn table_matches_direct_quadrature_at_cell_midpoints() {
        let t = phi_table();
        let mut worst: f64 = 0.0;
        for w in t.nodes.windows(2).step_by(7) {
            let mid = 0.5 * (w[0] + w[1]);
            worst = worst.max((phi_big(mid) - phi_big_quadrature(mid)).abs());
            worst = worst.max((phi_big(-mid) - phi_big_quadrature(-mid)).abs());
        }
        assert!(worst <= QUADRATURE_TOLERANCE, "worst deviation {worst:e}");
    }

    #[test]
    fn table_matches_high_precision_reference() {
        // 30-digit quadrature values of Φ
        let cases = [
            (-0.914_407_814_407_814_4, 0.000_056_605_010_029_325_009_6),
            (-0.828_937_728_937_728_9, 0.003_443_192_836_478_947_58),
            (-0.316_117_216_117_216_1, 0.247_067_469_732_346_958),
        ];
        for (x, want) in cases {
            assert!((phi_big(x) - want).abs() < 1e-14, "x = {x}");
            assert!((phi_big_quadrature(x) - want).abs() < 1e-12, "x = {x}");
            assert!((phi_big(-x) - (1.0 - want)).abs() < 1e-14, "x = {x}");
        }
    }

    #[test]
    fn table_invariants() {
        let t = phi_table();
        assert_eq!(t.values[0], 0.0);
        assert_eq!(*t.values.last().unwrap(), 0.5);
        assert!(t.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn finite_differences_of_phi_big_converge() {
        for j in 0..20 {
            let x = -0.95 + 1.9 * (j as f64 + 0.5) / 20.0;
            let exact = phi_big_deriv(1, x).unwrap();
            let errs: Vec<f64> = [1e-3, 1e-4, 1e-5]
                .iter()
                .map(|&h| ((phi_big(x + h) - phi_big(x - h)) / (2.0 * h) - exact).abs())
                .collect();
            assert!(errs[2] < 1e-8, "x = {x}: {errs:?}");
            assert!(errs[1] <= errs[0] || errs[0] < 1e-9, "x = {x}: {errs:?}");
        }
    }

    #[test]
    fn sup_values() {
        assert_eq!(sup_phi_big_deriv(0), 1.0);
        let phi0 = (-1.0f64).exp() / normalization_constant();
        let m1 = sup_phi_big_deriv(1);
        assert!(m1 >= phi0 && m1 <= phi0 * SUP_SAFETY * (1.0 + 1e-14));
    }

    #[test]
    fn sup_of_second_derivative_is_resolution_stable() {
        // Brute-force grids at two resolutions, no refinement.
        let c = normalization_constant();
        let brute = |n: usize| {
            (0..n)
                .map(|j| {
                    let x = -1.0 + 2.0 * j as f64 / (n - 1) as f64;
                    (sigma_deriv(1, x).unwrap() / c).abs()
                })
                .fold(0.0, f64::max)
        };
        let (coarse, fine) = (brute(10_000), brute(100_000));
        assert!((coarse - fine).abs() <= 1e-6 * fine);
        let m2 = sup_phi_big_deriv(2);
        assert!(m2 >= fine && m2 <= 1.05 * fine);
    }
}
