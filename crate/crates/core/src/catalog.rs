//! Built-in functions with closed-form derivatives of every order.

use std::fmt;

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::open_set::OpenSet;

/// Smoothness class `C^k`, `k` finite or infinite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderBound {
    Finite(usize),
    Infinite,
}

impl OrderBound {
    pub fn allows(self, order: usize) -> bool {
        match self {
            OrderBound::Finite(k) => order <= k,
            OrderBound::Infinite => true,
        }
    }

    pub fn min(self, other: OrderBound) -> OrderBound {
        match (self, other) {
            (OrderBound::Finite(a), OrderBound::Finite(b)) => OrderBound::Finite(a.min(b)),
            (OrderBound::Finite(a), OrderBound::Infinite)
            | (OrderBound::Infinite, OrderBound::Finite(a)) => OrderBound::Finite(a),
            (OrderBound::Infinite, OrderBound::Infinite) => OrderBound::Infinite,
        }
    }

    /// `min(k, cap)` as a plain number.
    pub fn capped(self, cap: usize) -> usize {
        match self {
            OrderBound::Finite(k) => k.min(cap),
            OrderBound::Infinite => cap,
        }
    }
}

impl fmt::Display for OrderBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OrderBound::Finite(k) => write!(f, "{k}"),
            OrderBound::Infinite => f.write_str("inf"),
        }
    }
}

/// A real function with exact derivatives on its domain.
///
/// `deriv(0, x)` is the function value. Implementations must return finite
/// values for orders within [`order_bound`](Self::order_bound) at points of
/// their domain; very high orders may overflow to infinity.
pub trait FunctionOracle: Send + Sync + fmt::Debug {
    fn deriv(&self, order: usize, x: f64) -> f64;

    fn order_bound(&self) -> OrderBound;

    fn label(&self) -> String;

    fn value(&self, x: f64) -> f64 {
        self.deriv(0, x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CatalogFunction {
    Constant {
        c: f64,
    },
    /// Coefficients lowest degree first.
    Polynomial {
        coeffs: Vec<f64>,
    },
    Reciprocal,
    ReciprocalPower {
        m: u32,
    },
    SinReciprocal,
    Exp {
        rate: f64,
    },
    Log,
    IndicatorSmooth,
    /// `(x - s)^k |x - s|`: C^k everywhere, not C^{k+1} at `s`.
    CkOnly {
        k: usize,
        shift: f64,
    },
}

pub const CATALOG_IDS: &[&str] = &[
    "constant",
    "polynomial",
    "reciprocal",
    "reciprocal_power",
    "sin_reciprocal",
    "exp",
    "log",
    "indicator_smooth",
    "ck_only",
];

impl CatalogFunction {
    pub fn id(&self) -> &'static str {
        match self {
            CatalogFunction::Constant { .. } => "constant",
            CatalogFunction::Polynomial { .. } => "polynomial",
            CatalogFunction::Reciprocal => "reciprocal",
            CatalogFunction::ReciprocalPower { .. } => "reciprocal_power",
            CatalogFunction::SinReciprocal => "sin_reciprocal",
            CatalogFunction::Exp { .. } => "exp",
            CatalogFunction::Log => "log",
            CatalogFunction::IndicatorSmooth => "indicator_smooth",
            CatalogFunction::CkOnly { .. } => "ck_only",
        }
    }

    pub fn order_bound(&self) -> OrderBound {
        match self {
            CatalogFunction::CkOnly { k, .. } => OrderBound::Finite(*k),
            _ => OrderBound::Infinite,
        }
    }

    pub fn deriv(&self, i: usize, x: f64) -> f64 {
        match self {
            CatalogFunction::Constant { c } => {
                if i == 0 {
                    *c
                } else {
                    0.0
                }
            }
            CatalogFunction::IndicatorSmooth => {
                if i == 0 {
                    1.0
                } else {
                    0.0
                }
            }
            CatalogFunction::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(i)
                .rev()
                .fold(0.0, |acc, (j, &c)| acc * x + c * falling_factorial(j, i)),
            CatalogFunction::Reciprocal => power_deriv(1, i, x),
            CatalogFunction::ReciprocalPower { m } => power_deriv(*m, i, x),
            CatalogFunction::SinReciprocal => sin_reciprocal_deriv(i, x),
            CatalogFunction::Exp { rate } => rate.powi(i as i32) * (rate * x).exp(),
            CatalogFunction::Log => {
                if i == 0 {
                    x.ln()
                } else {
                    let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
                    sign * factorial(i - 1) * x.powi(-(i as i32))
                }
            }
            CatalogFunction::CkOnly { k, shift } => {
                let y = x - shift;
                let top = k + 1;
                if i > top || y == 0.0 {
                    return 0.0;
                }
                // sign(y) y^m = sign(y)^{m+1} |y|^m
                let m = top - i;
                y.signum().powi(m as i32 + 1) * falling_factorial(top, i) * y.abs().powi(m as i32)
            }
        }
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// `j (j-1) ... (j-i+1)`.
fn falling_factorial(j: usize, i: usize) -> f64 {
    (0..i).fold(1.0, |acc, t| acc * (j - t) as f64)
}

/// `d^i/dx^i x^{-m} = (-1)^i m (m+1) ... (m+i-1) x^{-m-i}`.
fn power_deriv(m: u32, i: usize, x: f64) -> f64 {
    let rising = (0..i).fold(1.0, |acc, t| acc * (m as f64 + t as f64));
    let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
    sign * rising * x.powi(-(m as i32) - i as i32)
}

/// Derivatives of `sin(1/x)` via the Lah-number expansion
/// `d^n/dx^n F(1/x) = (-1)^n Σ_{k=1}^{n} L(n,k) x^{-n-k} F^{(k)}(1/x)`.
fn sin_reciprocal_deriv(n: usize, x: f64) -> f64 {
    let y = 1.0 / x;
    if n == 0 {
        return y.sin();
    }
    let (s, c) = y.sin_cos();
    let sin_deriv = |k: usize| match k % 4 {
        0 => s,
        1 => c,
        2 => -s,
        _ => -c,
    };
    // L(n,1) = n!, L(n,k+1) = L(n,k) (n-k) / (k (k+1)).
    let mut lah = factorial(n);
    let mut sum = 0.0;
    for k in 1..=n {
        sum += lah * x.powi(-((n + k) as i32)) * sin_deriv(k);
        lah *= (n - k) as f64 / (k as f64 * (k + 1) as f64);
    }
    if n % 2 == 0 {
        sum
    } else {
        -sum
    }
}

/// A catalog function bound to the open set it is defined on.
#[derive(Debug, Clone, PartialEq)]
pub struct CatalogOracle {
    pub function: CatalogFunction,
    pub params: Map<String, Value>,
    pub domain: OpenSet,
}

impl FunctionOracle for CatalogOracle {
    fn deriv(&self, order: usize, x: f64) -> f64 {
        self.function.deriv(order, x)
    }

    fn order_bound(&self) -> OrderBound {
        self.function.order_bound()
    }

    fn label(&self) -> String {
        self.function.id().to_string()
    }
}

fn param_f64(
    id: &str,
    params: &Map<String, Value>,
    key: &str,
    default: Option<f64>,
) -> Result<f64> {
    match params.get(key) {
        Some(v) => v
            .as_f64()
            .filter(|x| x.is_finite())
            .ok_or_else(|| Error::InvalidParams {
                id: id.into(),
                reason: format!("`{key}` must be a finite number"),
            }),
        None => default.ok_or_else(|| Error::InvalidParams {
            id: id.into(),
            reason: format!("missing parameter `{key}`"),
        }),
    }
}

fn param_uint(
    id: &str,
    params: &Map<String, Value>,
    key: &str,
    default: Option<u64>,
) -> Result<u64> {
    match params.get(key) {
        Some(v) => v.as_u64().ok_or_else(|| Error::InvalidParams {
            id: id.into(),
            reason: format!("`{key}` must be a non-negative integer"),
        }),
        None => default.ok_or_else(|| Error::InvalidParams {
            id: id.into(),
            reason: format!("missing parameter `{key}`"),
        }),
    }
}

/// Builds a catalog oracle and checks that the domain avoids its singularities.
pub fn make_oracle(
    id: &str,
    params: &Map<String, Value>,
    domain: OpenSet,
) -> Result<CatalogOracle> {
    let invalid = |reason: String| Error::InvalidParams {
        id: id.into(),
        reason,
    };
    let function = match id {
        "constant" => CatalogFunction::Constant {
            c: param_f64(id, params, "c", Some(1.0))?,
        },
        "polynomial" => {
            let coeffs = match params.get("coeffs") {
                Some(Value::Array(items)) => items
                    .iter()
                    .map(|v| v.as_f64().filter(|x| x.is_finite()))
                    .collect::<Option<Vec<f64>>>()
                    .ok_or_else(|| invalid("`coeffs` must be an array of finite numbers".into()))?,
                _ => return Err(invalid("missing array parameter `coeffs`".into())),
            };
            if coeffs.is_empty() {
                return Err(invalid("`coeffs` must not be empty".into()));
            }
            CatalogFunction::Polynomial { coeffs }
        }
        "reciprocal" => CatalogFunction::Reciprocal,
        "reciprocal_power" => {
            let m = param_uint(id, params, "m", Some(2))?;
            if m == 0 || m > 64 {
                return Err(invalid(format!("`m` must lie in 1..=64, got {m}")));
            }
            CatalogFunction::ReciprocalPower { m: m as u32 }
        }
        "sin_reciprocal" => CatalogFunction::SinReciprocal,
        "exp" => CatalogFunction::Exp {
            rate: param_f64(id, params, "rate", Some(1.0))?,
        },
        "log" => CatalogFunction::Log,
        "indicator_smooth" => CatalogFunction::IndicatorSmooth,
        "ck_only" => {
            let k = param_uint(id, params, "k", Some(2))? as usize;
            if k == 0 || k > 32 {
                return Err(invalid(format!("`k` must lie in 1..=32, got {k}")));
            }
            CatalogFunction::CkOnly {
                k,
                shift: param_f64(id, params, "shift", Some(0.5))?,
            }
        }
        other => return Err(Error::UnknownFunction(other.to_string())),
    };
    match function {
        CatalogFunction::Reciprocal
        | CatalogFunction::ReciprocalPower { .. }
        | CatalogFunction::SinReciprocal
            if domain.contains(0.0) =>
        {
            return Err(invalid("domain contains the pole at 0".into()));
        }
        CatalogFunction::Log if domain.components().first().is_some_and(|c| c.lo < 0.0) => {
            return Err(invalid("domain must lie in (0, ∞)".into()));
        }
        _ => {}
    }
    Ok(CatalogOracle {
        function,
        params: params.clone(),
        domain,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn unit() -> OpenSet {
        OpenSet::normalize(&[(0.0, 1.0)]).unwrap()
    }

    fn oracle(id: &str, params: Value) -> CatalogOracle {
        let map = params.as_object().cloned().unwrap_or_default();
        make_oracle(id, &map, unit()).unwrap()
    }

    #[test]
    fn reciprocal_second_derivative() {
        assert_eq!(oracle("reciprocal", Value::Null).deriv(2, 0.5), 16.0);
    }

    #[test]
    fn constant_derivatives_vanish() {
        let f = oracle("constant", serde_json::json!({"c": 1.0}));
        assert_eq!(f.deriv(0, 0.3), 1.0);
        for i in 1..10 {
            assert_eq!(f.deriv(i, 0.3), 0.0);
        }
    }

    #[test]
    fn sin_reciprocal_first_derivative_at_inverse_pi() {
        let f = oracle("sin_reciprocal", Value::Null);
        assert_relative_eq!(f.deriv(1, 1.0 / PI), PI * PI, max_relative = 1e-12);
    }

    #[test]
    fn ck_only_is_ck_but_jumps_at_k_plus_one() {
        let f = oracle("ck_only", serde_json::json!({"k": 2, "shift": 0.5}));
        assert_eq!(f.order_bound(), OrderBound::Finite(2));
        assert_relative_eq!(f.deriv(0, 0.7), 0.2f64.powi(3), max_relative = 1e-12);
        assert_relative_eq!(f.deriv(0, 0.3), 0.2f64.powi(3), max_relative = 1e-12);
        assert_relative_eq!(f.deriv(1, 0.3), -3.0 * 0.04, max_relative = 1e-12);
        assert_relative_eq!(f.deriv(2, 0.6), 6.0 * 0.1, max_relative = 1e-12);
        assert_relative_eq!(f.deriv(2, 0.4), 6.0 * 0.1, max_relative = 1e-12);
        assert_eq!(f.deriv(3, 0.6), 6.0);
        assert_eq!(f.deriv(3, 0.4), -6.0);
    }

    #[test]
    fn domain_and_id_validation() {
        let line = OpenSet::real_line();
        let empty = Map::new();
        assert!(matches!(
            make_oracle("reciprocal", &empty, line.clone()),
            Err(Error::InvalidParams { .. })
        ));
        assert!(matches!(
            make_oracle("log", &empty, line.clone()),
            Err(Error::InvalidParams { .. })
        ));
        assert!(matches!(
            make_oracle("nope", &empty, line.clone()),
            Err(Error::UnknownFunction(_))
        ));
        let bad_k = serde_json::json!({"k": 0}).as_object().cloned().unwrap();
        assert!(make_oracle("ck_only", &bad_k, line.clone()).is_err());
        assert!(make_oracle("polynomial", &empty, line).is_err());
    }

    fn central(f: &CatalogOracle, i: usize, x: f64, h: f64) -> f64 {
        (f.deriv(i - 1, x + h) - f.deriv(i - 1, x - h)) / (2.0 * h)
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let cases = [
            ("constant", serde_json::json!({"c": 2.5})),
            (
                "polynomial",
                serde_json::json!({"coeffs": [1.0, -2.0, 0.5, 3.0, -1.0]}),
            ),
            ("reciprocal", Value::Null),
            ("reciprocal_power", serde_json::json!({"m": 3})),
            ("sin_reciprocal", Value::Null),
            ("exp", serde_json::json!({"rate": -1.5})),
            ("log", Value::Null),
            ("indicator_smooth", Value::Null),
            ("ck_only", serde_json::json!({"k": 2, "shift": 0.5})),
        ];
        for (id, params) in cases {
            let f = oracle(id, params);
            for j in 0..20 {
                let x = 0.2 + 0.75 * (j as f64 + 0.5) / 20.0;
                if (x - 0.5).abs() < 0.02 {
                    continue;
                }
                for i in 1..=4 {
                    let exact = f.deriv(i, x);
                    let fd = central(&f, i, x, 1e-6 * x);
                    let scale = exact.abs().max(f.deriv(i - 1, x).abs()).max(1.0);
                    assert!(
                        (exact - fd).abs() <= 1e-4 * scale,
                        "{id} i={i} x={x}: {exact} vs {fd}"
                    );
                }
            }
        }
    }

    #[test]
    fn high_order_sin_reciprocal_matches_recurrence_free_check() {
        // d^n sin(1/x) at x = 1 compared with a 4th-order central difference of order n-1.
        let f = oracle("sin_reciprocal", Value::Null);
        for n in 2..=8 {
            let h = 1e-3;
            let g = |x: f64| f.deriv(n - 1, x);
            let fd = (-g(1.0 + 2.0 * h) + 8.0 * g(1.0 + h) - 8.0 * g(1.0 - h) + g(1.0 - 2.0 * h))
                / (12.0 * h);
            let exact = f.deriv(n, 1.0);
            assert!((exact - fd).abs() <= 1e-6 * exact.abs().max(1.0), "n = {n}");
        }
    }
}
