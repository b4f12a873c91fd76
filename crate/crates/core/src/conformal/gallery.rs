//! Closed-form maps with known behaviour under the conformal systems.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::expr::{BinOp, Expr, Func, MapExpr, PlanarKind};
use crate::geometry::MetricSpec;

use super::ConformalError;

pub const GALLERY_NAMES: [&str; 5] = ["mobius", "h4_log", "inverse_conjugate", "linear", "scaled"];

fn check_not_both_zero(a: f64, b: f64) -> Result<(), ConformalError> {
    if a == 0.0 && b == 0.0 {
        Err(ConformalError::DegenerateParameters(
            "a and b are both zero".into(),
        ))
    } else {
        Ok(())
    }
}

fn sum(terms: Vec<Expr>) -> Expr {
    terms
        .into_iter()
        .reduce(|acc, t| Expr::binary(BinOp::Add, acc, t))
        .unwrap_or(Expr::num(0.0))
}

/// `f^i = x^i / (a + b·g_kl x^k x^l)`.
pub fn mobius_like(a: f64, b: f64, metric: &MetricSpec) -> Result<MapExpr, ConformalError> {
    check_not_both_zero(a, b)?;
    let n = metric.dim();
    let g = metric.g();
    let mut terms = Vec::new();
    for k in 0..n {
        for l in k..n {
            let c = if k == l { g[(k, k)] } else { 2.0 * g[(k, l)] };
            if c == 0.0 {
                continue;
            }
            let mono = if k == l {
                Expr::var(k).powi(2)
            } else {
                Expr::binary(BinOp::Mul, Expr::var(k), Expr::var(l))
            };
            terms.push(if c == 1.0 {
                mono
            } else {
                Expr::binary(BinOp::Mul, Expr::num(c), mono)
            });
        }
    }
    let den = Expr::binary(
        BinOp::Add,
        Expr::param("a"),
        Expr::binary(BinOp::Mul, Expr::param("b"), sum(terms)),
    );
    let components = (0..n)
        .map(|i| Expr::binary(BinOp::Div, Expr::var(i), den.clone()))
        .collect();
    Ok(MapExpr::new(n, components)?
        .with_param("a", a)
        .with_param("b", b))
}

fn log_ratio(i: usize, x0: f64) -> Expr {
    Expr::call(
        Func::Ln,
        Expr::call(
            Func::Abs,
            Expr::binary(BinOp::Div, Expr::var(i), Expr::num(x0)),
        ),
    )
}

/// `f^i = f0_i ln|ξ^i/ξ0_i| / (a + b ln|ξ¹ξ²ξ³ξ⁴ / (ξ0_1ξ0_2ξ0_3ξ0_4)|)`.
pub fn h4_log(a: f64, b: f64, xi0: [f64; 4], f0: [f64; 4]) -> Result<MapExpr, ConformalError> {
    check_not_both_zero(a, b)?;
    if xi0.contains(&0.0) {
        return Err(ConformalError::DegenerateParameters(
            "xi0 has a zero entry".into(),
        ));
    }
    if f0.contains(&0.0) {
        return Err(ConformalError::DegenerateParameters(
            "f0 has a zero entry".into(),
        ));
    }
    let prod = (1..4).fold(Expr::var(0), |acc, i| {
        Expr::binary(BinOp::Mul, acc, Expr::var(i))
    });
    let prod0: f64 = xi0.iter().product();
    let den = Expr::binary(
        BinOp::Add,
        Expr::param("a"),
        Expr::binary(
            BinOp::Mul,
            Expr::param("b"),
            Expr::call(
                Func::Ln,
                Expr::call(Func::Abs, Expr::binary(BinOp::Div, prod, Expr::num(prod0))),
            ),
        ),
    );
    let components = (0..4)
        .map(|i| {
            Expr::binary(
                BinOp::Div,
                Expr::binary(BinOp::Mul, Expr::num(f0[i]), log_ratio(i, xi0[i])),
                den.clone(),
            )
        })
        .collect();
    Ok(MapExpr::new(4, components)?
        .with_param("a", a)
        .with_param("b", b))
}

/// `F(z) = 1 / (b·conj(z))` on the complex plane.
pub fn inverse_conjugate(b: f64) -> Result<MapExpr, ConformalError> {
    if b == 0.0 {
        return Err(ConformalError::DegenerateParameters("b is zero".into()));
    }
    Ok(MapExpr::planar("1 / (b * zconj(z))", PlanarKind::Complex)?.with_param("b", b))
}

/// `f = M x` for an invertible matrix.
pub fn linear(matrix: &DMatrix<f64>) -> Result<MapExpr, ConformalError> {
    let n = matrix.nrows();
    if !matrix.is_square() || n == 0 {
        return Err(ConformalError::DegenerateParameters(
            "matrix must be square".into(),
        ));
    }
    if matrix.determinant() == 0.0 {
        return Err(ConformalError::DegenerateParameters(
            "matrix is singular".into(),
        ));
    }
    let rows: Vec<f64> = matrix.transpose().iter().copied().collect();
    Ok(MapExpr::linear(n, &rows))
}

/// `f = c·x`.
pub fn scaled(n: usize, c: f64) -> Result<MapExpr, ConformalError> {
    linear(&(DMatrix::identity(n, n) * c))
}

fn take(
    params: &mut BTreeMap<String, f64>,
    key: &str,
    default: Option<f64>,
) -> Result<f64, ConformalError> {
    match (params.remove(key), default) {
        (Some(v), _) => Ok(v),
        (None, Some(d)) => Ok(d),
        (None, None) => Err(ConformalError::DegenerateParameters(format!(
            "missing parameter `{key}`"
        ))),
    }
}

fn take_vec4(params: &mut BTreeMap<String, f64>, key: &str) -> Result<[f64; 4], ConformalError> {
    let common = take(params, key, Some(1.0))?;
    let mut out = [common; 4];
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = take(params, &format!("{key}_{}", i + 1), Some(common))?;
    }
    Ok(out)
}

/// Builds a gallery map by name.
///
/// * `mobius`: `a`, `b`; dimension and metric come from `metric`
///   (Euclidean plane when absent).
/// * `h4_log`: `a`, `b`, `xi0`, `f0` (default 1), with per-component
///   overrides `xi0_1`…`xi0_4`, `f0_1`…`f0_4`.
/// * `inverse_conjugate`: `b`.
/// * `scaled`: `c` and optional `n` (default 2).
/// * `linear`: `n` and row-major entries `m11`, `m12`, … (missing entries
///   are taken from the identity).
pub fn gallery(
    name: &str,
    params: &BTreeMap<String, f64>,
    metric: Option<&MetricSpec>,
) -> Result<MapExpr, ConformalError> {
    let mut params = params.clone();
    let map = match name {
        "mobius" | "mobius_like" => {
            let a = take(&mut params, "a", None)?;
            let b = take(&mut params, "b", None)?;
            let euclid = MetricSpec::euclidean(2);
            mobius_like(a, b, metric.unwrap_or(&euclid))?
        }
        "h4_log" => {
            let a = take(&mut params, "a", None)?;
            let b = take(&mut params, "b", None)?;
            let xi0 = take_vec4(&mut params, "xi0")?;
            let f0 = take_vec4(&mut params, "f0")?;
            h4_log(a, b, xi0, f0)?
        }
        "inverse_conjugate" => inverse_conjugate(take(&mut params, "b", None)?)?,
        "scaled" => {
            let c = take(&mut params, "c", None)?;
            let n = take(&mut params, "n", Some(2.0))?;
            scaled(dim_param(n)?, c)?
        }
        "linear" => {
            let n = dim_param(take(&mut params, "n", Some(2.0))?)?;
            let mut m = DMatrix::identity(n, n);
            for i in 0..n {
                for j in 0..n {
                    if let Some(v) = params.remove(&format!("m{}{}", i + 1, j + 1)) {
                        m[(i, j)] = v;
                    }
                }
            }
            linear(&m)?
        }
        other => return Err(ConformalError::UnknownGallery(other.to_string())),
    };
    if let Some(extra) = params.keys().next() {
        return Err(ConformalError::UnknownParameter(extra.clone()));
    }
    Ok(map)
}

fn dim_param(n: f64) -> Result<usize, ConformalError> {
    if n >= 1.0 && n.fract() == 0.0 && n <= 9.0 {
        Ok(n as usize)
    } else {
        Err(ConformalError::DegenerateParameters(format!(
            "bad dimension {n}"
        )))
    }
}
