//! Constant metrics in affine coordinates, connection coefficients of
//! conformally scaled metrics, the connection of the `H₄` length element,
//! and conversions between the conformal factors `Λ`, `Ξ` and `λ`.
//!
//! All connections here assume affine coordinates, so the connection of the
//! unscaled metric vanishes identically.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::algebra::AlgebraSpec;
use crate::analytic::{cr_residual, generalized_derivative, AnalyticError, GammaField};
use crate::expr::{EvalError, EvalOptions, MapExpr, ScalarExpr};
use crate::jets::{eval_jet2, Dual2, VectorMap};

/// Scalar field over the coordinates, used for `Λ`, `Ξ`, `L` and `l`.
pub type ScalarField = ScalarExpr;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("metric must be square, symmetric and invertible")]
    BadMetric,
    #[error("conformal factor must be positive, found {0}")]
    NonPositiveFactor(f64),
    #[error("metric field is singular at the point")]
    SingularMetric,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("map is not analytic at the point (CR residual {0:e})")]
    NotAnalytic(f64),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
}

/// Dense rank-3 array indexed `(i, k, l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(n: usize) -> Self {
        Tensor3 {
            n,
            data: vec![0.0; n * n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                for l in 0..n {
                    t.data[(i * n + k) * n + l] = f(i, k, l);
                }
            }
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, k: usize, l: usize) -> f64 {
        self.data[(i * self.n + k) * self.n + l]
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Tensor3) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Largest `|T_ikl − T_ilk|`.
    pub fn lower_asymmetry(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for k in 0..n {
                for l in 0..n {
                    worst = worst.max((self.get(i, k, l) - self.get(i, l, k)).abs());
                }
            }
        }
        worst
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Constant metric `g_ij` with its inverse `g^ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpec {
    g: DMatrix<f64>,
    g_inv: DMatrix<f64>,
}

impl MetricSpec {
    pub fn new(g: DMatrix<f64>) -> Result<Self, GeometryError> {
        if !g.is_square() || g.nrows() == 0 || (&g - g.transpose()).amax() > 0.0 {
            return Err(GeometryError::BadMetric);
        }
        let g_inv = g.clone().try_inverse().ok_or(GeometryError::BadMetric)?;
        let n = g.nrows();
        if (&g * &g_inv - DMatrix::identity(n, n)).amax() > 1e-12 {
            return Err(GeometryError::BadMetric);
        }
        Ok(MetricSpec { g, g_inv })
    }

    pub fn euclidean(n: usize) -> Self {
        MetricSpec {
            g: DMatrix::identity(n, n),
            g_inv: DMatrix::identity(n, n),
        }
    }

    /// `diag(1, −1, …, −1)`.
    pub fn minkowski(n: usize) -> Self {
        let g = DMatrix::from_fn(n, n, |i, j| match (i == j, i) {
            (true, 0) => 1.0,
            (true, _) => -1.0,
            _ => 0.0,
        });
        MetricSpec {
            g_inv: g.clone(),
            g,
        }
    }

    /// Names accepted on the command line: `euclidN` and `minkowskiN`.
    pub fn from_name(name: &str) -> Option<Self> {
        let lower = name.to_ascii_lowercase();
        let dim = |d: &str| d.parse::<usize>().ok().filter(|n| *n >= 1);
        if let Some(d) = lower.strip_prefix("euclid") {
            dim(d).map(Self::euclidean)
        } else {
            dim(lower.strip_prefix("minkowski")?).map(Self::minkowski)
        }
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn g_inv(&self) -> &DMatrix<f64> {
        &self.g_inv
    }

    /// `g_kl x^k x^l`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for k in 0..n {
            for l in 0..n {
                acc += self.g[(k, l)] * x[k] * x[l];
            }
        }
        acc
    }
}

fn value_and_gradient(
    field: &ScalarField,
    point: &[f64],
) -> Result<(f64, Vec<f64>), GeometryError> {
    let n = field.dim;
    if point.len() != n {
        return Err(GeometryError::DimensionMismatch {
            expected: n,
            got: point.len(),
        });
    }
    let seeds: Vec<Dual2> = point
        .iter()
        .enumerate()
        .map(|(k, &v)| Dual2::variable(v, k, n))
        .collect();
    let d = field.eval(&seeds, &EvalOptions::default())?;
    Ok((d.val, d.grad))
}

/// Connection of `G = Λ·g` for constant `g`:
/// `Γ^i_kl = (1/2Λ)(∂_lΛ δ^i_k + ∂_kΛ δ^i_l − g^im ∂_mΛ g_kl)`.
pub fn christoffel_conformal(
    metric: &MetricSpec,
    lambda: &ScalarField,
    point: &[f64],
) -> Result<Tensor3, GeometryError> {
    let n = metric.dim();
    if lambda.dim != n {
        return Err(GeometryError::DimensionMismatch {
            expected: n,
            got: lambda.dim,
        });
    }
    let (value, grad) = value_and_gradient(lambda, point)?;
    if !(value > 0.0) {
        return Err(GeometryError::NonPositiveFactor(value));
    }
    let raised: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|m| metric.g_inv[(i, m)] * grad[m]).sum())
        .collect();
    let scale = 0.5 / value;
    Ok(Tensor3::from_fn(n, |i, k, l| {
        let mut t = -raised[i] * metric.g[(k, l)];
        if i == k {
            t += grad[l];
        }
        if i == l {
            t += grad[k];
        }
        scale * t
    }))
}

/// Levi-Civita connection of a point-dependent metric field by central
/// differences: `½ G^im (∂_l G_mk + ∂_k G_ml − ∂_m G_kl)`.
pub fn christoffel_general(
    metric_field: impl Fn(&[f64]) -> DMatrix<f64>,
    point: &[f64],
    h: f64,
) -> Result<Tensor3, GeometryError> {
    let n = point.len();
    let g0 = metric_field(point);
    if g0.shape() != (n, n) {
        return Err(GeometryError::DimensionMismatch {
            expected: n,
            got: g0.nrows(),
        });
    }
    let g_inv = g0.try_inverse().ok_or(GeometryError::SingularMetric)?;
    let derivs: Vec<DMatrix<f64>> = (0..n)
        .map(|d| {
            let mut xp = point.to_vec();
            let mut xm = point.to_vec();
            xp[d] += h;
            xm[d] -= h;
            (metric_field(&xp) - metric_field(&xm)) / (2.0 * h)
        })
        .collect();
    Ok(Tensor3::from_fn(n, |i, k, l| {
        let mut acc = 0.0;
        for m in 0..n {
            acc += g_inv[(i, m)] * (derivs[l][(m, k)] + derivs[k][(m, l)] - derivs[m][(k, l)]);
        }
        0.5 * acc
    }))
}

/// Connection of the `H₄`-type length element `(ds)ⁿ = Ξ dξ¹…dξⁿ` with zero
/// torsion: `Γ^i_kj = ½(p_k δ^i_j + p_j δ^i_k) − p^i_kj ∂_iΞ/Ξ`, where the
/// diagonal structure constants make the last term live on `i = k = j` only.
///
/// `covector` supplies `p_k`; `None` means `p ≡ 0`.
pub fn h4_connection(
    xi: &ScalarField,
    covector: Option<&MapExpr>,
    point: &[f64],
) -> Result<Tensor3, GeometryError> {
    let n = xi.dim;
    let (value, grad) = value_and_gradient(xi, point)?;
    if !(value > 0.0) {
        return Err(GeometryError::NonPositiveFactor(value));
    }
    let p = match covector {
        Some(m) => {
            if m.dim() != n {
                return Err(GeometryError::DimensionMismatch {
                    expected: n,
                    got: m.dim(),
                });
            }
            m.evaluate(point)?
        }
        None => vec![0.0; n],
    };
    Ok(Tensor3::from_fn(n, |i, k, j| {
        let mut t = 0.0;
        if i == j {
            t += 0.5 * p[k];
        }
        if i == k {
            t += 0.5 * p[j];
        }
        if i == k && k == j {
            t -= grad[i] / value;
        }
        t
    }))
}

/// `Λ = (∂f¹/∂x¹)² + (∂f¹/∂x²)²` for a planar map.
pub fn conformal_factor_complex(map: &MapExpr, point: &[f64]) -> Result<f64, GeometryError> {
    if map.dim() != 2 {
        return Err(GeometryError::DimensionMismatch {
            expected: 2,
            got: map.dim(),
        });
    }
    let jet = eval_jet2(map, point)?;
    Ok(jet.jac[(0, 0)].powi(2) + jet.jac[(0, 1)].powi(2))
}

/// Sign choice in `λ = λ₀·exp(±L/m)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExponentSign {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConformalFactors {
    /// `Λ = Λ₀·e^L`
    pub lambda_sq: f64,
    /// `Ξ = Ξ₀·e^(−L)`
    pub xi: f64,
    /// `λ = λ₀·e^(±L/m)`
    pub lambda_lin: f64,
}

/// Evaluates all three factor conventions for the same `L`.
pub fn factor_conversions(
    l: f64,
    lambda0: f64,
    xi0: f64,
    lin0: f64,
    order: std::num::NonZeroU32,
    sign: ExponentSign,
) -> ConformalFactors {
    let m = f64::from(order.get());
    let s = match sign {
        ExponentSign::Plus => 1.0,
        ExponentSign::Minus => -1.0,
    };
    ConformalFactors {
        lambda_sq: lambda0 * l.exp(),
        xi: xi0 * (-l).exp(),
        lambda_lin: lin0 * (s * l / m).exp(),
    }
}

/// Default bound on the CR residual before a map counts as analytic.
pub const ANALYTIC_TOL: f64 = 1e-8;

/// `Ξ = ḟ¹ḟ²…ḟⁿ` for a map analytic in `alg` (intended for the ψ basis).
pub fn xi_from_analytic(
    map: &MapExpr,
    alg: &AlgebraSpec,
    point: &[f64],
    tol: f64,
) -> Result<f64, GeometryError> {
    if map.dim() != alg.dim() {
        return Err(GeometryError::DimensionMismatch {
            expected: alg.dim(),
            got: map.dim(),
        });
    }
    let jet = eval_jet2(map, point)?;
    let gamma = GammaField::zero(alg.dim());
    let r = cr_residual(&jet, &gamma, alg)?;
    let norm = r.norm();
    if !(norm <= tol) {
        return Err(GeometryError::NotAnalytic(norm));
    }
    let fdot = generalized_derivative(&jet, &gamma, alg)?;
    Ok(fdot.iter().product())
}
