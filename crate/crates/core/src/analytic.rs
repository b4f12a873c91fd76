//! Generalized analytic functions over an algebra: the generalized derivative,
//! Cauchy–Riemann analogues with an auxiliary field `γ`, integrability of the
//! resulting first-order system, the second-order scalar equation and the
//! polynomial source solutions of the wave/Laplace equations.

use std::sync::Arc;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::algebra::{multiply_coords, AlgebraError, AlgebraSpec, BasisMap, PolyValue};
use crate::expr::{EvalError, EvalOptions, ScalarExpr};
use crate::geometry::Tensor3;
use crate::jets::{eval_jet2, Jet2, Scalar, VectorMap};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("algebra `{0}` is degenerate (q_ij is singular)")]
    Degenerate(String),
    #[error("polynomial lives in `{found}` but the case needs `{expected}`")]
    WrongAlgebra { expected: String, found: String },
    #[error("polynomial needs at least one coefficient")]
    Empty,
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

fn check_dim(expected: usize, got: usize) -> Result<(), AnalyticError> {
    if expected == got {
        Ok(())
    } else {
        Err(AnalyticError::DimensionMismatch { expected, got })
    }
}

/// The auxiliary field `γ^i_k(x)`; unset entries are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaField {
    dim: usize,
    entries: Vec<Option<ScalarExpr>>,
}

impl GammaField {
    pub fn zero(dim: usize) -> Self {
        GammaField {
            dim,
            entries: vec![None; dim * dim],
        }
    }

    /// Sets `γ^i_k` (0-based indices).
    pub fn with(mut self, i: usize, k: usize, expr: ScalarExpr) -> Self {
        self.entries[i * self.dim + k] = Some(expr);
        self
    }

    pub fn constant(values: &DMatrix<f64>) -> Self {
        let n = values.nrows();
        let mut g = Self::zero(n);
        for i in 0..n {
            for k in 0..n {
                if values[(i, k)] != 0.0 {
                    g.entries[i * n + k] = Some(ScalarExpr {
                        dim: n,
                        expr: crate::expr::Expr::num(values[(i, k)]),
                        params: Default::default(),
                    });
                }
            }
        }
        g
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(Option::is_none)
    }

    pub fn eval(&self, point: &[f64]) -> Result<DMatrix<f64>, EvalError> {
        let n = self.dim;
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            for k in 0..n {
                if let Some(e) = &self.entries[i * n + k] {
                    out[(i, k)] = e.eval(point, &EvalOptions::default())?;
                }
            }
        }
        Ok(out)
    }
}

/// `ḟ^i = ε^m ∂f^i/∂x^m + ε^m γ^i_m` at the jet's point.
pub fn generalized_derivative(
    jet: &Jet2,
    gamma: &GammaField,
    alg: &AlgebraSpec,
) -> Result<Vec<f64>, AnalyticError> {
    let n = alg.dim();
    check_dim(n, jet.dim())?;
    check_dim(n, gamma.dim())?;
    let g = gamma.eval(&jet.point)?;
    let eps = alg.unit_coefficients();
    Ok((0..n)
        .map(|i| (0..n).map(|m| eps[m] * (jet.jac[(i, m)] + g[(i, m)])).sum())
        .collect())
}

/// `R^i_k = ∂f^i/∂x^k + γ^i_k − p^i_kj ḟ^j`.
pub fn cr_residual(
    jet: &Jet2,
    gamma: &GammaField,
    alg: &AlgebraSpec,
) -> Result<DMatrix<f64>, AnalyticError> {
    let n = alg.dim();
    let fdot = generalized_derivative(jet, gamma, alg)?;
    let g = gamma.eval(&jet.point)?;
    Ok(DMatrix::from_fn(n, n, |i, k| {
        let pf: f64 = (0..n).map(|j| alg.p(i, k, j) * fdot[j]).sum();
        jet.jac[(i, k)] + g[(i, k)] - pf
    }))
}

/// `A^i_k = −γ^i_k + p^i_kj ḟ^j`, which must equal `∂f^i/∂x^k`.
fn first_order_rhs<M: VectorMap + ?Sized>(
    map: &M,
    gamma: &GammaField,
    alg: &AlgebraSpec,
    point: &[f64],
) -> Result<DMatrix<f64>, AnalyticError> {
    let jet = eval_jet2(map, point)?;
    let fdot = generalized_derivative(&jet, gamma, alg)?;
    let g = gamma.eval(point)?;
    let n = alg.dim();
    Ok(DMatrix::from_fn(n, n, |i, k| {
        -g[(i, k)] + (0..n).map(|j| alg.p(i, k, j) * fdot[j]).sum::<f64>()
    }))
}

/// Central-difference curl `∂_m A^i_k − ∂_k A^i_m`, indexed `(i, m, k)`.
pub fn integrability_residual<M: VectorMap + ?Sized>(
    map: &M,
    gamma: &GammaField,
    alg: &AlgebraSpec,
    point: &[f64],
    h: f64,
) -> Result<Tensor3, AnalyticError> {
    let n = alg.dim();
    check_dim(n, map.dim())?;
    check_dim(n, point.len())?;
    let mut derivs = Vec::with_capacity(n);
    for m in 0..n {
        let mut xp = point.to_vec();
        let mut xm = point.to_vec();
        xp[m] += h;
        xm[m] -= h;
        let ap = first_order_rhs(map, gamma, alg, &xp)?;
        let am = first_order_rhs(map, gamma, alg, &xm)?;
        derivs.push((ap - am) / (2.0 * h));
    }
    Ok(Tensor3::from_fn(n, |i, m, k| {
        derivs[m][(i, k)] - derivs[k][(i, m)]
    }))
}

/// `C^{mk} ∂²f^i/∂x^m∂x^k` for each component.
pub fn contract_hessian(jet: &Jet2, contraction: &DMatrix<f64>) -> Vec<f64> {
    let n = jet.dim();
    (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for m in 0..n {
                for k in 0..n {
                    let c = contraction[(m, k)];
                    if c != 0.0 {
                        acc += c * jet.hess(i, m, k);
                    }
                }
            }
            acc
        })
        .collect()
}

/// `f̈^r = ε^m ε^l ∂²f^r/∂x^m∂x^l`, the generalized derivative of `ḟ` when
/// `γ = 0`. Only the Hessian is needed since `ε` is constant.
pub fn second_generalized_derivative(
    jet: &Jet2,
    alg: &AlgebraSpec,
) -> Result<Vec<f64>, AnalyticError> {
    let n = alg.dim();
    check_dim(n, jet.dim())?;
    let eps = alg.unit_coefficients();
    Ok(contract_hessian(
        jet,
        &DMatrix::from_fn(n, n, |m, l| eps[m] * eps[l]),
    ))
}

/// Both sides of `q^{mk} ∂²f^i/∂x^m∂x^k = Q^i_r f̈^r`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarEquation {
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub second_derivative: Vec<f64>,
}

impl ScalarEquation {
    pub fn defect(&self) -> f64 {
        self.lhs
            .iter()
            .zip(&self.rhs)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

pub fn scalar_equation_check<M: VectorMap + ?Sized>(
    map: &M,
    alg: &AlgebraSpec,
    point: &[f64],
) -> Result<ScalarEquation, AnalyticError> {
    let n = alg.dim();
    check_dim(n, map.dim())?;
    let tensors = alg.derived_tensors();
    let (q_upper, big_q) = match (&tensors.q_upper, &tensors.big_q) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(AnalyticError::Degenerate(alg.name().to_string())),
    };
    let jet = eval_jet2(map, point)?;
    let lhs = contract_hessian(&jet, q_upper);
    let fdd = second_generalized_derivative(&jet, alg)?;
    let rhs = (0..n)
        .map(|i| (0..n).map(|r| big_q[(i, r)] * fdd[r]).sum())
        .collect();
    Ok(ScalarEquation {
        lhs,
        rhs,
        second_derivative: fdd,
    })
}

/// `Σ_a ∂²f/∂(x^a)²` in the x-basis and in the ψ-basis at corresponding
/// points, for a 4-D map written in x-basis coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisEquivalence {
    pub lhs_psi: Vec<f64>,
    pub lhs_x: Vec<f64>,
}

struct Precomposed<'a, M: ?Sized> {
    inner: &'a M,
    matrix: &'a DMatrix<f64>,
}

impl<M: VectorMap + ?Sized> VectorMap for Precomposed<'_, M> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn map<T: Scalar>(&self, x: &[T], opts: &EvalOptions) -> Result<Vec<T>, EvalError> {
        let n = self.matrix.nrows();
        let y: Vec<T> = (0..n)
            .map(|i| {
                let mut acc = x[0].lift(0.0);
                for (k, xk) in x.iter().enumerate() {
                    let c = self.matrix[(i, k)];
                    if c != 0.0 {
                        acc = acc + xk.clone() * c;
                    }
                }
                acc
            })
            .collect();
        self.inner.map(&y, opts)
    }
}

pub fn basis_equivalence_check<M: VectorMap + ?Sized>(
    map: &M,
    point: &[f64],
) -> Result<BasisEquivalence, AnalyticError> {
    check_dim(4, map.dim())?;
    check_dim(4, point.len())?;
    let basis = BasisMap::h4_x_to_psi();
    let identity = DMatrix::identity(4, 4);
    let lhs_x = contract_hessian(&eval_jet2(map, point)?, &identity);
    let xi = basis.apply(point)?;
    let in_psi = Precomposed {
        inner: map,
        matrix: basis.inverse(),
    };
    let lhs_psi = contract_hessian(&eval_jet2(&in_psi, &xi)?, &identity);
    Ok(BasisEquivalence { lhs_psi, lhs_x })
}

/// A polynomial `Σ c_k X^k` with coefficients in an algebra.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyPolynomial {
    algebra: Arc<AlgebraSpec>,
    coeffs: Vec<Vec<f64>>,
}

impl PolyPolynomial {
    /// Trailing zero coefficients are dropped, keeping at least one.
    pub fn new(
        algebra: Arc<AlgebraSpec>,
        mut coeffs: Vec<Vec<f64>>,
    ) -> Result<Self, AnalyticError> {
        if coeffs.is_empty() {
            return Err(AnalyticError::Empty);
        }
        for c in &coeffs {
            check_dim(algebra.dim(), c.len())?;
        }
        while coeffs.len() > 1 && coeffs.last().is_some_and(|c| c.iter().all(|v| *v == 0.0)) {
            coeffs.pop();
        }
        Ok(PolyPolynomial { algebra, coeffs })
    }

    pub fn from_values(
        algebra: Arc<AlgebraSpec>,
        values: &[PolyValue],
    ) -> Result<Self, AnalyticError> {
        let coeffs = values
            .iter()
            .map(|v| {
                if v.algebra().same_structure(&algebra) {
                    Ok(v.coords().to_vec())
                } else {
                    Err(AnalyticError::WrongAlgebra {
                        expected: algebra.name().to_string(),
                        found: v.algebra().name().to_string(),
                    })
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(algebra, coeffs)
    }

    /// `X^k` scaled by the unit.
    pub fn monomial(algebra: Arc<AlgebraSpec>, k: usize) -> Self {
        let n = algebra.dim();
        let mut coeffs = vec![vec![0.0; n]; k + 1];
        coeffs[k] = algebra.unit_coefficients().to_vec();
        PolyPolynomial { algebra, coeffs }
    }

    pub fn algebra(&self) -> &Arc<AlgebraSpec> {
        &self.algebra
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Vec<f64>] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> PolyValue {
        let coords = self
            .coeffs
            .get(k)
            .cloned()
            .unwrap_or_else(|| vec![0.0; self.algebra.dim()]);
        PolyValue::new(Arc::clone(&self.algebra), coords)
            .expect("coefficient length checked on construction")
    }

    fn with_coeffs(&self, coeffs: Vec<Vec<f64>>) -> Self {
        Self::new(Arc::clone(&self.algebra), coeffs).expect("same algebra")
    }

    fn check_same(&self, other: &PolyPolynomial) -> Result<(), AnalyticError> {
        if self.algebra.same_structure(&other.algebra) {
            Ok(())
        } else {
            Err(AnalyticError::WrongAlgebra {
                expected: self.algebra.name().to_string(),
                found: other.algebra.name().to_string(),
            })
        }
    }

    pub fn add(&self, other: &PolyPolynomial) -> Result<Self, AnalyticError> {
        self.check_same(other)?;
        let n = self.algebra.dim();
        let len = self.coeffs.len().max(other.coeffs.len());
        let zero = vec![0.0; n];
        let coeffs = (0..len)
            .map(|k| {
                let a = self.coeffs.get(k).unwrap_or(&zero);
                let b = other.coeffs.get(k).unwrap_or(&zero);
                a.iter().zip(b).map(|(x, y)| x + y).collect()
            })
            .collect();
        Ok(self.with_coeffs(coeffs))
    }

    pub fn mul(&self, other: &PolyPolynomial) -> Result<Self, AnalyticError> {
        self.check_same(other)?;
        let n = self.algebra.dim();
        let mut coeffs = vec![vec![0.0; n]; self.coeffs.len() + other.coeffs.len() - 1];
        for (a, ca) in self.coeffs.iter().enumerate() {
            for (b, cb) in other.coeffs.iter().enumerate() {
                let prod = multiply_coords(&self.algebra, ca, cb);
                for (slot, v) in coeffs[a + b].iter_mut().zip(prod) {
                    *slot += v;
                }
            }
        }
        Ok(self.with_coeffs(coeffs))
    }

    /// `self(inner(X))`.
    pub fn compose(&self, inner: &PolyPolynomial) -> Result<Self, AnalyticError> {
        self.check_same(inner)?;
        let last = self.coeffs.len() - 1;
        let mut acc = self.with_coeffs(vec![self.coeffs[last].clone()]);
        for k in (0..last).rev() {
            acc = acc
                .mul(inner)?
                .add(&self.with_coeffs(vec![self.coeffs[k].clone()]))?;
        }
        Ok(acc)
    }

    /// Multiplies every coefficient's coordinate vector by `m`.
    pub fn mix(&self, m: &DMatrix<f64>) -> Result<Self, AnalyticError> {
        let n = self.algebra.dim();
        check_dim(n, m.nrows())?;
        check_dim(n, m.ncols())?;
        let coeffs = self
            .coeffs
            .iter()
            .map(|c| {
                (0..n)
                    .map(|i| (0..n).map(|j| m[(i, j)] * c[j]).sum())
                    .collect()
            })
            .collect();
        Ok(self.with_coeffs(coeffs))
    }

    /// Largest coefficientwise difference; missing coefficients count as zero.
    pub fn max_coeff_diff(&self, other: &PolyPolynomial) -> f64 {
        let n = self.algebra.dim();
        let zero = vec![0.0; n];
        let len = self.coeffs.len().max(other.coeffs.len());
        (0..len).fold(0.0, |worst, k| {
            let a = self.coeffs.get(k).unwrap_or(&zero);
            let b = other.coeffs.get(k).unwrap_or(&zero);
            a.iter()
                .zip(b)
                .fold(worst, |w, (x, y)| w.max((x - y).abs()))
        })
    }
}

impl VectorMap for PolyPolynomial {
    fn dim(&self) -> usize {
        self.algebra.dim()
    }

    fn map<T: Scalar>(&self, x: &[T], _opts: &EvalOptions) -> Result<Vec<T>, EvalError> {
        let n = self.algebra.dim();
        if x.len() != n {
            return Err(EvalError::DimensionMismatch {
                expected: n,
                got: x.len(),
            });
        }
        let lift = |c: &[f64]| c.iter().map(|v| x[0].lift(*v)).collect::<Vec<T>>();
        let last = self.coeffs.len() - 1;
        let mut acc = lift(&self.coeffs[last]);
        for k in (0..last).rev() {
            acc = multiply_coords(&self.algebra, &acc, x);
            for (a, c) in acc.iter_mut().zip(&self.coeffs[k]) {
                *a = a.clone() + x[0].lift(*c);
            }
        }
        Ok(acc)
    }
}

/// The second-order operators for which polynomial source solutions exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceCase {
    /// `(∂²_x − ∂²_y) u = s` over the complex numbers.
    ComplexWave,
    /// `(∂²_x + ∂²_y) u = s` over the split-complex numbers.
    H2Laplace,
    /// `Σ ∂²/∂(x^a)² u = s` over `H₄` in the x-basis.
    H4xLaplace,
    /// `Σ ∂²/∂(ξ^a)² u = s` over `H₄` in the ψ-basis.
    H4Psi,
}

impl SourceCase {
    pub const ALL: [SourceCase; 4] = [
        SourceCase::ComplexWave,
        SourceCase::H2Laplace,
        SourceCase::H4xLaplace,
        SourceCase::H4Psi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SourceCase::ComplexWave => "c-wave",
            SourceCase::H2Laplace => "h2-laplace",
            SourceCase::H4xLaplace => "h4x-laplace",
            SourceCase::H4Psi => "h4psi",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
    }

    pub fn algebra(self) -> AlgebraSpec {
        match self {
            SourceCase::ComplexWave => AlgebraSpec::complex(),
            SourceCase::H2Laplace => AlgebraSpec::split_complex(),
            SourceCase::H4xLaplace => AlgebraSpec::h4_x(),
            SourceCase::H4Psi => AlgebraSpec::h4_psi(),
        }
    }

    pub fn divisor(self) -> f64 {
        match self {
            SourceCase::ComplexWave | SourceCase::H2Laplace => 2.0,
            SourceCase::H4xLaplace => 4.0,
            SourceCase::H4Psi => 1.0,
        }
    }

    /// `C^{ab}` of the operator `C^{ab} ∂_a ∂_b`.
    pub fn contraction(self) -> DMatrix<f64> {
        match self {
            SourceCase::ComplexWave => {
                DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1.0]))
            }
            SourceCase::H2Laplace => DMatrix::identity(2, 2),
            SourceCase::H4xLaplace | SourceCase::H4Psi => DMatrix::identity(4, 4),
        }
    }
}

fn check_case(poly: &PolyPolynomial, case: SourceCase) -> Result<(), AnalyticError> {
    let expected = case.algebra();
    if poly.algebra.same_structure(&expected) {
        Ok(())
    } else {
        Err(AnalyticError::WrongAlgebra {
            expected: expected.name().to_string(),
            found: poly.algebra.name().to_string(),
        })
    }
}

/// Second antiderivative of the (optionally mixed) source, integration
/// constants zero, divided by the case's coefficient.
pub fn source_solution(
    source: &PolyPolynomial,
    case: SourceCase,
    mixing: Option<&DMatrix<f64>>,
) -> Result<PolyPolynomial, AnalyticError> {
    check_case(source, case)?;
    let source = match mixing {
        Some(m) => source.mix(m)?,
        None => source.clone(),
    };
    let n = source.algebra.dim();
    let div = case.divisor();
    let mut coeffs = vec![vec![0.0; n]; 2];
    for (k, c) in source.coeffs.iter().enumerate() {
        let scale = 1.0 / (((k + 1) * (k + 2)) as f64 * div);
        coeffs.push(c.iter().map(|v| v * scale).collect());
    }
    Ok(source.with_coeffs(coeffs))
}

/// Applies `C^{ab} ∂_a ∂_b` coefficientwise: for an analytic polynomial this is
/// `U''(X)·κ` with `κ = C^{ab} e_a e_b`.
pub fn apply_operator(
    u: &PolyPolynomial,
    case: SourceCase,
) -> Result<PolyPolynomial, AnalyticError> {
    check_case(u, case)?;
    let n = u.algebra.dim();
    let c = case.contraction();
    let mut kappa = vec![0.0; n];
    for a in 0..n {
        for b in 0..n {
            if c[(a, b)] != 0.0 {
                let mut ea = vec![0.0; n];
                let mut eb = vec![0.0; n];
                ea[a] = 1.0;
                eb[b] = 1.0;
                for (k, v) in multiply_coords(&u.algebra, &ea, &eb)
                    .into_iter()
                    .enumerate()
                {
                    kappa[k] += c[(a, b)] * v;
                }
            }
        }
    }
    let coeffs: Vec<Vec<f64>> = if u.coeffs.len() < 3 {
        vec![vec![0.0; n]]
    } else {
        (2..u.coeffs.len())
            .map(|k| {
                let scaled: Vec<f64> = u.coeffs[k]
                    .iter()
                    .map(|v| v * (k * (k - 1)) as f64)
                    .collect();
                multiply_coords(&u.algebra, &scaled, &kappa)
            })
            .collect()
    };
    Ok(u.with_coeffs(coeffs))
}
