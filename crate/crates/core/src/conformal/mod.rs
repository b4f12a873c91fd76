//! Elementary generalized conformal systems
//!
//! ```text
//! ∂²f^i/∂x^k∂x^l = [½(p_l δ^m_k + p_k δ^m_l) − Δ^{pm}_kl s_p] ∂f^i/∂x^m
//! ```
//!
//! with `s_p = ∂L/∂x^p`. Given the jet of a map, the system is linear in
//! `(p, s)`, so both fields are recovered pointwise by least squares and the
//! remaining defect measures how far the map is from being a solution.

mod compose;
mod gallery;
mod grid;
mod verify;

pub use compose::{compose_and_check, compose_jets, inverse_jet, invert_point, NEWTON_MAX_ITER};
pub use gallery::{gallery, h4_log, inverse_conjugate, linear, mobius_like, scaled, GALLERY_NAMES};
pub use grid::GridSpec;
pub(crate) use verify::{jet_and_fields_at, jet_at, Skip};
pub use verify::{
    lambda_consistency, reconstruct_potential, verify_on_grid, xi_consistency, LambdaReport,
    PointRecord, Proportionality, ResidualReport, SkipCounts, VerifyOptions, XiReport,
};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::algebra::AlgebraSpec;
use crate::expr::{EvalError, MapError};
use crate::geometry::{MetricSpec, Tensor3};
use crate::jets::Jet2;

/// `|det J|` at or below this marks a map as not locally invertible.
pub const SINGULAR_JACOBIAN_TOL: f64 = 1e-10;
/// Points this close to a singularity of the map are skipped.
pub const DEFAULT_MARGIN: f64 = 1e-3;
/// Acceptance bound for residuals computed from exact jets.
pub const DEFAULT_TOL: f64 = 1e-6;
/// Acceptance bound for residuals computed from finite-difference jets.
pub const DEFAULT_FD_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConformalError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("Jacobian determinant {0:e} is too small; map is not locally invertible")]
    SingularJacobian(f64),
    #[error("algebra `{0}` does not have diagonal structure constants")]
    NonDiagonalAlgebra(String),
    #[error("every grid point was skipped")]
    EmptyGrid,
    #[error("invalid grid: {0}")]
    BadGrid(String),
    #[error("integration path to grid point {0} crosses a skipped region")]
    PathBlocked(usize),
    #[error("degenerate parameters: {0}")]
    DegenerateParameters(String),
    #[error("unknown gallery map `{0}`")]
    UnknownGallery(String),
    #[error("gallery parameter `{0}` is unknown for this map")]
    UnknownParameter(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Map(#[from] MapError),
}

/// Constant tensor `Δ^{pm}_kl`, symmetric in `k, l`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaTensor {
    n: usize,
    values: Vec<f64>,
}

impl DeltaTensor {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(n * n * n * n);
        for p in 0..n {
            for m in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        values.push(f(p, m, k, l));
                    }
                }
            }
        }
        DeltaTensor { n, values }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, p: usize, m: usize, k: usize, l: usize) -> f64 {
        let n = self.n;
        self.values[((p * n + m) * n + k) * n + l]
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.n;
        (0..n).all(|p| {
            (0..n).all(|m| {
                (0..n).all(|k| (0..n).all(|l| self.get(p, m, k, l) == self.get(p, m, l, k)))
            })
        })
    }
}

/// `Δ^{pm}_kl = g^{mp} g_kl`.
pub fn delta_euclidean(metric: &MetricSpec) -> DeltaTensor {
    let (g, gi) = (metric.g(), metric.g_inv());
    DeltaTensor::from_fn(metric.dim(), |p, m, k, l| gi[(m, p)] * g[(k, l)])
}

/// Diagonal reading of `p^m_kl ∂L/∂ξ`: one where all four indices coincide.
pub fn delta_polynumber(alg: &AlgebraSpec) -> Result<DeltaTensor, ConformalError> {
    if !alg.is_diagonal() {
        return Err(ConformalError::NonDiagonalAlgebra(alg.name().to_string()));
    }
    Ok(DeltaTensor::from_fn(alg.dim(), |p, m, k, l| {
        if p == m && m == k && k == l {
            1.0
        } else {
            0.0
        }
    }))
}

/// Fields recovered at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredFields {
    pub p: Vec<f64>,
    /// Gradient of `L`.
    pub s: Vec<f64>,
    /// Frobenius norm of the defect over all `i, k, l`.
    pub residual_norm: f64,
    /// The least-squares system was rank deficient.
    pub degenerate: bool,
}

impl RecoveredFields {
    pub fn zero(n: usize) -> Self {
        RecoveredFields {
            p: vec![0.0; n],
            s: vec![0.0; n],
            residual_norm: 0.0,
            degenerate: false,
        }
    }
}

/// `C^m_kl = ½(p_l δ^m_k + p_k δ^m_l) − Δ^{pm}_kl s_p`, indexed `(m, k, l)`.
pub fn connection_coefficients(p: &[f64], s: &[f64], delta: &DeltaTensor) -> Tensor3 {
    let n = delta.dim();
    Tensor3::from_fn(n, |m, k, l| {
        let mut c = 0.0;
        if m == k {
            c += 0.5 * p[l];
        }
        if m == l {
            c += 0.5 * p[k];
        }
        for (q, sq) in s.iter().enumerate() {
            c -= delta.get(q, m, k, l) * sq;
        }
        c
    })
}

fn check_dims(jet: &Jet2, delta: &DeltaTensor) -> Result<usize, ConformalError> {
    let n = jet.dim();
    if delta.dim() != n {
        return Err(ConformalError::DimensionMismatch {
            expected: n,
            got: delta.dim(),
        });
    }
    Ok(n)
}

/// `R^i_kl = ∂²f^i/∂x^k∂x^l − C^m_kl ∂f^i/∂x^m`.
pub fn system_residual(
    jet: &Jet2,
    fields: &RecoveredFields,
    delta: &DeltaTensor,
) -> Result<Tensor3, ConformalError> {
    let n = check_dims(jet, delta)?;
    if fields.p.len() != n || fields.s.len() != n {
        return Err(ConformalError::DimensionMismatch {
            expected: n,
            got: fields.p.len().min(fields.s.len()),
        });
    }
    let c = connection_coefficients(&fields.p, &fields.s, delta);
    Ok(Tensor3::from_fn(n, |i, k, l| {
        let mut r = jet.hess(i, k, l);
        for m in 0..n {
            r -= c.get(m, k, l) * jet.jac[(i, m)];
        }
        r
    }))
}

/// Least-squares `(p, s)` for the system at one point.
///
/// Each unordered pair `k < l` appears once with weight `√2`, so the optimum
/// minimizes the full Frobenius norm over all `(i, k, l)`.
pub fn recover_fields(jet: &Jet2, delta: &DeltaTensor) -> Result<RecoveredFields, ConformalError> {
    let n = check_dims(jet, delta)?;
    let det = jet.jac.determinant();
    if !(det.abs() > SINGULAR_JACOBIAN_TOL) {
        return Err(ConformalError::SingularJacobian(det));
    }
    let rows = n * n * (n + 1) / 2;
    let mut a = DMatrix::zeros(rows, 2 * n);
    let mut b = DVector::zeros(rows);
    let mut row = 0;
    for i in 0..n {
        for k in 0..n {
            for l in k..n {
                let w = if k == l {
                    1.0
                } else {
                    std::f64::consts::SQRT_2
                };
                for q in 0..n {
                    let mut coef = 0.0;
                    if q == l {
                        coef += 0.5 * jet.jac[(i, k)];
                    }
                    if q == k {
                        coef += 0.5 * jet.jac[(i, l)];
                    }
                    a[(row, q)] = w * coef;
                    let mut sc = 0.0;
                    for m in 0..n {
                        sc -= delta.get(q, m, k, l) * jet.jac[(i, m)];
                    }
                    a[(row, n + q)] = w * sc;
                }
                b[row] = w * jet.hess(i, k, l);
                row += 1;
            }
        }
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = smax * 1e-12;
    let rank = svd.singular_values.iter().filter(|v| **v > cutoff).count();
    let x = svd
        .solve(&b, cutoff)
        .map_err(|e| ConformalError::Eval(EvalError::Other(e.to_string())))?;
    let mut fields = RecoveredFields {
        p: x.rows(0, n).iter().copied().collect(),
        s: x.rows(n, n).iter().copied().collect(),
        residual_norm: 0.0,
        degenerate: rank < 2 * n,
    };
    fields.residual_norm = system_residual(jet, &fields, delta)?.frobenius();
    Ok(fields)
}

/// `T^i = C^{kl} R^i_kl` for a contraction such as `g^kl` or `q^kl`.
pub fn trace_residual(
    jet: &Jet2,
    fields: &RecoveredFields,
    delta: &DeltaTensor,
    contraction: &DMatrix<f64>,
) -> Result<Vec<f64>, ConformalError> {
    let r = system_residual(jet, fields, delta)?;
    let n = r.dim();
    if contraction.shape() != (n, n) {
        return Err(ConformalError::DimensionMismatch {
            expected: n,
            got: contraction.nrows(),
        });
    }
    Ok((0..n)
        .map(|i| {
            let mut acc = 0.0;
            for k in 0..n {
                for l in 0..n {
                    acc += contraction[(k, l)] * r.get(i, k, l);
                }
            }
            acc
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::MapExpr;
    use crate::jets::eval_jet2;

    #[test]
    fn euclidean_delta_examples() {
        let d = delta_euclidean(&MetricSpec::euclidean(2));
        assert_eq!(d.get(0, 0, 0, 0), 1.0);
        assert_eq!(d.get(0, 0, 1, 1), 1.0);
        assert_eq!(d.get(0, 1, 0, 1), 0.0);
        assert!(d.is_symmetric());
        let m = delta_euclidean(&MetricSpec::minkowski(2));
        assert_eq!(m.get(1, 1, 0, 0), -1.0);
        assert!(m.is_symmetric());
    }

    #[test]
    fn polynumber_delta_examples() {
        let d = delta_polynumber(&AlgebraSpec::h4_psi()).unwrap();
        assert_eq!(d.get(0, 0, 0, 0), 1.0);
        assert_eq!(d.get(0, 1, 0, 0), 0.0);
        assert!(d.is_symmetric());
        let d2 = delta_polynumber(&AlgebraSpec::h2_psi()).unwrap();
        let nonzero = (0..16)
            .filter(|&i| d2.get(i / 8, (i / 4) % 2, (i / 2) % 2, i % 2) != 0.0)
            .count();
        assert_eq!(nonzero, 2);
        assert!(matches!(
            delta_polynumber(&AlgebraSpec::complex()),
            Err(ConformalError::NonDiagonalAlgebra(_))
        ));
    }

    #[test]
    fn linear_map_is_exact_solution() {
        let lin = MapExpr::linear(2, &[2.0, 1.0, -1.0, 3.0]);
        let jet = eval_jet2(&lin, &[0.3, 0.4]).unwrap();
        let d = delta_euclidean(&MetricSpec::euclidean(2));
        assert_eq!(
            system_residual(&jet, &RecoveredFields::zero(2), &d)
                .unwrap()
                .max_abs(),
            0.0
        );
        let f = recover_fields(&jet, &d).unwrap();
        assert!(f.p.iter().chain(&f.s).all(|v| v.abs() < 1e-15));
        assert_eq!(f.residual_norm, 0.0);
        assert!(!f.degenerate);
    }

    #[test]
    fn squared_coordinate_is_not_a_solution() {
        let m = MapExpr::parse_components(&["x1^2", "x2"]).unwrap();
        let d = delta_euclidean(&MetricSpec::euclidean(2));
        for pt in [[1.0, 1.0], [0.5, -2.0]] {
            let jet = eval_jet2(&m, &pt).unwrap();
            let r = system_residual(&jet, &RecoveredFields::zero(2), &d).unwrap();
            assert_eq!(r.frobenius(), 2.0);
        }
        let f = recover_fields(&eval_jet2(&m, &[1.0, 1.0]).unwrap(), &d).unwrap();
        assert!(f.residual_norm > 0.1);
    }

    /// Brute-force scan over a coarse (p, s) box agrees that the floor is positive.
    #[test]
    fn squared_coordinate_floor_by_scan() {
        let m = MapExpr::parse_components(&["x1^2", "x2"]).unwrap();
        let d = delta_euclidean(&MetricSpec::euclidean(2));
        let jet = eval_jet2(&m, &[1.0, 1.0]).unwrap();
        let solved = recover_fields(&jet, &d).unwrap();
        let vals: Vec<f64> = (-8..=8).map(|i| i as f64 * 0.25).collect();
        let mut best = f64::INFINITY;
        for &p0 in &vals {
            for &p1 in &vals {
                for &s0 in &vals {
                    for &s1 in &vals {
                        let f = RecoveredFields {
                            p: vec![p0, p1],
                            s: vec![s0, s1],
                            residual_norm: 0.0,
                            degenerate: false,
                        };
                        best = best.min(system_residual(&jet, &f, &d).unwrap().frobenius());
                    }
                }
            }
        }
        assert!(best > 0.1);
        assert!(solved.residual_norm <= best + 1e-12);
    }

    #[test]
    fn singular_jacobian_is_rejected() {
        let m = MapExpr::parse_components(&["x1 + x2", "x1 + x2"]).unwrap();
        let jet = eval_jet2(&m, &[0.0, 0.0]).unwrap();
        let err = recover_fields(&jet, &delta_euclidean(&MetricSpec::euclidean(2))).unwrap_err();
        assert!(matches!(err, ConformalError::SingularJacobian(_)));
    }

    #[test]
    fn one_dimensional_system_is_flagged_degenerate() {
        // n = 1: p and s enter only through p − s.
        let m = MapExpr::parse_components(&["x1^3"]).unwrap();
        let f = recover_fields(
            &eval_jet2(&m, &[1.0]).unwrap(),
            &delta_euclidean(&MetricSpec::euclidean(1)),
        )
        .unwrap();
        assert!(f.degenerate);
        assert!(f.residual_norm < 1e-12);
        assert!((f.p[0] - f.s[0] - 2.0).abs() < 1e-12);
        // minimum-norm choice
        assert!((f.p[0] + f.s[0]).abs() < 1e-12);
    }

    #[test]
    fn trace_of_exact_solution_vanishes() {
        let id = MapExpr::identity(4);
        let jet = eval_jet2(&id, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let d = delta_polynumber(&AlgebraSpec::h4_psi()).unwrap();
        let f = recover_fields(&jet, &d).unwrap();
        let t = trace_residual(&jet, &f, &d, &DMatrix::identity(4, 4)).unwrap();
        assert!(t.iter().all(|v| *v == 0.0));
    }
}
