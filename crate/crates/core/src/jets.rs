//! Second-order jets: value, Jacobian and symmetric Hessian of a map at a point.
//!
//! [`Dual2`] carries a value, its gradient and the packed upper triangle of its
//! Hessian with respect to all `n` inputs. Evaluating a [`VectorMap`] on seeded
//! `Dual2` inputs yields exact first and second derivatives. The central
//! difference jet in [`finite_diff_jet2`] is kept as an independent oracle.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;

use crate::expr::{EvalError, EvalOptions};

/// Number type the expression evaluator is generic over.
pub trait Scalar:
    Clone
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Mul<f64, Output = Self>
    + Neg<Output = Self>
{
    /// A constant with the same shape as `self`.
    fn lift(&self, v: f64) -> Self;
    fn value(&self) -> f64;
    fn recip(self) -> Self;
    fn powi(self, n: i32) -> Self;
    fn ln(self) -> Self;
    fn exp(self) -> Self;
    /// `None` where the absolute value is not differentiable.
    fn abs(self) -> Option<Self>;
}

impl Scalar for f64 {
    fn lift(&self, v: f64) -> Self {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn recip(self) -> Self {
        1.0 / self
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn abs(self) -> Option<Self> {
        Some(f64::abs(self))
    }
}

/// Index of `(k, l)` in a packed upper-triangular `n × n` matrix (row-major).
#[inline]
pub fn sym_index(n: usize, k: usize, l: usize) -> usize {
    let (a, b) = if k <= l { (k, l) } else { (l, k) };
    a * n - a * a.saturating_sub(1) / 2 + (b - a)
}

#[inline]
fn packed_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Forward-mode number carrying first and second derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct Dual2 {
    pub val: f64,
    pub grad: Vec<f64>,
    /// Packed upper triangle, see [`sym_index`].
    pub hess: Vec<f64>,
}

impl Dual2 {
    pub fn constant(val: f64, n: usize) -> Self {
        Dual2 {
            val,
            grad: vec![0.0; n],
            hess: vec![0.0; packed_len(n)],
        }
    }

    /// The `k`-th input variable, seeded with unit gradient.
    pub fn variable(val: f64, k: usize, n: usize) -> Self {
        let mut d = Self::constant(val, n);
        d.grad[k] = 1.0;
        d
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    pub fn second(&self, k: usize, l: usize) -> f64 {
        self.hess[sym_index(self.dim(), k, l)]
    }

    /// Applies a scalar function with derivatives `d1`, `d2` at `self.val`.
    fn chain(self, val: f64, d1: f64, d2: f64) -> Self {
        let n = self.dim();
        let mut hess = self.hess;
        let mut idx = 0;
        for k in 0..n {
            for l in k..n {
                hess[idx] = d1 * hess[idx] + d2 * self.grad[k] * self.grad[l];
                idx += 1;
            }
        }
        let grad = self.grad.into_iter().map(|g| d1 * g).collect();
        Dual2 { val, grad, hess }
    }
}

impl Add for Dual2 {
    type Output = Dual2;
    fn add(mut self, rhs: Dual2) -> Dual2 {
        self.val += rhs.val;
        self.grad
            .iter_mut()
            .zip(&rhs.grad)
            .for_each(|(a, b)| *a += b);
        self.hess
            .iter_mut()
            .zip(&rhs.hess)
            .for_each(|(a, b)| *a += b);
        self
    }
}

impl Sub for Dual2 {
    type Output = Dual2;
    fn sub(mut self, rhs: Dual2) -> Dual2 {
        self.val -= rhs.val;
        self.grad
            .iter_mut()
            .zip(&rhs.grad)
            .for_each(|(a, b)| *a -= b);
        self.hess
            .iter_mut()
            .zip(&rhs.hess)
            .for_each(|(a, b)| *a -= b);
        self
    }
}

impl Neg for Dual2 {
    type Output = Dual2;
    fn neg(mut self) -> Dual2 {
        self.val = -self.val;
        self.grad.iter_mut().for_each(|g| *g = -*g);
        self.hess.iter_mut().for_each(|h| *h = -*h);
        self
    }
}

impl Mul<f64> for Dual2 {
    type Output = Dual2;
    fn mul(mut self, rhs: f64) -> Dual2 {
        self.val *= rhs;
        self.grad.iter_mut().for_each(|g| *g *= rhs);
        self.hess.iter_mut().for_each(|h| *h *= rhs);
        self
    }
}

impl Mul for Dual2 {
    type Output = Dual2;
    fn mul(self, rhs: Dual2) -> Dual2 {
        let n = self.dim();
        let (a, b) = (self.val, rhs.val);
        let mut hess = vec![0.0; packed_len(n)];
        let mut idx = 0;
        for k in 0..n {
            for l in k..n {
                hess[idx] = a * rhs.hess[idx]
                    + b * self.hess[idx]
                    + self.grad[k] * rhs.grad[l]
                    + self.grad[l] * rhs.grad[k];
                idx += 1;
            }
        }
        let grad = self
            .grad
            .iter()
            .zip(&rhs.grad)
            .map(|(ga, gb)| a * gb + b * ga)
            .collect();
        Dual2 {
            val: a * b,
            grad,
            hess,
        }
    }
}

impl Scalar for Dual2 {
    fn lift(&self, v: f64) -> Self {
        Dual2::constant(v, self.dim())
    }
    fn value(&self) -> f64 {
        self.val
    }
    fn recip(self) -> Self {
        let v = self.val;
        self.chain(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))
    }
    fn powi(self, n: i32) -> Self {
        let v = self.val;
        let nf = f64::from(n);
        let d1 = if n == 0 { 0.0 } else { nf * v.powi(n - 1) };
        let d2 = if n == 0 || n == 1 {
            0.0
        } else {
            nf * (nf - 1.0) * v.powi(n - 2)
        };
        self.chain(v.powi(n), d1, d2)
    }
    fn ln(self) -> Self {
        let v = self.val;
        self.chain(v.ln(), 1.0 / v, -1.0 / (v * v))
    }
    fn exp(self) -> Self {
        let e = self.val.exp();
        self.chain(e, e, e)
    }
    fn abs(self) -> Option<Self> {
        if self.val == 0.0 {
            return None;
        }
        let s = self.val.signum();
        let v = self.val.abs();
        Some(self.chain(v, s, 0.0))
    }
}

/// A map from `n`-space to `n`-space that can be evaluated on any [`Scalar`].
pub trait VectorMap: Sync {
    fn dim(&self) -> usize;
    fn map<T: Scalar>(&self, x: &[T], opts: &EvalOptions) -> Result<Vec<T>, EvalError>;

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.map(x, &EvalOptions::default())
    }
}

/// Value, Jacobian `∂f^i/∂x^k` and Hessian `∂²f^i/∂x^k∂x^l` at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet2 {
    pub point: Vec<f64>,
    pub value: Vec<f64>,
    /// Row `i`, column `k`.
    pub jac: DMatrix<f64>,
    /// Packed per component; symmetric by construction.
    hess: Vec<f64>,
}

impl Jet2 {
    /// `hess` holds, for each component, the packed upper triangle.
    pub fn from_packed(
        point: Vec<f64>,
        value: Vec<f64>,
        jac: DMatrix<f64>,
        hess: Vec<f64>,
    ) -> Self {
        let n = point.len();
        assert_eq!(value.len(), n);
        assert_eq!(jac.shape(), (n, n));
        assert_eq!(hess.len(), n * packed_len(n));
        Jet2 {
            point,
            value,
            jac,
            hess,
        }
    }

    /// Builds a jet from a Hessian callback evaluated on `k <= l` only.
    pub fn from_fn(
        point: Vec<f64>,
        value: Vec<f64>,
        jac: DMatrix<f64>,
        mut hess: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let n = point.len();
        let mut packed = Vec::with_capacity(n * packed_len(n));
        for i in 0..n {
            for k in 0..n {
                for l in k..n {
                    packed.push(hess(i, k, l));
                }
            }
        }
        Self::from_packed(point, value, jac, packed)
    }

    pub fn dim(&self) -> usize {
        self.point.len()
    }

    #[inline]
    pub fn hess(&self, i: usize, k: usize, l: usize) -> f64 {
        let n = self.dim();
        self.hess[i * packed_len(n) + sym_index(n, k, l)]
    }

    pub fn hessian_matrix(&self, i: usize) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |k, l| self.hess(i, k, l))
    }

    /// Largest absolute difference in value, Jacobian and Hessian entries.
    pub fn max_abs_diff(&self, other: &Jet2) -> f64 {
        let n = self.dim();
        let mut worst = (&self.jac - &other.jac).amax();
        for i in 0..n {
            worst = worst.max((self.value[i] - other.value[i]).abs());
            for k in 0..n {
                for l in k..n {
                    worst = worst.max((self.hess(i, k, l) - other.hess(i, k, l)).abs());
                }
            }
        }
        worst
    }
}

/// Exact jet through second-order forward propagation.
pub fn eval_jet2<M: VectorMap + ?Sized>(map: &M, point: &[f64]) -> Result<Jet2, EvalError> {
    eval_jet2_with(map, point, &EvalOptions::default())
}

pub fn eval_jet2_with<M: VectorMap + ?Sized>(
    map: &M,
    point: &[f64],
    opts: &EvalOptions,
) -> Result<Jet2, EvalError> {
    let n = map.dim();
    if point.len() != n {
        return Err(EvalError::DimensionMismatch {
            expected: n,
            got: point.len(),
        });
    }
    let seeds: Vec<Dual2> = point
        .iter()
        .enumerate()
        .map(|(k, &v)| Dual2::variable(v, k, n))
        .collect();
    let out = map.map(&seeds, opts)?;
    let value = out.iter().map(|d| d.val).collect();
    let jac = DMatrix::from_fn(n, n, |i, k| out[i].grad[k]);
    let hess = out.into_iter().flat_map(|d| d.hess).collect();
    Ok(Jet2::from_packed(point.to_vec(), value, jac, hess))
}

/// Default step for [`finite_diff_jet2`].
pub const DEFAULT_FD_STEP: f64 = 1e-4;

/// Central-difference jet with step `h`, `O(h²)` accurate.
pub fn finite_diff_jet2<M: VectorMap + ?Sized>(
    map: &M,
    point: &[f64],
    h: f64,
) -> Result<Jet2, EvalError> {
    let n = map.dim();
    if point.len() != n {
        return Err(EvalError::DimensionMismatch {
            expected: n,
            got: point.len(),
        });
    }
    let at = |offsets: &[(usize, f64)]| -> Result<Vec<f64>, EvalError> {
        let mut x = point.to_vec();
        for &(k, d) in offsets {
            x[k] += d;
        }
        map.eval(&x)
    };
    let center = at(&[])?;
    let mut plus = Vec::with_capacity(n);
    let mut minus = Vec::with_capacity(n);
    for k in 0..n {
        plus.push(at(&[(k, h)])?);
        minus.push(at(&[(k, -h)])?);
    }
    let jac = DMatrix::from_fn(n, n, |i, k| (plus[k][i] - minus[k][i]) / (2.0 * h));

    let mut hess = vec![0.0; n * packed_len(n)];
    for k in 0..n {
        for l in k..n {
            let idx = sym_index(n, k, l);
            if k == l {
                for i in 0..n {
                    hess[i * packed_len(n) + idx] =
                        (plus[k][i] - 2.0 * center[i] + minus[k][i]) / (h * h);
                }
            } else {
                let pp = at(&[(k, h), (l, h)])?;
                let pm = at(&[(k, h), (l, -h)])?;
                let mp = at(&[(k, -h), (l, h)])?;
                let mm = at(&[(k, -h), (l, -h)])?;
                for i in 0..n {
                    hess[i * packed_len(n) + idx] = (pp[i] - pm[i] - mp[i] + mm[i]) / (4.0 * h * h);
                }
            }
        }
    }
    Ok(Jet2::from_packed(point.to_vec(), center, jac, hess))
}

/// One Richardson step on top of [`finite_diff_jet2`]: `(4·J(h/2) − J(h)) / 3`.
pub fn finite_diff_jet2_richardson<M: VectorMap + ?Sized>(
    map: &M,
    point: &[f64],
    h: f64,
) -> Result<Jet2, EvalError> {
    let coarse = finite_diff_jet2(map, point, h)?;
    let fine = finite_diff_jet2(map, point, h / 2.0)?;
    let jac = (&fine.jac * 4.0 - &coarse.jac) / 3.0;
    let hess = fine
        .hess
        .iter()
        .zip(&coarse.hess)
        .map(|(f, c)| (4.0 * f - c) / 3.0)
        .collect();
    Ok(Jet2::from_packed(point.to_vec(), fine.value, jac, hess))
}
