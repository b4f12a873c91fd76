//! Products of an elementary transformation with the inverse of another.
//!
//! For `h = f⁻¹ ∘ g` with `H_g = C_g[J_g]` and `H_f = C_f[J_f]`, the chain
//! rule gives
//!
//! ```text
//! ∂²h^i/∂x^k∂x^l = C_g^m_kl(x) ∂h^i/∂x^m − C_f^i_sr(h(x)) ∂h^s/∂x^k ∂h^r/∂x^l
//! ```
//!
//! so the unprimed fields belong to `g` at `x` and the primed fields to `f`
//! at `h(x)`.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::expr::EvalOptions;
use crate::jets::{eval_jet2_with, Jet2, VectorMap};

use super::verify::{check_dims, PointRecord, ResidualReport, Skip, SkipCounts, VerifyOptions};
use super::{connection_coefficients, recover_fields, ConformalError, DeltaTensor, GridSpec};

pub const NEWTON_MAX_ITER: usize = 50;
const NEWTON_TOL: f64 = 1e-13;

/// Jet of `f⁻¹` at `f(z)`, given the jet of `f` at `z`.
pub fn inverse_jet(jet_f: &Jet2) -> Result<Jet2, ConformalError> {
    let n = jet_f.dim();
    let det = jet_f.jac.determinant();
    let inv = jet_f
        .jac
        .clone()
        .try_inverse()
        .filter(|_| det.abs() > super::SINGULAR_JACOBIAN_TOL)
        .ok_or(ConformalError::SingularJacobian(det))?;
    // T^i_bc = (J⁻¹)^i_j H^j_bc, then contract both lower slots with J⁻¹.
    let mut t = vec![0.0; n * n * n];
    for i in 0..n {
        for b in 0..n {
            for c in 0..n {
                t[(i * n + b) * n + c] = (0..n).map(|j| inv[(i, j)] * jet_f.hess(j, b, c)).sum();
            }
        }
    }
    Ok(Jet2::from_fn(
        jet_f.value.clone(),
        jet_f.point.clone(),
        inv.clone(),
        |a, k, l| {
            let mut acc = 0.0;
            for b in 0..n {
                for c in 0..n {
                    acc += t[(a * n + b) * n + c] * inv[(b, k)] * inv[(c, l)];
                }
            }
            -acc
        },
    ))
}

/// Jet of `outer ∘ inner` at `inner.point`, where `outer` is taken at
/// `inner.value`.
pub fn compose_jets(outer: &Jet2, inner: &Jet2) -> Jet2 {
    let n = inner.dim();
    let jac = &outer.jac * &inner.jac;
    Jet2::from_fn(inner.point.clone(), outer.value.clone(), jac, |a, k, l| {
        let mut acc = 0.0;
        for b in 0..n {
            acc += outer.jac[(a, b)] * inner.hess(b, k, l);
            for c in 0..n {
                acc += outer.hess(a, b, c) * inner.jac[(b, k)] * inner.jac[(c, l)];
            }
        }
        acc
    })
}

/// Solves `f(z) = target` by damped Newton, trying each seed in turn.
pub fn invert_point<M: VectorMap + ?Sized>(
    f: &M,
    target: &[f64],
    seeds: &[&[f64]],
    opts: &EvalOptions,
) -> Option<Vec<f64>> {
    let scale = 1.0 + target.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let defect = |z: &[f64]| -> Option<DVector<f64>> {
        let v = f.map(z, opts).ok()?;
        Some(DVector::from_iterator(
            v.len(),
            v.iter().zip(target).map(|(a, b)| a - b),
        ))
    };
    for seed in seeds {
        let mut z = seed.to_vec();
        let Some(mut r) = defect(&z) else { continue };
        for _ in 0..NEWTON_MAX_ITER {
            if r.amax() <= NEWTON_TOL * scale {
                return Some(z);
            }
            let Ok(jet) = eval_jet2_with(f, &z, opts) else {
                break;
            };
            let Some(step) = jet.jac.clone().lu().solve(&r) else {
                break;
            };
            let mut lambda = 1.0;
            let mut accepted = false;
            while lambda > 1e-6 {
                let trial: Vec<f64> = z
                    .iter()
                    .zip(step.iter())
                    .map(|(a, d)| a - lambda * d)
                    .collect();
                if let Some(rt) = defect(&trial) {
                    if rt.norm() < r.norm() || rt.amax() <= NEWTON_TOL * scale {
                        z = trial;
                        r = rt;
                        accepted = true;
                        break;
                    }
                }
                lambda *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if r.amax() <= NEWTON_TOL * scale {
            return Some(z);
        }
    }
    None
}

fn compose_point<M: VectorMap + ?Sized, N: VectorMap + ?Sized>(
    f: &M,
    g: &N,
    delta: &DeltaTensor,
    grid: &GridSpec,
    x: &[f64],
    opts: &VerifyOptions,
) -> Result<(RecoveredPair, f64), Skip> {
    if grid.excludes(x) {
        return Err(Skip::Excluded);
    }
    let eval_opts = EvalOptions::with_margin(opts.singular_margin);
    let jet_g = eval_jet2_with(g, x, &eval_opts).map_err(|_| Skip::Domain)?;
    let y = jet_g.value.clone();
    let z = invert_point(f, &y, &[&y, x], &eval_opts).ok_or(Skip::NoConvergence)?;
    let jet_f = eval_jet2_with(f, &z, &eval_opts).map_err(|_| Skip::Domain)?;
    let singular = |e: ConformalError| match e {
        ConformalError::SingularJacobian(_) => Skip::Singular,
        _ => Skip::Domain,
    };
    let fields_g = recover_fields(&jet_g, delta).map_err(singular)?;
    let fields_f = recover_fields(&jet_f, delta).map_err(singular)?;
    let jet_w = inverse_jet(&jet_f).map_err(singular)?;
    let jet_h = compose_jets(&jet_w, &jet_g);

    let n = x.len();
    let cg = connection_coefficients(&fields_g.p, &fields_g.s, delta);
    let cf = connection_coefficients(&fields_f.p, &fields_f.s, delta);
    let jh = &jet_h.jac;
    let mut sq = 0.0;
    for i in 0..n {
        for k in 0..n {
            for l in 0..n {
                let mut d = jet_h.hess(i, k, l);
                for m in 0..n {
                    d -= cg.get(m, k, l) * jh[(i, m)];
                }
                for s in 0..n {
                    for r in 0..n {
                        d += cf.get(i, s, r) * jh[(s, k)] * jh[(r, l)];
                    }
                }
                sq += d * d;
            }
        }
    }
    Ok((
        RecoveredPair {
            p: fields_g.p,
            s: fields_g.s,
            degenerate: fields_g.degenerate || fields_f.degenerate,
        },
        sq.sqrt(),
    ))
}

struct RecoveredPair {
    p: Vec<f64>,
    s: Vec<f64>,
    degenerate: bool,
}

/// Evaluates the composition defect of `h = f⁻¹ ∘ g` over the grid.
///
/// Records carry the fields of `g`; `residual` is the Frobenius norm of the
/// defect. Points where `f` cannot be inverted are counted as skipped.
pub fn compose_and_check<M: VectorMap + ?Sized, N: VectorMap + ?Sized>(
    f: &M,
    g: &N,
    delta: &DeltaTensor,
    grid: &GridSpec,
    opts: &VerifyOptions,
) -> Result<ResidualReport, ConformalError> {
    check_dims(f.dim(), delta, grid)?;
    check_dims(g.dim(), delta, grid)?;
    let outcomes: Vec<_> = (0..grid.len())
        .into_par_iter()
        .map(|i| compose_point(f, g, delta, grid, &grid.point(i), opts))
        .collect();
    let mut skipped = SkipCounts::default();
    let mut records = Vec::new();
    for (index, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok((fields, defect)) => records.push(PointRecord {
                index,
                point: grid.point(index),
                p: fields.p,
                s: fields.s,
                residual: defect,
                degenerate: fields.degenerate,
            }),
            Err(s) => skipped.add(s),
        }
    }
    ResidualReport::from_records(grid, records, skipped)
}
