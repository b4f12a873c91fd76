//! Grid-level verification, reconstruction of `L` from its gradient, and the
//! conformal-factor consistency checks built on it.

use rayon::prelude::*;

use crate::expr::{EvalOptions, MapExpr};
use crate::geometry::MetricSpec;
use crate::jets::{eval_jet2_with, Jet2, VectorMap};

use super::{
    delta_euclidean, mobius_like, recover_fields, ConformalError, DeltaTensor, GridSpec,
    RecoveredFields, DEFAULT_MARGIN,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    /// Distance from a singularity below which a point is skipped.
    pub singular_margin: f64,
    /// Step of the local stencil used for cross-derivatives of `s`.
    pub gradient_step: f64,
    /// Sub-intervals per grid segment when integrating `s`.
    pub refine: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            singular_margin: DEFAULT_MARGIN,
            gradient_step: 1e-3,
            refine: 32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Skip {
    Excluded,
    Domain,
    Singular,
    NoConvergence,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SkipCounts {
    /// Rejected by the grid's exclusion predicate.
    pub excluded: usize,
    /// Too close to a singularity of the map or outside its domain.
    pub domain: usize,
    /// Jacobian not invertible.
    pub singular: usize,
    /// Numeric inversion failed (composition only).
    pub no_convergence: usize,
}

impl SkipCounts {
    pub fn total(&self) -> usize {
        self.excluded + self.domain + self.singular + self.no_convergence
    }

    pub(crate) fn add(&mut self, s: Skip) {
        match s {
            Skip::Excluded => self.excluded += 1,
            Skip::Domain => self.domain += 1,
            Skip::Singular => self.singular += 1,
            Skip::NoConvergence => self.no_convergence += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointRecord {
    /// Flat grid index.
    pub index: usize,
    pub point: Vec<f64>,
    pub p: Vec<f64>,
    pub s: Vec<f64>,
    pub residual: f64,
    pub degenerate: bool,
}

/// Best-fit `c` in `p ≈ c·s`, with the relative misfit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proportionality {
    pub c: f64,
    pub relative_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub grid: GridSpec,
    pub records: Vec<PointRecord>,
    pub max_residual: f64,
    pub rms_residual: f64,
    pub skipped: SkipCounts,
    pub degenerate_points: usize,
    /// Largest `|∂_a s_b − ∂_b s_a|` over the included points.
    pub gradient_defect: Option<f64>,
    pub proportionality: Option<Proportionality>,
}

impl ResidualReport {
    pub(crate) fn from_records(
        grid: &GridSpec,
        records: Vec<PointRecord>,
        skipped: SkipCounts,
    ) -> Result<Self, ConformalError> {
        if records.is_empty() {
            return Err(ConformalError::EmptyGrid);
        }
        let max_residual = records.iter().fold(0.0, |m: f64, r| m.max(r.residual));
        let rms_residual = (records.iter().map(|r| r.residual * r.residual).sum::<f64>()
            / records.len() as f64)
            .sqrt();
        let degenerate_points = records.iter().filter(|r| r.degenerate).count();
        let proportionality = proportionality(&records);
        Ok(ResidualReport {
            grid: grid.clone(),
            records,
            max_residual,
            rms_residual,
            skipped,
            degenerate_points,
            gradient_defect: None,
            proportionality,
        })
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_residual <= tol
    }
}

fn proportionality(records: &[PointRecord]) -> Option<Proportionality> {
    let mut ps = 0.0;
    let mut ss = 0.0;
    let mut pp = 0.0;
    for r in records {
        for (p, s) in r.p.iter().zip(&r.s) {
            ps += p * s;
            ss += s * s;
            pp += p * p;
        }
    }
    if ss == 0.0 {
        return None;
    }
    let c = ps / ss;
    let misfit: f64 = records
        .iter()
        .flat_map(|r| r.p.iter().zip(&r.s).map(|(p, s)| (p - c * s).powi(2)))
        .sum();
    let relative_residual = if pp == 0.0 { 0.0 } else { (misfit / pp).sqrt() };
    Some(Proportionality {
        c,
        relative_residual,
    })
}

pub(crate) fn fields_at<M: VectorMap + ?Sized>(
    map: &M,
    delta: &DeltaTensor,
    grid: &GridSpec,
    x: &[f64],
    margin: f64,
) -> Result<RecoveredFields, Skip> {
    jet_and_fields_at(map, delta, grid, x, margin).map(|(_, f)| f)
}

pub(crate) fn jet_at<M: VectorMap + ?Sized>(
    map: &M,
    grid: &GridSpec,
    x: &[f64],
    margin: f64,
) -> Result<Jet2, Skip> {
    if grid.excludes(x) {
        return Err(Skip::Excluded);
    }
    eval_jet2_with(map, x, &EvalOptions::with_margin(margin)).map_err(|_| Skip::Domain)
}

pub(crate) fn jet_and_fields_at<M: VectorMap + ?Sized>(
    map: &M,
    delta: &DeltaTensor,
    grid: &GridSpec,
    x: &[f64],
    margin: f64,
) -> Result<(Jet2, RecoveredFields), Skip> {
    let jet = jet_at(map, grid, x, margin)?;
    let fields = recover_fields(&jet, delta).map_err(|e| match e {
        ConformalError::SingularJacobian(_) => Skip::Singular,
        _ => Skip::Domain,
    })?;
    Ok((jet, fields))
}

pub(crate) fn check_dims(
    map_dim: usize,
    delta: &DeltaTensor,
    grid: &GridSpec,
) -> Result<(), ConformalError> {
    for got in [delta.dim(), grid.dim()] {
        if got != map_dim {
            return Err(ConformalError::DimensionMismatch {
                expected: map_dim,
                got,
            });
        }
    }
    Ok(())
}

/// Fourth-order central differences of `s` at `x`; `None` if any stencil
/// point is unusable.
fn gradient_asymmetry<M: VectorMap + ?Sized>(
    map: &M,
    delta: &DeltaTensor,
    grid: &GridSpec,
    x: &[f64],
    opts: &VerifyOptions,
) -> Option<f64> {
    let n = x.len();
    let h = opts.gradient_step;
    // ds[a][b] = ∂_a s_b
    let mut ds = vec![vec![0.0; n]; n];
    for (a, row) in ds.iter_mut().enumerate() {
        let mut acc = vec![0.0; n];
        for (off, w) in [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)] {
            let mut y = x.to_vec();
            y[a] += off * h;
            let f = fields_at(map, delta, grid, &y, opts.singular_margin).ok()?;
            for (slot, s) in acc.iter_mut().zip(&f.s) {
                *slot += w * s;
            }
        }
        for (slot, v) in row.iter_mut().zip(acc) {
            *slot = v / (12.0 * h);
        }
    }
    let mut worst: f64 = 0.0;
    for a in 0..n {
        for b in (a + 1)..n {
            worst = worst.max((ds[a][b] - ds[b][a]).abs());
        }
    }
    Some(worst)
}

/// Recovers `(p, s)` at every grid point in parallel and aggregates.
pub fn verify_on_grid<M: VectorMap + ?Sized>(
    map: &M,
    delta: &DeltaTensor,
    grid: &GridSpec,
    opts: &VerifyOptions,
) -> Result<ResidualReport, ConformalError> {
    check_dims(map.dim(), delta, grid)?;
    let outcomes: Vec<Result<RecoveredFields, Skip>> = (0..grid.len())
        .into_par_iter()
        .map(|i| fields_at(map, delta, grid, &grid.point(i), opts.singular_margin))
        .collect();
    let mut skipped = SkipCounts::default();
    let mut records = Vec::new();
    for (index, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(f) => records.push(PointRecord {
                index,
                point: grid.point(index),
                p: f.p,
                s: f.s,
                residual: f.residual_norm,
                degenerate: f.degenerate,
            }),
            Err(s) => skipped.add(s),
        }
    }
    let mut report = ResidualReport::from_records(grid, records, skipped)?;
    if grid.dim() > 1 {
        report.gradient_defect = report
            .records
            .par_iter()
            .filter_map(|r| gradient_asymmetry(map, delta, grid, &r.point, opts))
            .reduce_with(f64::max);
    }
    Ok(report)
}

/// Trapezoidal integral of `s_axis` from `from` to `from + e_axis·len`.
fn integrate_segment<M: VectorMap + ?Sized>(
    map: &M,
    delta: &DeltaTensor,
    grid: &GridSpec,
    from: &[f64],
    axis: usize,
    len: f64,
    opts: &VerifyOptions,
) -> Option<f64> {
    let steps = opts.refine.max(1);
    let h = len / steps as f64;
    let mut acc = 0.0;
    for j in 0..=steps {
        let mut y = from.to_vec();
        y[axis] += h * j as f64;
        let s = fields_at(map, delta, grid, &y, opts.singular_margin)
            .ok()?
            .s[axis];
        let w = if j == 0 || j == steps { 0.5 } else { 1.0 };
        acc += w * s;
    }
    Some(acc * h)
}

/// `L` up to a constant at every grid point, by integrating `s` along
/// axis-aligned paths from the first usable point (axis 1 first, then 2, …).
/// Skipped points get `None`.
pub fn reconstruct_potential<M: VectorMap + ?Sized>(
    map: &M,
    delta: &DeltaTensor,
    grid: &GridSpec,
    opts: &VerifyOptions,
) -> Result<Vec<Option<f64>>, ConformalError> {
    check_dims(map.dim(), delta, grid)?;
    let n = grid.dim();
    let usable: Vec<bool> = (0..grid.len())
        .into_par_iter()
        .map(|i| fields_at(map, delta, grid, &grid.point(i), opts.singular_margin).is_ok())
        .collect();
    let anchor_flat = usable
        .iter()
        .position(|u| *u)
        .ok_or(ConformalError::EmptyGrid)?;
    let anchor = grid.unravel(anchor_flat);
    let mut pot: Vec<Option<f64>> = vec![None; grid.len()];
    pot[anchor_flat] = Some(0.0);

    for axis in 0..n {
        // Lines along `axis` through points already reached: coordinates
        // above `axis` sit at the anchor, coordinates below are free.
        let bases: Vec<usize> = (0..grid.len())
            .filter(|&f| {
                let idx = grid.unravel(f);
                idx[axis] == anchor[axis] && (axis + 1..n).all(|d| idx[d] == anchor[d])
            })
            .collect();
        let lines: Vec<Vec<(usize, Option<f64>)>> = bases
            .par_iter()
            .map(|&base| {
                let mut out = Vec::new();
                let start = pot[base];
                let idx0 = grid.unravel(base);
                let res = grid.resolution()[axis];
                for dir in [1isize, -1] {
                    let mut cur = start;
                    let mut t = anchor[axis] as isize;
                    loop {
                        let next = t + dir;
                        if next < 0 || next >= res as isize {
                            break;
                        }
                        let mut from_idx = idx0.clone();
                        from_idx[axis] = t as usize;
                        let mut to_idx = idx0.clone();
                        to_idx[axis] = next as usize;
                        let from = grid.point(grid.ravel(&from_idx));
                        let to = grid.point(grid.ravel(&to_idx));
                        cur = cur.and_then(|c| {
                            integrate_segment(
                                map,
                                delta,
                                grid,
                                &from,
                                axis,
                                to[axis] - from[axis],
                                opts,
                            )
                            .map(|v| c + v)
                        });
                        out.push((grid.ravel(&to_idx), cur));
                        t = next;
                    }
                }
                out
            })
            .collect();
        for (flat, v) in lines.into_iter().flatten() {
            pot[flat] = v;
        }
    }

    for (flat, ok) in usable.iter().enumerate() {
        if *ok && pot[flat].is_none() {
            return Err(ConformalError::PathBlocked(flat));
        }
        if !*ok {
            pot[flat] = None;
        }
    }
    Ok(pot)
}

/// `max |v − mean| / |mean|`.
fn relative_spread(values: &[f64]) -> f64 {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().fold(0.0, |m: f64, v| m.max((v - mean).abs())) / mean.abs()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaReport {
    pub points: usize,
    /// Spread of `e^{2L}·(a − b·gxx)²`.
    pub deviation: f64,
    /// Spread of `e^{L}·(a − b·gxx)²`.
    pub deviation_verbatim: f64,
    /// Spread of `e^{2L}·(a + b·gxx)²`.
    pub wrong_sign_deviation: f64,
    /// `κ` minimizing the spread of `κL + 2 ln|a − b·gxx|`; `None` if `L` is constant.
    pub fitted_exponent: Option<f64>,
}

/// Reconstructs `L` for `x / (a + b·gxx)` and tests `Λ ∝ (a − b·gxx)⁻²`.
///
/// `Λ = Λ₀·e^{κL}` is reported for `κ = 2`, the exponent under which `Λ` is
/// the metric scale factor of a classical conformal map, and for `κ = 1`.
pub fn lambda_consistency(
    a: f64,
    b: f64,
    metric: &MetricSpec,
    grid: &GridSpec,
    opts: &VerifyOptions,
) -> Result<LambdaReport, ConformalError> {
    let map = mobius_like(a, b, metric)?;
    let delta = delta_euclidean(metric);
    let pot = reconstruct_potential(&map, &delta, grid, opts)?;
    let mut l = Vec::new();
    let mut minus = Vec::new();
    let mut plus = Vec::new();
    for (flat, v) in pot.iter().enumerate() {
        let Some(v) = v else { continue };
        let q = metric.quadratic_form(&grid.point(flat));
        let (m, p) = (a - b * q, a + b * q);
        if m.abs() <= opts.singular_margin || p.abs() <= opts.singular_margin {
            return Err(ConformalError::BadGrid(format!(
                "grid point {flat} is too close to a ± b·gxx = 0"
            )));
        }
        l.push(*v);
        minus.push(m);
        plus.push(p);
    }
    let spread = |kappa: f64, w: &[f64]| {
        let vals: Vec<f64> = l
            .iter()
            .zip(w)
            .map(|(l, w)| (kappa * l).exp() * w * w)
            .collect();
        relative_spread(&vals)
    };
    let len = l.len() as f64;
    let mean_l = l.iter().sum::<f64>() / len;
    let logs: Vec<f64> = minus.iter().map(|m| 2.0 * m.abs().ln()).collect();
    let mean_w = logs.iter().sum::<f64>() / len;
    let var: f64 = l.iter().map(|v| (v - mean_l).powi(2)).sum();
    let cov: f64 = l
        .iter()
        .zip(&logs)
        .map(|(v, w)| (v - mean_l) * (w - mean_w))
        .sum();
    let fitted_exponent = if var > 1e-24 { Some(-cov / var) } else { None };
    Ok(LambdaReport {
        points: l.len(),
        deviation: spread(2.0, &minus),
        deviation_verbatim: spread(1.0, &minus),
        wrong_sign_deviation: spread(2.0, &plus),
        fitted_exponent,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct XiReport {
    pub points: usize,
    /// Spread of `e^{−L}·ξ¹ξ²…ξⁿ`.
    pub deviation: f64,
}

/// Reconstructs `L` and tests `Ξ = Ξ₀·e^{−L} ∝ 1/(ξ¹ξ²…ξⁿ)`.
pub fn xi_consistency(
    map: &MapExpr,
    delta: &DeltaTensor,
    grid: &GridSpec,
    opts: &VerifyOptions,
) -> Result<XiReport, ConformalError> {
    let pot = reconstruct_potential(map, delta, grid, opts)?;
    let vals: Vec<f64> = pot
        .iter()
        .enumerate()
        .filter_map(|(flat, v)| v.map(|v| (-v).exp() * grid.point(flat).iter().product::<f64>()))
        .collect();
    Ok(XiReport {
        points: vals.len(),
        deviation: relative_spread(&vals),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::AlgebraSpec;
    use crate::conformal::{delta_polynumber, h4_log};
    use crate::expr::ScalarExpr;

    fn euclid2() -> DeltaTensor {
        delta_euclidean(&MetricSpec::euclidean(2))
    }

    #[test]
    fn mobius_grid_solves_system() {
        let map = mobius_like(1.0, 1.0, &MetricSpec::euclidean(2)).unwrap();
        let grid = GridSpec::parse("[-0.4,0.4]^2@21").unwrap();
        let r = verify_on_grid(&map, &euclid2(), &grid, &VerifyOptions::default()).unwrap();
        assert_eq!(r.records.len(), 441);
        assert!(r.max_residual <= 1e-8, "{}", r.max_residual);
        assert!(r.gradient_defect.unwrap() <= 1e-4);
        assert_eq!(r.degenerate_points, 0);
        let prop = r.proportionality.unwrap();
        assert!(
            prop.relative_residual > 1e-3,
            "p is not a multiple of s for this map"
        );
    }

    #[test]
    fn h4_log_grid_solves_system() {
        let map = h4_log(1.0, 1.0, [1.0; 4], [1.0; 4]).unwrap();
        let delta = delta_polynumber(&AlgebraSpec::h4_psi()).unwrap();
        let grid = GridSpec::cube(4, 0.5, 1.5, 7)
            .unwrap()
            .with_exclusion(
                ScalarExpr::parse(
                    "abs(x1) - x1 + abs(x2) - x2 + abs(x3) - x3 + abs(x4) - x4",
                    4,
                )
                .unwrap(),
            )
            .unwrap();
        let r = verify_on_grid(&map, &delta, &grid, &VerifyOptions::default()).unwrap();
        assert!(r.max_residual <= 1e-6);
        assert!(r.gradient_defect.unwrap() <= 1e-4);
    }

    #[test]
    fn non_solution_fails() {
        let map = MapExpr::parse_components(&["x1^2", "x2"]).unwrap();
        let grid = GridSpec::cube(2, 0.5, 1.5, 5).unwrap();
        let r = verify_on_grid(&map, &euclid2(), &grid, &VerifyOptions::default()).unwrap();
        assert!(r.max_residual > 1e-2);
        assert!(!r.passes(1e-6));
    }

    #[test]
    fn skipped_points_are_counted() {
        let map = mobius_like(0.0, 1.0, &MetricSpec::euclidean(2)).unwrap();
        let grid = GridSpec::cube(2, -1.0, 1.0, 5)
            .unwrap()
            .with_exclusion(ScalarExpr::parse("x1 - 0.75", 2).unwrap())
            .unwrap();
        let r = verify_on_grid(&map, &euclid2(), &grid, &VerifyOptions::default()).unwrap();
        assert_eq!(r.skipped.excluded, 5);
        assert_eq!(r.skipped.domain, 1);
        assert_eq!(r.records.len() + r.skipped.total(), 25);
        assert!(r.max_residual < 1e-8);
    }

    #[test]
    fn fully_excluded_grid_is_an_error() {
        let grid = GridSpec::cube(2, 0.0, 1.0, 3)
            .unwrap()
            .with_exclusion(ScalarExpr::parse("1", 2).unwrap())
            .unwrap();
        let err = verify_on_grid(
            &MapExpr::identity(2),
            &euclid2(),
            &grid,
            &VerifyOptions::default(),
        )
        .unwrap_err();
        assert_eq!(err, ConformalError::EmptyGrid);
    }

    #[test]
    fn lambda_examples() {
        let e = MetricSpec::euclidean(2);
        let grid = GridSpec::parse("[-0.3,0.3]^2@13").unwrap();
        let opts = VerifyOptions::default();
        let r = lambda_consistency(1.0, 0.0, &e, &grid, &opts).unwrap();
        assert!(r.deviation <= 1e-10 && r.deviation_verbatim <= 1e-10);
        assert!(r.fitted_exponent.is_none());

        let r = lambda_consistency(1.0, 1.0, &e, &grid, &opts).unwrap();
        assert!(r.deviation <= 1e-4, "{}", r.deviation);
        assert!(r.wrong_sign_deviation > 1e-1);
        assert!(r.deviation_verbatim > 1e-2);
        assert!((r.fitted_exponent.unwrap() - 2.0).abs() < 1e-3);
    }

    #[test]
    fn potential_is_blocked_by_excluded_strip() {
        let grid = GridSpec::cube(2, 0.0, 1.0, 5)
            .unwrap()
            .with_exclusion(ScalarExpr::parse("0.01 - (x1 - 0.5)^2", 2).unwrap())
            .unwrap();
        let err = reconstruct_potential(
            &MapExpr::identity(2),
            &euclid2(),
            &grid,
            &VerifyOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, ConformalError::PathBlocked(_)));
    }

    #[test]
    fn xi_for_h4_log() {
        // ξ0 = 1/2 keeps the denominator away from zero on the whole box.
        let map = h4_log(1.0, 1.0, [0.5; 4], [1.0; 4]).unwrap();
        let delta = delta_polynumber(&AlgebraSpec::h4_psi()).unwrap();
        let grid = GridSpec::cube(4, 0.5, 1.5, 4).unwrap();
        let r = xi_consistency(&map, &delta, &grid, &VerifyOptions::default()).unwrap();
        assert_eq!(r.points, 256);
        assert!(r.deviation <= 1e-4, "{}", r.deviation);
    }
}
