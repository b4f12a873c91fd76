use std::num::NonZeroU32;
use std::sync::Arc;

use nalgebra::DMatrix;
use polyconf::algebra::AlgebraSpec;
use polyconf::analytic::{cr_residual, scalar_equation_check, GammaField, PolyPolynomial};
use polyconf::conformal::{
    compose_jets, connection_coefficients, delta_euclidean, delta_polynumber, recover_fields,
    system_residual, trace_residual, DeltaTensor, RecoveredFields,
};
use polyconf::expr::{parse, BinOp, Expr, Func, MapExpr, ScalarExpr};
use polyconf::geometry::{christoffel_conformal, factor_conversions, ExponentSign, MetricSpec};
use polyconf::jets::{eval_jet2, finite_diff_jet2, Jet2, VectorMap};
use proptest::prelude::*;

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 64,
        ..ProptestConfig::default()
    }
}

fn expr_strategy() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0u32..1000, 0u32..4).prop_map(|(m, e)| Expr::num(f64::from(m) / 10f64.powi(e as i32))),
        (0usize..3).prop_map(Expr::var),
        Just(Expr::param("a")),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (
                prop_oneof![
                    Just(BinOp::Add),
                    Just(BinOp::Sub),
                    Just(BinOp::Mul),
                    Just(BinOp::Div)
                ],
                inner.clone(),
                inner.clone()
            )
                .prop_map(|(op, a, b)| Expr::binary(op, a, b)),
            (inner.clone(), 1i32..5).prop_map(|(e, n)| e.powi(n)),
            (
                prop_oneof![Just(Func::Ln), Just(Func::Abs), Just(Func::Exp)],
                inner
            )
                .prop_map(|(f, e)| Expr::call(f, e)),
        ]
    })
}

fn coeffs(n: usize, len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n * len)
}

/// A cubic map of the plane or space with the given monomial coefficients.
fn cubic_map(n: usize, c: &[f64]) -> MapExpr {
    let monomials: Vec<String> = match n {
        2 => [
            "1", "x1", "x2", "x1^2", "x1*x2", "x2^2", "x1^3", "x1^2*x2", "x2^3",
        ]
        .map(String::from)
        .to_vec(),
        _ => [
            "1", "x1", "x2", "x3", "x1*x3", "x2^2", "x1*x2*x3", "x3^3", "x2^2*x1",
        ]
        .map(String::from)
        .to_vec(),
    };
    let comps: Vec<String> = c
        .chunks(monomials.len())
        .map(|row| {
            row.iter()
                .zip(&monomials)
                .map(|(v, m)| format!("({v:?}) * {m}"))
                .collect::<Vec<_>>()
                .join(" + ")
        })
        .collect();
    let refs: Vec<&str> = comps.iter().map(String::as_str).collect();
    MapExpr::parse_components(&refs).unwrap()
}

fn algebras() -> Vec<Arc<AlgebraSpec>> {
    vec![
        Arc::new(AlgebraSpec::complex()),
        Arc::new(AlgebraSpec::split_complex()),
        Arc::new(AlgebraSpec::h4_psi()),
        Arc::new(AlgebraSpec::h4_x()),
    ]
}

fn poly(alg: &Arc<AlgebraSpec>, c: &[f64]) -> PolyPolynomial {
    PolyPolynomial::new(
        alg.clone(),
        c.chunks(alg.dim()).map(<[f64]>::to_vec).collect(),
    )
    .unwrap()
}

fn random_jet(n: usize, vals: &[f64]) -> Jet2 {
    let jac = DMatrix::from_fn(n, n, |i, k| {
        vals[i * n + k] + if i == k { 2.0 } else { 0.0 }
    });
    let h = &vals[n * n..];
    Jet2::from_fn(vec![0.0; n], vec![0.0; n], jac, |i, k, l| {
        h[(i * n * n + k * n + l) % h.len()] + h[(i * n * n + l * n + k) % h.len()]
    })
}

fn deltas() -> Vec<DeltaTensor> {
    vec![
        delta_euclidean(&MetricSpec::euclidean(2)),
        delta_euclidean(&MetricSpec::minkowski(3)),
        delta_polynumber(&AlgebraSpec::h4_psi()).unwrap(),
    ]
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn printed_expressions_parse_back(e in expr_strategy()) {
        let printed = e.to_string();
        let back = parse(&printed, 3).unwrap();
        prop_assert_eq!(&back, &e, "{}", printed);
    }

    #[test]
    fn parser_never_panics(src in "[x0-9a-z+*/^(). ,-]{0,30}") {
        let _ = parse(&src, 3);
        let _ = MapExpr::parse_file(&src);
    }

    #[test]
    fn parser_never_panics_on_arbitrary_text(src in "\\PC{0,40}") {
        let _ = parse(&src, 2);
    }

    #[test]
    fn jets_match_finite_differences(c in coeffs(3, 9), x in prop::collection::vec(-1.0f64..1.0, 3)) {
        let map = cubic_map(3, &c);
        let exact = eval_jet2(&map, &x).unwrap();
        let approx = finite_diff_jet2(&map, &x, 1e-3).unwrap();
        prop_assert!(exact.max_abs_diff(&approx) < 1e-5);
    }

    #[test]
    fn chain_rule_matches_symbolic_composition(
        cf in coeffs(2, 9),
        cg in coeffs(2, 9),
        x in prop::collection::vec(-1.0f64..1.0, 2),
    ) {
        let f = cubic_map(2, &cf);
        let g = cubic_map(2, &cg);
        let inner = eval_jet2(&g, &x).unwrap();
        let outer = eval_jet2(&f, &inner.value).unwrap();
        let chained = compose_jets(&outer, &inner);
        let direct = eval_jet2(&f.compose(&g).unwrap(), &x).unwrap();
        let scale = 1.0 + direct.hessian_matrix(0).amax().max(direct.hessian_matrix(1).amax());
        prop_assert!(chained.max_abs_diff(&direct) < 1e-12 * scale);
    }

    #[test]
    fn recovered_fields_are_least_squares_optimal(
        which in 0usize..3,
        vals in prop::collection::vec(-1.0f64..1.0, 80),
        axis in 0usize..8,
        sign in prop_oneof![Just(-1.0), Just(1.0)],
    ) {
        let delta = &deltas()[which];
        let n = delta.dim();
        let jet = random_jet(n, &vals);
        let best = recover_fields(&jet, delta).unwrap();
        let base = system_residual(&jet, &best, delta).unwrap().frobenius();
        prop_assert!((base - best.residual_norm).abs() < 1e-12);
        let mut p = best.p.clone();
        let mut s = best.s.clone();
        let axis = axis % (2 * n);
        if axis < n { p[axis] += sign * 1e-3 } else { s[axis - n] += sign * 1e-3 }
        let moved = RecoveredFields { p, s, residual_norm: 0.0, degenerate: false };
        prop_assert!(system_residual(&jet, &moved, delta).unwrap().frobenius() >= base - 1e-12);
    }

    #[test]
    fn exact_systems_are_recovered(
        which in 0usize..3,
        vals in prop::collection::vec(-0.3f64..0.3, 16),
        fields in prop::collection::vec(-2.0f64..2.0, 8),
    ) {
        let delta = &deltas()[which];
        let n = delta.dim();
        let p = fields[..n].to_vec();
        let s = fields[4..4 + n].to_vec();
        let c = connection_coefficients(&p, &s, delta);
        let jac = DMatrix::from_fn(n, n, |i, k| vals[i * 4 + k] + if i == k { 1.0 } else { 0.0 });
        let jet = Jet2::from_fn(vec![0.0; n], vec![0.0; n], jac.clone(), |i, k, l| {
            (0..n).map(|m| c.get(m, k, l) * jac[(i, m)]).sum()
        });
        let got = recover_fields(&jet, delta).unwrap();
        prop_assert!(!got.degenerate);
        prop_assert!(got.residual_norm < 1e-10);
        for (a, b) in got.p.iter().chain(&got.s).zip(p.iter().chain(&s)) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn solutions_survive_similarities(
        a in 0.5f64..2.0,
        angle in 0.0f64..std::f64::consts::TAU,
        t in prop::collection::vec(-0.2f64..0.2, 2),
        outer in prop::collection::vec(-1.0f64..1.0, 4),
        x in prop::collection::vec(-0.3f64..0.3, 2),
    ) {
        let metric = MetricSpec::euclidean(2);
        let delta = delta_euclidean(&metric);
        let base = polyconf::conformal::mobius_like(1.0, 1.0, &metric).unwrap();
        let (c, d) = (a * angle.cos(), a * angle.sin());
        let inner = MapExpr::parse_components(&[
            &format!("({c:?}) * x1 - ({d:?}) * x2 + ({:?})", t[0]),
            &format!("({d:?}) * x1 + ({c:?}) * x2 + ({:?})", t[1]),
        ]).unwrap();
        let m = [outer[0] + 2.0, outer[1], outer[2], outer[3] + 2.0];
        let map = MapExpr::linear(2, &m).compose(&base.compose(&inner).unwrap()).unwrap();
        let jet = eval_jet2(&map, &x).unwrap();
        let f = recover_fields(&jet, &delta).unwrap();
        prop_assert!(f.residual_norm < 1e-9, "{}", f.residual_norm);
    }

    #[test]
    fn analytic_polynomials_are_closed(
        which in 0usize..4,
        cf in coeffs(4, 4),
        cg in coeffs(4, 3),
        x in prop::collection::vec(-0.8f64..0.8, 4),
    ) {
        let alg = &algebras()[which];
        let n = alg.dim();
        let f = poly(alg, &cf[..n * 4]);
        let g = poly(alg, &cg[..n * 3]);
        let x = &x[..n];
        let gamma = GammaField::zero(n);
        for h in [f.add(&g).unwrap(), f.mul(&g).unwrap(), f.compose(&g).unwrap()] {
            let jet = eval_jet2(&h, x).unwrap();
            let scale = 1.0 + jet.jac.amax();
            let r = cr_residual(&jet, &gamma, alg).unwrap().amax();
            prop_assert!(r < 1e-12 * scale, "{}", r);
        }
    }

    #[test]
    fn analytic_maps_satisfy_the_scalar_equation(
        which in 0usize..4,
        cf in coeffs(4, 6),
        x in prop::collection::vec(-0.8f64..0.8, 4),
    ) {
        let alg = &algebras()[which];
        let n = alg.dim();
        let f = poly(alg, &cf[..n * 6]);
        let eq = scalar_equation_check(&f, alg, &x[..n]).unwrap();
        let scale = 1.0 + eq.lhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(eq.defect() < 1e-12 * scale);
    }

    #[test]
    fn trace_is_the_contracted_residual(
        which in 0usize..3,
        vals in prop::collection::vec(-1.0f64..1.0, 80),
        w in prop::collection::vec(-1.0f64..1.0, 16),
    ) {
        let delta = &deltas()[which];
        let n = delta.dim();
        let jet = random_jet(n, &vals);
        let fields = recover_fields(&jet, delta).unwrap();
        let contraction = DMatrix::from_fn(n, n, |k, l| w[k.min(l) * 4 + k.max(l)]);
        let t = trace_residual(&jet, &fields, delta, &contraction).unwrap();
        let r = system_residual(&jet, &fields, delta).unwrap();
        for (i, ti) in t.iter().enumerate() {
            let direct: f64 = (0..n)
                .flat_map(|k| (0..n).map(move |l| (k, l)))
                .map(|(k, l)| contraction[(k, l)] * r.get(i, k, l))
                .sum();
            prop_assert!((ti - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn factor_product_is_constant(l in -5.0f64..5.0, l0 in 0.1f64..10.0, x0 in 0.1f64..10.0, m in 1u32..6) {
        let order = NonZeroU32::new(m).unwrap();
        let f = factor_conversions(l, l0, x0, 1.0, order, ExponentSign::Plus);
        prop_assert!((f.lambda_sq * f.xi / (l0 * x0) - 1.0).abs() < 1e-12);
        prop_assert!((f.lambda_lin.powi(m as i32) * l0 / f.lambda_sq - 1.0).abs() < 1e-10);
        let g = factor_conversions(l, l0, x0, 1.0, order, ExponentSign::Minus);
        prop_assert!((g.lambda_lin * f.lambda_lin - 1.0).abs() < 1e-12);
    }

    #[test]
    fn conformal_connection_is_symmetric(
        c in prop::collection::vec(-1.0f64..1.0, 3),
        x in prop::collection::vec(-1.0f64..1.0, 3),
    ) {
        let src = format!("exp(({:?}) * x1 + ({:?}) * x2 * x3) + ({:?})^2", c[0], c[1], c[2]);
        let lambda = ScalarExpr::parse(&src, 3).unwrap();
        for metric in [MetricSpec::euclidean(3), MetricSpec::minkowski(3)] {
            let gamma = christoffel_conformal(&metric, &lambda, &x).unwrap();
            prop_assert_eq!(gamma.lower_asymmetry(), 0.0);
        }
    }
}

#[test]
fn polynomial_maps_have_the_algebra_dimension() {
    for alg in algebras() {
        let p = PolyPolynomial::monomial(alg.clone(), 3);
        assert_eq!(p.dim(), alg.dim());
    }
}
