//! Connection of a conformally scaled metric: closed form against central
//! differences of the full metric field.

use polyconf::expr::ScalarExpr;
use polyconf::geometry::{christoffel_conformal, christoffel_general, MetricSpec};

fn main() {
    let metric = MetricSpec::minkowski(3);
    let lambda = ScalarExpr::parse("exp(0.4 * x1 * x2 - x3^2 / 3) + 1 / (2 + x1^2)", 3).unwrap();
    for x in [[0.1, -0.2, 0.3], [0.8, 0.5, -0.9]] {
        let closed = christoffel_conformal(&metric, &lambda, &x).unwrap();
        let fd = christoffel_general(|y| metric.g() * lambda.value(y).unwrap(), &x, 1e-4).unwrap();
        println!(
            "x = {x:?}: max |Γ| {:.3}, max deviation {:.2e}",
            closed.max_abs(),
            closed.max_abs_diff(&fd)
        );
    }
}
