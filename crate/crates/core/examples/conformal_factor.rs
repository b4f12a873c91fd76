//! Rebuilds L from its gradient and compares e^(κL) with (1 − |x|²)⁻².

use polyconf::conformal::{lambda_consistency, GridSpec, VerifyOptions};
use polyconf::geometry::MetricSpec;

fn main() {
    let grid = GridSpec::parse("[-0.4,0.4]^2@21").unwrap();
    let r = lambda_consistency(
        1.0,
        1.0,
        &MetricSpec::euclidean(2),
        &grid,
        &VerifyOptions::default(),
    )
    .unwrap();
    println!("points used:            {}", r.points);
    println!("spread with κ = 2:      {:.3e}", r.deviation);
    println!("spread with κ = 1:      {:.3e}", r.deviation_verbatim);
    println!("spread with wrong sign: {:.3e}", r.wrong_sign_deviation);
    if let Some(k) = r.fitted_exponent {
        println!("fitted exponent:        {k:.6}");
    }
}
