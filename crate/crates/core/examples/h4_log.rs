//! The logarithmic map over H4 in the idempotent basis.

use polyconf::algebra::AlgebraSpec;
use polyconf::analytic::{cr_residual, GammaField};
use polyconf::conformal::{
    delta_polynumber, h4_log, verify_on_grid, xi_consistency, GridSpec, VerifyOptions,
};
use polyconf::jets::eval_jet2;

fn main() {
    let alg = AlgebraSpec::h4_psi();
    let delta = delta_polynumber(&alg).unwrap();
    let grid = GridSpec::parse("[0.5,1.5]^4@7").unwrap();
    let opts = VerifyOptions::default();

    let map = h4_log(1.0, 1.0, [1.0; 4], [1.0; 4]).unwrap();
    let r = verify_on_grid(&map, &delta, &grid, &opts).unwrap();
    println!(
        "system residual over {} points: {:.2e}",
        r.records.len(),
        r.max_residual
    );

    // ξ0 = 1/2 keeps the denominator away from zero on this box.
    let shifted = h4_log(1.0, 1.0, [0.5; 4], [1.0; 4]).unwrap();
    let xi = xi_consistency(&shifted, &delta, &grid, &opts).unwrap();
    println!("spread of Ξ·ξ¹ξ²ξ³ξ⁴: {:.2e}", xi.deviation);

    let analytic = h4_log(1.0, 0.0, [1.0; 4], [1.0; 4]).unwrap();
    let jet = eval_jet2(&analytic, &[0.7, 1.1, 0.9, 1.3]).unwrap();
    let cr = cr_residual(&jet, &GammaField::zero(4), &alg).unwrap();
    println!("b = 0 is analytic: CR residual {:.2e}", cr.norm());
}
