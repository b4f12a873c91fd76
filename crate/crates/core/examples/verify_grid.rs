//! Recovers the covector and gradient fields of the inversion-like map
//! x/(1 + |x|²) over a grid, then repeats the check for a map that is not a
//! solution.

use polyconf::conformal::{delta_euclidean, mobius_like, verify_on_grid, GridSpec, VerifyOptions};
use polyconf::expr::MapExpr;
use polyconf::geometry::MetricSpec;

fn main() {
    let metric = MetricSpec::euclidean(2);
    let delta = delta_euclidean(&metric);
    let grid = GridSpec::parse("[-0.4,0.4]^2@21").unwrap();
    let opts = VerifyOptions::default();

    let map = mobius_like(1.0, 1.0, &metric).unwrap();
    let r = verify_on_grid(&map, &delta, &grid, &opts).unwrap();
    println!(
        "mobius: max residual {:.2e}, rms {:.2e}, gradient defect {:.2e}",
        r.max_residual,
        r.rms_residual,
        r.gradient_defect.unwrap_or(f64::NAN)
    );
    let mid = &r.records[r.records.len() / 3];
    println!("  at {:?}: p = {:?}, s = {:?}", mid.point, mid.p, mid.s);

    let stretch = MapExpr::parse_components(&["x1^2", "x2"]).unwrap();
    let grid = GridSpec::parse("[0.5,1.5]^2@11").unwrap();
    let r = verify_on_grid(&stretch, &delta, &grid, &opts).unwrap();
    println!(
        "stretch: max residual {:.2e} (not a solution)",
        r.max_residual
    );
}
