use nalgebra::DMatrix;
use polyconf::conformal::{
    compose_and_check, delta_euclidean, linear, mobius_like, GridSpec, VerifyOptions,
};
use polyconf::geometry::MetricSpec;

fn main() {
    let metric = MetricSpec::euclidean(2);
    let delta = delta_euclidean(&metric);
    let grid = GridSpec::parse("[-0.4,0.4]^2@11").unwrap();
    let opts = VerifyOptions::default();
    let mobius = mobius_like(1.0, 1.0, &metric).unwrap();
    let rot = linear(&DMatrix::from_row_slice(2, 2, &[2.0, -1.0, 1.0, 2.0])).unwrap();

    // Keeps the image inside the range of the mobius map.
    let small = linear(&DMatrix::from_row_slice(2, 2, &[0.4, -0.2, 0.2, 0.4])).unwrap();

    for (label, f, g) in [
        ("mobius⁻¹ ∘ mobius", &mobius, &mobius),
        ("linear⁻¹ ∘ mobius", &rot, &mobius),
        ("mobius⁻¹ ∘ small", &mobius, &small),
    ] {
        let r = compose_and_check(f, g, &delta, &grid, &opts).unwrap();
        println!(
            "{label:<20} defect {:.2e} ({} skipped)",
            r.max_residual,
            r.skipped.total()
        );
    }
}
