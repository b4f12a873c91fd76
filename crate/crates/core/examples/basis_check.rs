use polyconf::analytic::basis_equivalence_check;
use polyconf::expr::MapExpr;

fn main() {
    let map = MapExpr::parse_components(&[
        "x1^3 - x2 * x3",
        "x2^2 * x4",
        "x1 * x2 * x3 * x4",
        "exp(x1 - x4)",
    ])
    .unwrap();
    for x in [[0.1, 0.2, 0.3, 0.4], [-0.5, 0.25, 1.0, -0.75]] {
        let b = basis_equivalence_check(&map, &x).unwrap();
        println!("x = {x:?}");
        println!("  x-basis Laplacian     {:?}", b.lhs_x);
        println!(
            "  4 × ψ-basis Laplacian {:?}",
            b.lhs_psi.iter().map(|v| 4.0 * v).collect::<Vec<_>>()
        );
    }
}
